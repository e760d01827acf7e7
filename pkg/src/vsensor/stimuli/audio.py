"""Synthetic audio-feature streams and the matched-filter keyword core.

Audio never appears as waveforms: a FeatureWindow is a sequence of
13-dimensional feature vectors on a 20 ms hop.  Each vocabulary word has
a deterministic unit-norm signature; the generator embeds a signature
under a raised-cosine envelope plus noise, and the detector is a
per-template cosine matched filter with a threshold and a refractory.

The distractor "often" is constructed as a deliberate near-match for
"off" so that false-positive behavior is exercisable.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass

import numpy as np

FEATURE_DIM = 13
HOP_MS = 20
WORD_FRAMES = 10  # every word occupies 10 frames (200 ms)
NOISE_SIGMA = 0.08
MATCH_THRESHOLD = 0.82
ENERGY_FLOOR = 0.5  # frames below this norm are noise, never matched
REFRACTORY_MS = 200
CONFUSABLE = {"often": ("off", 0.88)}  # distractor -> (target, cosine)


@dataclass
class FeatureWindow:
    frames: np.ndarray  # (n, 13)
    hop_ms: int = HOP_MS

    def __post_init__(self) -> None:
        self.frames = np.asarray(self.frames, dtype=np.float64)
        if self.frames.ndim != 2 or self.frames.shape[1] != FEATURE_DIM:
            raise ValueError(f"frames must be (n, {FEATURE_DIM})")
        if not np.isfinite(self.frames).all():
            raise ValueError("feature values must be finite")

    @property
    def duration_ms(self) -> int:
        return self.frames.shape[0] * self.hop_ms


@dataclass
class KeywordEvent:
    word: str
    at_ms: int  # estimated word onset, window-relative
    score: float


def _seeded_unit_vector(tag: str) -> np.ndarray:
    digest = hashlib.sha256(tag.encode()).digest()
    rng = np.random.default_rng(int.from_bytes(digest[:8], "little"))
    v = rng.normal(0.0, 1.0, FEATURE_DIM)
    return v / np.linalg.norm(v)


def word_signature(word: str) -> np.ndarray:
    """Deterministic unit-norm feature signature for a word."""
    if word in CONFUSABLE:
        target, cos = CONFUSABLE[word]
        base = word_signature(target)
        raw = _seeded_unit_vector("word:" + word)
        orth = raw - base * (raw @ base)
        orth /= np.linalg.norm(orth)
        return cos * base + np.sqrt(1.0 - cos * cos) * orth
    return _seeded_unit_vector("word:" + word)


def keyword_templates(vocabulary: list[str]) -> dict[str, np.ndarray]:
    return {w: word_signature(w) for w in vocabulary}


def synth_audio(
    script: list[tuple[str, int]],
    vocabulary: list[str],
    seed: int,
    duration_ms: int | None = None,
    noise_sigma: float = NOISE_SIGMA,
) -> FeatureWindow:
    """Embed per-word signatures at the scripted start times, plus noise.

    Script words may be vocabulary words or distractor ids (anything with
    a signature, e.g. "often").
    """
    known = set(vocabulary) | set(CONFUSABLE)
    for word, _ in script:
        if word not in known:
            raise ValueError(f"script word {word!r} not in vocabulary or distractors")
    if duration_ms is None:
        last = max((t for _, t in script), default=0)
        duration_ms = last + WORD_FRAMES * HOP_MS + 200
    n = duration_ms // HOP_MS
    rng = np.random.default_rng(seed)
    frames = rng.normal(0.0, noise_sigma, (n, FEATURE_DIM))
    envelope = np.sin(np.pi * (np.arange(WORD_FRAMES) + 0.5) / WORD_FRAMES)
    for word, start_ms in script:
        i0 = start_ms // HOP_MS
        sig = word_signature(word)
        for k in range(WORD_FRAMES):
            if i0 + k < n:
                frames[i0 + k] += envelope[k] * sig
    return FeatureWindow(frames)


def detect_keywords(
    window: FeatureWindow,
    templates: dict[str, np.ndarray],
    threshold: float = MATCH_THRESHOLD,
) -> list[KeywordEvent]:
    """All matched-filter detections, time-ordered, with refractory.

    Per frame the best-scoring template is considered; frames below the
    energy floor never match.  A detection is the strongest frame within
    one refractory horizon of the first above-threshold frame; the onset
    estimate is the centroid of the (non-negative) template projection
    around that peak, shifted back by half a word — the projection traces
    the symmetric word envelope, so its centroid sits at the word center.
    """
    if not templates:
        return []
    words = sorted(templates)
    mat = np.stack([templates[w] / np.linalg.norm(templates[w]) for w in words])
    norms = np.linalg.norm(window.frames, axis=1)
    with np.errstate(divide="ignore", invalid="ignore"):
        cos = np.where(
            norms[:, None] >= ENERGY_FLOOR,
            (window.frames @ mat.T) / norms[:, None],
            0.0,
        )
    best = cos.max(axis=1)
    which = cos.argmax(axis=1)
    refractory = max(1, REFRACTORY_MS // window.hop_ms)
    out: list[KeywordEvent] = []
    last = -refractory
    n = len(best)
    for i in range(n):
        if best[i] < threshold or i - last < refractory:
            continue
        j = i + int(np.argmax(best[i : i + refractory]))
        k0, k1 = max(0, j - WORD_FRAMES), min(n, j + WORD_FRAMES)
        proj = np.maximum(window.frames[k0:k1] @ mat[which[j]], 0.0)
        center = float((np.arange(k0, k1) * proj).sum() / proj.sum())
        onset = max(0, round((center - (WORD_FRAMES - 1) / 2) * window.hop_ms))
        out.append(KeywordEvent(words[which[j]], onset, float(best[j])))
        last = j
    return out


def detect_keyword(
    window: FeatureWindow,
    templates: dict[str, np.ndarray],
    threshold: float = MATCH_THRESHOLD,
) -> KeywordEvent | None:
    """First detection in the window, or None."""
    events = detect_keywords(window, templates, threshold)
    return events[0] if events else None
