"""Synthetic grayscale scenes and the template-correlation detectors.

A scene is a 96x96 frame containing background texture and optionally a
parameterized figure (a person, facing or not, or a rodent for
calibration-transfer experiments).  Apparent figure height scales as
1/distance; contrast scales with log illuminance; pixel noise is
Gaussian and seeded.

Detection is maximum normalized cross-correlation of the frame against
a figure template over a coarse scale/translation grid.  NCC is
invariant to global gain, so illuminance affects detectability only
through the noise-to-contrast ratio.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

FRAME_SIZE = 96
FIGURE_BASE_HEIGHT_PX = 50  # apparent height at 1 m
MIN_FIGURE_HEIGHT_PX = 6
MAX_FIGURE_HEIGHT_PX = 88
CONTRAST_FULL_SCALE = 150.0  # intensity delta at the lux ceiling
LUX_CEILING = 2000.0

FIGURES = ("person", "rodent")


@dataclass
class Frame:
    pixels: np.ndarray  # row-major 8-bit grayscale

    def __post_init__(self) -> None:
        self.pixels = np.asarray(self.pixels)
        if self.pixels.ndim != 2:
            raise ValueError("pixels must be a 2-D array")
        if self.pixels.shape[0] < 16 or self.pixels.shape[1] < 16:
            raise ValueError("frame dimensions must be >= 16")

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def width(self) -> int:
        return self.pixels.shape[1]


@dataclass
class SceneParams:
    person_present: bool
    facing_camera: bool = False
    distance_m: float = 1.0
    illuminance_lux: float = 500.0
    noise_sigma: float = 4.0
    seed: int = 0
    figure: str = "person"

    def __post_init__(self) -> None:
        if not (0.25 <= self.distance_m <= 10.0):
            raise ValueError("distance_m must be in [0.25, 10]")
        if not (1.0 <= self.illuminance_lux <= 2000.0):
            raise ValueError("illuminance_lux must be in [1, 2000]")
        if self.noise_sigma < 0:
            raise ValueError("noise_sigma must be >= 0")
        if self.facing_camera and not self.person_present:
            raise ValueError("facing_camera implies person_present")
        if self.figure not in FIGURES:
            raise ValueError(f"figure must be one of {FIGURES}")


@dataclass
class Detection:
    present: bool
    score: float


def _contrast(lux: float) -> float:
    return float(np.log10(max(lux, 1.0)) / np.log10(LUX_CEILING))


def _smooth_field(rng: np.random.Generator, n: int, coarse: int = 6) -> np.ndarray:
    """Bilinearly upsampled coarse Gaussian grid: smooth, featureless texture."""
    g = rng.normal(0.0, 1.0, (coarse, coarse))
    xs = np.linspace(0.0, coarse - 1.0, n)
    i0 = np.floor(xs).astype(int)
    i1 = np.minimum(i0 + 1, coarse - 1)
    w = xs - i0
    cols = g[:, i0] * (1.0 - w) + g[:, i1] * w  # (coarse, n)
    rows = cols[i0, :] * (1.0 - w)[:, None] + cols[i1, :] * w[:, None]
    return rows


def figure_height_px(distance_m: float) -> int:
    return int(np.clip(round(FIGURE_BASE_HEIGHT_PX / distance_m),
                       MIN_FIGURE_HEIGHT_PX, MAX_FIGURE_HEIGHT_PX))


def _draw_person(img: np.ndarray, cx: int, top: int, h: int,
                 facing: bool, level: float) -> None:
    """Head + shoulders + torso silhouette of total height h."""
    hh, ww = img.shape
    r = max(1, round(h * 0.14))
    head_cy = top + r
    torso_top = top + 2 * r
    torso_w = max(2, round(h * 0.36))
    yy, xx = np.ogrid[:hh, :ww]
    # torso: tapered block (shoulders wider than hips)
    for y in range(torso_top, min(top + h, hh)):
        frac = (y - torso_top) / max(1, (top + h - torso_top))
        half = max(1, round(torso_w * (1.0 - 0.25 * frac) / 2))
        x0, x1 = max(0, cx - half), min(ww, cx + half + 1)
        img[y, x0:x1] = level
    # head disc
    head = (yy - head_cy) ** 2 + (xx - cx) ** 2 <= r * r
    if facing:
        img[head] = level
        # facial features: dark eyes and mouth
        er = max(1, r // 4)
        for ex in (cx - max(1, round(r * 0.45)), cx + max(1, round(r * 0.45))):
            eye = (yy - (head_cy - max(1, round(r * 0.25)))) ** 2 + (xx - ex) ** 2 <= er * er
            img[eye] = level * 0.25
        my = head_cy + max(1, round(r * 0.4))
        mh = max(1, round(r * 0.5))
        img[my : my + max(1, er), cx - mh : cx + mh + 1] = level * 0.25
    else:
        # back of the head: uniformly dark hair
        img[head] = level * 0.35


def _draw_rodent(img: np.ndarray, cx: int, top: int, h: int, level: float) -> None:
    """Low, wide body with a tail: deliberately unlike the person shape."""
    hh, ww = img.shape
    yy, xx = np.ogrid[:hh, :ww]
    cy = top + h - max(2, round(h * 0.25))
    a = max(2, round(h * 0.65))  # semi-axis along x
    b = max(1, round(h * 0.25))  # semi-axis along y
    body = ((xx - cx) / a) ** 2 + ((yy - cy) / b) ** 2 <= 1.0
    img[body] = level
    # head bump at the right end
    hr = max(1, round(h * 0.18))
    head = (xx - (cx + a)) ** 2 + (yy - (cy - b // 2)) ** 2 <= hr * hr
    img[head] = level
    # tail: thin line to the left
    ty = min(hh - 1, cy + b // 2)
    x0 = max(0, cx - a - round(h * 0.8))
    img[ty, x0 : max(0, cx - a)] = level


def render_scene(p: SceneParams) -> Frame:
    """Deterministic scene synthesis; the simulated calibrated monitor."""
    rng = np.random.default_rng(p.seed)
    n = FRAME_SIZE
    # smooth background texture: coarse seeded grid upsampled to full size
    img = 24.0 + 6.0 * _smooth_field(rng, n)
    jitter = rng.integers(-4, 5, size=2)
    contrast = _contrast(p.illuminance_lux)
    level = 24.0 + CONTRAST_FULL_SCALE * contrast
    # person_present doubles as "figure present" for non-person figures
    if p.person_present:
        h = figure_height_px(p.distance_m)
        cx = n // 2 + int(jitter[0])
        top = (n - h) // 2 + int(jitter[1])
        if p.figure == "person":
            _draw_person(img, cx, top, h, p.facing_camera, level)
        else:
            _draw_rodent(img, cx, top, h, level)
    if p.noise_sigma > 0:
        img = img + rng.normal(0.0, p.noise_sigma, (n, n))
    return Frame(np.clip(img, 0, 255).astype(np.uint8))


# -- templates --------------------------------------------------------------


@lru_cache(maxsize=256)
def _figure_template(figure: str, h: int, facing: bool, head_only: bool) -> np.ndarray:
    """Clean figure rendering cropped to its bounding box, as float64."""
    pad = 4
    canvas = np.zeros((h + 2 * pad, h + 2 * pad), dtype=np.float64)
    cx = canvas.shape[1] // 2
    if figure == "person":
        _draw_person(canvas, cx, pad, h, facing, 200.0)
        if head_only:
            r = max(1, round(h * 0.14))
            canvas = canvas[: pad + 2 * r + 2, :]
    else:
        _draw_rodent(canvas, cx, pad, h, 200.0)
    ys, xs = np.nonzero(canvas)
    y0, y1 = ys.min(), ys.max() + 1
    x0, x1 = xs.min(), xs.max() + 1
    m = 1  # thin margin of background around the figure
    y0, x0 = max(0, y0 - m), max(0, x0 - m)
    y1 = min(canvas.shape[0], y1 + m)
    x1 = min(canvas.shape[1], x1 + m)
    return np.ascontiguousarray(canvas[y0:y1, x0:x1])


_TEMPLATE_FFT_CACHE: dict[tuple, np.ndarray] = {}


def _template_fft(tz: np.ndarray, shape: tuple[int, int]) -> np.ndarray:
    key = (tz.shape, hash(tz.tobytes()), shape)
    out = _TEMPLATE_FFT_CACHE.get(key)
    if out is None:
        padded = np.zeros(shape)
        padded[: tz.shape[0], : tz.shape[1]] = tz
        out = np.conj(np.fft.rfft2(padded))
        _TEMPLATE_FFT_CACHE[key] = out
    return out


def match_score(
    pixels: np.ndarray,
    template: np.ndarray,
    img_fft: np.ndarray | None = None,
    window_sums: tuple[np.ndarray, np.ndarray] | None = None,
) -> float:
    """Max normalized cross-correlation of template over the image at
    every translation, clipped to [0, 1].  Invariant to global positive
    gain on the image.

    The numerator is computed by FFT cross-correlation (template spectra
    cached); window mean/variance come from integral images.  The
    optional precomputed ``img_fft``/``window_sums`` let a caller share
    per-frame work across template scales.
    """
    img = np.asarray(pixels, dtype=np.float64)
    th, tw = template.shape
    hh, ww = img.shape
    if th > hh or tw > ww:
        return 0.0
    tz = np.ascontiguousarray(template - template.mean())
    tn = float(np.sqrt((tz * tz).sum()))
    if tn == 0.0:
        return 0.0
    if img_fft is None:
        img_fft = np.fft.rfft2(img)
    if window_sums is None:
        window_sums = integral_images(img)
    corr = np.fft.irfft2(img_fft * _template_fft(tz, (hh, ww)), s=(hh, ww))
    num = corr[: hh - th + 1, : ww - tw + 1]
    s_int, q_int = window_sums
    wsum = _window_sum(s_int, th, tw)
    wsq = _window_sum(q_int, th, tw)
    var = wsq - wsum * wsum / (th * tw)
    denom = np.sqrt(np.maximum(var, 0.0)) * tn
    with np.errstate(divide="ignore", invalid="ignore"):
        ncc = np.where(denom > 1e-9, num / denom, 0.0)
    return float(np.clip(ncc.max(initial=0.0), 0.0, 1.0))


def integral_images(img: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Zero-padded cumulative sums of img and img**2."""
    s = np.zeros((img.shape[0] + 1, img.shape[1] + 1))
    q = np.zeros_like(s)
    np.cumsum(np.cumsum(img, axis=0), axis=1, out=s[1:, 1:])
    np.cumsum(np.cumsum(img * img, axis=0), axis=1, out=q[1:, 1:])
    return s, q


def _window_sum(integral: np.ndarray, th: int, tw: int) -> np.ndarray:
    return (
        integral[th:, tw:]
        - integral[:-th, tw:]
        - integral[th:, :-tw]
        + integral[:-th, :-tw]
    )


DEFAULT_SCALE_HEIGHTS = (50, 34, 25, 17, 12, 10, 8)


@dataclass
class PersonParams:
    threshold: float = 0.8
    figure: str = "person"
    scale_heights: tuple[int, ...] = DEFAULT_SCALE_HEIGHTS


@dataclass
class GazeParams:
    threshold: float = 0.8
    scale_heights: tuple[int, ...] = (50, 34, 25)


def _multi_scale_score(frame: Frame, templates: list[np.ndarray]) -> float:
    img = np.asarray(frame.pixels, dtype=np.float64)
    img_fft = np.fft.rfft2(img)
    sums = integral_images(img)
    return max(match_score(img, tpl, img_fft, sums) for tpl in templates)


def detect_person(frame: Frame, params: PersonParams | None = None) -> Detection:
    """Whole-figure template match; fires on any person, facing or not."""
    params = params or PersonParams()
    templates = [
        _figure_template(params.figure, h, facing=False, head_only=False)
        for h in params.scale_heights
    ]
    best = _multi_scale_score(frame, templates)
    return Detection(present=best >= params.threshold, score=best)


def detect_gaze(frame: Frame, params: GazeParams | None = None) -> Detection:
    """Facing-head template match; fires only on a camera-facing person."""
    params = params or GazeParams()
    templates = [
        _figure_template("person", h, facing=True, head_only=True)
        for h in params.scale_heights
    ]
    best = _multi_scale_score(frame, templates)
    return Detection(present=best >= params.threshold, score=best)
