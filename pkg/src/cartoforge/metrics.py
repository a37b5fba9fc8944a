"""Quantitative style evaluation: HSV color histograms and cosine similarity.

Images are compared by converting RGB pixels to HSV, binning each channel
into B bins, and taking the cosine of the resulting count vectors. The
default is a joint 3-D histogram (B^3 bins); a marginal variant (three
concatenated 1-D histograms, 3*B bins) is available for sensitivity checks.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass

import numpy as np

from .errors import BinMismatch, EmptyImage, ZeroHistogram
from .stylesheet import StyleSheet, normalize_color

JOINT = "joint"
MARGINAL = "marginal"


@dataclass(frozen=True)
class HsvColor:
    h: float  # degrees in [0, 360)
    s: float  # [0, 1]
    v: float  # [0, 1]


@dataclass(frozen=True)
class SimilarityScore:
    value: float
    bins_per_channel: int
    mode: str = JOINT


@dataclass(eq=False)
class ColorHistogram:
    """Binned HSV distribution of an image's opaque pixels."""

    bins_per_channel: int
    counts: np.ndarray  # int64, length B^3 (joint) or 3*B (marginal)
    total: int
    mode: str = JOINT

    def digest(self) -> str:
        meta = f"{self.mode}:{self.bins_per_channel}:".encode()
        return hashlib.sha256(meta + self.counts.tobytes()).hexdigest()


def _split_rgb(c) -> tuple[float, float, float]:
    if isinstance(c, str):
        s = normalize_color(c)
        return (int(s[1:3], 16) / 255.0, int(s[3:5], 16) / 255.0, int(s[5:7], 16) / 255.0)
    r, g, b = c
    return (r / 255.0, g / 255.0, b / 255.0)


def rgb_to_hsv(c) -> HsvColor:
    """Hexcone RGB->HSV for one color (hex string or 0-255 triple)."""
    r, g, b = _split_rgb(c)
    v = max(r, g, b)
    delta = v - min(r, g, b)
    s = 0.0 if v == 0 else delta / v
    if delta == 0:
        h = 0.0
    elif v == r:
        h = 60.0 * (((g - b) / delta) % 6.0)
    elif v == g:
        h = 60.0 * ((b - r) / delta + 2.0)
    else:
        h = 60.0 * ((r - g) / delta + 4.0)
    if h >= 360.0:
        h -= 360.0
    return HsvColor(h, s, v)


def hsv_to_rgb(color: HsvColor) -> tuple[int, int, int]:
    """Inverse hexcone conversion; verification helper."""
    c = color.v * color.s
    x = c * (1 - abs((color.h / 60.0) % 2 - 1))
    m = color.v - c
    sector = int(color.h // 60) % 6
    r, g, b = [(c, x, 0), (x, c, 0), (0, c, x), (0, x, c), (x, 0, c), (c, 0, x)][sector]
    return (round((r + m) * 255), round((g + m) * 255), round((b + m) * 255))


def _rgb_to_hsv_array(rgb: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Vectorized hexcone conversion; rgb is float64 in [0,1], shape (N, 3)."""
    r, g, b = rgb[:, 0], rgb[:, 1], rgb[:, 2]
    v = np.max(rgb, axis=1)
    delta = v - np.min(rgb, axis=1)
    s = np.divide(delta, v, out=np.zeros_like(v), where=v > 0)

    h = np.zeros_like(v)
    nz = delta > 0
    rmax = nz & (v == r)
    gmax = nz & ~rmax & (v == g)
    bmax = nz & ~rmax & ~gmax
    h[rmax] = 60.0 * (((g[rmax] - b[rmax]) / delta[rmax]) % 6.0)
    h[gmax] = 60.0 * ((b[gmax] - r[gmax]) / delta[gmax] + 2.0)
    h[bmax] = 60.0 * ((r[bmax] - g[bmax]) / delta[bmax] + 4.0)
    h[h >= 360.0] -= 360.0
    return h, s, v


def _as_pixel_array(image) -> np.ndarray:
    """Coerce a PIL image or numpy array to uint8 RGBA pixels, shape (N, 4)."""
    if hasattr(image, "convert"):  # PIL image
        arr = np.asarray(image.convert("RGBA"), dtype=np.uint8)
    else:
        arr = np.asarray(image)
        if arr.dtype != np.uint8:
            raise TypeError("expected uint8 pixel data")
    if arr.ndim == 3 and arr.shape[2] == 3:
        alpha = np.full(arr.shape[:2] + (1,), 255, dtype=np.uint8)
        arr = np.concatenate([arr, alpha], axis=2)
    if arr.ndim != 3 or arr.shape[2] != 4:
        raise TypeError(f"expected RGB(A) pixels, got shape {arr.shape}")
    return arr.reshape(-1, 4)


def histogram(image, bins_per_channel: int, mode: str = JOINT) -> ColorHistogram:
    """Bin an image's opaque pixels into an HSV histogram.

    Bin indices clamp the upper channel edge (s=1, v=1, h->360) into the
    last bin. Fully transparent pixels are excluded.
    """
    if bins_per_channel < 2:
        raise ValueError("bins_per_channel must be >= 2")
    if mode not in (JOINT, MARGINAL):
        raise ValueError(f"unknown histogram mode {mode!r}")
    pixels = _as_pixel_array(image)
    pixels = pixels[pixels[:, 3] > 0]
    if pixels.shape[0] == 0:
        raise EmptyImage("image has no opaque pixels")

    h, s, v = _rgb_to_hsv_array(pixels[:, :3].astype(np.float64) / 255.0)
    B = bins_per_channel
    h_bin = np.minimum((h / 360.0 * B).astype(np.int64), B - 1)
    s_bin = np.minimum((s * B).astype(np.int64), B - 1)
    v_bin = np.minimum((v * B).astype(np.int64), B - 1)

    if mode == JOINT:
        index = (h_bin * B + s_bin) * B + v_bin
        counts = np.bincount(index, minlength=B * B * B).astype(np.int64)
    else:
        counts = np.concatenate(
            [
                np.bincount(h_bin, minlength=B),
                np.bincount(s_bin, minlength=B),
                np.bincount(v_bin, minlength=B),
            ]
        ).astype(np.int64)
    return ColorHistogram(B, counts, int(pixels.shape[0]), mode)


def cosine_similarity(a: ColorHistogram, b: ColorHistogram) -> SimilarityScore:
    """Cosine of the two count vectors; in [0, 1] since counts are non-negative."""
    if a.bins_per_channel != b.bins_per_channel or a.mode != b.mode:
        raise BinMismatch(
            f"histograms disagree: {a.mode}/B={a.bins_per_channel} vs {b.mode}/B={b.bins_per_channel}"
        )
    if a.total <= 0 or b.total <= 0:
        raise ZeroHistogram("cannot compare an empty histogram")
    x = a.counts.astype(np.float64)
    y = b.counts.astype(np.float64)
    value = float(np.dot(x, y) / (np.linalg.norm(x) * np.linalg.norm(y)))
    return SimilarityScore(min(max(value, 0.0), 1.0), a.bins_per_channel, a.mode)


# --- distinctness lints -------------------------------------------------------

# Normalized HSV cone: points (s*v*cos h, s*v*sin h, v); diameter 2.
_CONE_DIAMETER = 2.0


def cone_distance(a: str, b: str) -> float:
    """Distance between two hex colors in the normalized HSV cone, in [0, 1]."""

    def point(color: str) -> tuple[float, float, float]:
        hsv = rgb_to_hsv(color)
        rad = math.radians(hsv.h)
        return (hsv.s * hsv.v * math.cos(rad), hsv.s * hsv.v * math.sin(rad), hsv.v)

    pa, pb = point(a), point(b)
    return math.dist(pa, pb) / _CONE_DIAMETER


def _relative_luminance(color: str) -> float:
    def channel(u: float) -> float:
        return u / 12.92 if u <= 0.04045 else ((u + 0.055) / 1.055) ** 2.4

    r, g, b = _split_rgb(color)
    return 0.2126 * channel(r) + 0.7152 * channel(g) + 0.0722 * channel(b)


def contrast_ratio(a: str, b: str) -> float:
    la, lb = _relative_luminance(a), _relative_luminance(b)
    hi, lo = max(la, lb), min(la, lb)
    return (hi + 0.05) / (lo + 0.05)


@dataclass(frozen=True)
class LintWarning:
    code: str
    message: str

    def to_dict(self) -> dict:
        return {"code": self.code, "message": self.message}


def distinctness_lint(
    sheet: StyleSheet, tau: float = 0.08, min_contrast: float = 1.5
) -> list[LintWarning]:
    """Warn about figure-ground failures.

    Flags any pair among {background color, fill colors} closer than ``tau``
    in the normalized HSV cone, and any label whose text/halo contrast ratio
    falls below ``min_contrast``. ``tau=0`` silences all distance warnings.
    """
    warnings: list[LintWarning] = []
    swatches = [("background", sheet.background.background_color)]
    swatches += [(f"fill {name!r}", style.fill_color) for name, style in sheet.fills.items()]
    for i in range(len(swatches)):
        for j in range(i + 1, len(swatches)):
            (name_a, color_a), (name_b, color_b) = swatches[i], swatches[j]
            d = cone_distance(color_a, color_b)
            if d < tau:
                warnings.append(
                    LintWarning(
                        "indistinct-colors",
                        f"{name_a} ({color_a}) and {name_b} ({color_b}) are nearly "
                        f"identical (cone distance {d:.4f} < {tau})",
                    )
                )
    for name, label in sheet.labels.items():
        ratio = contrast_ratio(label.text_color, label.text_halo_color)
        if ratio < min_contrast:
            warnings.append(
                LintWarning(
                    "low-label-contrast",
                    f"label {name!r} text {label.text_color} on halo {label.text_halo_color} "
                    f"has contrast ratio {ratio:.2f} < {min_contrast}",
                )
            )
    return warnings
