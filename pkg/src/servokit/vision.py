"""Grayscale conversion, Canny edges and extremal-intercept corner extraction.

Images are numpy ``uint8`` arrays, ``(H, W)`` for gray and ``(H, W, 3)``
for RGB. Pixel coordinates are ``(u, v)`` = (column, row).
"""

from __future__ import annotations

import math

import numpy as np
from scipy import ndimage

from .datapipe import reorder_canonical
from .errors import (AmbiguousOrderError, DegenerateQuadError, ImageFormatError, InvalidQuadError,
                     NoTargetError)

DEFAULT_SIGMA = 1.4
DEFAULT_LOW = 50.0
DEFAULT_HIGH = 100.0
DEFAULT_SLOPE = 1.0

_BT601 = np.array([0.299, 0.587, 0.114])


def to_grayscale(img: np.ndarray) -> np.ndarray:
    img = np.asarray(img)
    if img.ndim != 3 or img.shape[2] != 3:
        raise ImageFormatError(f"expected an RGB image, got shape {img.shape}")
    g = np.rint(img.astype(np.float64) @ _BT601)
    return np.clip(g, 0, 255).astype(np.uint8)


def gaussian_kernel(sigma: float) -> np.ndarray:
    r = max(1, math.ceil(3 * sigma))
    x = np.arange(-r, r + 1, dtype=np.float64)
    k = np.exp(-x * x / (2 * sigma * sigma))
    return k / k.sum()


def _correlate1d(a: np.ndarray, k: np.ndarray, axis: int) -> np.ndarray:
    r = len(k) // 2
    pad = [(0, 0), (0, 0)]
    pad[axis] = (r, r)
    p = np.pad(a, pad, mode="edge")
    n = a.shape[axis]
    out = np.zeros_like(a, dtype=np.float64)
    for i, w in enumerate(k):
        if w != 0:
            out += w * (p[i:i + n, :] if axis == 0 else p[:, i:i + n])
    return out


def gaussian_blur(img: np.ndarray, sigma: float) -> np.ndarray:
    k = gaussian_kernel(sigma)
    return _correlate1d(_correlate1d(np.asarray(img, dtype=np.float64), k, 0), k, 1)


def sobel(img: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """``(gx, gy)``; gx grows to the right, gy grows downward."""
    diff = np.array([-1.0, 0.0, 1.0])
    smooth = np.array([1.0, 2.0, 1.0])
    gx = _correlate1d(_correlate1d(img, smooth, 0), diff, 1)
    gy = _correlate1d(_correlate1d(img, diff, 0), smooth, 1)
    return gx, gy


# Neighbour offsets (dv, du) per quantised gradient direction: 0, 45, 90, 135 deg.
_NMS_OFFSETS = ((0, 1), (1, 1), (1, 0), (1, -1))


def quantize_direction(gx: np.ndarray, gy: np.ndarray) -> np.ndarray:
    ang = np.degrees(np.arctan2(gy, gx)) % 180.0
    return (np.floor((ang + 22.5) / 45.0).astype(np.int64)) % 4


def _shift(a: np.ndarray, dv: int, du: int) -> np.ndarray:
    """``out[v, u] = a[v + dv, u + du]``, zero outside."""
    out = np.zeros_like(a)
    h, w = a.shape
    out[max(0, -dv):h - max(0, dv), max(0, -du):w - max(0, du)] = \
        a[max(0, dv):h - max(0, -dv), max(0, du):w - max(0, -du)]
    return out


def non_max_suppression(mag: np.ndarray, bins: np.ndarray) -> np.ndarray:
    """Keep pixels that are local maxima across the edge.

    A pixel must be ``>=`` its forward neighbour and strictly ``>`` its
    backward neighbour, so a plateau two pixels wide yields one pixel.
    """
    keep = np.zeros(mag.shape, dtype=bool)
    for b, (dv, du) in enumerate(_NMS_OFFSETS):
        fwd = _shift(mag, dv, du)
        bwd = _shift(mag, -dv, -du)
        keep |= (bins == b) & (mag >= fwd) & (mag > bwd)
    return np.where(keep & (mag > 0), mag, 0.0)


def hysteresis(nms: np.ndarray, low: float, high: float) -> np.ndarray:
    weak = nms >= low
    strong = nms >= high
    labels, n = ndimage.label(weak, structure=np.ones((3, 3), dtype=bool))
    if n == 0:
        return np.zeros(nms.shape, dtype=bool)
    seeded = np.zeros(n + 1, dtype=bool)
    seeded[np.unique(labels[strong])] = True
    seeded[0] = False
    return seeded[labels]


def gradient_magnitude(gray: np.ndarray, sigma: float) -> tuple[np.ndarray, np.ndarray]:
    """Blurred Sobel magnitude rescaled so the image maximum is 255, and direction bins."""
    gx, gy = sobel(gaussian_blur(gray, sigma))
    mag = np.hypot(gx, gy)
    peak = mag.max()
    if peak > 0:
        mag = mag * (255.0 / peak)
    return mag, quantize_direction(gx, gy)


def canny(gray: np.ndarray, sigma: float = DEFAULT_SIGMA, low: float = DEFAULT_LOW,
          high: float = DEFAULT_HIGH) -> np.ndarray:
    """Boolean edge mask the size of ``gray``.

    Thresholds apply to the gradient magnitude rescaled to [0, 255] by the
    image's own maximum, so they are contrast-independent.
    """
    gray = np.asarray(gray)
    if gray.ndim != 2:
        raise ImageFormatError(f"canny needs a single-channel image, got shape {gray.shape}")
    if not (0 <= low <= high):
        raise ValueError(f"need 0 <= low <= high, got low={low}, high={high}")
    if not sigma > 0:
        raise ValueError("sigma must be > 0")
    mag, bins = gradient_magnitude(gray, sigma)
    return hysteresis(non_max_suppression(mag, bins), low, high)


def _pick_extreme(score: np.ndarray, u: np.ndarray, v: np.ndarray) -> int:
    """Index of the pixel maximising ``score``.

    Exact ties (a corner cut by a 45-degree staircase) are ordered by v then
    u and the middle one is taken, so the pick does not slide to one end of
    the run.
    """
    sel = np.flatnonzero(score >= score.max() - 1e-9)
    if len(sel) == 1:
        return int(sel[0])
    order = sel[np.lexsort((u[sel], v[sel]))]
    return int(order[(len(order) - 1) // 2])


def _support_points(u, v, directions) -> np.ndarray:
    idx = [_pick_extreme(np.round((u * dx + v * dy) * 1e9) / 1e9, u, v) for dx, dy in directions]
    return np.column_stack([u[idx], v[idx]])


def extract_quadrilateral(edges: np.ndarray, slope: float = DEFAULT_SLOPE, refine: bool = True) -> np.ndarray:
    """Corners (4, 2) of the quadrilateral outlined by ``edges``, order TL, TR, BR, BL.

    Each corner is the edge pixel with an extreme intercept against a
    family of parallel lines: ``v + m u`` (min: TL, max: BR) and ``v - m u``
    (min: TR, max: BL).

    With ``refine`` a second pass repeats the search per corner with the
    line family turned perpendicular to that corner's bisector (taken from
    the first pass). A single slope loses accuracy once the quad is rotated
    by more than a few degrees; the second pass keeps the result on an edge
    pixel.
    """
    vs, us = np.nonzero(np.asarray(edges))
    if len(us) == 0:
        raise NoTargetError("edge map is empty")
    u = us.astype(np.float64)
    v = vs.astype(np.float64)
    n = math.hypot(slope, 1.0)
    # Outward directions (du, dv) whose support points are TL, TR, BR, BL.
    dirs = [(-slope / n, -1 / n), (slope / n, -1 / n), (slope / n, 1 / n), (-slope / n, 1 / n)]
    pts = _support_points(u, v, dirs)
    check_nondegenerate(pts)
    try:
        quad = reorder_canonical(pts)
    except AmbiguousOrderError as exc:
        raise DegenerateQuadError(str(exc)) from exc
    if not refine:
        return quad
    bis = []
    for k in range(4):
        a = quad[(k - 1) % 4] - quad[k]
        b = quad[(k + 1) % 4] - quad[k]
        d = -(a / np.linalg.norm(a) + b / np.linalg.norm(b))
        norm = np.linalg.norm(d)
        if norm < 1e-9:
            raise DegenerateQuadError("corner with a straight angle")
        bis.append(d / norm)
    refined = _support_points(u, v, bis)
    check_nondegenerate(refined)
    try:
        return reorder_canonical(refined)
    except AmbiguousOrderError as exc:
        raise DegenerateQuadError(str(exc)) from exc


def check_nondegenerate(pts: np.ndarray, min_area: float = 1.0) -> None:
    if len({(float(a), float(b)) for a, b in pts}) < 4:
        raise DegenerateQuadError("extremal points coincide")
    for i in range(4):
        a, b, c = pts[i], pts[(i + 1) % 4], pts[(i + 2) % 4]
        if abs(_cross2(b - a, c - a)) < 1e-9:
            raise DegenerateQuadError("three extremal points are collinear")
    if polygon_area(pts) < min_area:
        raise DegenerateQuadError("quadrilateral area is too small")


def _cross2(a, b) -> float:
    return float(a[0] * b[1] - a[1] * b[0])


def polygon_area(pts) -> float:
    p = np.asarray(pts, dtype=np.float64)
    x, y = p[:, 0], p[:, 1]
    return 0.5 * abs(float(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1))))


def is_convex(pts) -> bool:
    p = np.asarray(pts, dtype=np.float64)
    n = len(p)
    crosses = [_cross2(p[(i + 1) % n] - p[i], p[(i + 2) % n] - p[(i + 1) % n]) for i in range(n)]
    return all(c > 0 for c in crosses) or all(c < 0 for c in crosses)


def render_quad(width: int, height: int, corners, fg: int = 200, bg: int = 50,
                noise_sigma: float = 0.0, shading: float = 0.0, rng=None) -> np.ndarray:
    """Gray image with a filled convex quadrilateral.

    Pixel ``(u, v)`` is foreground when its centre lies inside or on the
    polygon. ``shading`` adds a horizontal ramp of that many gray levels
    across the image; ``noise_sigma`` adds Gaussian noise (needs ``rng`` or
    uses a fixed seed).
    """
    c = np.asarray(corners, dtype=np.float64).reshape(4, 2)
    if fg == bg:
        raise InvalidQuadError("fg and bg must differ")
    if not is_convex(c):
        raise InvalidQuadError("corners do not form a convex quadrilateral")
    if (c[:, 0].min() < 0 or c[:, 1].min() < 0 or c[:, 0].max() > width - 1 or c[:, 1].max() > height - 1):
        raise InvalidQuadError("corners lie outside the image")
    sign = 1.0 if _cross2(c[1] - c[0], c[2] - c[1]) > 0 else -1.0
    uu, vv = np.meshgrid(np.arange(width, dtype=np.float64), np.arange(height, dtype=np.float64))
    inside = np.ones((height, width), dtype=bool)
    for i in range(4):
        a, b = c[i], c[(i + 1) % 4]
        cross = (b[0] - a[0]) * (vv - a[1]) - (b[1] - a[1]) * (uu - a[0])
        inside &= sign * cross >= -1e-9
    img = np.where(inside, float(fg), float(bg))
    if shading:
        img = img + shading * (uu / max(1, width - 1) - 0.5)
    if noise_sigma:
        rng = rng if rng is not None else np.random.default_rng(0)
        img = img + rng.normal(0.0, noise_sigma, img.shape)
    return np.clip(np.rint(img), 0, 255).astype(np.uint8)


def annotate(img: np.ndarray, sigma: float = DEFAULT_SIGMA, low: float = DEFAULT_LOW,
             high: float = DEFAULT_HIGH, slope: float = DEFAULT_SLOPE, refine: bool = True) -> np.ndarray:
    """Gray or RGB image -> canonical corner labels (4, 2) in pixels."""
    img = np.asarray(img)
    gray = to_grayscale(img) if img.ndim == 3 else img
    return extract_quadrilateral(canny(gray, sigma, low, high), slope, refine)


def random_quad(rng: np.random.Generator, width: int = 320, height: int = 240,
                max_rotation_deg: float = 30.0, jitter: float = 0.15) -> np.ndarray:
    """Random convex quadrilateral inside the image, canonical order.

    A jittered rectangle rotated by up to ``max_rotation_deg``; resampled
    until convex, in bounds (4 px margin) and unambiguous to order.
    """
    while True:
        hw = rng.uniform(0.15, 0.35) * width
        hh = rng.uniform(0.15, 0.35) * height
        base = np.array([[-hw, -hh], [hw, -hh], [hw, hh], [-hw, hh]])
        base += rng.uniform(-jitter, jitter, (4, 2)) * np.array([hw, hh])
        a = math.radians(rng.uniform(-max_rotation_deg, max_rotation_deg))
        R = np.array([[math.cos(a), -math.sin(a)], [math.sin(a), math.cos(a)]])
        center = np.array([rng.uniform(0.4, 0.6) * width, rng.uniform(0.4, 0.6) * height])
        pts = base @ R.T + center
        if not is_convex(pts):
            continue
        if pts[:, 0].min() < 4 or pts[:, 1].min() < 4 or pts[:, 0].max() > width - 5 or pts[:, 1].max() > height - 5:
            continue
        try:
            ordered = reorder_canonical(pts)
        except AmbiguousOrderError:
            continue
        if np.array_equal(ordered, pts):
            return pts
