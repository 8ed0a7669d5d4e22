"""Polygons, binary masks, and star-convex radial contours.

Masks are 2D numpy arrays of shape (height, width) with values 0/1
(dtype uint8). Coordinates are sub-pixel: pixel (px, py) owns the
point (px + 0.5, py + 0.5), which removes boundary ambiguity from all
membership tests. Angles are measured from the +x axis increasing
toward +y; with image rows growing downward that is clockwise on
screen.
"""

import struct
import warnings

from dataclasses import dataclass, field

import numpy as np

# Radius assigned to angular bins that contain no pixels, and the floor
# applied to decoded radii. Keeps downstream log/division safe.
RADIUS_EPS = 1e-6

MASK_MAGIC = b"ECMK"


@dataclass
class StarContour:
    """A center point plus radial distances sampled at uniform angles.

    The angle of sample i is implicit: 2*pi*i/n for n = len(radii).
    Radii are in pixels, non-negative and finite.
    """

    center: tuple
    radii: np.ndarray = field(repr=False)

    def __post_init__(self):
        cx, cy = self.center
        if not (np.isfinite(cx) and np.isfinite(cy)):
            raise ValueError("contour center must be finite")
        self.center = (float(cx), float(cy))
        radii = np.asarray(self.radii, dtype=np.float64)
        if radii.ndim != 1 or radii.size < 3:
            raise ValueError("contour needs at least 3 radii")
        if not np.all(np.isfinite(radii)):
            raise ValueError("contour radii must be finite")
        if np.any(radii < 0):
            raise ValueError("contour radii must be non-negative")
        self.radii = radii

    @property
    def n(self):
        return self.radii.size


def _check_polygon(poly):
    poly = np.asarray(poly, dtype=np.float64)
    if poly.ndim != 2 or poly.shape[1] != 2 or poly.shape[0] < 3:
        raise ValueError("polygon must be an (n, 2) array with n >= 3")
    if not np.all(np.isfinite(poly)):
        raise ValueError("polygon coordinates must be finite")
    return poly


def _is_degenerate(poly):
    # All vertices collinear (or coincident): zero enclosed area under
    # any fill rule. Exact test; nearly-degenerate rings just rasterize.
    d = poly - poly[0]
    nz = np.nonzero((d[:, 0] != 0) | (d[:, 1] != 0))[0]
    if nz.size == 0:
        return True
    ref = d[nz[0]]
    cross = d[:, 0] * ref[1] - d[:, 1] * ref[0]
    return bool(np.all(cross == 0))


def polygon_to_mask(poly, width, height):
    """Rasterize a polygon: pixel is set iff its center is inside.

    Containment uses the nonzero winding rule, so self-touching or
    self-intersecting rings fill robustly. Pixels outside the grid are
    clipped. A degenerate (zero-area) polygon yields an empty mask and
    a warning rather than an error.
    """
    poly = _check_polygon(poly)
    width = int(width)
    height = int(height)
    if width < 1 or height < 1:
        raise ValueError("mask dimensions must be >= 1")
    mask = np.zeros((height, width), dtype=np.uint8)
    if _is_degenerate(poly):
        warnings.warn("degenerate polygon rasterizes to an empty mask")
        return mask

    # Restrict work to the pixel rows/columns the polygon can touch.
    x0 = max(int(np.floor(poly[:, 0].min() - 0.5)), 0)
    x1 = min(int(np.ceil(poly[:, 0].max() - 0.5)) + 1, width)
    y0 = max(int(np.floor(poly[:, 1].min() - 0.5)), 0)
    y1 = min(int(np.ceil(poly[:, 1].max() - 0.5)) + 1, height)
    if x0 >= x1 or y0 >= y1:
        return mask

    # Scanline winding fill. A pixel center accumulates +1 for every
    # upward edge crossing its row strictly to its right and -1 for
    # every downward one; it is inside iff the total is nonzero. This
    # is the per-pixel winding test reorganized row by row.
    xa, ya = poly[:, 0], poly[:, 1]
    xb, yb = np.roll(xa, -1), np.roll(ya, -1)
    xs = np.arange(x0, x1) + 0.5
    for iy in range(y0, y1):
        py = iy + 0.5
        up = (ya <= py) & (yb > py)
        down = (ya > py) & (yb <= py)
        hit = up | down
        if not hit.any():
            continue
        t = (py - ya[hit]) / (yb[hit] - ya[hit])
        xi = xa[hit] + t * (xb[hit] - xa[hit])
        sign = np.where(up[hit], 1, -1)
        order = np.argsort(xi, kind="stable")
        xi = xi[order]
        suffix = np.append(np.cumsum(sign[order][::-1])[::-1], 0)
        wind = suffix[np.searchsorted(xi, xs, side="right")]
        mask[iy, x0:x1] = wind != 0
    return mask


def compute_center(mask):
    """Centroid of the set pixel centers as (x, y)."""
    ys, xs = np.nonzero(mask)
    if xs.size == 0:
        raise ValueError("empty instance")
    return (float(xs.mean()) + 0.5, float(ys.mean()) + 0.5)


def extract_star_contour(mask, center, n):
    """Sample a star-convex contour from a mask around a center point.

    The circle is split into n half-open bins of width 2*pi/n centered
    on the sample angles; each radius is the largest center-to-pixel
    distance among set pixels falling in that bin. Bins with no pixels
    get RADIUS_EPS.
    """
    n = int(n)
    if n < 3:
        raise ValueError("need at least 3 angular samples")
    cx, cy = center
    if not (np.isfinite(cx) and np.isfinite(cy)):
        raise ValueError("contour center must be finite")
    ys, xs = np.nonzero(mask)
    if xs.size == 0:
        raise ValueError("empty instance")
    dx = xs + 0.5 - cx
    dy = ys + 0.5 - cy
    dist = np.hypot(dx, dy)
    ang = np.arctan2(dy, dx)
    step = 2.0 * np.pi / n
    bins = np.floor((ang + 0.5 * step) / step).astype(np.int64) % n
    radii = np.full(n, -np.inf)
    np.maximum.at(radii, bins, dist)
    radii[~np.isfinite(radii)] = RADIUS_EPS
    return StarContour((cx, cy), radii)


def contour_points(contour):
    """Vertices of the polygon a contour describes, radii clamped at 0."""
    r = np.maximum(contour.radii, 0.0)
    theta = 2.0 * np.pi * np.arange(contour.n) / contour.n
    cx, cy = contour.center
    return np.stack([cx + r * np.cos(theta), cy + r * np.sin(theta)], axis=1)


def rasterize_contour(contour, width, height):
    """Convert a star contour to the mask of its n-gon."""
    return polygon_to_mask(contour_points(contour), width, height)


def mask_iou(a, b):
    """Intersection over union of two equally sized masks; 0 when both empty."""
    a = np.asarray(a)
    b = np.asarray(b)
    if a.shape != b.shape:
        raise ValueError(f"mask shapes differ: {a.shape} vs {b.shape}")
    a = a != 0
    b = b != 0
    union = np.logical_or(a, b).sum()
    if union == 0:
        return 0.0
    return float(np.logical_and(a, b).sum() / union)


def mask_to_bytes(mask):
    """Serialize a mask: b'ECMK', u32 LE width, u32 LE height, then
    ceil(w*h/8) bytes of row-major bits (most significant bit first)."""
    mask = np.asarray(mask)
    if mask.ndim != 2 or mask.shape[0] < 1 or mask.shape[1] < 1:
        raise ValueError("mask must be a non-empty 2D array")
    h, w = mask.shape
    packed = np.packbits((mask != 0).astype(np.uint8).ravel())
    return MASK_MAGIC + struct.pack("<II", w, h) + packed.tobytes()


def mask_from_bytes(buf):
    """Inverse of mask_to_bytes; rejects bad magic, truncation, trailing data."""
    if len(buf) < 12 or buf[:4] != MASK_MAGIC:
        raise ValueError("not a mask record")
    w, h = struct.unpack("<II", buf[4:12])
    if w < 1 or h < 1:
        raise ValueError("mask dimensions must be >= 1")
    expected = 12 + (w * h + 7) // 8
    if len(buf) < expected:
        raise ValueError("truncated mask record")
    if len(buf) > expected:
        raise ValueError("trailing data after mask record")
    bits = np.unpackbits(np.frombuffer(buf, dtype=np.uint8, offset=12))
    return bits[: w * h].reshape(h, w).astype(np.uint8)


def save_mask(mask, path):
    with open(path, "wb") as f:
        f.write(mask_to_bytes(mask))


def load_mask(path):
    with open(path, "rb") as f:
        return mask_from_bytes(f.read())
