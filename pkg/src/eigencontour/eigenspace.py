"""Contour basis construction and the rank-M radial codec.

A corpus of star-convex contours, stacked as the columns of an N x L
matrix, is decomposed into its dominant left singular vectors. Those
vectors form an orthonormal basis for contour space; projecting a
radii vector onto the first M of them compresses it to M coefficients,
and the matching expansion reconstructs the best rank-M approximation.

Because L can be much larger than the contour dimension N, the
decomposition runs on the N x N Gram matrix accumulated over corpus
columns, never materializing the L x L side. The symmetric
eigendecomposition itself is a cyclic Jacobi iteration: deterministic,
dependency-free, and plenty accurate for N up to ~1024.
"""

import json
import struct

from dataclasses import dataclass, field
from pathlib import Path
from typing import NamedTuple

import numpy as np

from .geometry import StarContour, mask_iou, rasterize_contour

BASIS_MAGIC = b"ECEB"
BASIS_VERSION = 1

# Singular values below RANK_RTOL * sigma_1 count as numerically zero.
RANK_RTOL = 1e-12

_ORTHO_TOL = 1e-9


@dataclass(frozen=True)
class EigenBasis:
    """First m left singular vectors of a contour matrix.

    u has shape (n, m) with orthonormal columns ordered by descending
    singular value; sigma holds the singular values (diagnostic). Each
    column's sign is fixed so its largest-magnitude entry is positive,
    making bases reproducible across runs. `normalize` records whether
    corpus columns were scaled to unit max radius before accumulation.
    """

    u: np.ndarray = field(repr=False)
    sigma: np.ndarray = field(repr=False)
    normalize: bool = False

    def __post_init__(self):
        u = np.asarray(self.u, dtype=np.float64)
        sigma = np.asarray(self.sigma, dtype=np.float64)
        if u.ndim != 2:
            raise ValueError("basis matrix must be 2D")
        n, m = u.shape
        if n < 3:
            raise ValueError("contour dimension must be >= 3")
        if m < 1:
            raise ValueError("basis rank must be >= 1")
        if sigma.shape != (m,):
            raise ValueError("need one singular value per basis column")
        if not (np.all(np.isfinite(u)) and np.all(np.isfinite(sigma))):
            raise ValueError("basis entries must be finite")
        if np.any(sigma <= 0) or np.any(np.diff(sigma) > 0):
            raise ValueError("singular values must be positive and non-increasing")
        gram = u.T @ u
        if np.linalg.norm(gram - np.eye(m)) > _ORTHO_TOL:
            raise ValueError("basis columns are not orthonormal")
        object.__setattr__(self, "u", u)
        object.__setattr__(self, "sigma", sigma)
        object.__setattr__(self, "normalize", bool(self.normalize))

    @property
    def n(self):
        return self.u.shape[0]

    @property
    def m(self):
        return self.u.shape[1]


def jacobi_eigh(a, rel_tol=1e-12, max_sweeps=60):
    """Eigendecomposition of a symmetric matrix by cyclic Jacobi rotations.

    Sweeps the strict upper triangle, zeroing each entry with a plane
    rotation, until the off-diagonal Frobenius norm drops below
    rel_tol times the matrix norm. Returns (eigenvalues, eigenvectors)
    unsorted, with a ~ v @ diag(w) @ v.T.
    """
    g = np.asarray(a, dtype=np.float64)
    if g.ndim != 2 or g.shape[0] != g.shape[1]:
        raise ValueError("matrix must be square")
    g = 0.5 * (g + g.T)
    n = g.shape[0]
    v = np.eye(n)
    tol = rel_tol * np.linalg.norm(g)
    if tol == 0.0:
        return np.diag(g).copy(), v
    # Skipping entries below tol/n keeps the post-sweep off-norm under tol.
    elem_tol = tol / n
    for _ in range(max_sweeps):
        off2 = np.sum(g * g) - np.sum(np.diag(g) ** 2)
        if off2 <= tol * tol:
            return np.diag(g).copy(), v
        rotated = False
        for p in range(n - 1):
            row_p = g[p]
            for q in range(p + 1, n):
                apq = row_p[q]
                if abs(apq) <= elem_tol:
                    continue
                rotated = True
                phi = 0.5 * np.arctan2(2.0 * apq, g[q, q] - g[p, p])
                c = np.cos(phi)
                s = np.sin(phi)
                cp = g[:, p].copy()
                cq = g[:, q].copy()
                g[:, p] = c * cp - s * cq
                g[:, q] = s * cp + c * cq
                rp = g[p, :].copy()
                rq = g[q, :].copy()
                g[p, :] = c * rp - s * rq
                g[q, :] = s * rp + c * rq
                g[p, q] = 0.0
                g[q, p] = 0.0
                vp = v[:, p].copy()
                vq = v[:, q].copy()
                v[:, p] = c * vp - s * vq
                v[:, q] = s * vp + c * vq
        if not rotated:
            return np.diag(g).copy(), v
    raise np.linalg.LinAlgError("Jacobi iteration did not converge")


def fix_signs(u):
    """Flip columns so each one's largest-magnitude entry is positive.

    Ties in magnitude resolve to the first such index. Returns a copy.
    """
    u = np.array(u, dtype=np.float64)
    for j in range(u.shape[1]):
        i = int(np.argmax(np.abs(u[:, j])))
        if u[i, j] < 0:
            u[:, j] = -u[:, j]
    return u


def build_basis(matrix, m, normalize=False, chunk=256):
    """Build the rank-m contour basis from an N x L corpus matrix.

    The Gram matrix is accumulated over column chunks in file order
    (bit-reproducible), eigendecomposed with jacobi_eigh, and the top
    m eigenpairs become the basis. With normalize=True each corpus
    column is divided by its max radius before accumulation.
    """
    a = np.asarray(matrix, dtype=np.float64)
    if a.ndim != 2:
        raise ValueError("contour matrix must be 2D")
    n, l = a.shape
    if n < 3 or l < 1:
        raise ValueError("contour matrix must be at least 3 x 1")
    if not np.all(np.isfinite(a)):
        raise ValueError("contour matrix has non-finite entries")
    if np.any(a < 0):
        raise ValueError("contour matrix has negative radii")
    m = int(m)
    if not 1 <= m <= min(n, l):
        raise ValueError(f"rank must be in [1, {min(n, l)}], got {m}")

    if normalize:
        peaks = a.max(axis=0)
        a = np.divide(a, peaks, out=a.copy(), where=peaks > 0)

    gram = np.zeros((n, n))
    for start in range(0, l, chunk):
        block = a[:, start : start + chunk]
        gram += block @ block.T
    gram = 0.5 * (gram + gram.T)

    w, v = jacobi_eigh(gram)
    order = np.argsort(-w, kind="stable")
    sigma = np.sqrt(np.maximum(w[order], 0.0))
    if sigma[0] <= 0.0 or sigma[m - 1] < RANK_RTOL * sigma[0]:
        raise ValueError("requested rank exceeds numerical rank")
    return EigenBasis(u=fix_signs(v[:, order[:m]]), sigma=sigma[:m], normalize=normalize)


def truncate_basis(basis, m):
    """Keep the first m columns; identical to rebuilding at the lower rank."""
    m = int(m)
    if not 1 <= m <= basis.m:
        raise ValueError(f"rank must be in [1, {basis.m}], got {m}")
    return EigenBasis(u=basis.u[:, :m].copy(), sigma=basis.sigma[:m].copy(),
                      normalize=basis.normalize)


def encode(basis, r):
    """Project a radii vector onto the basis: m coefficients."""
    r = np.asarray(r, dtype=np.float64)
    if r.shape != (basis.n,):
        raise ValueError(f"radii length {r.shape} does not match basis dimension {basis.n}")
    if not np.all(np.isfinite(r)):
        raise ValueError("radii must be finite")
    return basis.u.T @ r


def decode(basis, c):
    """Expand m coefficients back to an n-vector of radii.

    Entries may come out negative; rasterization clamps them at zero.
    """
    c = np.asarray(c, dtype=np.float64)
    if c.shape != (basis.m,):
        raise ValueError(f"coefficient length {c.shape} does not match basis rank {basis.m}")
    if not np.all(np.isfinite(c)):
        raise ValueError("coefficients must be finite")
    return basis.u @ c


class ReconQuality(NamedTuple):
    l2_error: float
    iou: float


def reconstruction_quality(basis, contour, width, height):
    """Round-trip a contour through the codec and measure the damage.

    l2_error is the Euclidean distance between the radii vector and its
    projection onto the basis span; iou compares the rasterizations of
    the original and the decoded (clamped) contour.
    """
    r = contour.radii
    if r.size != basis.n:
        raise ValueError(f"contour has {r.size} radii, basis expects {basis.n}")
    approx = decode(basis, encode(basis, r))
    l2 = float(np.linalg.norm(r - approx))
    original = rasterize_contour(contour, width, height)
    decoded = rasterize_contour(StarContour(contour.center, np.maximum(approx, 0.0)),
                                width, height)
    return ReconQuality(l2_error=l2, iou=mask_iou(original, decoded))


def save_basis(basis, path, metadata=None):
    """Write a basis file plus a JSON sidecar with the same stem.

    Layout: b'ECEB', u32 version, u32 n, u32 m, u8 normalize flag,
    m float64 singular values, n*m float64 basis entries column-major,
    all little-endian. The sidecar records dimensions and whatever
    creation parameters the caller passes (corpus size, sampling, seed).
    """
    path = Path(path)
    payload = (
        BASIS_MAGIC
        + struct.pack("<IIIB", BASIS_VERSION, basis.n, basis.m, int(basis.normalize))
        + basis.sigma.astype("<f8").tobytes()
        + basis.u.astype("<f8").tobytes(order="F")
    )
    with open(path, "wb") as f:
        f.write(payload)
    sidecar = {"n": basis.n, "m": basis.m, "normalize": basis.normalize}
    sidecar.update(metadata or {})
    with open(path.with_suffix(".json"), "w") as f:
        json.dump(sidecar, f, indent=2, sort_keys=True)
        f.write("\n")


def load_basis(path):
    """Read a basis file back; the binary file is authoritative."""
    with open(path, "rb") as f:
        buf = f.read()
    if len(buf) < 17 or buf[:4] != BASIS_MAGIC:
        raise ValueError("not an eigenbasis file")
    version, n, m, flag = struct.unpack("<IIIB", buf[4:17])
    if version != BASIS_VERSION:
        raise ValueError(f"unsupported eigenbasis version {version}")
    expected = 17 + 8 * m + 8 * n * m
    if len(buf) < expected:
        raise ValueError("truncated eigenbasis file")
    if len(buf) > expected:
        raise ValueError("trailing data in eigenbasis file")
    sigma = np.frombuffer(buf, dtype="<f8", count=m, offset=17)
    u = np.frombuffer(buf, dtype="<f8", count=n * m, offset=17 + 8 * m)
    u = u.reshape((n, m), order="F")
    return EigenBasis(u=u.copy(), sigma=sigma.copy(), normalize=bool(flag))
