"""Reference numerics for the training objective.

These are the plain, reduction-free definitions an external trainer can
be validated against: every function returns a sum over its entries,
and batch averaging is left to the caller.
"""

from dataclasses import dataclass

import numpy as np

from .eigenspace import decode
from .geometry import RADIUS_EPS


@dataclass(frozen=True)
class LossBreakdown:
    cls: float
    cen: float
    coeff: float
    total: float


def polar_iou_loss(r_pred, r_gt):
    """log of sum(max(r_pred, r_gt)) over sum(min(r_pred, r_gt)).

    Zero exactly when the vectors coincide, symmetric, and invariant to
    scaling both vectors by the same positive factor. Radii must be
    strictly positive; clamp decoded radii to RADIUS_EPS first.
    """
    r_pred = np.asarray(r_pred, dtype=np.float64)
    r_gt = np.asarray(r_gt, dtype=np.float64)
    if r_pred.shape != r_gt.shape or r_pred.ndim != 1 or r_pred.size < 1:
        raise ValueError("radii vectors must be 1D and equally sized")
    if not (np.all(np.isfinite(r_pred)) and np.all(np.isfinite(r_gt))):
        raise ValueError("radii must be finite")
    if np.any(r_pred <= 0) or np.any(r_gt <= 0):
        raise ValueError("radii must be positive for polar IoU")
    return float(np.log(np.maximum(r_pred, r_gt).sum() / np.minimum(r_pred, r_gt).sum()))


def coeff_loss(basis, c_pred, c_gt):
    """Polar IoU loss between two coefficient vectors, via decoding.

    Coefficients are expanded to radii, clamped to RADIUS_EPS so the
    ratio stays defined, and compared with polar_iou_loss.
    """
    r_pred = np.maximum(decode(basis, c_pred), RADIUS_EPS)
    r_gt = np.maximum(decode(basis, c_gt), RADIUS_EPS)
    return polar_iou_loss(r_pred, r_gt)


def focal_loss(p, gt, alpha=0.25, gamma=2.0):
    """Focal loss summed over entries.

    Positive entries (gt == 1) contribute -alpha * (1-p)^gamma * log(p),
    negative ones -(1-alpha) * p^gamma * log(1-p). With gamma=0 and
    alpha=0.5 this is exactly half the binary cross-entropy.
    """
    p = np.asarray(p, dtype=np.float64)
    gt = np.asarray(gt, dtype=np.float64)
    if p.shape != gt.shape:
        raise ValueError("probability and target shapes differ")
    if np.any(p <= 0) or np.any(p >= 1) or not np.all(np.isfinite(p)):
        raise ValueError("probabilities must lie strictly inside (0, 1)")
    if not np.all((gt == 0) | (gt == 1)):
        raise ValueError("targets must be 0 or 1")
    if not 0 < alpha < 1:
        raise ValueError("alpha must lie in (0, 1)")
    if gamma < 0:
        raise ValueError("gamma must be >= 0")
    pos = -alpha * (1.0 - p) ** gamma * np.log(p)
    neg = -(1.0 - alpha) * p**gamma * np.log(1.0 - p)
    return float(np.where(gt == 1, pos, neg).sum())


def bce_loss(o, gt):
    """Binary cross-entropy summed over entries; o strictly in (0, 1)."""
    o = np.asarray(o, dtype=np.float64)
    gt = np.asarray(gt, dtype=np.float64)
    if o.shape != gt.shape:
        raise ValueError("probability and target shapes differ")
    if np.any(o <= 0) or np.any(o >= 1) or not np.all(np.isfinite(o)):
        raise ValueError("probabilities must lie strictly inside (0, 1)")
    if not np.all((gt == 0) | (gt == 1)):
        raise ValueError("targets must be 0 or 1")
    return float((-gt * np.log(o) - (1.0 - gt) * np.log(1.0 - o)).sum())


def total_loss(cls, cen, coeff):
    """Combine the three loss terms; total is their exact sum."""
    parts = (float(cls), float(cen), float(coeff))
    for name, value in zip(("cls", "cen", "coeff"), parts):
        if not np.isfinite(value) or value < 0:
            raise ValueError(f"{name} loss must be finite and non-negative")
    return LossBreakdown(cls=parts[0], cen=parts[1], coeff=parts[2], total=sum(parts))
