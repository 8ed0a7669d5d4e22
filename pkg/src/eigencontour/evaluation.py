"""COCO-style average precision and the descriptor reconstruction benchmark."""

from dataclasses import dataclass, field

import numpy as np

from .eigenspace import build_basis, decode, encode
from .geometry import StarContour, compute_center, extract_star_contour, \
    mask_iou, rasterize_contour

# Mask IoU thresholds 0.50, 0.55, ..., 0.95.
IOU_THRESHOLDS = tuple(np.round(0.5 + 0.05 * np.arange(10), 2))

# Recall levels of the 101-point precision interpolation.
RECALL_LEVELS = np.array([i / 100 for i in range(101)])


@dataclass
class EvalReport:
    ap: float
    ap50: float
    ap75: float
    thresholds: list
    ap_per_threshold: list
    counts: list  # per threshold: {"iou_threshold", "tp", "fp", "fn"}

    def as_dict(self):
        return {
            "ap": self.ap,
            "ap50": self.ap50,
            "ap75": self.ap75,
            "thresholds": self.thresholds,
            "ap_per_threshold": self.ap_per_threshold,
            "counts": self.counts,
        }


@dataclass
class ReconReport:
    m: int
    mean_iou_eigen: float
    mean_iou_profile: float
    records: list = field(repr=False)  # per instance: index, iou/l2 numbers

    def as_dict(self):
        return {
            "m": self.m,
            "mean_iou_eigen": self.mean_iou_eigen,
            "mean_iou_profile": self.mean_iou_profile,
            "records": self.records,
        }


def _interpolated_ap(recalls, precisions):
    """101-point interpolated area under the precision-recall points."""
    if len(recalls) == 0:
        return 0.0
    # Precision envelope: best precision achievable at or beyond each point.
    envelope = np.maximum.accumulate(np.asarray(precisions)[::-1])[::-1]
    idx = np.searchsorted(recalls, RECALL_LEVELS, side="left")
    valid = idx < len(recalls)
    sampled = np.zeros(RECALL_LEVELS.size)
    sampled[valid] = envelope[idx[valid]]
    return float(sampled.mean())


def evaluate_ap(detections, ground_truth, thresholds=IOU_THRESHOLDS):
    """Match detections to ground truth and report AP over IoU thresholds.

    detections: per image, a score-sorted list of Instance objects.
    ground_truth: per image, a list of (category, mask) pairs.

    For each category and threshold, detections are taken in descending
    score order (ties keep image, then listing order) and greedily
    matched to the still-unmatched ground truth with the highest mask
    IoU at or above the threshold (IoU ties pick the lowest GT index).
    Precision-recall is integrated with the 101-point interpolation and
    averaged over the categories present in the ground truth, then over
    thresholds.
    """
    if len(detections) != len(ground_truth):
        raise ValueError("detections and ground truth must cover the same images")
    thresholds = [float(t) for t in thresholds]
    cats = sorted({cat for image in ground_truth for cat, _ in image})

    # Per (category, image): detection order and cached IoU matrix.
    per_cat = {}
    for cat in cats:
        entries = []  # (score, image index, IoU row against that image's GTs)
        gt_total = 0
        gt_count_by_img = []
        for i, (dets, gts) in enumerate(zip(detections, ground_truth)):
            gt_masks = [mask for c, mask in gts if c == cat]
            gt_count_by_img.append(len(gt_masks))
            gt_total += len(gt_masks)
            for d in dets:
                if d.category != cat:
                    continue
                ious = [mask_iou(d.mask, gm) for gm in gt_masks]
                entries.append((float(d.score), i, ious))
        entries.sort(key=lambda e: -e[0])  # stable: ties keep image/list order
        per_cat[cat] = (entries, gt_total, gt_count_by_img)

    ap_per_threshold = []
    counts = []
    stray = 0  # detections whose category has no ground truth anywhere
    for dets in detections:
        stray += sum(1 for d in dets if d.category not in per_cat)

    for t in thresholds:
        cat_aps = []
        tp_total = 0
        fp_total = 0
        gt_grand_total = 0
        for cat in cats:
            entries, gt_total, gt_count_by_img = per_cat[cat]
            gt_grand_total += gt_total
            matched = [np.zeros(c, dtype=bool) for c in gt_count_by_img]
            tp_flags = np.zeros(len(entries), dtype=bool)
            for di, (_, img, ious) in enumerate(entries):
                best = -1
                best_iou = -1.0
                for g, iou in enumerate(ious):
                    if not matched[img][g] and iou >= t and iou > best_iou:
                        best = g
                        best_iou = iou
                if best >= 0:
                    matched[img][best] = True
                    tp_flags[di] = True
            tp_cum = np.cumsum(tp_flags)
            fp_cum = np.cumsum(~tp_flags)
            if gt_total == 0:
                continue
            recalls = tp_cum / gt_total
            precisions = tp_cum / np.maximum(tp_cum + fp_cum, 1)
            cat_aps.append(_interpolated_ap(recalls, precisions))
            tp_total += int(tp_cum[-1]) if len(entries) else 0
            fp_total += int(fp_cum[-1]) if len(entries) else 0
        ap_per_threshold.append(float(np.mean(cat_aps)) if cat_aps else 0.0)
        counts.append({
            "iou_threshold": t,
            "tp": tp_total,
            "fp": fp_total + stray,
            "fn": gt_grand_total - tp_total,
        })

    by_threshold = dict(zip(thresholds, ap_per_threshold))
    return EvalReport(
        ap=float(np.mean(ap_per_threshold)) if ap_per_threshold else 0.0,
        ap50=by_threshold.get(0.5, 0.0),
        ap75=by_threshold.get(0.75, 0.0),
        thresholds=thresholds,
        ap_per_threshold=ap_per_threshold,
        counts=counts,
    )


def compare_descriptors(masks, n, m, holdout=False, basis=None):
    """Reconstruction quality of two same-budget contour descriptors.

    For every mask, (a) the profile baseline samples m radial distances
    directly and rasterizes them, and (b) the low-rank codec samples n
    radii, projects them onto a rank-m basis built from the corpus, and
    rasterizes the decoded contour. Both rasterizations are scored by
    IoU against the original mask.

    With holdout=True the basis is fit on even-indexed instances and
    the report covers the odd-indexed ones; the default fits and
    evaluates on the full corpus. A prebuilt basis (e.g. a truncation
    of a larger one) can be passed to skip the fit.
    """
    masks = list(masks)
    if not masks:
        raise ValueError("corpus is empty")
    if not 1 <= m <= n:
        raise ValueError("descriptor size must lie in [1, n]")
    centers = [compute_center(mask) for mask in masks]
    fine = [extract_star_contour(mask, ctr, n) for mask, ctr in zip(masks, centers)]

    if holdout:
        train_idx = range(0, len(masks), 2)
        eval_idx = list(range(1, len(masks), 2))
        if not eval_idx:
            raise ValueError("holdout evaluation needs at least 2 instances")
    else:
        train_idx = range(len(masks))
        eval_idx = list(range(len(masks)))

    if basis is None:
        matrix = np.column_stack([fine[i].radii for i in train_idx])
        basis = build_basis(matrix, m)
    elif basis.n != n or basis.m != m:
        raise ValueError("prebuilt basis does not match the requested n, m")

    records = []
    for i in eval_idx:
        h, w = masks[i].shape
        profile = extract_star_contour(masks[i], centers[i], m)
        iou_profile = mask_iou(masks[i], rasterize_contour(profile, w, h))

        r = fine[i].radii
        approx = decode(basis, encode(basis, r))
        recon = StarContour(centers[i], np.maximum(approx, 0.0))
        iou_eigen = mask_iou(masks[i], rasterize_contour(recon, w, h))
        records.append({
            "index": i,
            "iou_eigen": iou_eigen,
            "iou_profile": iou_profile,
            "l2_eigen": float(np.linalg.norm(r - approx)),
        })

    return ReconReport(
        m=m,
        mean_iou_eigen=float(np.mean([rec["iou_eigen"] for rec in records])),
        mean_iou_profile=float(np.mean([rec["iou_profile"] for rec in records])),
        records=records,
    )
