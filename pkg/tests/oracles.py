"""Independent brute-force references the tests check the library against.

Everything here is deliberately naive (scalar loops, direct formulas)
and shares no code with the package.
"""

import math

import numpy as np


def point_in_polygon(x, y, poly):
    """Nonzero-winding containment test for a single point."""
    wind = 0
    v = len(poly)
    for i in range(v):
        xa, ya = poly[i]
        xb, yb = poly[(i + 1) % v]
        is_left = (xb - xa) * (y - ya) - (x - xa) * (yb - ya)
        if ya <= y:
            if yb > y and is_left > 0:
                wind += 1
        elif yb <= y and is_left < 0:
            wind -= 1
    return wind != 0


def rasterize_reference(poly, width, height):
    """Per-pixel point-in-polygon scan over every pixel center."""
    mask = np.zeros((height, width), dtype=np.uint8)
    for py in range(height):
        for px in range(width):
            if point_in_polygon(px + 0.5, py + 0.5, poly):
                mask[py, px] = 1
    return mask


def star_contour_reference(mask, center, n, empty_radius=1e-6):
    """Assign every set pixel to its nearest angular bin, take per-bin max."""
    cx, cy = center
    radii = [None] * n
    h, w = mask.shape
    step = 2.0 * math.pi / n
    for py in range(h):
        for px in range(w):
            if not mask[py, px]:
                continue
            dx = px + 0.5 - cx
            dy = py + 0.5 - cy
            ang = math.atan2(dy, dx)
            b = math.floor((ang + 0.5 * step) / step) % n
            d = math.hypot(dx, dy)
            if radii[b] is None or d > radii[b]:
                radii[b] = d
    return np.array([empty_radius if r is None else r for r in radii])


def iou_reference(a, b):
    inter = 0
    union = 0
    for pa, pb in zip(np.asarray(a).ravel(), np.asarray(b).ravel()):
        if pa and pb:
            inter += 1
        if pa or pb:
            union += 1
    return inter / union if union else 0.0


def charpoly_eigh_topk(sym, k):
    """Top-k eigenpairs of a small symmetric matrix.

    Characteristic-polynomial coefficients come from the
    Faddeev-LeVerrier recursion, roots from companion-matrix root
    finding, eigenvectors from shifted inverse iteration with a final
    Rayleigh-quotient refinement of the eigenvalue.
    """
    a = np.asarray(sym, dtype=np.float64)
    n = a.shape[0]
    scale = float(np.trace(a))
    if scale <= 0:
        scale = 1.0
    b = a / scale

    coeffs = [1.0]
    mk = np.eye(n)
    for i in range(1, n + 1):
        am = b @ mk
        ci = -np.trace(am) / i
        coeffs.append(ci)
        mk = am + ci * np.eye(n)
    roots = np.sort(np.real(np.roots(coeffs)))[::-1]

    vals = []
    vecs = []
    for i in range(k):
        lam = roots[i]
        vec = _inverse_iteration(b, lam)
        vals.append(float(vec @ b @ vec) * scale)
        vecs.append(vec)
    return np.array(vals), np.column_stack(vecs)


def _inverse_iteration(b, lam, iters=4):
    n = b.shape[0]
    shift = lam + 1e-11 * max(1.0, abs(lam))
    x = np.ones(n) / math.sqrt(n)
    for _ in range(iters):
        try:
            x = np.linalg.solve(b - shift * np.eye(n), x)
        except np.linalg.LinAlgError:
            shift += 1e-9
            x = np.linalg.solve(b - shift * np.eye(n), x)
        x = x / np.linalg.norm(x)
    return x


def sign_normalize(u):
    """Largest-magnitude entry of each column made positive (first on ties)."""
    u = np.array(u)
    for j in range(u.shape[1]):
        col = u[:, j]
        idx = 0
        best = abs(col[0])
        for i in range(1, len(col)):
            if abs(col[i]) > best:
                best = abs(col[i])
                idx = i
        if col[idx] < 0:
            u[:, j] = -col
    return u


def gram_schmidt_residual(columns, r):
    """Distance from r to the span of the columns, by orthogonalization."""
    basis = []
    for j in range(columns.shape[1]):
        v = columns[:, j].astype(np.float64).copy()
        for b in basis:
            v -= (b @ v) * b
        norm = np.linalg.norm(v)
        if norm > 1e-12:
            basis.append(v / norm)
    res = np.asarray(r, dtype=np.float64).copy()
    for b in basis:
        res -= (b @ res) * b
    return float(np.linalg.norm(res))


def nms_reference(masks, scores, iou_threshold):
    """Greedy suppression; returns kept indices into the input order."""
    order = sorted(range(len(scores)), key=lambda i: (-scores[i], i))
    kept = []
    suppressed = set()
    for i in order:
        if i in suppressed:
            continue
        kept.append(i)
        for j in order:
            if j == i or j in suppressed:
                continue
            if iou_reference(masks[i], masks[j]) > iou_threshold:
                suppressed.add(j)
    return kept


def ap_reference(detections, ground_truth, thresholds):
    """Scalar re-implementation of threshold-averaged mask AP.

    detections: per image, list of objects with .score/.category/.mask.
    ground_truth: per image, list of (category, mask).
    Returns (mean ap, ap per threshold).
    """
    cats = sorted({c for image in ground_truth for c, _ in image})
    levels = [i / 100 for i in range(101)]
    ap_per_threshold = []
    for t in thresholds:
        cat_aps = []
        for cat in cats:
            dets = []
            for i, image_dets in enumerate(detections):
                for d in image_dets:
                    if d.category == cat:
                        dets.append((d.score, i, d.mask))
            dets = sorted(dets, key=lambda e: -e[0])
            gts = {i: [m for c, m in image if c == cat]
                   for i, image in enumerate(ground_truth)}
            n_gt = sum(len(v) for v in gts.values())
            if n_gt == 0:
                continue
            used = {i: set() for i in gts}
            points = []
            tp = 0
            fp = 0
            for score, i, mask in dets:
                best_g = -1
                best_iou = -1.0
                for g, gmask in enumerate(gts[i]):
                    if g in used[i]:
                        continue
                    iou = iou_reference(mask, gmask)
                    if iou >= t and iou > best_iou:
                        best_g = g
                        best_iou = iou
                if best_g >= 0:
                    used[i].add(best_g)
                    tp += 1
                else:
                    fp += 1
                points.append((tp / n_gt, tp / (tp + fp)))
            total = 0.0
            for level in levels:
                best = 0.0
                for rec, prec in points:
                    if rec >= level and prec > best:
                        best = prec
                total += best
            cat_aps.append(total / len(levels))
        ap_per_threshold.append(sum(cat_aps) / len(cat_aps) if cat_aps else 0.0)
    mean_ap = sum(ap_per_threshold) / len(ap_per_threshold) if ap_per_threshold else 0.0
    return mean_ap, ap_per_threshold
