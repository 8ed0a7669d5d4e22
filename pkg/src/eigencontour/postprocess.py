"""Turn network output maps into final instance masks.

The maps come from an external predictor as a binary file: per-pixel
class probabilities P, a centerness score O, and a coefficient vector R
at each feature cell. Postprocessing scores each cell, keeps the ones
above a confidence threshold, decodes their coefficients to contours
at image resolution, and greedily suppresses overlapping masks.
"""

import base64
import json
import struct

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .eigenspace import decode
from .geometry import RADIUS_EPS, StarContour, mask_from_bytes, mask_iou, \
    mask_to_bytes, rasterize_contour

MAPS_MAGIC = b"ECPM"
MAPS_VERSION = 1


@dataclass
class PredictionMaps:
    """Output maps for one feature level: P (h,w,k), O (h,w), R (h,w,m)."""

    p: np.ndarray = field(repr=False)
    o: np.ndarray = field(repr=False)
    r: np.ndarray = field(repr=False)
    stride: int = 1

    def __post_init__(self):
        self.p = np.asarray(self.p, dtype=np.float64)
        self.o = np.asarray(self.o, dtype=np.float64)
        self.r = np.asarray(self.r, dtype=np.float64)
        if self.p.ndim != 3 or self.o.ndim != 2 or self.r.ndim != 3:
            raise ValueError("expected P (h,w,k), O (h,w), R (h,w,m)")
        if self.p.shape[:2] != self.o.shape or self.r.shape[:2] != self.o.shape:
            raise ValueError("map grid dimensions disagree")
        if self.p.shape[2] < 1 or self.r.shape[2] < 1:
            raise ValueError("need at least one category and one coefficient")
        if np.any(self.p < 0) or np.any(self.p > 1) or np.any(self.o < 0) or np.any(self.o > 1):
            raise ValueError("probabilities must lie in [0, 1]")
        if not np.all(np.isfinite(self.r)):
            raise ValueError("coefficient map must be finite")
        self.stride = int(self.stride)
        if self.stride < 1:
            raise ValueError("stride must be >= 1")

    @property
    def h(self):
        return self.o.shape[0]

    @property
    def w(self):
        return self.o.shape[1]

    @property
    def k(self):
        return self.p.shape[2]

    @property
    def m(self):
        return self.r.shape[2]


@dataclass
class Instance:
    """One detected object at image resolution."""

    category: int
    score: float
    center: tuple
    mask: np.ndarray = field(repr=False)


@dataclass
class PostprocessConfig:
    image_width: int
    image_height: int
    score_threshold: float = 0.05
    nms_iou: float = 0.5
    max_candidates: int = 1000
    radius_scale: str = "image"  # "feature" multiplies decoded radii by stride
    threads: int = 1  # 0 = one worker per CPU

    def __post_init__(self):
        if self.image_width < 1 or self.image_height < 1:
            raise ValueError("image dimensions must be >= 1")
        if not 0 <= self.score_threshold <= 1:
            raise ValueError("score threshold must lie in [0, 1]")
        if not 0 < self.nms_iou <= 1:
            raise ValueError("NMS IoU threshold must lie in (0, 1]")
        if self.max_candidates < 1:
            raise ValueError("candidate cap must be >= 1")
        if self.radius_scale not in ("image", "feature"):
            raise ValueError("radius_scale must be 'image' or 'feature'")
        if self.threads < 0:
            raise ValueError("threads must be >= 0")


def confidence_scores(maps):
    """Per-cell confidence (centerness times best class probability)
    and the argmax class grid; ties pick the lowest class index."""
    scores = maps.o * maps.p.max(axis=2)
    classes = maps.p.argmax(axis=2)
    return scores, classes


def candidate_filter(scores, threshold):
    """(row, col) pairs with score >= threshold, sorted by descending
    score; equal scores keep row-major order."""
    if not 0 <= threshold <= 1:
        raise ValueError("score threshold must lie in [0, 1]")
    flat = np.asarray(scores).ravel()
    keep = np.nonzero(flat >= threshold)[0]
    order = np.argsort(-flat[keep], kind="stable")
    sel = keep[order]
    w = np.asarray(scores).shape[1]
    return np.stack([sel // w, sel % w], axis=1)


def decode_instance(maps, basis, pixel, img_w, img_h, radius_scale="image"):
    """Decode one candidate cell to an Instance, or None if its mask is empty.

    The cell center maps to image coordinates through the stride; the
    coefficient vector expands to radii (clamped to RADIUS_EPS, in image
    pixels unless radius_scale='feature') and is rasterized at full
    resolution.
    """
    row, col = int(pixel[0]), int(pixel[1])
    if not (0 <= row < maps.h and 0 <= col < maps.w):
        raise ValueError(f"pixel {(row, col)} outside {maps.h}x{maps.w} grid")
    if maps.m != basis.m:
        raise ValueError(f"map has {maps.m} coefficients, basis rank is {basis.m}")
    radii = np.maximum(decode(basis, maps.r[row, col]), RADIUS_EPS)
    if radius_scale == "feature":
        radii = radii * maps.stride
    center = ((col + 0.5) * maps.stride, (row + 0.5) * maps.stride)
    mask = rasterize_contour(StarContour(center, radii), img_w, img_h)
    if not mask.any():
        return None
    probs = maps.p[row, col]
    return Instance(
        category=int(np.argmax(probs)),
        score=float(maps.o[row, col] * probs.max()),
        center=center,
        mask=mask,
    )


def nms(candidates, iou_threshold=0.5):
    """Greedy class-agnostic suppression of a score-sorted instance list.

    Repeatedly keeps the best remaining candidate and drops every
    candidate whose mask IoU with it exceeds the threshold.
    """
    kept = []
    remaining = list(candidates)
    while remaining:
        best = remaining.pop(0)
        kept.append(best)
        remaining = [c for c in remaining if mask_iou(best.mask, c.mask) <= iou_threshold]
    return kept


def run_postprocess(maps, basis, config):
    """Full pipeline for one set of maps: score, filter, decode, suppress."""
    return run_postprocess_pool([maps], basis, config)


def run_postprocess_pool(maps_list, basis, config):
    """Like run_postprocess, merging several map sets into one candidate pool.

    Candidates from all sets are ranked together by score (ties: set
    order, then row-major cell index), capped, decoded, and suppressed
    jointly.
    """
    pool = []  # (score, set index, flat cell index)
    for si, maps in enumerate(maps_list):
        scores, _ = confidence_scores(maps)
        for row, col in candidate_filter(scores, config.score_threshold):
            pool.append((scores[row, col], si, row * maps.w + col))
    pool.sort(key=lambda t: (-t[0], t[1], t[2]))
    pool = pool[: config.max_candidates]

    def decode_one(entry):
        _, si, flat = entry
        maps = maps_list[si]
        return decode_instance(maps, basis, (flat // maps.w, flat % maps.w),
                               config.image_width, config.image_height,
                               radius_scale=config.radius_scale)

    if config.threads == 1 or len(pool) < 2:
        decoded = [decode_one(e) for e in pool]
    else:
        workers = config.threads if config.threads > 0 else None
        with ThreadPoolExecutor(max_workers=workers) as ex:
            decoded = list(ex.map(decode_one, pool))
    return nms([inst for inst in decoded if inst is not None], config.nms_iou)


def write_prediction_maps(maps_list, path):
    """Append-style binary writer; several records may share one file."""
    if isinstance(maps_list, PredictionMaps):
        maps_list = [maps_list]
    with open(path, "wb") as f:
        for maps in maps_list:
            f.write(MAPS_MAGIC)
            f.write(struct.pack("<IIIIII", MAPS_VERSION, maps.h, maps.w,
                                maps.k, maps.m, maps.stride))
            f.write(maps.p.astype("<f4").tobytes(order="C"))
            f.write(maps.o.astype("<f4").tobytes(order="C"))
            f.write(maps.r.astype("<f4").tobytes(order="C"))


def read_prediction_maps(path):
    """Parse every record in a prediction-map file."""
    with open(path, "rb") as f:
        buf = f.read()
    out = []
    pos = 0
    while pos < len(buf):
        if buf[pos : pos + 4] != MAPS_MAGIC:
            raise ValueError("not a prediction-map file")
        header = buf[pos + 4 : pos + 28]
        if len(header) < 24:
            raise ValueError("truncated prediction-map header")
        version, h, w, k, m, stride = struct.unpack("<IIIIII", header)
        if version != MAPS_VERSION:
            raise ValueError(f"unsupported prediction-map version {version}")
        pos += 28
        counts = (h * w * k, h * w, h * w * m)
        arrays = []
        for count in counts:
            end = pos + 4 * count
            if end > len(buf):
                raise ValueError("truncated prediction-map data")
            arrays.append(np.frombuffer(buf, dtype="<f4", count=count, offset=pos))
            pos = end
        out.append(PredictionMaps(
            p=arrays[0].reshape(h, w, k),
            o=arrays[1].reshape(h, w),
            r=arrays[2].reshape(h, w, m),
            stride=stride,
        ))
    return out


def instance_to_json(inst, image_id=None):
    """One JSON-lines record: category, score, center, base64 mask bytes."""
    record = {
        "category": inst.category,
        "score": inst.score,
        "center": [inst.center[0], inst.center[1]],
        "mask": base64.b64encode(mask_to_bytes(inst.mask)).decode("ascii"),
    }
    if image_id is not None:
        record["image_id"] = image_id
    return json.dumps(record)


def instance_from_json(line):
    """Parse a JSON-lines record back to (image_id or None, Instance)."""
    record = json.loads(line)
    inst = Instance(
        category=int(record["category"]),
        score=float(record["score"]),
        center=(float(record["center"][0]), float(record["center"][1])),
        mask=mask_from_bytes(base64.b64decode(record["mask"])),
    )
    return record.get("image_id"), inst


def write_instances_jsonl(instances, fp, image_id=None):
    for inst in instances:
        fp.write(instance_to_json(inst, image_id=image_id))
        fp.write("\n")


def read_instances_jsonl(path):
    out = []
    with open(path) as f:
        for line in f:
            line = line.strip()
            if line:
                out.append(instance_from_json(line))
    return out
