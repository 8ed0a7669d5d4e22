"""COCO-style annotation ingestion and synthetic star-convex corpora."""

import json
import warnings

from dataclasses import dataclass, field

import numpy as np

from .geometry import StarContour, polygon_to_mask, rasterize_contour


@dataclass
class AnnotatedInstance:
    """One annotated object: category index plus its polygon parts."""

    image_id: int
    category: int
    polygons: list
    image_width: int
    image_height: int


@dataclass
class SyntheticShapeSpec:
    """Parameters of the seeded radial-harmonic shape family.

    Each shape is r(theta) = base_radius * (1 + sum_j a_j cos(j*theta + phi_j))
    with sum |a_j| <= amplitude, so amplitude < 1 keeps every radius
    strictly positive (star-convex by construction). The number of
    harmonics tunes the effective rank of the corpus.
    """

    seed: int = 0
    harmonic_count: int = 5
    base_radius: float = 28.0
    amplitude: float = 0.3
    image_size: int = 96

    def __post_init__(self):
        if self.harmonic_count < 0:
            raise ValueError("harmonic_count must be >= 0")
        if self.base_radius <= 0:
            raise ValueError("base_radius must be positive")
        if not 0 <= self.amplitude < 1:
            raise ValueError("amplitude must lie in [0, 1)")
        if self.image_size < 1:
            raise ValueError("image_size must be >= 1")

    @classmethod
    def from_json(cls, path):
        with open(path) as f:
            return cls(**json.load(f))


def _polygon_parts(seg, where):
    if isinstance(seg, dict):
        return None  # RLE
    if not isinstance(seg, list) or not seg:
        raise ValueError(f"{where}: 'segmentation' must be a non-empty list of polygons")
    parts = []
    for part in seg:
        coords = np.asarray(part, dtype=np.float64)
        if coords.ndim != 1 or coords.size < 6 or coords.size % 2:
            raise ValueError(f"{where}: polygon needs an even number of >= 6 coordinates")
        if not np.all(np.isfinite(coords)):
            raise ValueError(f"{where}: polygon coordinates must be finite")
        parts.append(coords.reshape(-1, 2))
    return parts


def load_annotations(path, stats=None):
    """Stream AnnotatedInstance records from a COCO-format JSON file.

    Expects the standard images/annotations/categories arrays; category
    ids are remapped to contiguous indices in categories-array order.
    RLE-encoded segmentations are skipped with a warning (counted in
    stats['skipped_rle'] when a stats dict is passed). Malformed or
    missing fields raise ValueError naming the offending record.
    """
    with open(path) as f:
        doc = json.load(f)
    for key in ("images", "annotations", "categories"):
        if key not in doc:
            raise ValueError(f"annotation file is missing the '{key}' array")
    dims = {}
    for i, img in enumerate(doc["images"]):
        try:
            dims[img["id"]] = (int(img["width"]), int(img["height"]))
        except KeyError as e:
            raise ValueError(f"image record {i}: missing {e}") from None
    cat_index = {}
    for i, cat in enumerate(doc["categories"]):
        if "id" not in cat:
            raise ValueError(f"category record {i}: missing 'id'")
        cat_index[cat["id"]] = i

    def generate():
        for i, ann in enumerate(doc["annotations"]):
            where = f"annotation record {i}"
            for key in ("image_id", "category_id", "segmentation"):
                if key not in ann:
                    raise ValueError(f"{where}: missing '{key}'")
            if ann["image_id"] not in dims:
                raise ValueError(f"{where}: unknown image_id {ann['image_id']}")
            if ann["category_id"] not in cat_index:
                raise ValueError(f"{where}: unknown category_id {ann['category_id']}")
            parts = _polygon_parts(ann["segmentation"], where)
            if parts is None:
                warnings.warn(f"{where}: RLE segmentation skipped")
                if stats is not None:
                    stats["skipped_rle"] = stats.get("skipped_rle", 0) + 1
                continue
            w, h = dims[ann["image_id"]]
            yield AnnotatedInstance(
                image_id=ann["image_id"],
                category=cat_index[ann["category_id"]],
                polygons=parts,
                image_width=w,
                image_height=h,
            )

    return generate()


def instance_to_mask(inst):
    """Union of the instance's polygon parts as one mask."""
    mask = np.zeros((inst.image_height, inst.image_width), dtype=np.uint8)
    for poly in inst.polygons:
        mask |= polygon_to_mask(poly, inst.image_width, inst.image_height)
    return mask


def load_instance_masks(path, stats=None):
    """Stream (instance, mask) pairs, dropping instances that rasterize empty.

    Skips are counted in stats['skipped_empty'] when a stats dict is given.
    """
    for inst in load_annotations(path, stats=stats):
        mask = instance_to_mask(inst)
        if not mask.any():
            if stats is not None:
                stats["skipped_empty"] = stats.get("skipped_empty", 0) + 1
            continue
        yield inst, mask


def generate_synthetic_corpus(spec, count, n=360):
    """Deterministically generate `count` harmonic shapes from a seed.

    Returns (contours, masks): the analytic radii sampled at n angles
    around the image center, and the rasterization of each contour on
    the spec's square grid. A fixed seed reproduces the corpus bit for
    bit.
    """
    if count < 0:
        raise ValueError("count must be >= 0")
    rng = np.random.default_rng(spec.seed)
    size = spec.image_size
    center = (size / 2.0, size / 2.0)
    theta = 2.0 * np.pi * np.arange(n) / n
    j = np.arange(1, spec.harmonic_count + 1)
    contours = []
    masks = []
    for _ in range(count):
        radii = np.full(n, spec.base_radius)
        if spec.harmonic_count:
            coeffs = spec.amplitude * rng.uniform(-1.0, 1.0, spec.harmonic_count)
            coeffs /= spec.harmonic_count
            phases = rng.uniform(0.0, 2.0 * np.pi, spec.harmonic_count)
            ripple = np.cos(np.outer(theta, j) + phases) @ coeffs
            radii = spec.base_radius * (1.0 + ripple)
        contour = StarContour(center, radii)
        contours.append(contour)
        masks.append(rasterize_contour(contour, size, size))
    return contours, masks


def corpus_to_matrix(contours):
    """Stack contours as the columns of an N x L matrix, order preserved."""
    if not contours:
        raise ValueError("corpus is empty")
    n = contours[0].n
    for i, c in enumerate(contours):
        if c.n != n:
            raise ValueError(f"contour {i} has {c.n} radii, expected {n}")
    return np.column_stack([c.radii for c in contours])
