"""Low-rank star-convex contour codec and evaluation toolkit."""

from .dataset import AnnotatedInstance, SyntheticShapeSpec, corpus_to_matrix, \
    generate_synthetic_corpus, load_annotations, load_instance_masks
from .eigenspace import EigenBasis, build_basis, decode, encode, jacobi_eigh, \
    load_basis, reconstruction_quality, save_basis, truncate_basis
from .evaluation import EvalReport, ReconReport, compare_descriptors, evaluate_ap
from .geometry import RADIUS_EPS, StarContour, compute_center, extract_star_contour, \
    load_mask, mask_from_bytes, mask_iou, mask_to_bytes, polygon_to_mask, \
    rasterize_contour, save_mask
from .losses import LossBreakdown, bce_loss, coeff_loss, focal_loss, \
    polar_iou_loss, total_loss
from .postprocess import Instance, PostprocessConfig, PredictionMaps, \
    candidate_filter, confidence_scores, decode_instance, nms, \
    read_prediction_maps, run_postprocess, run_postprocess_pool, \
    write_prediction_maps

__version__ = "0.1.0"

__all__ = [
    "AnnotatedInstance", "SyntheticShapeSpec", "corpus_to_matrix",
    "generate_synthetic_corpus", "load_annotations", "load_instance_masks",
    "EigenBasis", "build_basis", "decode", "encode", "jacobi_eigh",
    "load_basis", "reconstruction_quality", "save_basis", "truncate_basis",
    "EvalReport", "ReconReport", "compare_descriptors", "evaluate_ap",
    "RADIUS_EPS", "StarContour", "compute_center", "extract_star_contour",
    "load_mask", "mask_from_bytes", "mask_iou", "mask_to_bytes",
    "polygon_to_mask", "rasterize_contour", "save_mask",
    "LossBreakdown", "bce_loss", "coeff_loss", "focal_loss",
    "polar_iou_loss", "total_loss",
    "Instance", "PostprocessConfig", "PredictionMaps", "candidate_filter",
    "confidence_scores", "decode_instance", "nms", "read_prediction_maps",
    "run_postprocess", "run_postprocess_pool", "write_prediction_maps",
]
