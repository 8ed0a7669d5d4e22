"""Command-line pipeline: basis building, codec, benchmarks, postprocessing.

Machine-readable JSON goes to stdout, progress lines to stderr. Exit
codes: 0 success, 2 validation failure, 1 I/O failure.
"""

import argparse
import json
import sys

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import dataset, evaluation, losses, postprocess
from .eigenspace import build_basis, decode, encode, load_basis, save_basis
from .geometry import extract_star_contour, compute_center


@dataclass
class RunConfig:
    """Shared defaults; every flag below advertises one of these."""

    n: int = 360
    m: int = 36
    score_threshold: float = 0.05
    nms_iou: float = 0.5
    seed: int = 0

    def __post_init__(self):
        if not 1 <= self.m <= self.n:
            raise ValueError("rank m must lie in [1, n]")
        if not 0 <= self.score_threshold <= 1 or not 0 <= self.nms_iou <= 1:
            raise ValueError("thresholds must lie in [0, 1]")


DEFAULTS = RunConfig()


def _progress(msg):
    print(msg, file=sys.stderr)


def _emit(obj, path=None):
    text = json.dumps(obj, indent=2) + "\n"
    if path:
        Path(path).write_text(text)
    else:
        sys.stdout.write(text)


def _load_corpus(args):
    """Masks (and contours, when synthetic) from either corpus source."""
    if getattr(args, "synthetic", None):
        spec = dataset.SyntheticShapeSpec.from_json(args.synthetic)
        if getattr(args, "seed", None) is not None:
            spec.seed = args.seed
        contours, masks = dataset.generate_synthetic_corpus(spec, args.count, n=args.n)
        _progress(f"generated {len(masks)} synthetic shapes (seed {spec.seed})")
        return masks
    stats = {}
    masks = [mask for _, mask in dataset.load_instance_masks(args.annotations, stats=stats)]
    _progress(f"loaded {len(masks)} instances from {args.annotations} "
              f"(skipped: {stats.get('skipped_empty', 0)} empty, "
              f"{stats.get('skipped_rle', 0)} RLE)")
    return masks


def _read_vectors(path):
    """A radii/coefficient file: one JSON vector or a list of vectors."""
    with open(path) as f:
        data = json.load(f)
    if not isinstance(data, list) or not data:
        raise ValueError(f"{path}: expected a JSON array")
    if isinstance(data[0], list):
        return [np.asarray(row, dtype=np.float64) for row in data], True
    return [np.asarray(data, dtype=np.float64)], False


def _write_vectors(vectors, nested, path):
    data = [v.tolist() for v in vectors] if nested else vectors[0].tolist()
    _emit(data, path)


def cmd_build_basis(args):
    masks = _load_corpus(args)
    contours = [extract_star_contour(mask, compute_center(mask), args.n) for mask in masks]
    matrix = dataset.corpus_to_matrix(contours)
    basis = build_basis(matrix, args.m, normalize=args.normalize)
    total_energy = float(np.sum(matrix * matrix))
    kept_energy = float(np.sum(basis.sigma**2))
    metadata = {
        "corpus_size": matrix.shape[1],
        "samples": args.n,
        "source": args.synthetic or args.annotations,
        "seed": args.seed,
    }
    save_basis(basis, args.output, metadata=metadata)
    _progress(f"sigma[1]={basis.sigma[0]:.6g} sigma[{basis.m}]={basis.sigma[-1]:.6g} "
              f"energy={kept_energy / total_energy if total_energy else 0:.6f}")
    _emit({
        "output": str(args.output),
        "n": basis.n,
        "m": basis.m,
        "corpus_size": matrix.shape[1],
        "normalize": basis.normalize,
        "sigma_first": basis.sigma[0],
        "sigma_last": basis.sigma[-1],
        "energy_fraction": kept_energy / total_energy if total_energy else 0.0,
    })
    return 0


def cmd_encode(args):
    basis = load_basis(args.basis)
    vectors, nested = _read_vectors(args.input)
    _write_vectors([encode(basis, v) for v in vectors], nested, args.output)
    return 0


def cmd_decode(args):
    basis = load_basis(args.basis)
    vectors, nested = _read_vectors(args.input)
    _write_vectors([decode(basis, v) for v in vectors], nested, args.output)
    return 0


def cmd_recon_eval(args):
    masks = _load_corpus(args)
    report = evaluation.compare_descriptors(masks, args.n, args.m, holdout=args.holdout)
    if args.csv:
        with open(args.csv, "w") as f:
            f.write("index,iou_eigen,iou_profile,l2_eigen\n")
            for rec in report.records:
                f.write(f"{rec['index']},{rec['iou_eigen']},{rec['iou_profile']},"
                        f"{rec['l2_eigen']}\n")
    _emit(report.as_dict(), args.output)
    return 0


def cmd_postprocess(args):
    basis = load_basis(args.basis)
    maps_list = postprocess.read_prediction_maps(args.maps)
    config = postprocess.PostprocessConfig(
        image_width=args.image_width,
        image_height=args.image_height,
        score_threshold=args.score_threshold,
        nms_iou=args.nms_iou,
        max_candidates=args.max_candidates,
        radius_scale=args.radius_scale,
        threads=args.threads,
    )
    instances = postprocess.run_postprocess_pool(maps_list, basis, config)
    _progress(f"{len(instances)} instances from {len(maps_list)} map set(s)")
    out = open(args.output, "w") if args.output else sys.stdout
    try:
        postprocess.write_instances_jsonl(instances, out, image_id=args.image_id)
    finally:
        if args.output:
            out.close()
    return 0


def cmd_eval_ap(args):
    gt_by_image = {}
    for inst, mask in dataset.load_instance_masks(args.ground_truth):
        gt_by_image.setdefault(inst.image_id, []).append((inst.category, mask))
    det_by_image = {}
    for image_id, det in postprocess.read_instances_jsonl(args.detections):
        if image_id is None:
            raise ValueError("detection records need an 'image_id' field for evaluation")
        det_by_image.setdefault(image_id, []).append(det)
    image_ids = sorted(set(gt_by_image) | set(det_by_image))
    detections = [sorted(det_by_image.get(i, []), key=lambda d: -d.score)
                  for i in image_ids]
    ground_truth = [gt_by_image.get(i, []) for i in image_ids]
    report = evaluation.evaluate_ap(detections, ground_truth)
    _emit(report.as_dict(), args.output)
    return 0


def cmd_loss(args):
    pred, nested_p = _read_vectors(args.pred)
    gt, nested_g = _read_vectors(args.gt)
    if nested_p or nested_g or len(pred) != 1 or len(gt) != 1:
        raise ValueError("loss expects a single vector per file")
    if args.kind == "coeff":
        if not args.basis:
            raise ValueError("--basis is required for coefficient inputs")
        coeff = losses.coeff_loss(load_basis(args.basis), pred[0], gt[0])
    else:
        coeff = losses.polar_iou_loss(pred[0], gt[0])
    breakdown = losses.total_loss(args.cls, args.cen, coeff)
    _emit({"cls": breakdown.cls, "cen": breakdown.cen, "coeff": breakdown.coeff,
           "total": breakdown.total})
    return 0


def _add_corpus_flags(p):
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--synthetic", help="synthetic shape spec (JSON)")
    src.add_argument("--annotations", help="COCO-format annotation JSON")
    p.add_argument("--count", type=int, default=500,
                   help="corpus size for synthetic generation")
    p.add_argument("--n", type=int, default=DEFAULTS.n, help="contour samples per shape")
    p.add_argument("--m", type=int, default=DEFAULTS.m, help="descriptor rank")
    p.add_argument("--seed", type=int, default=None,
                   help="override the seed in the synthetic spec")


def build_parser():
    parser = argparse.ArgumentParser(
        prog="eigencontour",
        description="Low-rank star-convex contour codec and evaluation pipeline",
    )
    parser.add_argument("--threads", type=int, default=0,
                        help="worker cap for parallel stages (0 = auto)")
    sub = parser.add_subparsers(dest="command", required=True)

    fmt = argparse.ArgumentDefaultsHelpFormatter

    p = sub.add_parser("build-basis", formatter_class=fmt,
                       help="fit a contour basis from a corpus")
    _add_corpus_flags(p)
    p.add_argument("--normalize", action="store_true",
                   help="scale each corpus contour to unit max radius")
    p.add_argument("--output", required=True, help="basis file to write (.eceb)")
    p.set_defaults(func=cmd_build_basis)

    p = sub.add_parser("encode", formatter_class=fmt,
                       help="project radii vectors to coefficients")
    p.add_argument("--basis", required=True)
    p.add_argument("--input", required=True, help="JSON radii vector(s)")
    p.add_argument("--output", help="coefficients JSON (stdout when omitted)")
    p.set_defaults(func=cmd_encode)

    p = sub.add_parser("decode", formatter_class=fmt,
                       help="expand coefficients back to radii")
    p.add_argument("--basis", required=True)
    p.add_argument("--input", required=True, help="JSON coefficient vector(s)")
    p.add_argument("--output", help="radii JSON (stdout when omitted)")
    p.set_defaults(func=cmd_decode)

    p = sub.add_parser("recon-eval", formatter_class=fmt,
                       help="compare profile and low-rank reconstruction quality")
    _add_corpus_flags(p)
    p.add_argument("--holdout", action="store_true",
                   help="fit on even-indexed instances, report on odd-indexed")
    p.add_argument("--csv", help="also write per-instance records as CSV")
    p.add_argument("--output", help="report JSON (stdout when omitted)")
    p.set_defaults(func=cmd_recon_eval)

    p = sub.add_parser("postprocess", formatter_class=fmt,
                       help="decode prediction maps into instance masks")
    p.add_argument("--maps", required=True, help="prediction-map file (.ecpm)")
    p.add_argument("--basis", required=True)
    p.add_argument("--image-width", type=int, required=True)
    p.add_argument("--image-height", type=int, required=True)
    p.add_argument("--score-threshold", type=float, default=DEFAULTS.score_threshold)
    p.add_argument("--nms-iou", type=float, default=DEFAULTS.nms_iou)
    p.add_argument("--max-candidates", type=int, default=1000)
    p.add_argument("--radius-scale", choices=("image", "feature"), default="image",
                   help="unit of decoded radii ('feature' multiplies by stride)")
    p.add_argument("--image-id", type=int, default=None,
                   help="tag output records with this image id")
    p.add_argument("--output", help="instances JSON-lines (stdout when omitted)")
    p.set_defaults(func=cmd_postprocess)

    p = sub.add_parser("eval-ap", formatter_class=fmt,
                       help="COCO-style AP of detections against ground truth")
    p.add_argument("--detections", required=True, help="instance JSON-lines with image ids")
    p.add_argument("--ground-truth", required=True, help="COCO-format annotation JSON")
    p.add_argument("--output", help="report JSON (stdout when omitted)")
    p.set_defaults(func=cmd_eval_ap)

    p = sub.add_parser("loss", formatter_class=fmt,
                       help="loss breakdown for a prediction/target pair")
    p.add_argument("--pred", required=True, help="predicted vector (JSON)")
    p.add_argument("--gt", required=True, help="ground-truth vector (JSON)")
    p.add_argument("--kind", choices=("radii", "coeff"), default="radii")
    p.add_argument("--basis", help="basis file, required for --kind coeff")
    p.add_argument("--cls", type=float, default=0.0, help="classification loss term")
    p.add_argument("--cen", type=float, default=0.0, help="centerness loss term")
    p.set_defaults(func=cmd_loss)

    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, np.linalg.LinAlgError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except OSError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
