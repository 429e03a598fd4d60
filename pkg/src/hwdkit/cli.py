"""Single command-line entry point.

Subcommands: gen, train, score, verify, stability, perturb, time. Reports
are JSON (sweeps also emit CSV); every run echoes its configuration for
provenance. Exit codes: 0 success, 1 runtime error, 2 usage error.
"""

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import backbone as bb
from . import corpus, metrics, trainer, verify
from .errors import ContractViolation, HwdkitError
from .imaging import Portion, decode
from .kernels import BACKEND
from .weights import load_weights, read_entry_shapes

DISTANCES = ("euclidean", "frechet", "kid", "mahalanobis", "hamming")


class UsageError(Exception):
    pass


def _threads_default():
    env = os.environ.get("HWDKIT_THREADS")
    if env:
        return int(env)
    return os.cpu_count() or 1


def _add_common(p):
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--threads", type=int, default=None,
                   help="worker cap (default: HWDKIT_THREADS or cpu count)")
    p.add_argument("--out", type=str, default=None, help="report path (default stdout)")


def _add_backbone_flags(p):
    p.add_argument("--weights", required=True, help="weight file (.hwdw)")
    p.add_argument("--backbone", choices=("tinynet", "vgg16_32"), default="tinynet")
    p.add_argument("--portion", choices=("whole", "begin"), default="whole")
    p.add_argument("--invert-ink", action="store_true",
                   help="invert pixels at ingestion (light-on-dark corpora)")


def build_parser():
    ap = argparse.ArgumentParser(prog="hwdkit", description=__doc__)
    sub = ap.add_subparsers(dest="cmd", required=True)

    p = sub.add_parser("gen", help="generate a synthetic corpus")
    p.add_argument("--styles", type=int, required=True)
    p.add_argument("--words-per-style", type=int, required=True)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--distort-strength", type=float, default=1.0)
    p.add_argument("--style-id-offset", type=int, default=0)
    _add_common(p)

    p = sub.add_parser("train", help="train a backbone on a corpus manifest")
    p.add_argument("--manifest", required=True)
    p.add_argument("--out-weights", required=True)
    p.add_argument("--backbone", choices=("tinynet", "vgg16_32"), default="tinynet")
    p.add_argument("--epochs", type=int, default=10)
    p.add_argument("--batch-size", type=int, default=16)
    p.add_argument("--lr", type=float, default=0.01)
    p.add_argument("--momentum", type=float, default=0.9)
    _add_common(p)

    p = sub.add_parser("score", help="score a generated set against a real set")
    p.add_argument("--real", required=True, help="manifest of real images")
    p.add_argument("--gen", required=True, help="manifest of generated images")
    p.add_argument("--distance", choices=DISTANCES, default="euclidean")
    p.add_argument("--per-writer-min", type=int, default=2,
                   help="drop writers with fewer images than this")
    _add_backbone_flags(p)
    _add_common(p)

    p = sub.add_parser("verify", help="half/half style verification: overlap + EER")
    p.add_argument("--manifest", required=True)
    p.add_argument("--distance", choices=DISTANCES, default="euclidean")
    p.add_argument("--impostor-pairs", type=int, default=10)
    p.add_argument("--bins", type=int, default=50)
    _add_backbone_flags(p)
    _add_common(p)

    p = sub.add_parser("stability", help="sample-size stability sweep")
    p.add_argument("--reference", required=True, help="reference manifest")
    p.add_argument("--candidate", action="append", required=True,
                   metavar="NAME=MANIFEST", help="candidate set (repeatable)")
    p.add_argument("--sizes", required=True, help="comma-separated subset sizes")
    p.add_argument("--runs", type=int, default=10)
    p.add_argument("--distance", choices=DISTANCES, default="euclidean")
    _add_backbone_flags(p)
    _add_common(p)

    p = sub.add_parser("perturb", help="alteration sensitivity sweep")
    p.add_argument("--manifest", required=True)
    p.add_argument("--alteration", choices=("shear", "erode", "dilate"), required=True)
    p.add_argument("--levels", required=True, help="comma-separated levels (must include 0)")
    p.add_argument("--distances", default="euclidean",
                   help="comma-separated distance kinds")
    _add_backbone_flags(p)
    _add_common(p)

    p = sub.add_parser("time", help="representation vs distance timing split")
    p.add_argument("--manifest", required=True)
    p.add_argument("--distances", default="euclidean,frechet")
    p.add_argument("--min-images", type=int, default=100)
    _add_backbone_flags(p)
    _add_common(p)

    return ap


# ---------------------------------------------------------------- helpers


def _load_backbone(args):
    path = Path(args.weights)
    if not path.exists():
        raise HwdkitError(f"weights file not found: {path}")
    # saved files may carry a classifier head; size the spec from the file
    shapes = read_entry_shapes(path)
    num_classes = shapes.get("head.weight", (None,))[0]
    spec = bb.spec_by_name(args.backbone, num_classes=num_classes)
    return spec, load_weights(spec, path)


def _images_from_manifest(path, invert_ink=False):
    manifest = corpus.load_manifest(path)
    images = []
    for e in manifest.entries:
        images.append(decode(manifest.root / e.path, writer_id=e.label,
                             invert_ink=invert_ink))
    return manifest, images


def _group_by_writer(images):
    groups = {}
    for img in images:
        groups.setdefault(img.writer_id, []).append(img)
    return groups


def _extract(images, spec, params, portion, threads):
    bags, warnings = metrics.extract_bags(images, spec, params, portion, threads)
    return bags, warnings


def _portion(args):
    return Portion.WHOLE if args.portion == "whole" else Portion.BEGINNING


def _config_echo(args):
    # threads is execution detail: reports must be identical for any --threads
    skip = {"cmd", "func", "out", "threads"}
    cfg = {k: v for k, v in vars(args).items() if k not in skip}
    cfg["kernel_backend"] = BACKEND
    return cfg


# ---------------------------------------------------------------- commands


def cmd_gen(args):
    manifest = corpus.generate_corpus(
        num_styles=args.styles,
        words_per_style=args.words_per_style,
        seed=args.seed,
        out_dir=args.out_dir,
        distort_strength=args.distort_strength,
        style_id_offset=args.style_id_offset,
    )
    return {
        "command": "gen",
        "config": _config_echo(args),
        "manifest": str(Path(args.out_dir) / "manifest.tsv"),
        "entries": len(manifest.entries),
        "styles": args.styles,
    }


def cmd_train(args):
    cfg = trainer.TrainConfig(
        manifest_path=args.manifest,
        out_path=args.out_weights,
        spec_name=args.backbone,
        epochs=args.epochs,
        batch_size=args.batch_size,
        lr=args.lr,
        momentum=args.momentum,
        seed=args.seed,
        threads=args.threads,
    )
    _, history = trainer.train(cfg)
    return {
        "command": "train",
        "config": _config_echo(args),
        "history": history,
        "best_val_accuracy": max(h["val_accuracy"] for h in history),
        "weights": args.out_weights,
    }


def _score_pairs(args, spec, params, real_by_writer, gen_by_writer, warnings):
    portion = _portion(args)
    shared = sorted(set(real_by_writer) & set(gen_by_writer))
    if not shared:
        raise HwdkitError("no writer appears in both manifests")
    ref_bags, cand_bags = {}, {}
    for w in shared:
        if (len(real_by_writer[w]) < args.per_writer_min
                or len(gen_by_writer[w]) < args.per_writer_min):
            warnings.append(f"writer {w!r} below --per-writer-min, dropped")
            continue
        rb, ws = _extract(real_by_writer[w], spec, params, portion, args.threads)
        warnings += ws
        gb, ws = _extract(gen_by_writer[w], spec, params, portion, args.threads)
        warnings += ws
        ref_bags[w], cand_bags[w] = rb, gb
    if not ref_bags:
        raise HwdkitError("every writer was dropped; nothing to score")
    all_ref = [b for w in sorted(ref_bags) for b in ref_bags[w]]
    scorer = verify.make_scorer(args.distance, reference_bags=all_ref)
    per_writer = {w: scorer(ref_bags[w], cand_bags[w]) for w in sorted(ref_bags)}
    agg = float(sum(per_writer.values()) / len(per_writer))
    return per_writer, agg


def cmd_score(args):
    if args.distance in ("frechet", "kid", "mahalanobis") and args.per_writer_min < 2:
        raise UsageError(
            f"--distance {args.distance} needs --per-writer-min >= 2 "
            f"(covariance/kernel fits need at least two samples)"
        )
    spec, params = _load_backbone(args)
    _, real_images = _images_from_manifest(args.real, args.invert_ink)
    _, gen_images = _images_from_manifest(args.gen, args.invert_ink)
    warnings = []
    per_writer, agg = _score_pairs(args, spec, params,
                                   _group_by_writer(real_images),
                                   _group_by_writer(gen_images), warnings)
    return {
        "command": "score",
        "score_kind": args.distance,
        "config": _config_echo(args),
        "per_writer": per_writer,
        "aggregate": agg,
        "counts": {"real": len(real_images), "generated": len(gen_images)},
        "warnings": warnings,
    }


def cmd_verify(args):
    spec, params = _load_backbone(args)
    _, images = _images_from_manifest(args.manifest, args.invert_ink)
    by_writer = _group_by_writer(images)
    plan = verify.build_split(by_writer, args.seed)
    portion = _portion(args)

    warnings = list(plan.warnings)
    ref_bags, cand_bags = {}, {}
    for w in sorted(plan.writers):
        ref_idx, cand_idx = plan.writers[w]
        rb, ws = _extract([by_writer[w][i] for i in ref_idx], spec, params,
                          portion, args.threads)
        warnings += ws
        cb, ws = _extract([by_writer[w][i] for i in cand_idx], spec, params,
                          portion, args.threads)
        warnings += ws
        ref_bags[w], cand_bags[w] = rb, cb

    all_ref = [b for w in sorted(ref_bags) for b in ref_bags[w]]
    scorer = verify.make_scorer(args.distance, reference_bags=all_ref)
    dist = verify.pair_scores(ref_bags, cand_bags, scorer,
                              impostor_pairs_per_writer=args.impostor_pairs,
                              seed=args.seed)
    ovl = verify.overlap_coefficient(dist, bins=args.bins)
    e = verify.eer(dist)
    return {
        "command": "verify",
        "config": _config_echo(args),
        "writers": len(plan.writers),
        "genuine_pairs": int(dist.genuine.size),
        "impostor_pairs": int(dist.impostor.size),
        "overlap": ovl,
        "overlap_percent": 100.0 * ovl,
        "eer": e,
        "eer_percent": 100.0 * e,
        "genuine_mean": float(np.mean(dist.genuine)),
        "impostor_mean": float(np.mean(dist.impostor)),
        "warnings": warnings,
    }


def cmd_stability(args):
    spec, params = _load_backbone(args)
    portion = _portion(args)
    _, ref_images = _images_from_manifest(args.reference, args.invert_ink)
    ref_bags, warnings = _extract(ref_images, spec, params, portion, args.threads)

    candidate_sets = {}
    for spec_str in args.candidate:
        if "=" not in spec_str:
            raise UsageError(f"--candidate wants NAME=MANIFEST, got {spec_str!r}")
        name, mpath = spec_str.split("=", 1)
        _, imgs = _images_from_manifest(mpath, args.invert_ink)
        bags, ws = _extract(imgs, spec, params, portion, args.threads)
        warnings += ws
        candidate_sets[name] = bags

    sizes = [int(s) for s in args.sizes.split(",")]
    scorer = verify.make_scorer(args.distance, reference_bags=ref_bags)
    rows, ws = verify.stability_sweep(ref_bags, candidate_sets, sizes,
                                      args.runs, scorer, seed=args.seed)
    warnings += ws
    report = {
        "command": "stability",
        "config": _config_echo(args),
        "rows": rows,
        "warnings": warnings,
    }
    if args.out:
        csv_path = Path(args.out).with_suffix(".csv")
        csv_path.write_text(verify.rows_to_csv(rows, ["size", "name", "mean", "p25", "p75"]))
        report["csv"] = str(csv_path)
    return report


def cmd_perturb(args):
    spec, params = _load_backbone(args)
    portion = _portion(args)
    _, images = _images_from_manifest(args.manifest, args.invert_ink)

    def extract(imgs):
        bags, _ = _extract(imgs, spec, params, portion, args.threads)
        return bags

    levels = [float(s) for s in args.levels.split(",")]
    kinds = [k.strip() for k in args.distances.split(",")]
    for k in kinds:
        if k not in DISTANCES:
            raise UsageError(f"unknown distance {k!r}")
    ref_bags = extract(images)
    score_fns = {k: verify.make_scorer(k, reference_bags=ref_bags) for k in kinds}
    rows = verify.alteration_sweep(images, args.alteration, levels, score_fns, extract)
    report = {
        "command": "perturb",
        "config": _config_echo(args),
        "rows": rows,
    }
    if args.out:
        csv_path = Path(args.out).with_suffix(".csv")
        csv_path.write_text(verify.rows_to_csv(rows, ["level"] + sorted(kinds)))
        report["csv"] = str(csv_path)
    return report


def cmd_time(args):
    spec, params = _load_backbone(args)
    _, images = _images_from_manifest(args.manifest, args.invert_ink)
    kinds = [k.strip() for k in args.distances.split(",")]
    extract_fns, score_fns = {}, {}
    for k in kinds:
        if k not in DISTANCES:
            raise UsageError(f"unknown distance {k!r}")
        portion = Portion.BEGINNING if k == "frechet" and args.portion == "begin" \
            else _portion(args)
        extract_fns[k] = (lambda p: lambda imgs: _extract(imgs, spec, params, p,
                                                          args.threads)[0])(portion)
        score_fns[k] = None
    # scorers need reference context; build from the first half once
    half_bags = extract_fns[kinds[0]](images[: len(images) // 2])
    for k in kinds:
        score_fns[k] = verify.make_scorer(k, reference_bags=half_bags)
    report = verify.timing_report(images, extract_fns, score_fns,
                                  min_images=args.min_images)
    return {"command": "time", "config": _config_echo(args), "timings": report}


# ---------------------------------------------------------------- main


_COMMANDS = {
    "gen": cmd_gen,
    "train": cmd_train,
    "score": cmd_score,
    "verify": cmd_verify,
    "stability": cmd_stability,
    "perturb": cmd_perturb,
    "time": cmd_time,
}


def main(argv=None):
    ap = build_parser()
    args = ap.parse_args(argv)
    if getattr(args, "threads", None) is None:
        args.threads = _threads_default()
    try:
        report = _COMMANDS[args.cmd](args)
    except UsageError as e:
        print(f"hwdkit {args.cmd}: {e}", file=sys.stderr)
        return 2
    except (HwdkitError, ContractViolation, FileNotFoundError, OSError) as e:
        print(f"hwdkit {args.cmd}: {e}", file=sys.stderr)
        return 1
    text = json.dumps(report, indent=2, sort_keys=True) + "\n"
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    return 0


if __name__ == "__main__":
    sys.exit(main())
