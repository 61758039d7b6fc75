"""Command-line entry point.

Exit status: 0 on success, 1 when inputs parse but fail validation, 2 on
malformed input files or bad command-line usage.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import warnings

from . import ablation, association, evaluation, ingest, partition, simulate, voting
from .association import TrackletParams
from .errors import ConfigError, NoAnnotations, OutOfRange, ParseError, TrackvoteError
from .model import ClassRegistry, Sequence, merge, validate_sequence
from .voting import VoteScheme

DEFAULT_SEED = 0


class ValidationFailed(Exception):
    pass


# -- flag types -------------------------------------------------------------


def _positive_int(text: str) -> int:
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}") from None
    if v < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {v}")
    return v


def _ratio(text: str) -> float:
    try:
        v = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a number, got {text!r}") from None
    if not 0.0 <= v <= 1.0:
        raise argparse.ArgumentTypeError(f"must lie in [0, 1], got {v}")
    return v


def _open_fraction(text: str) -> float:
    v = _ratio(text)
    if v in (0.0, 1.0):
        raise argparse.ArgumentTypeError(f"must lie strictly between 0 and 1, got {v}")
    return v


def _k(text: str) -> int:
    v = _positive_int(text)
    if v < 2:
        raise argparse.ArgumentTypeError(f"must be >= 2, got {v}")
    return v


def _scheme(text: str) -> VoteScheme:
    try:
        return VoteScheme.parse(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


# -- parser -----------------------------------------------------------------


def _add_eval_inputs(p: argparse.ArgumentParser) -> None:
    p.add_argument("--detections", required=True, metavar="PATH", help="detection dump (JSON lines)")
    p.add_argument("--annotations", required=True, metavar="MANIFEST",
                   help="manifest file, or a directory holding manifest.tsv")
    p.add_argument("--classes", metavar="PATH", help="class names, one per line")
    p.add_argument("--iou-thresh", type=_ratio, default=evaluation.DEFAULT_IOU_THRESH)
    p.add_argument("--conf", type=_ratio, default=evaluation.DEFAULT_OPERATING_CONF,
                   help="operating confidence for precision/recall")
    p.add_argument("--out", metavar="PATH", help="write the machine-readable report here")


def _add_tracklet_flags(p: argparse.ArgumentParser, scheme: bool = True) -> None:
    p.add_argument("--max-len", type=_positive_int, default=5)
    p.add_argument("--stride", type=_positive_int, default=1)
    p.add_argument("--theta", type=_ratio, default=0.5, help="association IoU threshold (strict)")
    if scheme:
        p.add_argument("--scheme", type=_scheme, default=VoteScheme.MAXIMUM, help="avg or max")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="trackvote", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("eval-single", help="evaluate per-frame identification")
    _add_eval_inputs(p)

    p = sub.add_parser("eval-multi", help="evaluate tracklet-voted identification")
    _add_eval_inputs(p)
    _add_tracklet_flags(p)

    p = sub.add_parser("ablate", help="sweep tracklet length, stride and threshold")
    _add_eval_inputs(p)
    _add_tracklet_flags(p, scheme=False)

    p = sub.add_parser("track", help="dump tracklets of a detection stream")
    p.add_argument("--detections", required=True, metavar="PATH")
    _add_tracklet_flags(p, scheme=False)
    p.add_argument("--out", metavar="PATH")

    p = sub.add_parser("vote", help="write the relabelled detection stream")
    p.add_argument("--detections", required=True, metavar="PATH")
    _add_tracklet_flags(p)
    p.add_argument("--out", metavar="PATH")

    for name, helptext in (("split", "stratified train/test split"), ("kfold", "stratified k-fold")):
        p = sub.add_parser(name, help=helptext)
        p.add_argument("--items", required=True, metavar="PATH", help="lines of '<item_id> <class>'")
        p.add_argument("--classes", metavar="PATH", help="resolve class names in --items")
        p.add_argument("--seed", type=int, default=DEFAULT_SEED)
        p.add_argument("--out", required=True, metavar="DIR")
        if name == "split":
            p.add_argument("--fraction", type=_open_fraction, default=0.2, help="test fraction")
        else:
            p.add_argument("--k", type=_k, default=5)

    p = sub.add_parser("simulate", help="generate a synthetic segment")
    p.add_argument("--config", metavar="PATH", help="key=value file; flags override it")
    for f in simulate.SimConfig.__dataclass_fields__.values():
        if f.name == "seed":
            continue
        p.add_argument("--" + f.name.replace("_", "-"), dest=f.name, type=int if f.type == "int" else float)
    p.add_argument("--seed", type=int, default=None, help=f"default {DEFAULT_SEED}")
    p.add_argument("--out", required=True, metavar="DIR")

    p = sub.add_parser("stats", help="per-class box counts and small-box share")
    p.add_argument("--annotations", required=True, metavar="MANIFEST")
    p.add_argument("--classes", required=True, metavar="PATH")
    return parser


# -- helpers ----------------------------------------------------------------


def _manifest_path(path: str) -> str:
    return os.path.join(path, "manifest.tsv") if os.path.isdir(path) else path


def _registry(path: str | None, detections: Sequence | None) -> ClassRegistry:
    if path:
        return ClassRegistry.from_file(path)
    if detections is not None:
        for f in detections.frames:
            if f.detections:
                return ClassRegistry.numbered(len(f.detections[0].scores))
    raise ValidationFailed("cannot infer the class count; pass --classes")


def load_eval_inputs(detections: str, annotations: str, classes: str | None) -> tuple[Sequence, ClassRegistry]:
    """Load, merge and validate a detection dump with its annotations."""
    dets = ingest.load_detections(detections)
    registry = _registry(classes, dets)
    gts = ingest.load_annotations(ingest.load_manifest(_manifest_path(annotations)), registry)
    seq = merge(dets, gts)
    problems = validate_sequence(seq, registry)
    if problems:
        raise ValidationFailed("\n".join(str(v) for v in problems))
    return seq, registry


def _emit(text: str, path: str | None) -> None:
    if path:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _params(args) -> TrackletParams:
    return TrackletParams(args.max_len, args.stride, args.theta)


def _report_output(label: str, report: evaluation.MetricsReport, registry: ClassRegistry) -> str:
    return evaluation.format_table([(label, report)]) + "\n" + evaluation.format_per_class(report, registry)


# -- commands ---------------------------------------------------------------


def cmd_eval_single(args) -> None:
    seq, registry = load_eval_inputs(args.detections, args.annotations, args.classes)
    report = evaluation.evaluate_single_frame(seq, args.iou_thresh, args.conf)
    sys.stdout.write(_report_output("Single", report, registry))
    if args.out:
        _emit(report.to_json(), args.out)


def cmd_eval_multi(args) -> None:
    seq, registry = load_eval_inputs(args.detections, args.annotations, args.classes)
    report = evaluation.evaluate_multi_frame(seq, _params(args), args.scheme, args.iou_thresh, args.conf)
    sys.stdout.write(_report_output(args.scheme.label, report, registry))
    if args.out:
        _emit(report.to_json(), args.out)


def cmd_ablate(args) -> None:
    seq, _ = load_eval_inputs(args.detections, args.annotations, args.classes)
    cells = ablation.ablate(seq, _params(args), args.iou_thresh, args.conf)
    sys.stdout.write(ablation.format_ablation(cells))
    if args.out:
        _emit(json.dumps(ablation.ablation_records(cells), indent=2) + "\n", args.out)


def cmd_track(args) -> None:
    seq = ingest.load_detections(args.detections)
    tracklets = association.build_tracklets(seq, _params(args))
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            association.write_tracklet_dump(tracklets, fh)
    else:
        association.write_tracklet_dump(tracklets, sys.stdout)


def cmd_vote(args) -> None:
    seq = ingest.load_detections(args.detections)
    labeled = voting.relabel(seq, association.build_tracklets(seq, _params(args)), args.scheme)
    _emit(voting.serialize_labeled(labeled), args.out)


def _load_items(args) -> list[partition.LabeledItem]:
    lookup = ClassRegistry.from_file(args.classes).index if args.classes else None
    with open(args.items, encoding="utf-8") as fh:
        try:
            return partition.read_items(fh, lookup)
        except KeyError as exc:
            raise ValidationFailed(f"--items: unknown class {exc.args[0]!r}") from None


def cmd_split(args) -> None:
    items = _load_items(args)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        train, test = partition.stratified_split(items, args.fraction, args.seed)
    for w in caught:
        sys.stderr.write(f"warning: {w.message}\n")
    os.makedirs(args.out, exist_ok=True)
    partition.write_ids(os.path.join(args.out, "train.txt"), train)
    partition.write_ids(os.path.join(args.out, "test.txt"), test)
    sys.stdout.write(f"train {len(train)}\ntest {len(test)}\n")


def cmd_kfold(args) -> None:
    items = _load_items(args)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        folds = partition.stratified_kfold(items, args.k, args.seed)
    for w in caught:
        sys.stderr.write(f"warning: {w.message}\n")
    os.makedirs(args.out, exist_ok=True)
    for i, fold in enumerate(folds):
        partition.write_ids(os.path.join(args.out, f"fold_{i}.txt"), fold)
        sys.stdout.write(f"fold_{i} {len(fold)}\n")


def sim_config_from_args(args) -> simulate.SimConfig:
    values = {}
    if args.config:
        with open(args.config, encoding="utf-8") as fh:
            base = simulate.SimConfig.from_text(fh.read())
        values = {k: getattr(base, k) for k in simulate.SimConfig.__dataclass_fields__}
    for name in simulate.SimConfig.__dataclass_fields__:
        v = getattr(args, name, None)
        if v is not None:
            values[name] = v
    values.setdefault("seed", DEFAULT_SEED)
    return simulate.SimConfig(**values)


def cmd_simulate(args) -> None:
    cfg = sim_config_from_args(args)
    gt, dets = simulate.generate(cfg)
    registry = ClassRegistry.numbered(cfg.num_classes)
    simulate.write_dataset(args.out, gt, dets, registry)
    with open(os.path.join(args.out, "config.txt"), "w", encoding="utf-8") as fh:
        fh.write(cfg.to_text())
    sys.stdout.write(f"frames {len(gt.frames)}\nannotations {len(gt.annotations)}\n"
                     f"detections {dets.num_detections}\n")


def cmd_stats(args) -> None:
    registry = ClassRegistry.from_file(args.classes)
    gts = ingest.load_annotations(ingest.load_manifest(_manifest_path(args.annotations)), registry)
    sys.stdout.write(ingest.dataset_stats(gts.annotations, registry).format(registry))


COMMANDS = {
    "eval-single": cmd_eval_single,
    "eval-multi": cmd_eval_multi,
    "ablate": cmd_ablate,
    "track": cmd_track,
    "vote": cmd_vote,
    "split": cmd_split,
    "kfold": cmd_kfold,
    "simulate": cmd_simulate,
    "stats": cmd_stats,
}


def run(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        COMMANDS[args.command](args)
    except ParseError as exc:
        sys.stderr.write(f"trackvote {args.command}: parse error: {exc}\n")
        return 2
    except (ValidationFailed, OutOfRange, NoAnnotations, ConfigError, TrackvoteError, ValueError, OSError) as exc:
        sys.stderr.write(f"trackvote {args.command}: {exc}\n")
        return 1
    return 0


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
