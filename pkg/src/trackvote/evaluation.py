"""Class-aware matching, VOC-style AP and mAP reports.

Only classes that have ground truth take part in mAP and in the macro
precision/recall summaries; predictions of absent classes still count as
false positives in the pooled (micro) precision.
"""

from __future__ import annotations

import json
import statistics
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from typing import Iterable

from .association import TrackletParams, build_tracklets
from .errors import NoAnnotations
from .geometry import iou, iou_matrix
from .model import Annotation, ClassRegistry, Sequence, top_class
from .voting import LabeledDetection, VoteScheme, relabel

ALL_POINT = "all-point"
ELEVEN_POINT = "11-point"
#: Interpolation used for every reported AP.
AP_INTERPOLATION = ALL_POINT

DEFAULT_IOU_THRESH = 0.5
DEFAULT_OPERATING_CONF = 0.25


@dataclass
class MatchResult:
    """Per-class ranked TP/FP flags plus ground-truth and miss counts."""

    entries: dict[int, list[tuple[float, bool]]] = field(default_factory=dict)
    gt_counts: dict[int, int] = field(default_factory=dict)
    false_negatives: dict[int, int] = field(default_factory=dict)

    def classes(self) -> list[int]:
        return sorted(set(self.entries) | set(self.gt_counts))

    def merged(self, other: MatchResult) -> MatchResult:
        """Pool two results, e.g. from independent sequences."""
        out = MatchResult()
        for c in sorted(set(self.classes()) | set(other.classes())):
            ranked = self.entries.get(c, []) + other.entries.get(c, [])
            ranked.sort(key=lambda e: -e[0])
            out.entries[c] = ranked
            out.gt_counts[c] = self.gt_counts.get(c, 0) + other.gt_counts.get(c, 0)
            out.false_negatives[c] = self.false_negatives.get(c, 0) + other.false_negatives.get(c, 0)
        return out


def match(preds: Iterable[LabeledDetection], gts: Iterable[Annotation], iou_thresh: float = DEFAULT_IOU_THRESH) -> MatchResult:
    """Greedily match labelled predictions to same-class ground truth.

    Predictions are processed by descending ``rank_score`` (ties: frame, then
    detection index). Each claims the unclaimed ground-truth box of its class
    in its frame with the highest IoU, provided that IoU is at least
    ``iou_thresh``; otherwise it is a false positive. Ground truth left
    unclaimed counts as a false negative.
    """
    gt_by_key: dict[tuple[int, int], list[Annotation]] = {}
    result = MatchResult()
    for a in gts:
        gt_by_key.setdefault((a.frame, a.class_index), []).append(a)
        result.gt_counts[a.class_index] = result.gt_counts.get(a.class_index, 0) + 1

    claimed: set[tuple[int, int, int]] = set()
    for p in sorted(preds, key=lambda p: (-p.rank_score, p.frame, p.index)):
        candidates = gt_by_key.get((p.frame, p.class_index), ())
        best, best_iou = -1, -1.0
        for g, a in enumerate(candidates):
            if (p.frame, p.class_index, g) in claimed:
                continue
            v = iou(p.box, a.box)
            if v > best_iou:
                best, best_iou = g, v
        hit = best >= 0 and best_iou >= iou_thresh
        if hit:
            claimed.add((p.frame, p.class_index, best))
        result.entries.setdefault(p.class_index, []).append((p.rank_score, hit))

    for c, n in result.gt_counts.items():
        tp = sum(1 for _, hit in result.entries.get(c, ()) if hit)
        result.false_negatives[c] = n - tp
    return result


def average_precision(entries: Iterable[tuple[float, bool]], gt_count: int, method: str = AP_INTERPOLATION) -> float:
    """Area under the interpolated precision/recall curve of one class.

    ``entries`` are ``(score, is_true_positive)`` pairs; equal scores keep
    their given order. With all-point interpolation every true positive
    adds ``1 / gt_count`` of recall weighted by the best precision reached at
    that rank or later.
    """
    if gt_count <= 0:
        return 0.0
    ranked = sorted(entries, key=lambda e: -e[0])
    # precision at each rank as an exact (true positives, rank) pair
    envelope = []
    tp = 0
    for rank, (_, hit) in enumerate(ranked, start=1):
        tp += hit
        envelope.append((tp, rank))
    for k in range(len(envelope) - 2, -1, -1):
        (a, b), (c, d) = envelope[k], envelope[k + 1]
        if c * b > a * d:
            envelope[k] = envelope[k + 1]

    if method == ALL_POINT:
        # exact rational sum, so e.g. 1/2 * 1 + 1/2 * 2/3 comes out as float(5/6)
        steps: dict[tuple[int, int], int] = {}
        for k, (_, hit) in enumerate(ranked):
            if hit:
                steps[envelope[k]] = steps.get(envelope[k], 0) + 1
        total = sum((Fraction(n * a, b) for (a, b), n in steps.items()), Fraction(0))
        return float(total / gt_count)
    if method == ELEVEN_POINT:
        recall = []
        tp = 0
        for _, hit in ranked:
            tp += hit
            recall.append(tp / gt_count)
        total = 0.0
        for r in (i / 10 for i in range(11)):
            total += next((a / b for (a, b), rec in zip(envelope, recall) if rec >= r), 0.0)
        return total / 11
    raise ValueError(f"unknown interpolation {method!r}")


@dataclass(frozen=True)
class ClassMetrics:
    ap: float
    precision: float
    recall: float
    gt_count: int
    tp: int
    fp: int


@dataclass(frozen=True)
class MetricsReport:
    per_class: dict[int, ClassMetrics]
    map: float
    map_std: float
    precision: float
    precision_std: float
    recall: float
    recall_std: float
    micro_precision: float
    micro_recall: float

    def to_dict(self) -> dict:
        d = asdict(self)
        d["per_class"] = {str(k): asdict(v) for k, v in sorted(self.per_class.items())}
        return d

    @classmethod
    def from_dict(cls, d: dict) -> MetricsReport:
        d = dict(d)
        d["per_class"] = {int(k): ClassMetrics(**v) for k, v in d["per_class"].items()}
        return cls(**d)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    def to_text(self) -> str:
        """Flat ``key=value`` lines."""
        lines = []
        for key in ("map", "map_std", "precision", "precision_std", "recall", "recall_std",
                    "micro_precision", "micro_recall"):
            lines.append(f"{key}={getattr(self, key)!r}")
        for c, m in sorted(self.per_class.items()):
            for key, value in asdict(m).items():
                lines.append(f"class.{c}.{key}={value!r}")
        return "\n".join(lines) + "\n"


def summarize(m: MatchResult, operating_conf: float = DEFAULT_OPERATING_CONF) -> MetricsReport:
    """Turn a match into per-class AP/precision/recall and their summaries.

    Precision and recall count only predictions with ``rank_score >=
    operating_conf``; precision is 0 for a class with nothing retained.
    The ``*_std`` fields are population standard deviations across classes.
    """
    per_class: dict[int, ClassMetrics] = {}
    kept_tp = kept_fp = 0
    for c in m.classes():
        entries = m.entries.get(c, [])
        kept = [hit for score, hit in entries if score >= operating_conf]
        tp = sum(kept)
        fp = len(kept) - tp
        kept_tp += tp
        kept_fp += fp
        gt = m.gt_counts.get(c, 0)
        if gt == 0:
            continue
        per_class[c] = ClassMetrics(
            ap=average_precision(entries, gt),
            precision=tp / len(kept) if kept else 0.0,
            recall=tp / gt,
            gt_count=gt,
            tp=tp,
            fp=fp,
        )
    total_gt = sum(m.gt_counts.values())
    aps = [v.ap for v in per_class.values()]
    precs = [v.precision for v in per_class.values()]
    recs = [v.recall for v in per_class.values()]

    def _mean(xs):
        return statistics.mean(xs) if xs else 0.0

    def _std(xs):
        return statistics.pstdev(xs) if xs else 0.0

    return MetricsReport(
        per_class=per_class,
        map=_mean(aps),
        map_std=_std(aps),
        precision=_mean(precs),
        precision_std=_std(precs),
        recall=_mean(recs),
        recall_std=_std(recs),
        micro_precision=kept_tp / (kept_tp + kept_fp) if kept_tp + kept_fp else 0.0,
        micro_recall=kept_tp / total_gt if total_gt else 0.0,
    )


def label_single_frame(s: Sequence) -> list[LabeledDetection]:
    """Label each detection with its own argmax, ranked by objectness x top score."""
    out = []
    for f in s.frames:
        for i, d in enumerate(f.detections):
            cls, score = top_class(d)
            out.append(LabeledDetection(f.index, i, d, cls, d.objectness * score))
    return out


def label_multi_frame(s: Sequence, p: TrackletParams, scheme: VoteScheme) -> list[LabeledDetection]:
    return relabel(s, build_tracklets(s, p), scheme)


def _require_annotations(s: Sequence) -> list[Annotation]:
    gts = s.annotations
    if not gts:
        raise NoAnnotations("sequence carries no ground-truth annotations")
    return gts


def evaluate_single_frame(s: Sequence, iou_thresh: float = DEFAULT_IOU_THRESH,
                          operating_conf: float = DEFAULT_OPERATING_CONF) -> MetricsReport:
    gts = _require_annotations(s)
    return summarize(match(label_single_frame(s), gts, iou_thresh), operating_conf)


def evaluate_multi_frame(s: Sequence, p: TrackletParams = TrackletParams(), scheme: VoteScheme = VoteScheme.MAXIMUM,
                         iou_thresh: float = DEFAULT_IOU_THRESH,
                         operating_conf: float = DEFAULT_OPERATING_CONF) -> MetricsReport:
    """Build tracklets, vote identities, then match and summarise."""
    gts = _require_annotations(s)
    return summarize(match(label_multi_frame(s, p, scheme), gts, iou_thresh), operating_conf)


def stratified_eval_folds(reports: list[MetricsReport]) -> MetricsReport:
    """Average every metric over cross-validation folds.

    A class's entries are averaged over the folds in which it was evaluated.
    """
    if not reports:
        raise ValueError("need at least one fold report")
    classes = sorted({c for r in reports for c in r.per_class})
    per_class = {}
    for c in classes:
        rows = [r.per_class[c] for r in reports if c in r.per_class]
        per_class[c] = ClassMetrics(**{
            key: statistics.mean(getattr(row, key) for row in rows) for key in ClassMetrics.__dataclass_fields__
        })
    scalars = {
        key: statistics.mean(getattr(r, key) for r in reports)
        for key in MetricsReport.__dataclass_fields__ if key != "per_class"
    }
    return MetricsReport(per_class=per_class, **scalars)


def identity_accuracy(labeled: Iterable[LabeledDetection], gts: Iterable[Annotation],
                      iou_thresh: float = DEFAULT_IOU_THRESH) -> tuple[int, int]:
    """Count detections whose label equals the class of the ground truth they cover.

    Each detection is compared with the best-overlapping box in its frame,
    whatever its class; detections overlapping nothing at ``iou_thresh`` are
    left out.

    Returns:
        ``(correct, compared)``.
    """
    by_frame: dict[int, list[Annotation]] = {}
    for a in gts:
        by_frame.setdefault(a.frame, []).append(a)
    preds_by_frame: dict[int, list[LabeledDetection]] = {}
    for ld in labeled:
        preds_by_frame.setdefault(ld.frame, []).append(ld)
    correct = compared = 0
    for frame, preds in preds_by_frame.items():
        anns = by_frame.get(frame)
        if not anns:
            continue
        overlaps = iou_matrix([p.box for p in preds], [a.box for a in anns])
        best = overlaps.argmax(axis=1)
        for k, p in enumerate(preds):
            if overlaps[k, best[k]] < iou_thresh:
                continue
            compared += 1
            correct += anns[best[k]].class_index == p.class_index
    return correct, compared


def _pct(mean: float, std: float) -> str:
    return f"{100 * mean:.1f} (± {100 * std:.1f})"


TABLE_HEADER = ("Detection", "mAP (%)", "Precision (%)", "Recall (%)")


def format_table(rows: list[tuple[str, MetricsReport]]) -> str:
    """Render reports as rows of a Detection / mAP / Precision / Recall table."""
    body = [TABLE_HEADER] + [
        (label, _pct(r.map, r.map_std), _pct(r.precision, r.precision_std), _pct(r.recall, r.recall_std))
        for label, r in rows
    ]
    widths = [max(len(row[i]) for row in body) for i in range(4)]
    return "".join("  ".join(cell.ljust(w) for cell, w in zip(row, widths)).rstrip() + "\n" for row in body)


def format_per_class(r: MetricsReport, registry: ClassRegistry | None = None) -> str:
    names = {c: (registry.name(c) if registry and c < len(registry) else f"class_{c}") for c in r.per_class}
    width = max([len(n) for n in names.values()] + [5])
    lines = [f"{'class':<{width}}  {'AP':>6}  {'P':>6}  {'R':>6}  {'GT':>5}  {'TP':>5}  {'FP':>5}"]
    for c, m in sorted(r.per_class.items()):
        lines.append(
            f"{names[c]:<{width}}  {100 * m.ap:>6.2f}  {100 * m.precision:>6.2f}  {100 * m.recall:>6.2f}  "
            f"{m.gt_count:>5}  {m.tp:>5}  {m.fp:>5}"
        )
    lines.append(f"micro precision {100 * r.micro_precision:.2f}  micro recall {100 * r.micro_recall:.2f}")
    return "\n".join(lines) + "\n"
