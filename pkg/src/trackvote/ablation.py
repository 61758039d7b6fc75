"""Tracklet length / stride / association threshold sweeps."""

from __future__ import annotations

from dataclasses import dataclass, replace

from .association import TrackletParams
from .evaluation import DEFAULT_IOU_THRESH, DEFAULT_OPERATING_CONF, MetricsReport, evaluate_multi_frame
from .model import Sequence
from .voting import VoteScheme

LENGTHS = (3, 5, 10)
STRIDES = (1, 3, 5)
THRESHOLDS = (0.25, 0.5, 0.75)


@dataclass(frozen=True)
class AblationCell:
    axis: str  # "max_len", "stride" or "theta"
    value: float
    scheme: VoteScheme
    params: TrackletParams
    report: MetricsReport


def ablate(s: Sequence, base: TrackletParams = TrackletParams(), iou_thresh: float = DEFAULT_IOU_THRESH,
           operating_conf: float = DEFAULT_OPERATING_CONF, lengths=LENGTHS, strides=STRIDES,
           thresholds=THRESHOLDS) -> list[AblationCell]:
    """Vary one tracklet parameter at a time around ``base``, for both schemes."""
    cells = []
    for axis, values in (("max_len", lengths), ("stride", strides), ("theta", thresholds)):
        for scheme in (VoteScheme.AVERAGE, VoteScheme.MAXIMUM):
            for v in values:
                p = replace(base, **{axis: v})
                cells.append(AblationCell(axis, v, scheme, p,
                                          evaluate_multi_frame(s, p, scheme, iou_thresh, operating_conf)))
    return cells


_TITLES = {"max_len": "Tracklet Length", "stride": "Tracklet Stride", "theta": "Association Threshold"}


def _column(axis: str, v) -> str:
    if axis == "theta":
        return f"IoU>{v:g}"
    return f"{v} frame" if v == 1 else f"{v} frames"


def format_ablation(cells: list[AblationCell]) -> str:
    """Render cells as three blocks of Average/Maximum rows of mAP (± std)."""
    rows: list[list[str]] = [["", "mAP (%)"]]
    for axis in ("max_len", "stride", "theta"):
        block = [c for c in cells if c.axis == axis]
        if not block:
            continue
        values = list(dict.fromkeys(c.value for c in block))
        rows.append([_TITLES[axis]] + [_column(axis, v) for v in values])
        for scheme in (VoteScheme.AVERAGE, VoteScheme.MAXIMUM):
            by_value = {c.value: c.report for c in block if c.scheme is scheme}
            rows.append([scheme.label] + [
                f"{100 * by_value[v].map:.1f} (± {100 * by_value[v].map_std:.1f})" for v in values
            ])
    ncol = max(len(r) for r in rows)
    widths = [max(len(r[i]) for r in rows if i < len(r)) for i in range(ncol)]
    return "".join("  ".join(cell.ljust(widths[i]) for i, cell in enumerate(r)).rstrip() + "\n" for r in rows)


def ablation_records(cells: list[AblationCell]) -> list[dict]:
    return [
        {"axis": c.axis, "value": c.value, "scheme": c.scheme.value, "max_len": c.params.max_len,
         "stride": c.params.stride, "theta": c.params.theta, "report": c.report.to_dict()}
        for c in cells
    ]
