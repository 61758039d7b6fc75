"""Readers and writers for annotation files, detection dumps and manifests.

File formats
------------
Annotation file (Darknet label convention), one box per line::

    <class_id> <cx> <cy> <w> <h>

with centre and size normalized to the image. Detection dump, one JSON object
per line with keys in this order::

    {"frame": 0, "x": 1.0, "y": 2.0, "w": 3.0, "h": 4.0, "objectness": 0.9, "scores": [...]}

Manifest, tab separated::

    <frame>\t<img_w>\t<img_h>\t<annotation path or ->

In every format ``#`` starts a comment line and blank lines are skipped.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass, field
from typing import IO, Iterable, Iterator

from .errors import OutOfRange, ParseError, SchemaError
from .geometry import BBox, area, from_normalized, to_normalized
from .model import Annotation, ClassRegistry, Detection, Frame, Sequence

DUMP_KEYS = ("frame", "x", "y", "w", "h", "objectness", "scores")

#: Boxes strictly narrower AND shorter than this count as small.
SMALL_BOX_SIDE = 32


def _content_lines(text_or_lines: str | Iterable[str]) -> Iterator[tuple[int, str]]:
    lines = text_or_lines.splitlines() if isinstance(text_or_lines, str) else text_or_lines
    for lineno, raw in enumerate(lines, start=1):
        line = raw.strip()
        if line and not line.startswith("#"):
            yield lineno, line


# -- annotation files -------------------------------------------------------


def parse_annotation_text(text: str, registry: ClassRegistry, img_w: int, img_h: int, frame: int) -> list[Annotation]:
    """Parse one Darknet label file into pixel-space annotations.

    Raises:
        ParseError: malformed line (wrong field count, non-numeric field).
        OutOfRange: class id outside the registry or ratio outside [0, 1].
    """
    if not (img_w > 0 and img_h > 0):
        raise OutOfRange(f"image size {img_w}x{img_h} must be positive")
    out = []
    for lineno, line in _content_lines(text):
        parts = line.split()
        if len(parts) != 5:
            raise ParseError(f"expected 5 fields, got {len(parts)}", line=lineno)
        try:
            cls = int(parts[0])
            cx, cy, w, h = (float(p) for p in parts[1:])
        except ValueError as exc:
            raise ParseError(str(exc), line=lineno) from None
        if not 0 <= cls < len(registry):
            raise OutOfRange(f"class id {cls} outside [0, {len(registry)})", line=lineno)
        try:
            box = from_normalized(cx, cy, w, h, img_w, img_h)
        except OutOfRange as exc:
            raise OutOfRange(str(exc), line=lineno) from None
        out.append(Annotation(frame, box, cls))
    return out


def format_annotation_text(annotations: Iterable[Annotation], img_w: int, img_h: int) -> str:
    lines = []
    for a in annotations:
        cx, cy, w, h = to_normalized(a.box, img_w, img_h)
        lines.append(f"{a.class_index} {cx!r} {cy!r} {w!r} {h!r}\n")
    return "".join(lines)


# -- detection dumps --------------------------------------------------------


def _num(value, key: str, lineno: int) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ParseError(f"{key!r} must be a number, got {value!r}", line=lineno)
    value = float(value)
    if not math.isfinite(value):
        raise ParseError(f"{key!r} is not finite", line=lineno)
    return value


def _parse_dump_record(line: str, lineno: int, extra_keys: tuple[str, ...] = ()) -> dict:
    try:
        rec = json.loads(line)
    except json.JSONDecodeError as exc:
        raise ParseError(f"invalid JSON: {exc.msg}", line=lineno) from None
    if not isinstance(rec, dict):
        raise ParseError("record is not an object", line=lineno)
    expected = set(DUMP_KEYS) | set(extra_keys)
    if set(rec) != expected:
        missing = sorted(expected - set(rec))
        unknown = sorted(set(rec) - expected)
        raise ParseError(f"bad keys (missing {missing}, unknown {unknown})", line=lineno)
    frame = rec["frame"]
    if isinstance(frame, bool) or not isinstance(frame, int) or frame < 0:
        raise ParseError(f"'frame' must be a non-negative integer, got {frame!r}", line=lineno)
    scores = rec["scores"]
    if not isinstance(scores, list):
        raise ParseError("'scores' must be an array", line=lineno)
    rec["scores"] = tuple(_num(v, "scores", lineno) for v in scores)
    for key in ("x", "y", "w", "h", "objectness"):
        rec[key] = _num(rec[key], key, lineno)
    return rec


def _record_detection(rec: dict) -> Detection:
    return Detection(rec["frame"], BBox(rec["x"], rec["y"], rec["w"], rec["h"]), rec["objectness"], rec["scores"])


def _read_text(stream: IO[str] | str) -> Iterable[str]:
    return stream.splitlines() if isinstance(stream, str) else stream


def parse_detection_dump(stream: IO[str] | str) -> Sequence:
    """Read a line-delimited detection dump into a detection-only sequence.

    Detections are grouped by frame and frames sorted ascending; within a frame
    the file order is kept, so a detection's index is its position among the
    records of its frame.

    Raises:
        ParseError: malformed record, with its line number.
        SchemaError: a score vector length differing from earlier records.
    """
    by_frame: dict[int, list[Detection]] = {}
    width = None
    for lineno, line in _content_lines(_read_text(stream)):
        rec = _parse_dump_record(line, lineno)
        if width is None:
            width = len(rec["scores"])
        elif len(rec["scores"]) != width:
            raise SchemaError(f"{len(rec['scores'])} scores, earlier records have {width}", line=lineno)
        by_frame.setdefault(rec["frame"], []).append(_record_detection(rec))
    return Sequence(tuple(Frame(k, tuple(by_frame[k])) for k in sorted(by_frame)))


def _dump_record(d: Detection) -> dict:
    return {
        "frame": d.frame,
        "x": float(d.box.x),
        "y": float(d.box.y),
        "w": float(d.box.w),
        "h": float(d.box.h),
        "objectness": float(d.objectness),
        "scores": [float(s) for s in d.scores],
    }


def serialize_detection_dump(s: Sequence) -> str:
    """Write the detections of ``s`` in dump format.

    Floats use Python's shortest round-trip repr, so
    ``parse_detection_dump(serialize_detection_dump(s)) == s`` for any
    detection-only sequence without empty frames.
    """
    return "".join(json.dumps(_dump_record(d)) + "\n" for f in s.frames for d in f.detections)


# -- manifests --------------------------------------------------------------


@dataclass(frozen=True)
class ManifestEntry:
    frame: int
    image_w: int
    image_h: int
    annotation_path: str | None = None


@dataclass(frozen=True)
class Manifest:
    entries: tuple[ManifestEntry, ...] = ()
    base_dir: str = field(default=".", compare=False)


def parse_manifest(stream: IO[str] | str, base_dir: str = ".") -> Manifest:
    entries: list[ManifestEntry] = []
    for lineno, line in _content_lines(_read_text(stream)):
        parts = line.split("\t")
        if len(parts) != 4:
            raise ParseError(f"expected 4 tab-separated fields, got {len(parts)}", line=lineno)
        try:
            frame, w, h = int(parts[0]), int(parts[1]), int(parts[2])
        except ValueError as exc:
            raise ParseError(str(exc), line=lineno) from None
        if w <= 0 or h <= 0:
            raise OutOfRange(f"image size {w}x{h} must be positive", line=lineno)
        if entries and frame <= entries[-1].frame:
            raise ParseError(f"frame {frame} does not follow {entries[-1].frame}", line=lineno)
        path = parts[3].strip()
        entries.append(ManifestEntry(frame, w, h, None if path == "-" else path))
    return Manifest(tuple(entries), base_dir)


def format_manifest(m: Manifest) -> str:
    return "".join(f"{e.frame}\t{e.image_w}\t{e.image_h}\t{e.annotation_path or '-'}\n" for e in m.entries)


def load_manifest(path: str) -> Manifest:
    with open(path, encoding="utf-8") as fh:
        return parse_manifest(fh, base_dir=os.path.dirname(os.path.abspath(path)))


def load_annotations(manifest: Manifest, registry: ClassRegistry) -> Sequence:
    """Read every annotation file listed in a manifest into one sequence.

    Frames without an annotation file are kept (with their image size) but
    carry no annotations.
    """
    frames = []
    for e in manifest.entries:
        anns: list[Annotation] = []
        if e.annotation_path is not None:
            path = os.path.join(manifest.base_dir, e.annotation_path)
            with open(path, encoding="utf-8") as fh:
                try:
                    anns = parse_annotation_text(fh.read(), registry, e.image_w, e.image_h, e.frame)
                except (ParseError, OutOfRange) as exc:
                    raise type(exc)(f"{path}: {exc}") from None
        frames.append(Frame(e.frame, (), tuple(anns), e.image_w, e.image_h))
    return Sequence(tuple(frames))


def load_detections(path: str) -> Sequence:
    with open(path, encoding="utf-8") as fh:
        return parse_detection_dump(fh)


# -- dataset statistics -----------------------------------------------------


@dataclass(frozen=True)
class ClassStats:
    count: int
    small_count: int
    small_fraction: float
    mean_area: float


@dataclass(frozen=True)
class DatasetStats:
    per_class: tuple[ClassStats, ...]
    total: int
    small_fraction: float
    mean_area: float

    def format(self, registry: ClassRegistry) -> str:
        width = max([len(n) for n in registry.names] + [5])
        lines = [f"{'class':<{width}}  {'count':>6}  {'small':>6}  {'small%':>8}  {'mean area':>10}"]
        rows = [(registry.name(i), c) for i, c in enumerate(self.per_class)]
        rows.append(("total", ClassStats(self.total, sum(c.small_count for c in self.per_class),
                                         self.small_fraction, self.mean_area)))
        for name, c in rows:
            lines.append(
                f"{name:<{width}}  {c.count:>6d}  {c.small_count:>6d}  "
                f"{100 * c.small_fraction:>8.2f}  {c.mean_area:>10.1f}"
            )
        return "\n".join(lines) + "\n"


def is_small(box: BBox) -> bool:
    return box.w < SMALL_BOX_SIDE and box.h < SMALL_BOX_SIDE


def dataset_stats(annotations: Iterable[Annotation], registry: ClassRegistry) -> DatasetStats:
    """Per-class box counts, share of sub-32x32 boxes and mean box area.

    Fractions and means are 0 for classes with no boxes.
    """
    n = len(registry)
    counts = [0] * n
    small = [0] * n
    areas: list[list[float]] = [[] for _ in range(n)]
    for a in annotations:
        if not 0 <= a.class_index < n:
            raise OutOfRange(f"class index {a.class_index} outside [0, {n})")
        counts[a.class_index] += 1
        small[a.class_index] += is_small(a.box)
        areas[a.class_index].append(area(a.box))

    def _frac(k, m):
        return k / m if m else 0.0

    def _mean(xs):
        return math.fsum(xs) / len(xs) if xs else 0.0

    per_class = tuple(ClassStats(counts[i], small[i], _frac(small[i], counts[i]), _mean(areas[i])) for i in range(n))
    total = sum(counts)
    return DatasetStats(per_class, total, _frac(sum(small), total), _mean([x for a in areas for x in a]))
