"""Core value types shared by every stage of the pipeline."""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Iterable

from .errors import DanglingReference, EmptyScores
from .geometry import BBox

#: The seven individuals of the Bristol Zoo troop, alphabetical.
GORILLA_NAMES = ("Afia", "Ayana", "Jock", "Kala", "Kera", "Kukuena", "Touni")


@dataclass(frozen=True)
class ClassRegistry:
    names: tuple[str, ...]

    def __post_init__(self):
        names = tuple(self.names)
        object.__setattr__(self, "names", names)
        if any(not n for n in names):
            raise ValueError("class names must be non-empty")
        if len(set(names)) != len(names):
            raise ValueError("class names must be unique")

    def __len__(self) -> int:
        return len(self.names)

    def index(self, name: str) -> int:
        try:
            return self.names.index(name)
        except ValueError:
            raise KeyError(name) from None

    def name(self, index: int) -> str:
        return self.names[index]

    @classmethod
    def numbered(cls, n: int) -> ClassRegistry:
        return cls(tuple(f"class_{i}" for i in range(n)))

    @classmethod
    def from_file(cls, path) -> ClassRegistry:
        with open(path, encoding="utf-8") as fh:
            return cls(tuple(line.strip() for line in fh if line.strip()))


@dataclass(frozen=True)
class Detection:
    frame: int
    box: BBox
    objectness: float
    scores: tuple[float, ...]


@dataclass(frozen=True)
class Annotation:
    frame: int
    box: BBox
    class_index: int


@dataclass(frozen=True)
class Frame:
    index: int
    detections: tuple[Detection, ...] = ()
    annotations: tuple[Annotation, ...] = ()
    width: int | None = None
    height: int | None = None


@dataclass(frozen=True)
class Sequence:
    """An ordered run of frames from one video segment."""

    frames: tuple[Frame, ...] = ()

    @cached_property
    def _by_index(self) -> dict[int, Frame]:
        return {f.index: f for f in self.frames}

    def frame(self, index: int) -> Frame:
        return self._by_index[index]

    def has_frame(self, index: int) -> bool:
        return index in self._by_index

    def detection(self, frame: int, index: int) -> Detection:
        try:
            dets = self._by_index[frame].detections
        except KeyError:
            raise DanglingReference((frame, index)) from None
        if not 0 <= index < len(dets):
            raise DanglingReference((frame, index))
        return dets[index]

    def detection_refs(self) -> list[tuple[int, int]]:
        return [(f.index, i) for f in self.frames for i in range(len(f.detections))]

    @property
    def num_detections(self) -> int:
        return sum(len(f.detections) for f in self.frames)

    @property
    def annotations(self) -> list[Annotation]:
        return [a for f in self.frames for a in f.annotations]


def top_class(d: Detection) -> tuple[int, float]:
    """Argmax of the score vector; ties go to the lowest class index."""
    if not d.scores:
        raise EmptyScores("detection has no class scores")
    best = 0
    for i, s in enumerate(d.scores):
        if s > d.scores[best]:
            best = i
    return best, d.scores[best]


def merge(detections: Sequence, annotations: Sequence) -> Sequence:
    """Combine a detection-only and an annotation-only sequence frame by frame.

    Image dimensions are taken from whichever side carries them.
    """
    frames: dict[int, Frame] = {}
    for f in detections.frames:
        frames[f.index] = Frame(f.index, f.detections, (), f.width, f.height)
    for f in annotations.frames:
        prev = frames.get(f.index)
        if prev is None:
            frames[f.index] = Frame(f.index, (), f.annotations, f.width, f.height)
        else:
            frames[f.index] = Frame(
                f.index,
                prev.detections,
                prev.annotations + f.annotations,
                prev.width if prev.width is not None else f.width,
                prev.height if prev.height is not None else f.height,
            )
    return Sequence(tuple(frames[k] for k in sorted(frames)))


def sequence_from_records(detections: Iterable[Detection] = (), annotations: Iterable[Annotation] = ()) -> Sequence:
    """Group loose records by frame, keeping the given order within each frame."""
    dets: dict[int, list[Detection]] = {}
    anns: dict[int, list[Annotation]] = {}
    for d in detections:
        dets.setdefault(d.frame, []).append(d)
    for a in annotations:
        anns.setdefault(a.frame, []).append(a)
    keys = sorted(set(dets) | set(anns))
    return Sequence(tuple(Frame(k, tuple(dets.get(k, ())), tuple(anns.get(k, ()))) for k in keys))


@dataclass(frozen=True)
class Violation:
    frame: int | None
    message: str

    def __str__(self):
        where = "sequence" if self.frame is None else f"frame {self.frame}"
        return f"{where}: {self.message}"


def _ratio_ok(v: float) -> bool:
    return 0.0 <= v <= 1.0


def validate_sequence(s: Sequence, registry: ClassRegistry) -> list[Violation]:
    """Check every type invariant of ``s``; an empty list means valid."""
    out: list[Violation] = []
    c = len(registry)
    prev = None
    for f in s.frames:
        if prev is not None and f.index <= prev:
            out.append(Violation(f.index, f"frame index {f.index} not after {prev}"))
        prev = f.index
        for dim, v in (("width", f.width), ("height", f.height)):
            if v is not None and v <= 0:
                out.append(Violation(f.index, f"image {dim} {v} not positive"))
        for i, d in enumerate(f.detections):
            tag = f"detection {i}"
            if d.frame != f.index:
                out.append(Violation(f.index, f"{tag} carries frame {d.frame}"))
            if not d.box.is_valid():
                out.append(Violation(f.index, f"{tag} has invalid box {d.box}"))
            if len(d.scores) != c:
                out.append(Violation(f.index, f"{tag} has {len(d.scores)} scores, expected {c}"))
            if not _ratio_ok(d.objectness):
                out.append(Violation(f.index, f"{tag} objectness {d.objectness} not in [0, 1]"))
            bad = [j for j, v in enumerate(d.scores) if not _ratio_ok(v)]
            if bad:
                out.append(Violation(f.index, f"{tag} scores out of [0, 1] at classes {bad}"))
        for i, a in enumerate(f.annotations):
            tag = f"annotation {i}"
            if a.frame != f.index:
                out.append(Violation(f.index, f"{tag} carries frame {a.frame}"))
            if not a.box.is_valid():
                out.append(Violation(f.index, f"{tag} has invalid box {a.box}"))
            if not 0 <= a.class_index < c:
                out.append(Violation(f.index, f"{tag} class {a.class_index} outside [0, {c})"))
    return out
