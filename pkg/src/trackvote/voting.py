"""Tracklet identity voting and per-detection relabelling."""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass
from fractions import Fraction
from typing import IO, Iterable

from .association import Tracklet
from .errors import DanglingReference, EmptyScores, ParseError, PartitionError
from .geometry import BBox
from .ingest import _content_lines, _dump_record, _parse_dump_record, _read_text
from .model import Detection, Sequence


class VoteScheme(enum.Enum):
    AVERAGE = "avg"
    MAXIMUM = "max"

    @classmethod
    def parse(cls, text: str) -> VoteScheme:
        text = text.lower()
        for scheme in cls:
            if text in (scheme.value, scheme.name.lower()):
                return scheme
        raise ValueError(f"unknown vote scheme {text!r} (expected avg or max)")

    @property
    def label(self) -> str:
        return self.name.capitalize()


@dataclass(frozen=True)
class VotedIdentity:
    class_index: int
    vote_score: float


@dataclass(frozen=True)
class LabeledDetection:
    """A detection together with the identity it is evaluated under."""

    frame: int
    index: int
    detection: Detection
    class_index: int
    rank_score: float

    @property
    def box(self) -> BBox:
        return self.detection.box


def _argmax(values) -> int:
    best = 0
    for i, v in enumerate(values):
        if v > values[best]:
            best = i
    return best


def vote(t: Tracklet, s: Sequence, scheme: VoteScheme) -> VotedIdentity:
    """Pick one identity for a tracklet.

    ``MAXIMUM`` takes the class of the single highest score seen in any
    member. ``AVERAGE`` takes the argmax of the elementwise mean score vector.
    Class ties go to the lowest index in both schemes.

    Means are accumulated exactly, so the result does not depend on member
    order and the average score never exceeds the maximum one.
    """
    if not t.members:
        raise ValueError("cannot vote on an empty tracklet")
    vectors = [s.detection(f, i).scores for f, i in t.members]
    width = len(vectors[0])
    if width == 0:
        raise EmptyScores("detections have no class scores")
    if any(len(v) != width for v in vectors):
        raise ValueError("tracklet members disagree on the number of classes")

    if scheme is VoteScheme.MAXIMUM:
        col_max = [max(v[c] for v in vectors) for c in range(width)]
        k = _argmax(col_max)
        return VotedIdentity(k, float(col_max[k]))

    sums = [sum((Fraction(v[c]) for v in vectors), Fraction(0)) for c in range(width)]
    k = _argmax(sums)
    return VotedIdentity(k, float(sums[k] / len(vectors)))


def relabel(s: Sequence, tracklets: Iterable[Tracklet], scheme: VoteScheme) -> list[LabeledDetection]:
    """Give every detection the identity voted for its tracklet.

    The ranking score used downstream for AP is ``objectness * vote_score``.

    Returns:
        One entry per detection, ordered by frame then detection index.

    Raises:
        PartitionError: a detection is covered by no tracklet or by several.
        DanglingReference: a tracklet member does not exist in ``s``.
    """
    assigned: dict[tuple[int, int], VotedIdentity] = {}
    for t in tracklets:
        identity = vote(t, s, scheme)
        for ref in t.members:
            if ref in assigned:
                raise PartitionError(f"detection {ref} belongs to more than one tracklet")
            assigned[ref] = identity
    refs = s.detection_refs()
    missing = [r for r in refs if r not in assigned]
    if missing:
        raise PartitionError(f"{len(missing)} detection(s) not covered by any tracklet, first {missing[0]}")
    if len(assigned) != len(refs):
        extra = sorted(set(assigned) - set(refs))
        raise DanglingReference(extra[0])

    out = []
    for frame, idx in refs:
        d = s.detection(frame, idx)
        v = assigned[(frame, idx)]
        out.append(LabeledDetection(frame, idx, d, v.class_index, d.objectness * v.vote_score))
    return out


def serialize_labeled(labeled: Iterable[LabeledDetection]) -> str:
    """Detection dump lines extended with ``voted_class`` and ``rank_score``."""
    lines = []
    for ld in labeled:
        rec = _dump_record(ld.detection)
        rec["voted_class"] = ld.class_index
        rec["rank_score"] = float(ld.rank_score)
        lines.append(json.dumps(rec) + "\n")
    return "".join(lines)


def parse_labeled(stream: IO[str] | str) -> list[LabeledDetection]:
    out = []
    per_frame: dict[int, int] = {}
    for lineno, line in _content_lines(_read_text(stream)):
        rec = _parse_dump_record(line, lineno, extra_keys=("voted_class", "rank_score"))
        cls = rec["voted_class"]
        if isinstance(cls, bool) or not isinstance(cls, int) or cls < 0:
            raise ParseError(f"'voted_class' must be a non-negative integer, got {cls!r}", line=lineno)
        rank = rec["rank_score"]
        if isinstance(rank, bool) or not isinstance(rank, (int, float)):
            raise ParseError(f"'rank_score' must be a number, got {rank!r}", line=lineno)
        d = Detection(rec["frame"], BBox(rec["x"], rec["y"], rec["w"], rec["h"]), rec["objectness"], rec["scores"])
        idx = per_frame.get(d.frame, 0)
        per_frame[d.frame] = idx + 1
        out.append(LabeledDetection(d.frame, idx, d, cls, float(rank)))
    return out
