"""Greedy IoU association between frames and tracklet construction."""

from __future__ import annotations

from dataclasses import dataclass
from typing import IO, Iterable

import numpy as np

from .geometry import iou
from .model import Detection, Sequence

DetRef = tuple[int, int]  # (frame index, detection index within frame)


@dataclass(frozen=True)
class TrackletParams:
    max_len: int = 5
    stride: int = 1
    theta: float = 0.5

    def __post_init__(self):
        if not isinstance(self.max_len, int) or self.max_len < 1:
            raise ValueError(f"max_len must be an integer >= 1, got {self.max_len!r}")
        if not isinstance(self.stride, int) or self.stride < 1:
            raise ValueError(f"stride must be an integer >= 1, got {self.stride!r}")
        if not 0.0 <= self.theta <= 1.0:
            raise ValueError(f"theta must lie in [0, 1], got {self.theta!r}")


@dataclass(frozen=True)
class Tracklet:
    members: tuple[DetRef, ...]

    @property
    def length(self) -> int:
        return len(self.members)

    def __len__(self) -> int:
        return len(self.members)


def _overlapping_pairs(dets_a: list[Detection], dets_b: list[Detection]) -> Iterable[tuple[int, int]]:
    # Cheap vectorised pre-filter; the exact IoU is recomputed per candidate.
    if not dets_a or not dets_b:
        return ()
    a = np.array([(d.box.x, d.box.y, d.box.x2, d.box.y2) for d in dets_a])
    b = np.array([(d.box.x, d.box.y, d.box.x2, d.box.y2) for d in dets_b])
    iw = np.minimum(a[:, None, 2], b[None, :, 2]) - np.maximum(a[:, None, 0], b[None, :, 0])
    ih = np.minimum(a[:, None, 3], b[None, :, 3]) - np.maximum(a[:, None, 1], b[None, :, 1])
    ia, ib = np.nonzero((iw > 0) & (ih > 0))
    return zip(ia.tolist(), ib.tolist())


def associate_frames(dets_a: list[Detection], dets_b: list[Detection], theta: float) -> list[tuple[int, int]]:
    """Uniquely match detections of two frames by descending IoU.

    Every pair with IoU strictly above ``theta`` is a candidate. Candidates are
    accepted greedily from the highest IoU down, skipping any pair whose
    detection on either side is already taken. Equal IoUs are resolved by the
    lower index in ``dets_a``, then the lower index in ``dets_b``.

    Returns:
        Accepted ``(index_a, index_b)`` pairs in acceptance order.
    """
    candidates = []
    for i, j in _overlapping_pairs(dets_a, dets_b):
        v = iou(dets_a[i].box, dets_b[j].box)
        if v > theta:
            candidates.append((-v, i, j))
    candidates.sort()
    used_a: set[int] = set()
    used_b: set[int] = set()
    pairs = []
    for _, i, j in candidates:
        if i in used_a or j in used_b:
            continue
        used_a.add(i)
        used_b.add(j)
        pairs.append((i, j))
    return pairs


def build_tracklets(s: Sequence, p: TrackletParams = TrackletParams()) -> list[Tracklet]:
    """Partition every detection of ``s`` into tracklets.

    Association runs only between frames exactly ``p.stride`` apart on the
    lattice anchored at the first frame of the sequence; detections on frames
    off that lattice become singletons. A missing lattice frame ends all open
    chains. A chain that has reached ``p.max_len`` is closed, and a detection
    matched to its tail starts a fresh chain.

    Returns:
        Tracklets ordered by their first member.
    """
    if not s.frames:
        return []
    origin = s.frames[0].index
    done: list[list[DetRef]] = []
    open_chains: dict[int, list[DetRef]] = {}  # detection index in prev frame -> chain
    prev_frame = None

    for frame in s.frames:
        t = frame.index
        refs = [(t, i) for i in range(len(frame.detections))]
        if (t - origin) % p.stride:
            done.extend([r] for r in refs)
            continue

        new_open: dict[int, list[DetRef]] = {}
        if prev_frame is not None and prev_frame.index + p.stride == t:
            for i, j in associate_frames(list(prev_frame.detections), list(frame.detections), p.theta):
                chain = open_chains.pop(i)
                if len(chain) < p.max_len:
                    chain.append((t, j))
                    new_open[j] = chain
                else:
                    done.append(chain)
                    new_open[j] = [(t, j)]
        done.extend(open_chains.values())
        for j, ref in enumerate(refs):
            if j not in new_open:
                new_open[j] = [ref]
        open_chains = new_open
        prev_frame = frame

    done.extend(open_chains.values())
    done.sort(key=lambda c: c[0])
    return [Tracklet(tuple(c)) for c in done]


def write_tracklet_dump(tracklets: Iterable[Tracklet], out: IO[str]) -> None:
    """Debug dump: one ``tracklet_id<TAB>frame<TAB>det_index`` line per member."""
    out.write("# tracklet_id\tframe\tdet_index\n")
    for tid, t in enumerate(tracklets):
        for frame, idx in t.members:
            out.write(f"{tid}\t{frame}\t{idx}\n")
