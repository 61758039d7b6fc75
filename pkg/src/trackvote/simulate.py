"""Synthetic ground truth and noisy detector output.

Tracks are laid out on a grid with one cell per track, so boxes of different
tracks never overlap. Each box moves linearly inside its cell and bounces off
the cell walls.

Score model, shared by :func:`generate` and :func:`vote_accuracy_oracle`:
each detection first draws its winning class (the true class with probability
``per_frame_top1_accuracy``, otherwise a uniformly chosen other class). All
classes get background scores from ``N(wrong_score_mean, score_sigma)``
clipped to [0, 1]. On a correct frame the true class instead scores
``N(correct_score_mean, score_sigma)``. The largest value is then swapped
into the winner's slot so the winner is the strict argmax.
"""

from __future__ import annotations

import dataclasses
import math
import os
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError
from .geometry import BBox
from .ingest import ManifestEntry, Manifest, format_annotation_text, format_manifest, serialize_detection_dump
from .model import Annotation, ClassRegistry, Detection, Frame, Sequence
from .voting import VoteScheme


@dataclass(frozen=True)
class SimConfig:
    num_classes: int = 7
    num_tracks: int = 20
    frames: int = 50
    image_w: int = 1280
    image_h: int = 720
    per_frame_top1_accuracy: float = 0.85
    correct_score_mean: float = 0.8
    wrong_score_mean: float = 0.2
    score_sigma: float = 0.1
    objectness_mean: float = 0.9
    detection_dropout: float = 0.0
    jitter_sigma: float = 0.0
    speed: float = 1.0  # pixels per frame
    seed: int = 0

    _RATIOS = ("per_frame_top1_accuracy", "correct_score_mean", "wrong_score_mean", "objectness_mean",
               "detection_dropout")
    _POSITIVE = ("num_classes", "num_tracks", "frames", "image_w", "image_h")

    def __post_init__(self):
        for name in self._POSITIVE:
            v = getattr(self, name)
            if not isinstance(v, int) or v <= 0:
                raise ConfigError(f"{name} must be a positive integer, got {v!r}")
        for name in self._RATIOS:
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ConfigError(f"{name} must lie in [0, 1], got {v!r}")
        for name in ("score_sigma", "jitter_sigma", "speed"):
            if not getattr(self, name) >= 0:
                raise ConfigError(f"{name} must be non-negative")
        if self.num_classes == 1 and self.per_frame_top1_accuracy < 1.0:
            raise ConfigError("a single class cannot be misclassified; set per_frame_top1_accuracy=1")

    @classmethod
    def from_text(cls, text: str) -> SimConfig:
        """Parse flat ``key=value`` lines (``#`` comments allowed)."""
        fields = {f.name: f.type for f in dataclasses.fields(cls)}
        values = {}
        for lineno, raw in enumerate(text.splitlines(), start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            key, sep, value = (p.strip() for p in line.partition("="))
            if not sep:
                raise ConfigError(f"line {lineno}: expected key=value")
            if key not in fields:
                raise ConfigError(f"line {lineno}: unknown key {key!r}")
            try:
                values[key] = int(value) if fields[key] == "int" else float(value)
            except ValueError:
                raise ConfigError(f"line {lineno}: bad value for {key}: {value!r}") from None
        return cls(**values)

    def to_text(self) -> str:
        return "".join(f"{f.name}={getattr(self, f.name)}\n" for f in dataclasses.fields(self))


def draw_scores(rng: np.random.Generator, true_classes: np.ndarray, num_classes: int, accuracy: float,
                correct_mean: float, wrong_mean: float, sigma: float) -> np.ndarray:
    """Draw one score vector per entry of ``true_classes`` (see module docstring)."""
    n = len(true_classes)
    correct = rng.random(n) < accuracy
    if num_classes == 1:
        correct[:] = True
    offset = rng.integers(1, max(num_classes, 2), n)
    winner = np.where(correct, true_classes, (true_classes + offset) % num_classes)
    scores = np.clip(rng.normal(wrong_mean, sigma, (n, num_classes)), 0.0, 1.0)
    top = np.clip(rng.normal(correct_mean, sigma, n), 0.0, 1.0)
    rows = np.arange(n)
    scores[rows[correct], true_classes[correct]] = top[correct]

    biggest = scores.argmax(axis=1)
    big_val = scores[rows, biggest].copy()
    scores[rows, biggest] = scores[rows, winner]
    scores[rows, winner] = big_val

    # break exact ties (only possible at the clip bounds) in the winner's favour
    zero = scores[rows, winner] == 0.0
    scores[rows[zero], winner[zero]] = np.nextafter(0.0, 1.0)
    win_val = scores[rows, winner][:, None]
    tied = scores == win_val
    tied[rows, winner] = False
    scores[tied] = np.nextafter(np.broadcast_to(win_val, scores.shape)[tied], 0.0)
    return scores


def _grid(c: SimConfig) -> tuple[int, int, float, float]:
    cols = max(1, math.ceil(math.sqrt(c.num_tracks * c.image_w / c.image_h)))
    rows = math.ceil(c.num_tracks / cols)
    return cols, rows, c.image_w / cols, c.image_h / rows


def _bounce(start: np.ndarray, velocity: np.ndarray, t: np.ndarray, span: np.ndarray) -> np.ndarray:
    # position on [0, span] after moving t frames with reflection at both ends
    raw = start + velocity * t
    safe = np.where(span > 0, span, 1.0)
    phase = np.mod(raw, 2 * safe)
    pos = np.where(phase > safe, 2 * safe - phase, phase)
    return np.where(span > 0, pos, 0.0)


def generate(c: SimConfig) -> tuple[Sequence, Sequence]:
    """Simulate one video segment.

    Returns:
        ``(ground_truth, detections)``: the first carries annotations and
        image sizes for every frame, the second the detector output (frames
        with every detection dropped are kept, empty).
    """
    rng = np.random.default_rng(c.seed)
    n = c.num_tracks
    cols, _, cell_w, cell_h = _grid(c)
    side = 0.6 * min(cell_w, cell_h)
    track = np.arange(n)
    cell_x = (track % cols) * cell_w
    cell_y = (track // cols) * cell_h
    span_x = np.full(n, cell_w - side)
    span_y = np.full(n, cell_h - side)

    classes = rng.permutation(track % c.num_classes)
    start_x = rng.random(n) * span_x
    start_y = rng.random(n) * span_y
    angle = rng.random(n) * 2 * math.pi
    vx, vy = c.speed * np.cos(angle), c.speed * np.sin(angle)

    gt_frames = []
    det_frames = []
    for t in range(c.frames):
        gx = cell_x + _bounce(start_x, vx, t, span_x)
        gy = cell_y + _bounce(start_y, vy, t, span_y)
        keep = rng.random(n) >= c.detection_dropout
        jitter = rng.normal(0.0, c.jitter_sigma, (n, 4)) if c.jitter_sigma > 0 else np.zeros((n, 4))
        objectness = np.clip(rng.normal(c.objectness_mean, 0.05, n), 0.0, 1.0)
        scores = draw_scores(rng, classes, c.num_classes, c.per_frame_top1_accuracy,
                             c.correct_score_mean, c.wrong_score_mean, c.score_sigma)

        anns = tuple(Annotation(t, BBox(float(gx[k]), float(gy[k]), side, side), int(classes[k])) for k in range(n))
        dets = []
        for k in np.flatnonzero(keep):
            box = BBox(float(gx[k] + jitter[k, 0]), float(gy[k] + jitter[k, 1]),
                       float(max(1.0, side + jitter[k, 2])), float(max(1.0, side + jitter[k, 3])))
            dets.append(Detection(t, box, float(objectness[k]), tuple(float(v) for v in scores[k])))
        gt_frames.append(Frame(t, (), anns, c.image_w, c.image_h))
        det_frames.append(Frame(t, tuple(dets), (), c.image_w, c.image_h))
    return Sequence(tuple(gt_frames)), Sequence(tuple(det_frames))


def vote_accuracy_oracle(per_frame_top1_accuracy: float, tracklet_len: int, num_classes: int,
                         scheme: VoteScheme, trials: int, seed: int = 0, *,
                         correct_score_mean: float = 0.8, wrong_score_mean: float = 0.2,
                         score_sigma: float = 0.1) -> float:
    """Monte-Carlo accuracy of a voted identity over ``tracklet_len`` frames.

    Works directly on score vectors from :func:`draw_scores`, bypassing
    association and relabelling entirely.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    rng = np.random.default_rng(seed)
    truth = rng.integers(0, num_classes, trials)
    scores = draw_scores(rng, np.repeat(truth, tracklet_len), num_classes, per_frame_top1_accuracy,
                         correct_score_mean, wrong_score_mean, score_sigma)
    scores = scores.reshape(trials, tracklet_len, num_classes)
    pooled = scores.mean(axis=1) if scheme is VoteScheme.AVERAGE else scores.max(axis=1)
    return float(np.mean(pooled.argmax(axis=1) == truth))


def write_dataset(out_dir: str, ground_truth: Sequence, detections: Sequence, registry: ClassRegistry) -> None:
    """Write a simulated segment in the standard on-disk formats.

    Layout: ``detections.jsonl``, ``manifest.tsv``, ``classes.txt`` and one
    Darknet label file per frame under ``labels/``.
    """
    os.makedirs(os.path.join(out_dir, "labels"), exist_ok=True)
    entries = []
    for f in ground_truth.frames:
        rel = os.path.join("labels", f"{f.index:06d}.txt")
        with open(os.path.join(out_dir, rel), "w", encoding="utf-8") as fh:
            fh.write(format_annotation_text(f.annotations, f.width, f.height))
        entries.append(ManifestEntry(f.index, f.width, f.height, rel))
    with open(os.path.join(out_dir, "manifest.tsv"), "w", encoding="utf-8") as fh:
        fh.write(format_manifest(Manifest(tuple(entries))))
    with open(os.path.join(out_dir, "detections.jsonl"), "w", encoding="utf-8") as fh:
        fh.write(serialize_detection_dump(detections))
    with open(os.path.join(out_dir, "classes.txt"), "w", encoding="utf-8") as fh:
        fh.writelines(f"{n}\n" for n in registry.names)
