import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from trackvote.geometry import BBox
from trackvote.model import Annotation, Detection, Frame, Sequence


def det(frame, box, scores, objectness=1.0):
    return Detection(frame, BBox(*box), objectness, tuple(scores))


def ann(frame, box, cls):
    return Annotation(frame, BBox(*box), cls)


def seq_of(*frames):
    """Build a sequence from ``(index, [detections], [annotations])`` tuples."""
    return Sequence(tuple(Frame(i, tuple(d), tuple(a)) for i, d, a in frames))


@pytest.fixture
def static_track():
    def make(n_frames, scores=(0.1, 0.9), box=(10, 10, 50, 50)):
        return seq_of(*[(t, [det(t, box, scores)], [ann(t, box, 1)]) for t in range(n_frames)])
    return make


_ACCEPTANCE: list[tuple[str, bool, str]] = []


@pytest.fixture
def criterion():
    """Context manager recording one acceptance criterion as PASS/FAIL."""
    import contextlib
    import time

    @contextlib.contextmanager
    def record(name):
        start = time.perf_counter()
        try:
            yield
        except BaseException as exc:
            _ACCEPTANCE.append((name, False, f"{type(exc).__name__}: {str(exc).splitlines()[0] if str(exc) else ''}"))
            raise
        _ACCEPTANCE.append((name, True, f"{time.perf_counter() - start:.2f}s"))

    return record


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for name, ok, detail in _ACCEPTANCE:
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  {name}  ({detail})")
