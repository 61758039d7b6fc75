"""Stratified train/test splits and stratified k-fold assignment.

Shuffling uses SplitMix64 driving a Fisher-Yates shuffle, so a split is a
pure function of its inputs and can be reproduced bit-for-bit by any
implementation of the same two algorithms:

* SplitMix64: ``state += 0x9E3779B97F4A7C15``; ``z = state``;
  ``z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9``;
  ``z = (z ^ (z >> 27)) * 0x94D049BB133111EB``; output ``z ^ (z >> 31)``
  (all arithmetic mod 2**64, initial state = seed mod 2**64).
* Bounded draw in ``[0, n)``: reject outputs ``>= 2**64 - (2**64 % n)``,
  return ``output % n``.
* Fisher-Yates: for ``i`` from ``len - 1`` down to 1, swap ``i`` with a
  bounded draw in ``[0, i + 1)``.

Classes are processed in ascending class index, all drawing from one
generator stream; items of a class keep their input order before shuffling.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from decimal import ROUND_HALF_UP, Decimal
from typing import Hashable, Iterable, Sequence

from .errors import DegenerateClass, InvalidK

_MASK = (1 << 64) - 1


class SplitMix64:
    def __init__(self, seed: int):
        self.state = seed & _MASK

    def next(self) -> int:
        self.state = (self.state + 0x9E3779B97F4A7C15) & _MASK
        z = self.state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK
        return z ^ (z >> 31)

    def below(self, n: int) -> int:
        if n <= 0:
            raise ValueError("n must be positive")
        limit = (1 << 64) - ((1 << 64) % n)
        while True:
            v = self.next()
            if v < limit:
                return v % n

    def shuffle(self, xs: list) -> None:
        for i in range(len(xs) - 1, 0, -1):
            j = self.below(i + 1)
            xs[i], xs[j] = xs[j], xs[i]


@dataclass(frozen=True)
class LabeledItem:
    item_id: Hashable
    class_index: int


def round_half_up(x: float) -> int:
    """Round a float by its shortest decimal repr, halves away from zero."""
    return int(Decimal(repr(x)).quantize(Decimal(1), rounding=ROUND_HALF_UP))


def _by_class(items: Sequence[LabeledItem]) -> dict[int, list[int]]:
    seen = set()
    groups: dict[int, list[int]] = {}
    for pos, it in enumerate(items):
        if it.item_id in seen:
            raise ValueError(f"duplicate item id {it.item_id!r}")
        seen.add(it.item_id)
        groups.setdefault(it.class_index, []).append(pos)
    return dict(sorted(groups.items()))


def stratified_split(items: Iterable[LabeledItem], test_fraction: float = 0.2, seed: int = 0) -> tuple[list, list]:
    """Split items so each class sends ``round(test_fraction * n_c)`` to test.

    Rounding is half-up. A class whose train or test side comes out empty
    triggers a :class:`DegenerateClass` warning; the split is still returned.

    Returns:
        ``(train_ids, test_ids)``, each in input order.
    """
    if not 0.0 < test_fraction < 1.0:
        raise ValueError(f"test_fraction must lie strictly between 0 and 1, got {test_fraction!r}")
    items = list(items)
    rng = SplitMix64(seed)
    in_test = [False] * len(items)
    for cls, positions in _by_class(items).items():
        n_test = round_half_up(test_fraction * len(positions))
        if n_test == 0 or n_test == len(positions):
            side = "test" if n_test == 0 else "train"
            warnings.warn(DegenerateClass(f"class {cls}: {side} side empty ({len(positions)} items)"), stacklevel=2)
        order = positions[:]
        rng.shuffle(order)
        for pos in order[:n_test]:
            in_test[pos] = True
    train = [it.item_id for it, t in zip(items, in_test) if not t]
    test = [it.item_id for it, t in zip(items, in_test) if t]
    return train, test


def stratified_kfold(items: Iterable[LabeledItem], k: int = 5, seed: int = 0) -> list[list]:
    """Assign items to ``k`` disjoint folds, balancing every class.

    Each class is shuffled and dealt round-robin; the dealing position carries
    over from one class to the next so remainders spread across folds.

    Returns:
        ``k`` lists of item ids, each in input order.
    """
    if not isinstance(k, int) or k < 2:
        raise InvalidK(f"k must be an integer >= 2, got {k!r}")
    items = list(items)
    rng = SplitMix64(seed)
    fold_of = [0] * len(items)
    cursor = 0
    for cls, positions in _by_class(items).items():
        if len(positions) < k:
            warnings.warn(DegenerateClass(f"class {cls}: {len(positions)} items for {k} folds"), stacklevel=2)
        order = positions[:]
        rng.shuffle(order)
        for pos in order:
            fold_of[pos] = cursor
            cursor = (cursor + 1) % k
    folds: list[list] = [[] for _ in range(k)]
    for it, f in zip(items, fold_of):
        folds[f].append(it.item_id)
    return folds


def read_items(lines: Iterable[str], class_lookup=None) -> list[LabeledItem]:
    """Parse ``<item_id> <class>`` lines; ``class`` is an index or, with a lookup, a name."""
    out = []
    for lineno, raw in enumerate(lines, start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        if len(parts) != 2:
            raise ValueError(f"line {lineno}: expected '<item_id> <class>'")
        item_id, cls = parts
        try:
            idx = int(cls)
        except ValueError:
            if class_lookup is None:
                raise ValueError(f"line {lineno}: class {cls!r} is not an integer") from None
            idx = class_lookup(cls)
        out.append(LabeledItem(item_id, idx))
    return out


def write_ids(path, ids: Iterable) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.writelines(f"{i}\n" for i in ids)
