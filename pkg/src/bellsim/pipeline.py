"""Raw to final data: keep only records where both stations produced +/-1."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .events import RawDataset
from .model import SETTING_PAIRS


@dataclass
class DiscardCounts:
    kept: int = 0
    a_zero: int = 0
    b_zero: int = 0
    both_zero: int = 0

    @property
    def raw(self) -> int:
        return self.kept + self.a_zero + self.b_zero + self.both_zero

    def to_dict(self) -> dict:
        return {"raw": self.raw, "kept": self.kept, "discarded_a_zero": self.a_zero,
                "discarded_b_zero": self.b_zero, "discarded_both_zero": self.both_zero}


@dataclass
class FinalDataset:
    """Kept ``(a, b)`` pairs per setting pair, each an (n, 2) int8 array.

    ``a_zero`` counts records with only ``a == 0``, ``b_zero`` only ``b == 0``.
    """

    pairs: dict[tuple[int, int], np.ndarray]
    counts: dict[tuple[int, int], DiscardCounts]
    metadata: dict = field(default_factory=dict)

    def n_kept(self, setting) -> int:
        return self.counts[setting].kept

    def n_raw(self, setting) -> int:
        return self.counts[setting].raw

    def as_raw(self) -> RawDataset:
        """The kept records as a raw dataset (trial order is not preserved)."""
        xs, ys, ab = [], [], []
        for x, y in SETTING_PAIRS:
            v = self.pairs[(x, y)]
            xs.append(np.full(len(v), x))
            ys.append(np.full(len(v), y))
            ab.append(v)
        ab = np.concatenate(ab) if ab else np.zeros((0, 2))
        return RawDataset(np.arange(len(ab)), np.concatenate(xs), np.concatenate(ys),
                          ab[:, 0], ab[:, 1], dict(self.metadata))

    def discard_accounting(self) -> dict:
        return {f"{x}{y}": self.counts[(x, y)].to_dict() for x, y in SETTING_PAIRS}


def extract_final(raw: RawDataset | FinalDataset) -> FinalDataset:
    if isinstance(raw, FinalDataset):
        return raw
    pairs, counts = {}, {}
    a_nz = raw.a != 0
    b_nz = raw.b != 0
    for x, y in SETTING_PAIRS:
        m = (raw.x == x) & (raw.y == y)
        keep = m & a_nz & b_nz
        pairs[(x, y)] = np.column_stack([raw.a[keep], raw.b[keep]]).astype(np.int8)
        counts[(x, y)] = DiscardCounts(
            kept=int(keep.sum()),
            a_zero=int((m & ~a_nz & b_nz).sum()),
            b_zero=int((m & a_nz & ~b_nz).sum()),
            both_zero=int((m & ~a_nz & ~b_nz).sum()),
        )
    return FinalDataset(pairs, counts, dict(raw.metadata))
