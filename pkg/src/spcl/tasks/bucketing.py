"""Difficulty bucketing: round assignment and the stratified dataset container."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Sequence

__all__ = ["assign_round", "StratifiedDataset", "N_ROUNDS"]

N_ROUNDS = 5


def assign_round(room_count: int) -> int:
    """Map a difficulty measure to its round bucket.

    Rounds 1..4 hold samples whose measure is exactly that value; round 5
    holds everything harder.
    """
    room_count = int(room_count)
    if room_count < 1:
        raise ValueError(f"difficulty measure must be >= 1, got {room_count}")
    return min(room_count, N_ROUNDS)


@dataclass
class StratifiedDataset:
    """Samples partitioned into mutually exclusive round splits 1..5.

    Items must carry a ``round`` attribute matching the split they live in.
    """

    splits: Mapping[int, Sequence]
    seed: int
    _flat: list = field(init=False, repr=False)

    def __post_init__(self) -> None:
        splits = {int(r): list(items) for r, items in self.splits.items()}
        for r, items in splits.items():
            if not 1 <= r <= N_ROUNDS:
                raise ValueError(f"split key {r} outside rounds 1..{N_ROUNDS}")
            for item in items:
                if item.round != r:
                    raise ValueError(
                        f"sample with round {item.round} placed in split {r}"
                    )
        self.splits = splits
        self._flat = [item for r in sorted(splits) for item in splits[r]]
        if not self._flat:
            raise ValueError("dataset has no samples")

    @property
    def rounds(self) -> tuple[int, ...]:
        return tuple(sorted(self.splits))

    @property
    def counts(self) -> dict[int, int]:
        return {r: len(self.splits[r]) for r in sorted(self.splits)}

    @property
    def samples(self) -> list:
        """All samples, ordered by round then insertion order."""
        return list(self._flat)

    def __len__(self) -> int:
        return len(self._flat)

    def __iter__(self):
        return iter(self._flat)
