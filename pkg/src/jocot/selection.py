"""Clean-instance mining primitives.

Three mechanisms: the remember-rate schedule that decides how large a
fraction of each batch is presumed clean, small-loss selection that picks
that fraction, and the two-level consensus intersections that combine the
four peer networks' selections into one trusted index set.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

SCOPES = ("batch", "epoch", "final")


@dataclass(frozen=True)
class SelectionSet:
    """Sorted, duplicate-free set of dataset-global sample indices."""

    indices: tuple
    scope: str = "batch"

    def __post_init__(self):
        idx = tuple(int(i) for i in self.indices)
        if len(set(idx)) != len(idx):
            raise ValueError("duplicate indices in selection")
        object.__setattr__(self, "indices", tuple(sorted(idx)))
        if self.scope not in SCOPES:
            raise ValueError(f"scope must be one of {SCOPES}, got {self.scope!r}")

    def __len__(self) -> int:
        return len(self.indices)

    def __contains__(self, index) -> bool:
        return int(index) in set(self.indices)

    def as_set(self) -> set:
        return set(self.indices)

    def intersection(self, other: "SelectionSet") -> "SelectionSet":
        if self.scope != other.scope:
            raise ValueError(f"scope mismatch: {self.scope} vs {other.scope}")
        return SelectionSet(tuple(self.as_set() & other.as_set()), self.scope)

    def union(self, other: "SelectionSet", scope: str = None) -> "SelectionSet":
        return SelectionSet(tuple(self.as_set() | other.as_set()),
                            scope if scope is not None else self.scope)


def remember_rate(epoch: int, num_gradual_T: int, tau: float) -> float:
    """Kept fraction at an epoch: 1 - min(epoch*tau/T, tau).

    Decays linearly from 1 at epoch 0 to 1-tau at epoch T and stays there.
    """
    if epoch < 0 or num_gradual_T < 1 or not 0.0 <= tau < 1.0:
        raise ValueError("need epoch >= 0, T >= 1 and tau in [0, 1)")
    return 1.0 - min(epoch * tau / num_gradual_T, tau)


def small_loss_select(per_sample_losses, keep_fraction: float,
                      scope: str = "batch") -> SelectionSet:
    """Indices of the ceil(keep_fraction * n) smallest losses, at least 1.

    ``per_sample_losses`` is an iterable of (global_index, loss). Ties are
    broken toward the smaller global index, which also makes the result
    the lexicographically smallest minimum-sum subset of its size.
    """
    pairs = [(int(i), float(l)) for i, l in per_sample_losses]
    if not pairs:
        raise ValueError("empty loss list")
    if not 0.0 < keep_fraction <= 1.0:
        raise ValueError(f"keep_fraction {keep_fraction} outside (0, 1]")
    if any(not math.isfinite(l) for _, l in pairs):
        raise ValueError("non-finite loss values")
    n = len(pairs)
    # tiny slack so binary round-up (e.g. 0.75*4 -> 3.0000000000000004)
    # cannot inflate the ceiling
    k = max(1, math.ceil(keep_fraction * n - 1e-12))
    ranked = sorted(pairs, key=lambda p: (p[1], p[0]))
    return SelectionSet(tuple(i for i, _ in ranked[:k]), scope)


def inner_consensus(a: SelectionSet, b: SelectionSet) -> SelectionSet:
    """Intersection of the two selections inside one teacher module."""
    return a.intersection(b)


def outer_consensus(i_p: SelectionSet, i_q: SelectionSet) -> SelectionSet:
    """Intersection across the two teacher modules' inner consensuses."""
    return i_p.intersection(i_q)


def save_selection(selection: SelectionSet, path) -> None:
    """One index per line; scope is not stored."""
    Path(path).write_text("".join(f"{i}\n" for i in selection.indices))


def load_selection(path, scope: str = "final") -> SelectionSet:
    lines = [ln for ln in Path(path).read_text().splitlines() if ln.strip()]
    try:
        indices = tuple(int(ln) for ln in lines)
    except ValueError as exc:
        raise ValueError(f"{path}: non-integer selection line ({exc})") from None
    return SelectionSet(indices, scope)
