"""Dense valence-tagged tensors at a fixed evaluation point.

Entries are stored row-major with the first slot as the leftmost index,
exactly as the component formulas are written; valence tags ('upper' /
'lower') make contraction and index raising/lowering explicit.  Tensors
are plain values: operations return new instances and never mutate.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import permutations
from typing import Iterable

import numpy as np

__all__ = [
    "Tensor",
    "UPPER",
    "LOWER",
    "ValenceError",
    "PointMismatchError",
    "contract",
    "raise_slot",
    "lower_slot",
    "sym",
    "antisym",
    "max_abs",
    "rel_residual",
]

UPPER = "upper"
LOWER = "lower"


class ValenceError(ValueError):
    """Contraction or raise/lower applied to slots with the wrong tags."""


class PointMismatchError(ValueError):
    """Tensors from different evaluation points were combined."""


@dataclass(frozen=True)
class Tensor:
    """Components of a tensor at one (x, y), with per-slot valence tags."""

    entries: np.ndarray
    valence: tuple[str, ...]
    point: object  # EvalPoint; kept generic to avoid an import cycle

    def __post_init__(self):
        entries = np.asarray(self.entries, dtype=np.float64)
        object.__setattr__(self, "entries", entries)
        object.__setattr__(self, "valence", tuple(self.valence))
        if entries.ndim != len(self.valence):
            raise ValueError(
                f"rank {entries.ndim} entries with {len(self.valence)} valence tags"
            )
        for tag in self.valence:
            if tag not in (UPPER, LOWER):
                raise ValueError(f"valence tag must be 'upper' or 'lower', got {tag!r}")
        if entries.ndim > 0:
            n = entries.shape[0]
            if entries.shape != (n,) * entries.ndim:
                raise ValueError(f"entries must be cubical, got shape {entries.shape}")

    @property
    def rank(self) -> int:
        return self.entries.ndim

    @property
    def n(self) -> int:
        return self.entries.shape[0] if self.rank else 0

    def __add__(self, other: "Tensor") -> "Tensor":
        _check_compatible(self, other)
        return Tensor(self.entries + other.entries, self.valence, self.point)

    def __sub__(self, other: "Tensor") -> "Tensor":
        _check_compatible(self, other)
        return Tensor(self.entries - other.entries, self.valence, self.point)

    def __mul__(self, scalar: float) -> "Tensor":
        return Tensor(self.entries * float(scalar), self.valence, self.point)

    __rmul__ = __mul__

    def __neg__(self) -> "Tensor":
        return Tensor(-self.entries, self.valence, self.point)


def _same_point(a, b) -> bool:
    if a is b:
        return True
    try:
        return np.array_equal(a.x, b.x) and np.array_equal(a.y, b.y)
    except AttributeError:
        return a == b


def _check_compatible(a: Tensor, b: Tensor):
    if a.valence != b.valence:
        raise ValenceError(f"valence mismatch: {a.valence} vs {b.valence}")
    if not _same_point(a.point, b.point):
        raise PointMismatchError("tensors were computed at different points")


def contract(t: Tensor, slot_a: int, slot_b: int, metric: Tensor | None = None) -> Tensor:
    """Contract two slots; they must be one upper + one lower, unless an
    explicit rank-2 metric of the complementary valence is supplied."""
    if slot_a == slot_b:
        raise ValueError("cannot contract a slot with itself")
    sa, sb = sorted((slot_a, slot_b))
    tags = (t.valence[sa], t.valence[sb])
    if metric is None:
        if set(tags) != {UPPER, LOWER}:
            raise ValenceError(
                f"slots {sa},{sb} are both {tags[0]}; supply a metric to contract"
            )
        entries = np.trace(t.entries, axis1=sa, axis2=sb)
    else:
        if not _same_point(t.point, metric.point):
            raise PointMismatchError("metric comes from a different point")
        if metric.rank != 2:
            raise ValenceError("contraction metric must have rank 2")
        if tags[0] != tags[1]:
            raise ValenceError("metric contraction needs two slots of equal valence")
        want = UPPER if tags[0] == LOWER else LOWER
        if metric.valence != (want, want):
            raise ValenceError(
                f"need a ({want},{want}) metric to contract {tags} slots"
            )
        moved = np.moveaxis(t.entries, (sa, sb), (-2, -1))
        entries = np.einsum("...ab,ab->...", moved, metric.entries)
    valence = tuple(tag for i, tag in enumerate(t.valence) if i not in (sa, sb))
    return Tensor(entries, valence, t.point)


def _flip(t: Tensor, slot: int, g2: Tensor, from_tag: str, to_tag: str) -> Tensor:
    if t.valence[slot] != from_tag:
        raise ValenceError(f"slot {slot} is {t.valence[slot]}, expected {from_tag}")
    if g2.valence != (to_tag, to_tag):
        raise ValenceError(f"metric must be ({to_tag},{to_tag}), got {g2.valence}")
    if not _same_point(t.point, g2.point):
        raise PointMismatchError("metric comes from a different point")
    entries = np.tensordot(g2.entries, t.entries, axes=([1], [slot]))
    entries = np.moveaxis(entries, 0, slot)
    valence = t.valence[:slot] + (to_tag,) + t.valence[slot + 1 :]
    return Tensor(entries, valence, t.point)


def raise_slot(t: Tensor, slot: int, g_inv: Tensor) -> Tensor:
    """Flip a lower slot up using the inverse metric (upper,upper)."""
    return _flip(t, slot, g_inv, LOWER, UPPER)


def lower_slot(t: Tensor, slot: int, g: Tensor) -> Tensor:
    """Flip an upper slot down using the metric (lower,lower)."""
    return _flip(t, slot, g, UPPER, LOWER)


def sym(t: Tensor, slots: Iterable[int]) -> Tensor:
    """Symmetrize over the listed slots (equal valence required)."""
    slots = tuple(slots)
    tags = {t.valence[s] for s in slots}
    if len(tags) > 1:
        raise ValenceError("cannot symmetrize slots of mixed valence")
    total = np.zeros_like(t.entries)
    for perm in permutations(slots):
        axes = list(range(t.rank))
        for src, dst in zip(slots, perm):
            axes[dst] = src
        total = total + np.transpose(t.entries, axes)
    count = len(list(permutations(slots)))
    return Tensor(total / count, t.valence, t.point)


def antisym(t: Tensor, slot_a: int, slot_b: int) -> Tensor:
    """Antisymmetrize over a slot pair (equal valence required)."""
    if t.valence[slot_a] != t.valence[slot_b]:
        raise ValenceError("cannot antisymmetrize slots of mixed valence")
    axes = list(range(t.rank))
    axes[slot_a], axes[slot_b] = axes[slot_b], axes[slot_a]
    return Tensor(
        (t.entries - np.transpose(t.entries, axes)) / 2.0, t.valence, t.point
    )


def max_abs(t) -> float:
    """L-infinity norm of a Tensor or array-like."""
    entries = t.entries if isinstance(t, Tensor) else np.asarray(t, dtype=np.float64)
    return float(np.max(np.abs(entries))) if entries.size else 0.0


def rel_residual(a, b=None) -> float:
    """max|a-b| / (1 + max(max|a|, max|b|)): relative with an absolute floor
    so comparisons against (near-)zero tensors stay meaningful."""
    if b is None:
        m = max_abs(a)
        return m / (1.0 + m)
    ae = a.entries if isinstance(a, Tensor) else np.asarray(a, dtype=np.float64)
    be = b.entries if isinstance(b, Tensor) else np.asarray(b, dtype=np.float64)
    if isinstance(a, Tensor) and isinstance(b, Tensor):
        _check_compatible(a, b)
    diff = float(np.max(np.abs(ae - be))) if ae.size else 0.0
    scale = max(max_abs(ae), max_abs(be))
    return diff / (1.0 + scale)
