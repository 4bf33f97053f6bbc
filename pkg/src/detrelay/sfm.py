"""Exact minimisation of set functions by exhaustive enumeration.

Subsets of a ground set of ``n`` elements are encoded as bitmasks, bit
``i`` standing for ``ground[i]``.  The minimiser evaluates the function on
every admissible subset and returns the smallest bitmask among the
minimisers, so results are reproducible.

The functions minimised in this package (cut ranks, flow slacks) are
submodular and a strongly polynomial algorithm would apply, but ground
sets here are small enough that enumeration is exact and fast.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Hashable, Iterable, Sequence

import numpy as np

DEFAULT_LIMIT = 20


class GroundSetTooLargeError(ValueError):
    pass


class EmptyRestrictionError(ValueError):
    pass


@lru_cache(maxsize=None)
def subset_bits(n: int) -> np.ndarray:
    """``(2**n, n)`` 0/1 matrix; row ``s`` lists the members of subset ``s``."""
    masks = np.arange(1 << n, dtype=np.int64)
    out = (masks[:, None] >> np.arange(n, dtype=np.int64)) & 1
    out.setflags(write=False)
    return out


class SetFunction:
    """An integer-valued function on the subsets of ``ground``.

    Either ``fn`` (bitmask -> int) or a precomputed ``table`` of all
    ``2**n`` values must be given.
    """

    def __init__(self, ground: Sequence[Hashable], fn: Callable[[int], int] | None = None,
                 table: np.ndarray | None = None):
        if fn is None and table is None:
            raise ValueError("need either fn or table")
        self.ground = tuple(ground)
        self._fn = fn
        self._table = None
        if table is not None:
            if not (isinstance(table, np.ndarray) and table.dtype == np.int64):
                table = np.asarray(table, dtype=np.int64)
            if table.shape != (1 << len(self.ground),):
                raise ValueError(f"table has shape {table.shape}, expected ({1 << self.n},)")
            self._table = table

    @property
    def n(self) -> int:
        return len(self.ground)

    def __call__(self, mask: int) -> int:
        if self._table is not None:
            return int(self._table[mask])
        return int(self._fn(mask))

    def table(self, limit: int | None = DEFAULT_LIMIT) -> np.ndarray:
        """All ``2**n`` values, indexed by bitmask (computed once)."""
        if self._table is None:
            check_size(self.n, limit)
            fn = self._fn
            self._table = np.fromiter((fn(s) for s in range(1 << self.n)),
                                      dtype=np.int64, count=1 << self.n)
        return self._table

    def mask(self, elements: Iterable[Hashable]) -> int:
        index = {e: i for i, e in enumerate(self.ground)}
        m = 0
        for e in elements:
            m |= 1 << index[e]
        return m

    def subset(self, mask: int) -> tuple:
        return tuple(e for i, e in enumerate(self.ground) if mask >> i & 1)

    def of(self, elements: Iterable[Hashable]) -> int:
        return self(self.mask(elements))


def check_size(n: int, limit: int | None = DEFAULT_LIMIT) -> None:
    if limit is not None and n > limit:
        raise GroundSetTooLargeError(
            f"ground set of {n} elements exceeds the exhaustive limit of {limit}")


class Minimum:
    """A minimiser (as bitmask and as a tuple of ground elements) and its value."""

    __slots__ = ("mask", "value", "_f")

    def __init__(self, mask: int, value: int, f: SetFunction):
        self.mask = mask
        self.value = value
        self._f = f

    @property
    def subset(self) -> tuple:
        return self._f.subset(self.mask)

    def __iter__(self):
        return iter((self.subset, self.value))

    def __repr__(self):
        return f"Minimum(subset={self.subset!r}, value={self.value})"


def minimize_table(values: np.ndarray) -> tuple[int, int]:
    """``(mask, value)`` of the smallest entry of a full value table, first on ties."""
    best = int(values.argmin())
    return best, int(values[best])


def minimize(f: SetFunction, restriction=None, limit: int | None = DEFAULT_LIMIT) -> Minimum:
    """Minimise ``f`` over all subsets admitted by ``restriction``.

    ``restriction`` is a predicate on bitmasks or a boolean array over
    all ``2**n`` masks.  Ties go to the smallest bitmask.
    """
    check_size(f.n, limit)
    values = f.table(limit)
    if restriction is None:
        best, _ = minimize_table(values)
    else:
        if callable(restriction):
            allowed = np.fromiter((bool(restriction(s)) for s in range(1 << f.n)),
                                  dtype=bool, count=1 << f.n)
        else:
            allowed = np.asarray(restriction, dtype=bool)
        idx = np.flatnonzero(allowed)
        if idx.size == 0:
            raise EmptyRestrictionError("restriction admits no subset")
        best = int(idx[np.argmin(values[idx])])
    return Minimum(best, int(values[best]), f)


@dataclass(frozen=True)
class PropertyCheck:
    """Outcome of a lattice property test; falsy on failure.

    On failure ``witness`` holds the offending pair of bitmasks
    ``(T1, T2)``.
    """

    holds: bool
    witness: tuple[int, int] | None = None

    def __bool__(self):
        return self.holds


def is_submodular(f: SetFunction, limit: int | None = DEFAULT_LIMIT) -> PropertyCheck:
    """Check ``f(S+a) + f(S+b) >= f(S) + f(S+a+b)`` for all ``S`` and ``a, b`` outside ``S``.

    The local exchange form is equivalent to the pairwise inequality over
    all ``T1, T2``.  The witness is ``(S+a, S+b)``.
    """
    values = f.table(limit)
    masks = np.arange(1 << f.n, dtype=np.int64)
    for a in range(f.n):
        for b in range(a + 1, f.n):
            ab = (1 << a) | (1 << b)
            base = masks[(masks & ab) == 0]
            lhs = values[base | (1 << a)] + values[base | (1 << b)]
            rhs = values[base] + values[base | ab]
            bad = np.flatnonzero(lhs < rhs)
            if bad.size:
                s = int(base[bad[0]])
                return PropertyCheck(False, (s | 1 << a, s | 1 << b))
    return PropertyCheck(True)


def is_nondecreasing(f: SetFunction, limit: int | None = DEFAULT_LIMIT) -> PropertyCheck:
    """Check ``f(S) <= f(S+a)``; the witness is ``(S, S+a)``."""
    values = f.table(limit)
    masks = np.arange(1 << f.n, dtype=np.int64)
    for a in range(f.n):
        base = masks[(masks >> a & 1) == 0]
        bad = np.flatnonzero(values[base] > values[base | (1 << a)])
        if bad.size:
            s = int(base[bad[0]])
            return PropertyCheck(False, (s, s | 1 << a))
    return PropertyCheck(True)
