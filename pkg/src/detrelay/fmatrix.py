"""Dense block matrices over a prime field.

Entries are stored as an ``int64`` array of residues in ``[0, q)``.  The
row and column partitions are kept as tuples of block sizes; a block of
size zero is allowed and simply contributes nothing.

All linear algebra here is exact Gaussian elimination.  Ranks of
submatrices are memoised per matrix, keyed by bitmasks of the global
row and column indices, because the flow routines ask for the same
submatrices many times over.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field
from typing import Iterable, Sequence

import numpy as np

from .gf import FieldElement, PrimeField


class MatrixError(ValueError):
    pass


class NonSquareMatrixError(MatrixError):
    pass


class SingularMatrixError(MatrixError):
    pass


def _ranges(sizes: Sequence[int]) -> list[range]:
    out, start = [], 0
    for s in sizes:
        out.append(range(start, start + s))
        start += s
    return out


def _mask(indices: Iterable[int]) -> int:
    m = 0
    for i in indices:
        m |= 1 << i
    return m


def _bits(mask: int) -> list[int]:
    out, i = [], 0
    while mask:
        if mask & 1:
            out.append(i)
        mask >>= 1
        i += 1
    return out


@dataclass(frozen=True, eq=False)
class BlockMatrix:
    """A matrix over ``field`` with its rows and columns cut into blocks.

    ``row_blocks[k]`` is the number of rows in row block ``k`` (the
    receiving node ``k``); ``col_blocks[j]`` the number of columns in
    column block ``j`` (the transmitting node ``j``).
    """

    field: PrimeField
    entries: np.ndarray
    row_blocks: tuple[int, ...]
    col_blocks: tuple[int, ...]
    _memo: dict = dc_field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        a = np.array(self.entries, dtype=np.int64, copy=True)
        if a.size == 0:
            a = a.reshape(sum(self.row_blocks), sum(self.col_blocks))
        if a.ndim != 2:
            raise MatrixError(f"entries must be 2-D, got shape {a.shape}")
        a %= self.field.q
        a.setflags(write=False)
        object.__setattr__(self, "entries", a)
        object.__setattr__(self, "row_blocks", tuple(int(s) for s in self.row_blocks))
        object.__setattr__(self, "col_blocks", tuple(int(s) for s in self.col_blocks))
        if any(s < 0 for s in self.row_blocks + self.col_blocks):
            raise MatrixError("block sizes must be non-negative")
        if sum(self.row_blocks) != a.shape[0]:
            raise MatrixError(
                f"row blocks {self.row_blocks} do not cover {a.shape[0]} rows")
        if sum(self.col_blocks) != a.shape[1]:
            raise MatrixError(
                f"column blocks {self.col_blocks} do not cover {a.shape[1]} columns")

    @classmethod
    def _trusted(cls, field: PrimeField, entries: np.ndarray, row_blocks: tuple[int, ...],
                 col_blocks: tuple[int, ...]) -> BlockMatrix:
        # entries already reduced int64 of matching shape; skips validation
        self = object.__new__(cls)
        entries.setflags(write=False)
        object.__setattr__(self, "field", field)
        object.__setattr__(self, "entries", entries)
        object.__setattr__(self, "row_blocks", row_blocks)
        object.__setattr__(self, "col_blocks", col_blocks)
        object.__setattr__(self, "_memo", {})
        return self

    @classmethod
    def from_rows(cls, field: PrimeField, rows, row_blocks=None, col_blocks=None):
        """Build from nested lists; missing partitions default to one block."""
        rows = [[int(v) % field.q for v in row] for row in rows]
        nc = len(rows[0]) if rows else (sum(col_blocks) if col_blocks is not None else 0)
        if any(len(r) != nc for r in rows):
            raise MatrixError("ragged rows")
        a = np.array(rows, dtype=np.int64).reshape(len(rows), nc)
        if row_blocks is None:
            row_blocks = (a.shape[0],)
        if col_blocks is None:
            col_blocks = (a.shape[1],)
        return cls(field, a, tuple(row_blocks), tuple(col_blocks))

    @classmethod
    def identity(cls, field: PrimeField, n: int, row_blocks=None, col_blocks=None):
        return cls(field, np.eye(n, dtype=np.int64),
                   tuple(row_blocks) if row_blocks is not None else (n,),
                   tuple(col_blocks) if col_blocks is not None else (n,))

    @classmethod
    def zeros(cls, field: PrimeField, rows: int, cols: int, row_blocks=None, col_blocks=None):
        return cls(field, np.zeros((rows, cols), dtype=np.int64),
                   tuple(row_blocks) if row_blocks is not None else (rows,),
                   tuple(col_blocks) if col_blocks is not None else (cols,))

    @property
    def shape(self) -> tuple[int, int]:
        return self.entries.shape

    @property
    def rows(self) -> int:
        return self.entries.shape[0]

    @property
    def cols(self) -> int:
        return self.entries.shape[1]

    @property
    def row_ranges(self) -> list[range]:
        return _ranges(self.row_blocks)

    @property
    def col_ranges(self) -> list[range]:
        return _ranges(self.col_blocks)

    def row_block_of(self, r: int) -> int:
        for k, rg in enumerate(self.row_ranges):
            if r in rg:
                return k
        raise IndexError(f"row {r} out of range")

    def col_block_of(self, c: int) -> int:
        for j, rg in enumerate(self.col_ranges):
            if c in rg:
                return j
        raise IndexError(f"column {c} out of range")

    def __getitem__(self, key) -> FieldElement:
        i, j = key
        return FieldElement(int(self.entries[i, j]), self.field)

    def __eq__(self, other):
        if not isinstance(other, BlockMatrix):
            return NotImplemented
        return (self.field == other.field
                and self.row_blocks == other.row_blocks
                and self.col_blocks == other.col_blocks
                and self.entries.shape == other.entries.shape
                and self.entries.tobytes() == other.entries.tobytes())

    __hash__ = None

    def tolist(self) -> list[list[int]]:
        return self.entries.tolist()

    def transpose(self) -> BlockMatrix:
        return BlockMatrix(self.field, self.entries.T, self.col_blocks, self.row_blocks)

    def reblock(self, row_blocks, col_blocks) -> BlockMatrix:
        """Same entries under a different partition; shares the rank memo."""
        return BlockMatrix(self.field, self.entries, tuple(row_blocks), tuple(col_blocks),
                           self._memo)

    # -- masked rank -------------------------------------------------------

    def row_mask(self, blocks: Iterable[int]) -> int:
        """Bitmask of the global rows lying in the given row blocks."""
        ranges = self.row_ranges
        m = 0
        for k in blocks:
            rg = ranges[k]
            m |= ((1 << len(rg)) - 1) << rg.start
        return m

    def col_mask(self, blocks: Iterable[int]) -> int:
        ranges = self.col_ranges
        m = 0
        for j in blocks:
            rg = ranges[j]
            m |= ((1 << len(rg)) - 1) << rg.start
        return m

    @property
    def full_row_mask(self) -> int:
        return (1 << self.rows) - 1

    @property
    def full_col_mask(self) -> int:
        return (1 << self.cols) - 1

    def masked_rank(self, row_mask: int, col_mask: int) -> int:
        """Rank of the submatrix on the rows and columns set in the masks."""
        grid = self.rank_grid()
        if grid is not None:
            return int(grid[row_mask, col_mask])
        key = (row_mask, col_mask)
        memo = self._memo
        r = memo.get(key)
        if r is None:
            r = self._compute_masked_rank(row_mask, col_mask)
            memo[key] = r
        return r

    def rank_grid(self) -> np.ndarray | None:
        """``grid[row_mask, col_mask]`` = rank of that submatrix, for small matrices.

        Returns ``None`` when ``rows + cols`` exceeds ``DENSE_RANK_LIMIT``.
        """
        grid = self._memo.get("grid", False)
        if grid is False:
            grid = None
            if self.rows + self.cols <= DENSE_RANK_LIMIT:
                grid = _rank_grid(self.entries.tolist(), self.cols, self.field.q)
                grid.setflags(write=False)
            self._memo["grid"] = grid
        return grid

    def _compute_masked_rank(self, row_mask: int, col_mask: int) -> int:
        if not row_mask or not col_mask:
            return 0
        q = self.field.q
        rows = self._memo.get("rows")
        if rows is None:
            rows = self.entries.tolist()
            self._memo["rows"] = rows
        cols = _bits(col_mask)
        if q == 2:
            return gf2_rank([sum(1 << j for j, c in enumerate(cols) if rows[r][c])
                             for r in _bits(row_mask)])
        return _rank_lists([[rows[r][c] for c in cols] for r in _bits(row_mask)], q)


DENSE_RANK_LIMIT = 10


def _rank_grid(rows: list[list[int]], ncols: int, q: int) -> np.ndarray:
    # Row subsets in increasing order extend the basis of the subset
    # without their highest row by one vector.
    nr = len(rows)
    grid = np.zeros((1 << nr, 1 << ncols), dtype=np.int64)
    if q == 2:
        packed = [sum(1 << j for j, v in enumerate(row) if v) for row in rows]
        for cm in range(1 << ncols):
            bases: list[list[int]] = [[]] * (1 << nr)
            for S in range(1, 1 << nr):
                top = S.bit_length() - 1
                basis = bases[S ^ (1 << top)]
                v = packed[top] & cm
                for b in basis:
                    v = min(v, v ^ b)
                bases[S] = basis + [v] if v else basis
                grid[S, cm] = len(bases[S])
        return grid
    for cm in range(1 << ncols):
        cols = _bits(cm)
        bases2: list[list[tuple[int, list[int]]]] = [[]] * (1 << nr)
        for S in range(1, 1 << nr):
            top = S.bit_length() - 1
            basis = bases2[S ^ (1 << top)]
            v = [rows[top][c] for c in cols]
            for piv, b in basis:
                f = v[piv]
                if f:
                    v = [(x - f * y) % q for x, y in zip(v, b)]
            piv = next((i for i, x in enumerate(v) if x), None)
            if piv is None:
                bases2[S] = basis
            else:
                inv = pow(v[piv], q - 2, q)
                bases2[S] = basis + [(piv, [x * inv % q for x in v])]
            grid[S, cm] = len(bases2[S])
    return grid


# -- elimination kernels ----------------------------------------------------


def gf2_rank(rows: list[int]) -> int:
    """Rank over F_2 of rows packed as integers (bit j = column j)."""
    basis: list[int] = []
    for v in rows:
        for b in basis:
            v = min(v, v ^ b)
        if v:
            basis.append(v)
    return len(basis)


def _rank_lists(rows: list[list[int]], q: int) -> int:
    rows = [r[:] for r in rows]
    if not rows:
        return 0
    ncols = len(rows[0])
    rank = 0
    for c in range(ncols):
        piv = None
        for i in range(rank, len(rows)):
            if rows[i][c]:
                piv = i
                break
        if piv is None:
            continue
        rows[rank], rows[piv] = rows[piv], rows[rank]
        pr = rows[rank]
        inv = pow(pr[c], q - 2, q)
        for i in range(rank + 1, len(rows)):
            f = rows[i][c]
            if f:
                f = f * inv % q
                ri = rows[i]
                for k in range(c, ncols):
                    ri[k] = (ri[k] - f * pr[k]) % q
        rank += 1
        if rank == len(rows):
            break
    return rank


def _rref_array(a: np.ndarray, q: int) -> tuple[np.ndarray, list[int]]:
    a = a.copy()
    nrows, ncols = a.shape
    pivots: list[int] = []
    r = 0
    for c in range(ncols):
        if r == nrows:
            break
        nz = np.nonzero(a[r:, c])[0]
        if nz.size == 0:
            continue
        p = r + int(nz[0])
        if p != r:
            a[[r, p]] = a[[p, r]]
        a[r] = a[r] * pow(int(a[r, c]), q - 2, q) % q
        factors = a[:, c].copy()
        factors[r] = 0
        a = (a - np.outer(factors, a[r])) % q
        pivots.append(c)
        r += 1
    return a, pivots


# -- public operations --------------------------------------------------------


def rank(m: BlockMatrix) -> int:
    return m.masked_rank(m.full_row_mask, m.full_col_mask)


def rref(m: BlockMatrix) -> tuple[BlockMatrix, list[int]]:
    """Reduced row-echelon form and the list of pivot columns."""
    a, pivots = _rref_array(m.entries, m.field.q)
    return BlockMatrix(m.field, a, m.row_blocks, m.col_blocks), pivots


def inverse(m: BlockMatrix) -> BlockMatrix:
    """Inverse of a square full-rank matrix; blocks are swapped like a transpose."""
    n, c = m.shape
    if n != c:
        raise NonSquareMatrixError(f"cannot invert a {n}x{c} matrix")
    q = m.field.q
    aug = np.concatenate([m.entries, np.eye(n, dtype=np.int64)], axis=1)
    red, pivots = _rref_array(aug, q)
    if pivots[:n] != list(range(n)):
        raise SingularMatrixError(f"matrix has rank {len([p for p in pivots if p < n])} < {n}")
    return BlockMatrix(m.field, red[:, n:], m.col_blocks, m.row_blocks)


def matmul(a: BlockMatrix, b: BlockMatrix) -> BlockMatrix:
    if a.field != b.field:
        raise MatrixError("matrices over different fields")
    if a.cols != b.rows:
        raise MatrixError(f"cannot multiply {a.shape} by {b.shape}")
    return BlockMatrix(a.field, matmul_mod(a.entries, b.entries, a.field.q),
                       a.row_blocks, b.col_blocks)


def matmul_mod(a: np.ndarray, b: np.ndarray, q: int) -> np.ndarray:
    # int64 is safe while the accumulated sum stays below 2**63
    if a.shape[1] * (q - 1) ** 2 < 2**62:
        return (a @ b) % q
    return np.array((a.astype(object) @ b.astype(object)) % q, dtype=np.int64)


@dataclass(frozen=True)
class IndexSelection:
    """Rows and columns of an original matrix, by global index."""

    row_indices: tuple[int, ...]
    col_indices: tuple[int, ...]

    def __post_init__(self):
        rows = tuple(map(int, self.row_indices))
        cols = tuple(map(int, self.col_indices))
        for name, idx in (("row", rows), ("column", cols)):
            if idx and idx[0] < 0:
                raise IndexError(f"negative {name} index in {idx}")
            if any(a >= b for a, b in zip(idx, idx[1:])):
                raise ValueError(f"{name} indices must be strictly increasing: {idx}")
        object.__setattr__(self, "row_indices", rows)
        object.__setattr__(self, "col_indices", cols)

    @classmethod
    def _trusted(cls, rows: tuple[int, ...], cols: tuple[int, ...]) -> IndexSelection:
        # sorted tuples of ints already; skips validation
        self = object.__new__(cls)
        object.__setattr__(self, "row_indices", rows)
        object.__setattr__(self, "col_indices", cols)
        return self


def _block_counts(sizes: tuple[int, ...], indices: tuple[int, ...]) -> tuple[int, ...]:
    counts = [0] * len(sizes)
    k, end = 0, 0
    for i in indices:
        while k < len(sizes) and i >= end + sizes[k]:
            end += sizes[k]
            k += 1
        counts[k] += 1
    return tuple(counts)


def submatrix(m: BlockMatrix, sel: IndexSelection) -> BlockMatrix:
    """Entries at the selected rows x columns, keeping the block structure."""
    rows, cols = sel.row_indices, sel.col_indices
    if rows and rows[-1] >= m.rows:
        raise IndexError(f"row index {rows[-1]} out of range for {m.rows} rows")
    if cols and cols[-1] >= m.cols:
        raise IndexError(f"column index {cols[-1]} out of range for {m.cols} columns")
    sub = m.entries.take(rows, 0).take(cols, 1)
    return BlockMatrix._trusted(m.field, sub, _block_counts(m.row_blocks, rows),
                                _block_counts(m.col_blocks, cols))


def block_submatrix(m: BlockMatrix, W: Iterable[int], U: Iterable[int]) -> BlockMatrix:
    """The matrix G(W, U): row blocks listed in ``W`` against column blocks in ``U``."""
    W, U = sorted(set(W)), sorted(set(U))
    for k in W:
        if not 0 <= k < len(m.row_blocks):
            raise IndexError(f"row block {k} out of range")
    for j in U:
        if not 0 <= j < len(m.col_blocks):
            raise IndexError(f"column block {j} out of range")
    rr, cr = m.row_ranges, m.col_ranges
    rows = [r for k in W for r in rr[k]]
    cols = [c for j in U for c in cr[j]]
    sub = m.entries[np.ix_(rows, cols)] if rows and cols else \
        np.zeros((len(rows), len(cols)), dtype=np.int64)
    return BlockMatrix(m.field, sub, tuple(m.row_blocks[k] for k in W),
                       tuple(m.col_blocks[j] for j in U))


def block_rank(m: BlockMatrix, W: Iterable[int], U: Iterable[int]) -> int:
    """``rank(block_submatrix(m, W, U))`` through the memo."""
    return m.masked_rank(m.row_mask(W), m.col_mask(U))


def matvec(m: BlockMatrix, x) -> np.ndarray:
    """Exact product ``m @ x`` over the field, returned as residues."""
    v = np.array([int(e) for e in x], dtype=np.int64)
    if v.shape != (m.cols,):
        raise MatrixError(f"vector of length {v.size} does not match {m.cols} columns")
    v %= m.field.q
    return matmul_mod(m.entries, v.reshape(-1, 1), m.field.q).reshape(-1)
