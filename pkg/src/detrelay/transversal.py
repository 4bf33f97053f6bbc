"""Single-hop flows through a block matrix.

A flow ``d = (tx; rx)`` asks for ``tx[j]`` columns out of column block
``j`` and ``rx[k]`` rows out of row block ``k`` forming a nonsingular
``R x R`` submatrix.  Such a submatrix exists iff for all column-block
sets ``U`` and row-block sets ``W``::

    rank(G(W, U)) >= sum(tx[U]) + sum(rx[W]) - R

Viewed on single-hop cuts ``Omega`` (transmit blocks in ``Omega`` form
``U``, receive blocks outside ``Omega`` form ``W``) the slack of this
inequality is the submodular function ``alpha``, and the test is
``min alpha >= 0``.

Cut bitmask layout used throughout: bit ``j`` is transmit block ``j``
(``0 <= j < m_tx``), bit ``m_tx + k`` is receive block ``k``.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from itertools import combinations, product
from math import comb, prod
from typing import Iterable

import numpy as np

from . import sfm
from .gf import PrimeField
from .fmatrix import DENSE_RANK_LIMIT, BlockMatrix, IndexSelection, submatrix


class InvalidFlowError(ValueError):
    """The flow vector is malformed or does not fit the matrix."""


class UnsupportedFlowError(ValueError):
    """The matrix has no solution for the flow."""


class BudgetExceededError(RuntimeError):
    pass


@dataclass(frozen=True)
class FlowVector:
    """Per-block counts: ``tx`` columns per column block, ``rx`` rows per row block."""

    tx: tuple[int, ...]
    rx: tuple[int, ...]

    def __post_init__(self):
        tx = tuple(int(v) for v in self.tx)
        rx = tuple(int(v) for v in self.rx)
        if any(v < 0 for v in tx + rx):
            raise InvalidFlowError(f"negative count in {tx};{rx}")
        if sum(tx) != sum(rx):
            raise InvalidFlowError(f"unbalanced flow: {sum(tx)} columns vs {sum(rx)} rows")
        object.__setattr__(self, "tx", tx)
        object.__setattr__(self, "rx", rx)

    @property
    def rate(self) -> int:
        return sum(self.tx)

    def validate(self, G: BlockMatrix) -> None:
        problem = _misfit(self.tx, self.rx, G.row_blocks, G.col_blocks)
        if problem:
            raise InvalidFlowError(problem)

    def __str__(self):
        return f"({','.join(map(str, self.tx))};{','.join(map(str, self.rx))})"


@lru_cache(maxsize=65536)
def _misfit(tx, rx, row_blocks, col_blocks) -> str | None:
    """Why the counts do not fit the block sizes, or ``None``."""
    if len(tx) != len(col_blocks):
        return f"{len(tx)} transmit counts for {len(col_blocks)} column blocks"
    if len(rx) != len(row_blocks):
        return f"{len(rx)} receive counts for {len(row_blocks)} row blocks"
    for j, (l, s) in enumerate(zip(tx, col_blocks)):
        if l > s:
            return f"column block {j} has {s} columns, flow asks for {l}"
    for k, (l, s) in enumerate(zip(rx, row_blocks)):
        if l > s:
            return f"row block {k} has {s} rows, flow asks for {l}"
    return None


@dataclass(frozen=True, eq=False)
class FlowSolution:
    selection: IndexSelection
    matrix: BlockMatrix


@dataclass(frozen=True)
class SupportCheck:
    """Verdict of :func:`supports_flow`; falsy when unsupported.

    ``U`` and ``W`` are the column and row blocks of a cut of least
    slack, ``slack`` its value (negative iff the flow is unsupported).
    """

    supported: bool
    U: tuple[int, ...]
    W: tuple[int, ...]
    slack: int

    def __bool__(self):
        return self.supported


def hop_ground(G: BlockMatrix) -> tuple:
    return _layout(G.row_blocks, G.col_blocks).ground


class _Layout:
    """Everything about single-hop cuts that depends only on the block sizes."""

    def __init__(self, row_blocks: tuple[int, ...], col_blocks: tuple[int, ...]):
        mt, mr = len(col_blocks), len(row_blocks)
        self.n = mt + mr
        self.ground = (tuple(("tx", j) for j in range(mt))
                       + tuple(("rx", k) for k in range(mr)))
        shape = BlockMatrix.zeros(_ANY_FIELD, sum(row_blocks), sum(col_blocks),
                                  row_blocks, col_blocks)
        self.blocks = []
        self.row_masks = []
        self.col_masks = []
        for cut in range(1 << self.n):
            U = tuple(j for j in range(mt) if cut >> j & 1)
            W = tuple(k for k in range(mr) if not cut >> (mt + k) & 1)
            self.blocks.append((U, W))
            self.row_masks.append(shape.row_mask(W))
            self.col_masks.append(shape.col_mask(U))
        self.dense = shape.rows + shape.cols <= DENSE_RANK_LIMIT
        if self.dense:
            self.row_arr = np.array(self.row_masks, dtype=np.int64)
            self.col_arr = np.array(self.col_masks, dtype=np.int64)
            # [s, cut] -> rows (columns) of the cut restricted to the subset s
            self.row_sub = np.arange(1 << shape.rows, dtype=np.int64)[:, None] & self.row_arr
            self.col_sub = np.arange(1 << shape.cols, dtype=np.int64)[:, None] & self.col_arr


_ANY_FIELD = PrimeField(2)


@lru_cache(maxsize=None)
def _layout(row_blocks: tuple[int, ...], col_blocks: tuple[int, ...]) -> _Layout:
    return _Layout(row_blocks, col_blocks)


@lru_cache(maxsize=65536)
def _linear_part(tx: tuple[int, ...], rx: tuple[int, ...]) -> np.ndarray:
    # rank - sum(tx in cut) - sum(rx outside cut) + R == rank - sum(tx in cut) + sum(rx in cut)
    weights = np.array([-v for v in tx] + list(rx), dtype=np.int64)
    return sfm.subset_bits(len(weights)) @ weights


def _rank_table(G: BlockMatrix, lay: _Layout, row_keep: int, col_keep: int) -> np.ndarray:
    """rank(T(W, U)) over all cuts, ``T`` being ``G`` cut down to the kept rows/columns."""
    key = (lay, row_keep, col_keep)
    hit = G._memo.get(key)
    if hit is None:
        grid = G.rank_grid()
        if grid is not None:
            hit = grid[lay.row_arr & row_keep, lay.col_arr & col_keep]
        else:
            mr = G.masked_rank
            hit = np.array([mr(r & row_keep, c & col_keep)
                            for r, c in zip(lay.row_masks, lay.col_masks)], dtype=np.int64)
        G._memo[key] = hit
    return hit


def cut_rank_table(G: BlockMatrix) -> np.ndarray:
    """``rank(G(W, U))`` for every single-hop cut, indexed by cut bitmask."""
    return _rank_table(G, _layout(G.row_blocks, G.col_blocks), G.full_row_mask, G.full_col_mask)


def _alpha_function(G: BlockMatrix, d: FlowVector, row_keep: int, col_keep: int) -> sfm.SetFunction:
    lay = _layout(G.row_blocks, G.col_blocks)
    table = _rank_table(G, lay, row_keep, col_keep) + _linear_part(d.tx, d.rx)
    return sfm.SetFunction(lay.ground, table=table)


def alpha_function(G: BlockMatrix, d: FlowVector) -> sfm.SetFunction:
    """The slack ``alpha`` as a set function on single-hop cuts."""
    d.validate(G)
    return _alpha_function(G, d, G.full_row_mask, G.full_col_mask)


def alpha(G: BlockMatrix, d: FlowVector, cut) -> int:
    """Slack of the support inequality at one cut.

    ``cut`` is a bitmask or an iterable of ``("tx", j)`` / ``("rx", k)``
    labels.  With ``U`` the transmit blocks in the cut and ``W`` the
    receive blocks outside it, the value is
    ``rank(G(W, U)) - sum(tx[U]) - sum(rx[W]) + R``.
    """
    d.validate(G)
    lay = _layout(G.row_blocks, G.col_blocks)
    if not isinstance(cut, int):
        index = {e: i for i, e in enumerate(lay.ground)}
        cut = sum(1 << index[e] for e in set(cut))
    U, W = lay.blocks[cut]
    r = G.masked_rank(lay.row_masks[cut], lay.col_masks[cut])
    return r - sum(d.tx[j] for j in U) - sum(d.rx[k] for k in W) + d.rate


def supports_flow(G: BlockMatrix, d: FlowVector) -> SupportCheck:
    """Decide whether ``G`` has a solution for ``d`` by minimising ``alpha``."""
    d.validate(G)
    lay = _layout(G.row_blocks, G.col_blocks)
    table = _rank_table(G, lay, G.full_row_mask, G.full_col_mask) + _linear_part(d.tx, d.rx)
    mask, value = sfm.minimize_table(table)
    U, W = lay.blocks[mask]
    return SupportCheck(value >= 0, U, W, value)


def _row_phase_table(G: BlockMatrix, lay: _Layout, grid: np.ndarray) -> np.ndarray:
    """``[s, cut]`` = rank of ``G(W, U)`` on the rows in ``s`` and all columns."""
    key = ("rows", lay)
    hit = G._memo.get(key)
    if hit is None:
        hit = grid[lay.row_sub, lay.col_arr]
        G._memo[key] = hit
    return hit


def _col_phase_table(G: BlockMatrix, lay: _Layout, grid: np.ndarray, rows: int) -> np.ndarray:
    """``[t, cut]`` = rank of ``G(W, U)`` on the rows in ``rows`` and the columns in ``t``."""
    key = ("cols", lay, rows)
    hit = G._memo.get(key)
    if hit is None:
        hit = grid[lay.row_arr & rows, lay.col_sub]
        G._memo[key] = hit
    return hit


def find_solution(G: BlockMatrix, d: FlowVector) -> FlowSolution:
    """Extract a solution by deleting rows, then columns, while the flow stays supported.

    Rows are tried in ascending global index; a row is deleted as soon as
    the reduced matrix still supports ``d`` (one exact minimisation of
    ``alpha`` per try).  Deleting rows only lowers ranks, so a row that
    could not be deleted earlier never becomes deletable later: one
    ascending pass gives the same result as rescanning from the lowest
    index after every deletion.  Columns are handled the same way
    afterwards.
    """
    d.validate(G)
    lay = _layout(G.row_blocks, G.col_blocks)
    lin = _linear_part(d.tx, d.rx)

    def still_supported(rows: int, cols: int) -> bool:
        _, value = sfm.minimize_table(_rank_table(G, lay, rows, cols) + lin)
        return value >= 0

    rows, cols = G.full_row_mask, G.full_col_mask
    grid = G.rank_grid() if lay.dense else None
    if grid is not None:
        # The same minimisations, batched: one row of the table per
        # candidate row (then column) subset, one column per cut.
        ok_rows = ((_row_phase_table(G, lay, grid) + lin).min(axis=1) >= 0).tolist()
        if not ok_rows[rows]:
            raise UnsupportedFlowError(f"flow {d} is not supported")
        for r in range(G.rows):
            if ok_rows[rows & ~(1 << r)]:
                rows &= ~(1 << r)
        ok_cols = ((_col_phase_table(G, lay, grid, rows) + lin).min(axis=1) >= 0).tolist()
        for c in range(G.cols):
            if ok_cols[cols & ~(1 << c)]:
                cols &= ~(1 << c)
    else:
        if not still_supported(rows, cols):
            raise UnsupportedFlowError(f"flow {d} is not supported")
        for r in range(G.rows):
            if still_supported(rows & ~(1 << r), cols):
                rows &= ~(1 << r)
        for c in range(G.cols):
            if still_supported(rows, cols & ~(1 << c)):
                cols &= ~(1 << c)
    sel = IndexSelection._trusted(tuple(i for i in range(G.rows) if rows >> i & 1),
                                  tuple(i for i in range(G.cols) if cols >> i & 1))
    R = d.rate
    if len(sel.row_indices) != R or len(sel.col_indices) != R or G.masked_rank(rows, cols) != R:
        raise AssertionError(f"row/column deletion ended on a non-solution {sel} for {d}")
    return FlowSolution(sel, submatrix(G, sel))


def _block_choices(ranges, counts) -> Iterable[tuple[int, ...]]:
    per_block = [combinations(rg, l) for rg, l in zip(ranges, counts)]
    for parts in product(*per_block):
        yield tuple(i for p in parts for i in p)


def find_solution_bruteforce(G: BlockMatrix, d: FlowVector,
                             budget: int = 1_000_000) -> FlowSolution | None:
    """First solution in lexicographic (rows, columns) order, or ``None``."""
    d.validate(G)
    n_rows = prod(comb(len(rg), l) for rg, l in zip(G.row_ranges, d.rx))
    n_cols = prod(comb(len(rg), l) for rg, l in zip(G.col_ranges, d.tx))
    if n_rows * n_cols > budget:
        raise BudgetExceededError(
            f"{n_rows * n_cols} candidate submatrices exceed the budget of {budget}")
    R = d.rate
    col_sets = list(_block_choices(G.col_ranges, d.tx))
    for rsel in _block_choices(G.row_ranges, d.rx):
        rmask = sum(1 << i for i in rsel)
        for csel in col_sets:
            if G.masked_rank(rmask, sum(1 << i for i in csel)) == R:
                sel = IndexSelection(rsel, csel)
                return FlowSolution(sel, submatrix(G, sel))
    return None


@lru_cache(maxsize=65536)
def _demands(tx: tuple[int, ...], rx: tuple[int, ...]):
    """Per-cut demand ``sum(tx[U]) + sum(rx[W]) - R``, counted directly.

    Also returns the cuts with ``W`` = every row block or ``U`` = every
    column block, with the number of rows (columns) a solution keeps there.
    """
    mt, R = len(tx), sum(tx)
    bits = sfm.subset_bits(mt + len(rx))
    tx_in = bits[:, :mt]
    rx_out = 1 - bits[:, mt:]
    u_sum = tx_in @ np.array(tx, dtype=np.int64)
    w_sum = rx_out @ np.array(rx, dtype=np.int64)
    need = u_sum + w_sum - R
    all_rows = rx_out.all(axis=1)
    all_cols = tx_in.all(axis=1)
    indep = np.concatenate([np.flatnonzero(all_rows), np.flatnonzero(all_cols)])
    count = np.concatenate([u_sum[all_rows], w_sum[all_cols]])
    return need, indep, count


def necessity_check(sol: FlowSolution, G: BlockMatrix, d: FlowVector) -> bool:
    """Re-derive the support inequalities from a claimed solution.

    Checks that the selection has the right per-block counts and matches
    ``sol.matrix``; that the columns of each ``G_d(all, U)`` and the rows
    of each ``G_d(W, all)`` are independent; and that every support
    inequality holds on ``G_d`` and on ``G`` itself.
    """
    d.validate(G)
    sel = sol.selection
    if any(i >= G.rows for i in sel.row_indices) or any(i >= G.cols for i in sel.col_indices):
        return False
    Gd = submatrix(G, sel)
    if Gd != sol.matrix or Gd.col_blocks != d.tx or Gd.row_blocks != d.rx:
        return False
    lay = _layout(G.row_blocks, G.col_blocks)
    row_sel = sum(1 << i for i in sel.row_indices)
    col_sel = sum(1 << i for i in sel.col_indices)
    # ranks of G_d(W, U) and G(W, U) for every cut, through G's memo
    sub_ranks = _rank_table(G, lay, row_sel, col_sel)
    full_ranks = _rank_table(G, lay, G.full_row_mask, G.full_col_mask)
    need, indep, indep_count = _demands(d.tx, d.rx)
    if (sub_ranks < need).any() or (full_ranks < need).any():
        return False
    # columns of every G_d(all, U) and rows of every G_d(W, all) independent
    return bool((sub_ranks[indep] == indep_count).all())
