"""Layered relay networks: cut capacities, min-cut capacity and multi-hop flows.

A network has layers ``O_1 .. O_M``; hop ``i`` carries ``y_{i+1} = G_i x_i``
with ``G_i`` a block matrix whose column blocks are the transmit
dimensions of layer ``i`` and whose row blocks are the receive dimensions
of layer ``i + 1``.

Cuts are node sets.  Internally a cut is a bitmask over the nodes in
layer order, so every layer occupies a contiguous run of bits and the
bits of layers ``i`` and ``i + 1`` together form a single-hop cut of
``G_i`` (transmit nodes low, receive nodes high).
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import accumulate
from typing import Iterable, Mapping, Sequence

import numpy as np

from . import sfm
from .fmatrix import BlockMatrix
from .gf import PrimeField
from .transversal import FlowVector, cut_rank_table, supports_flow


class NetworkError(ValueError):
    """The network description is inconsistent."""


class UnknownNodeError(NetworkError):
    pass


class InvalidEndCountsError(ValueError):
    pass


class UnsupportedNetworkFlowError(ValueError):
    def __init__(self, message: str, cut: frozenset | None = None, slack: int | None = None):
        super().__init__(message)
        self.cut = cut
        self.slack = slack


class DecompositionError(RuntimeError):
    """An interior flow that must exist was not found; indicates a bug."""


class PolymatroidError(ValueError):
    """A set function handed to the max-min check is not a polymatroid rank function."""


@dataclass(frozen=True, eq=False)
class LayeredNetwork:
    field: PrimeField
    layers: tuple[tuple[str, ...], ...]
    tx_dim: Mapping[str, int]
    rx_dim: Mapping[str, int]
    transfers: tuple[BlockMatrix, ...]

    def __post_init__(self):
        layers = tuple(tuple(str(v) for v in layer) for layer in self.layers)
        object.__setattr__(self, "layers", layers)
        object.__setattr__(self, "transfers", tuple(self.transfers))
        if len(layers) < 2:
            raise NetworkError("a network needs at least two layers")
        if any(not layer for layer in layers):
            raise NetworkError("every layer needs at least one node")
        names = [v for layer in layers for v in layer]
        if len(set(names)) != len(names):
            raise NetworkError("node names must be unique")
        tx = {v: int(self.tx_dim.get(v, 0)) for v in names}
        rx = {v: int(self.rx_dim.get(v, 0)) for v in names}
        if any(d < 0 for d in list(tx.values()) + list(rx.values())):
            raise NetworkError("node dimensions must be non-negative")
        object.__setattr__(self, "tx_dim", tx)
        object.__setattr__(self, "rx_dim", rx)
        if len(self.transfers) != len(layers) - 1:
            raise NetworkError(
                f"{len(layers)} layers need {len(layers) - 1} transfer matrices, "
                f"got {len(self.transfers)}")
        for i, G in enumerate(self.transfers):
            if G.field != self.field:
                raise NetworkError(f"transfer matrix {i} is over a different field")
            want_cols = tuple(tx[v] for v in layers[i])
            want_rows = tuple(rx[v] for v in layers[i + 1])
            if G.col_blocks != want_cols or G.row_blocks != want_rows:
                raise NetworkError(
                    f"transfer matrix {i} has blocks {G.row_blocks}x{G.col_blocks}, "
                    f"layer dimensions need {want_rows}x{want_cols}")

    @classmethod
    def from_edges(cls, field: PrimeField, layers: Sequence[Sequence[str]],
                   tx_dim: Mapping[str, int], rx_dim: Mapping[str, int],
                   edges: Mapping[tuple[str, str], Sequence[Sequence[int]]]) -> LayeredNetwork:
        """Assemble the transfer matrices from per-edge blocks; absent edges are zero."""
        layers = tuple(tuple(layer) for layer in layers)
        layer_of = {v: i for i, layer in enumerate(layers) for v in layer}
        for v in list(tx_dim) + list(rx_dim):
            if v not in layer_of:
                raise UnknownNodeError(f"dimension given for unknown node {v!r}")
        mats = []
        for i in range(len(layers) - 1):
            src, dst = layers[i], layers[i + 1]
            cols = [int(tx_dim.get(v, 0)) for v in src]
            rows = [int(rx_dim.get(v, 0)) for v in dst]
            mats.append(np.zeros((sum(rows), sum(cols)), dtype=np.int64))
        for (u, v), block in edges.items():
            if u not in layer_of or v not in layer_of:
                bad = u if u not in layer_of else v
                raise UnknownNodeError(f"edge {u}->{v} names unknown node {bad!r}")
            i = layer_of[u]
            if layer_of[v] != i + 1:
                raise NetworkError(f"edge {u}->{v} does not join consecutive layers")
            want = (int(rx_dim.get(v, 0)), int(tx_dim.get(u, 0)))
            a = np.array(block, dtype=np.int64)
            if a.size == 0 and want[0] * want[1] == 0:
                a = a.reshape(want)
            if a.shape != want:
                raise NetworkError(f"edge {u}->{v} has a {a.shape[0]}x{a.shape[1]} matrix, "
                                   f"expected {want[0]}x{want[1]}")
            r0 = sum(int(rx_dim.get(w, 0)) for w in layers[i + 1][:layers[i + 1].index(v)])
            c0 = sum(int(tx_dim.get(w, 0)) for w in layers[i][:layers[i].index(u)])
            mats[i][r0:r0 + want[0], c0:c0 + want[1]] = a
        transfers = tuple(
            BlockMatrix(field, m, tuple(int(rx_dim.get(v, 0)) for v in layers[i + 1]),
                        tuple(int(tx_dim.get(v, 0)) for v in layers[i]))
            for i, m in enumerate(mats))
        return cls(field, layers, dict(tx_dim), dict(rx_dim), transfers)

    @property
    def num_layers(self) -> int:
        return len(self.layers)

    @property
    def nodes(self) -> tuple[str, ...]:
        return tuple(v for layer in self.layers for v in layer)

    @property
    def layer_offsets(self) -> tuple[int, ...]:
        """Bit position of the first node of each layer."""
        return tuple(accumulate((len(layer) for layer in self.layers[:-1]), initial=0))

    def edge_block(self, u: str, v: str) -> np.ndarray:
        """The block of ``G_i`` mapping ``x(u)`` into ``y(v)``."""
        i = self.layer_index(u)
        if self.layer_index(v) != i + 1:
            raise NetworkError(f"{u} and {v} are not in consecutive layers")
        G = self.transfers[i]
        rg = G.row_ranges[self.layers[i + 1].index(v)]
        cg = G.col_ranges[self.layers[i].index(u)]
        return G.entries[rg.start:rg.stop, cg.start:cg.stop]

    def layer_index(self, v: str) -> int:
        for i, layer in enumerate(self.layers):
            if v in layer:
                return i
        raise UnknownNodeError(f"unknown node {v!r}")

    def cut_mask(self, cut: Iterable[str]) -> int:
        index = {v: i for i, v in enumerate(self.nodes)}
        mask = 0
        for v in cut:
            if v not in index:
                raise UnknownNodeError(f"unknown node {v!r}")
            mask |= 1 << index[v]
        return mask

    def cut_nodes(self, mask: int) -> frozenset:
        return frozenset(v for i, v in enumerate(self.nodes) if mask >> i & 1)

    def subnetwork(self, first: int, last: int) -> LayeredNetwork:
        """Layers ``first .. last`` (0-based, inclusive) with the transfers between them."""
        if not 0 <= first < last < self.num_layers:
            raise NetworkError(f"invalid layer range {first}..{last}")
        layers = self.layers[first:last + 1]
        names = {v for layer in layers for v in layer}
        return LayeredNetwork(self.field, layers,
                              {v: d for v, d in self.tx_dim.items() if v in names},
                              {v: d for v, d in self.rx_dim.items() if v in names},
                              self.transfers[first:last])


# -- cut capacities ----------------------------------------------------------

def cut_capacity(net: LayeredNetwork, cut: Iterable[str]) -> int:
    """Summed rank of the transfers from nodes in the cut to nodes outside it."""
    mask = net.cut_mask(cut)
    total = 0
    for i, off in enumerate(net.layer_offsets[:-1]):
        width = len(net.layers[i]) + len(net.layers[i + 1])
        total += int(cut_rank_table(net.transfers[i])[mask >> off & ((1 << width) - 1)])
    return total


def cut_capacity_table(net: LayeredNetwork, limit: int | None = sfm.DEFAULT_LIMIT) -> np.ndarray:
    """``C(Omega)`` for every node subset, indexed by cut bitmask."""
    n = len(net.nodes)
    sfm.check_size(n, limit)
    masks = np.arange(1 << n, dtype=np.int64)
    table = np.zeros(1 << n, dtype=np.int64)
    for i, off in enumerate(net.layer_offsets[:-1]):
        width = len(net.layers[i]) + len(net.layers[i + 1])
        table += cut_rank_table(net.transfers[i])[(masks >> off) & ((1 << width) - 1)]
    return table


def cut_capacity_function(net: LayeredNetwork, limit: int | None = sfm.DEFAULT_LIMIT) -> sfm.SetFunction:
    return sfm.SetFunction(net.nodes, table=cut_capacity_table(net, limit))


def _single_ends(net: LayeredNetwork) -> tuple[str, str]:
    if len(net.layers[0]) != 1 or len(net.layers[-1]) != 1:
        raise NetworkError("capacity needs a single source and a single destination")
    return net.layers[0][0], net.layers[-1][0]


def capacity(net: LayeredNetwork, limit: int | None = sfm.DEFAULT_LIMIT) -> tuple[int, frozenset]:
    """Minimum cut capacity over cuts holding the source and not the destination."""
    _single_ends(net)
    n = len(net.nodes)
    sfm.check_size(n - 2, limit)
    f = cut_capacity_function(net, limit=None)
    masks = np.arange(1 << n, dtype=np.int64)
    separating = ((masks & 1) == 1) & ((masks >> (n - 1) & 1) == 0)
    best = sfm.minimize(f, restriction=separating, limit=None)
    return best.value, net.cut_nodes(best.mask)


# -- end-to-end flows --------------------------------------------------------

def _check_end_counts(net: LayeredNetwork, first: Sequence[int], last: Sequence[int]):
    first, last = tuple(int(v) for v in first), tuple(int(v) for v in last)
    if len(first) != len(net.layers[0]) or len(last) != len(net.layers[-1]):
        raise InvalidEndCountsError(
            f"need {len(net.layers[0])} first-layer and {len(net.layers[-1])} last-layer counts")
    if any(v < 0 for v in first + last):
        raise InvalidEndCountsError("counts must be non-negative")
    if sum(first) != sum(last):
        raise InvalidEndCountsError(f"unbalanced end counts: {sum(first)} vs {sum(last)}")
    return first, last


def _end_weights(net: LayeredNetwork, first, last) -> np.ndarray:
    """``-sum(first in cut) + sum(last in cut)`` for every cut.

    With ``R`` the rate this equals ``R - sum(first in cut) - sum(last
    outside cut)``, the demand side of the cut condition.
    """
    n = len(net.nodes)
    w = np.zeros(n, dtype=np.int64)
    w[:len(first)] -= first
    w[n - len(last):] += last
    return sfm.subset_bits(n) @ w


@dataclass(frozen=True)
class NetworkSupport:
    """Verdict of :func:`supports_network_flow`; falsy when some cut is too small."""

    supported: bool
    cut: frozenset
    slack: int

    def __bool__(self):
        return self.supported


def network_slack_function(net: LayeredNetwork, first, last,
                           limit: int | None = sfm.DEFAULT_LIMIT) -> sfm.SetFunction:
    """``C(Omega) - sum(first in Omega) - sum(last outside Omega) + R`` over all cuts."""
    first, last = _check_end_counts(net, first, last)
    return sfm.SetFunction(net.nodes, table=cut_capacity_table(net, limit)
                           + _end_weights(net, first, last))


def supports_network_flow(net: LayeredNetwork, first: Sequence[int], last: Sequence[int],
                          limit: int | None = sfm.DEFAULT_LIMIT) -> NetworkSupport:
    """Whether every cut can carry the demand implied by the end counts."""
    best = sfm.minimize(network_slack_function(net, first, last, limit), limit=limit)
    return NetworkSupport(best.value >= 0, net.cut_nodes(best.mask), best.value)


# -- the middle-layer functions ---------------------------------------------

def f_A_function(net_a: LayeredNetwork, first: Sequence[int], rate: int,
                 limit: int | None = sfm.DEFAULT_LIMIT) -> sfm.SetFunction:
    """Set function on the last layer of the prefix network ``net_a``.

    ``f_A(T)`` is the least ``C(Omega_A) - sum(first in Omega_A) + R`` over
    cuts of ``net_a`` that hold every last-layer node except those in ``T``.
    """
    first = tuple(int(v) for v in first)
    if len(first) != len(net_a.layers[0]):
        raise InvalidEndCountsError("first-layer counts do not match the network")
    n = len(net_a.nodes)
    mk = len(net_a.layers[-1])
    free = n - mk
    sfm.check_size(free, limit)
    w = np.zeros(n, dtype=np.int64)
    w[:len(first)] -= first
    values = cut_capacity_table(net_a, limit=None) + sfm.subset_bits(n) @ w + rate
    by_last = values.reshape(1 << mk, 1 << free)
    full = (1 << mk) - 1
    out = np.empty(1 << mk, dtype=np.int64)
    for T in range(1 << mk):
        # last-layer bits of Omega_A are fixed to the complement of T
        inner = sfm.SetFunction(net_a.nodes[:free], table=by_last[full ^ T])
        out[T] = sfm.minimize(inner, limit=None).value
    return sfm.SetFunction(net_a.layers[-1], table=out)


def f_B_function(net_b: LayeredNetwork, last: Sequence[int], rate: int,
                 limit: int | None = sfm.DEFAULT_LIMIT) -> sfm.SetFunction:
    """Set function on the first layer of the suffix network ``net_b``.

    ``f_B(T)`` is the least ``C(Omega_B) - sum(last outside Omega_B) + R``
    over cuts of ``net_b`` whose first-layer part is exactly ``T``.
    """
    last = tuple(int(v) for v in last)
    if len(last) != len(net_b.layers[-1]):
        raise InvalidEndCountsError("last-layer counts do not match the network")
    n = len(net_b.nodes)
    mk = len(net_b.layers[0])
    free = n - mk
    sfm.check_size(free, limit)
    w = np.zeros(n, dtype=np.int64)
    w[n - len(last):] += last
    # R - sum(last outside) == sum(last inside)
    values = cut_capacity_table(net_b, limit=None) + sfm.subset_bits(n) @ w
    by_first = values.reshape(1 << free, 1 << mk)
    out = np.empty(1 << mk, dtype=np.int64)
    for T in range(1 << mk):
        inner = sfm.SetFunction(net_b.nodes[mk:], table=np.ascontiguousarray(by_first[:, T]))
        out[T] = sfm.minimize(inner, limit=None).value
    return sfm.SetFunction(net_b.layers[0], table=out)


def f_A(net_a: LayeredNetwork, first: Sequence[int], rate: int, T: Iterable[str]) -> int:
    f = f_A_function(net_a, first, rate)
    return f.of(_members(f, T))


def f_B(net_b: LayeredNetwork, last: Sequence[int], rate: int, T: Iterable[str]) -> int:
    f = f_B_function(net_b, last, rate)
    return f.of(_members(f, T))


def _members(f: sfm.SetFunction, T: Iterable[str]) -> list[str]:
    T = list(T)
    for v in T:
        if v not in f.ground:
            raise UnknownNodeError(f"{v!r} is not in the middle layer {f.ground}")
    return T


def _check_polymatroid(f: sfm.SetFunction, name: str) -> None:
    if f(0) != 0:
        raise PolymatroidError(f"{name} is {f(0)} on the empty set, not 0")
    mono = sfm.is_nondecreasing(f)
    if not mono:
        raise PolymatroidError(f"{name} is not nondecreasing (witness {mono.witness})")
    sub = sfm.is_submodular(f)
    if not sub:
        raise PolymatroidError(f"{name} is not submodular (witness {sub.witness})")


def edmonds_maxmin_check(f1: sfm.SetFunction, f2: sfm.SetFunction) -> tuple[int, tuple]:
    """``min over T of f1(T) + f2(ground - T)`` and a minimising ``T``.

    This is the largest total of an integer point in both polymatroids.
    """
    if f1.ground != f2.ground:
        raise ValueError("the two functions live on different ground sets")
    _check_polymatroid(f1, "f1")
    _check_polymatroid(f2, "f2")
    full = (1 << f1.n) - 1
    masks = np.arange(1 << f1.n, dtype=np.int64)
    both = sfm.SetFunction(f1.ground, table=f1.table() + f2.table()[full ^ masks])
    best = sfm.minimize(both)
    return best.value, best.subset


def common_point(f1: sfm.SetFunction, f2: sfm.SetFunction, total: int) -> tuple[int, ...] | None:
    """First integer vector in both polymatroids with coordinate sum ``total``.

    Depth-first over coordinates in ground order, larger values first; a
    partial vector is abandoned as soon as it breaks a constraint of
    either polymatroid on a subset of the coordinates fixed so far.
    """
    n = f1.n
    t1, t2 = f1.table(), f2.table()
    caps = [int(min(t1[1 << j], t2[1 << j])) for j in range(n)]
    x = [0] * n
    # sums[mask] = x(mask) over the coordinates fixed so far
    sums = [0] * (1 << n)

    def feasible(j: int) -> bool:
        bit = 1 << j
        for low in range(bit):
            mask = low | bit
            s = sums[low] + x[j]
            sums[mask] = s
            if s > t1[mask] or s > t2[mask]:
                return False
        return True

    def search(j: int, used: int) -> bool:
        if j == n:
            return used == total
        if used + sum(caps[j:]) < total:
            return False
        for v in range(min(caps[j], total - used), -1, -1):
            x[j] = v
            if feasible(j) and search(j + 1, used + v):
                return True
        x[j] = 0
        return False

    return tuple(x) if search(0, 0) else None


@dataclass(frozen=True)
class NetworkFlow:
    """End counts plus the interior counts and per-hop flows realising them."""

    first: tuple[int, ...]
    last: tuple[int, ...]
    interior: tuple[tuple[int, ...], ...]
    hops: tuple[FlowVector, ...]

    @property
    def rate(self) -> int:
        return sum(self.first)

    @property
    def per_layer(self) -> tuple[tuple[int, ...], ...]:
        return (self.first,) + self.interior + (self.last,)


def decompose_flow(net: LayeredNetwork, first: Sequence[int], last: Sequence[int],
                   limit: int | None = sfm.DEFAULT_LIMIT) -> NetworkFlow:
    """Split an end-to-end flow into per-layer counts, peeling one hop at a time.

    Each step cuts the remaining network after its second layer, builds
    ``f_A`` and ``f_B`` on that layer and takes a common integer point of
    their polymatroids with total ``R`` as the layer's counts.
    """
    first, last = _check_end_counts(net, first, last)
    verdict = supports_network_flow(net, first, last, limit)
    if not verdict:
        raise UnsupportedNetworkFlowError(
            f"end counts {first};{last} violate the cut condition at "
            f"{sorted(verdict.cut)} (slack {verdict.slack})", verdict.cut, verdict.slack)
    R = sum(first)
    counts = [first]
    rest = net
    while rest.num_layers > 2:
        fa = f_A_function(rest.subnetwork(0, 1), counts[-1], R, limit)
        fb = f_B_function(rest.subnetwork(1, rest.num_layers - 1), last, R, limit)
        try:
            bound, _ = edmonds_maxmin_check(fa, fb)
        except PolymatroidError as exc:
            raise DecompositionError(f"middle-layer functions are not polymatroids: {exc}")
        if bound < R:
            raise DecompositionError(f"middle layer {rest.layers[1]} carries at most {bound} < {R}")
        point = common_point(fa, fb, R)
        if point is None:
            raise DecompositionError(f"no integer split of {R} found on {rest.layers[1]}")
        counts.append(point)
        rest = rest.subnetwork(1, rest.num_layers - 1)
    counts.append(last)
    hops = tuple(FlowVector(counts[i], counts[i + 1]) for i in range(len(counts) - 1))
    for i, (G, d) in enumerate(zip(net.transfers, hops)):
        if not supports_flow(G, d):
            raise DecompositionError(f"hop {i} flow {d} is not supported")
    return NetworkFlow(first, last, tuple(counts[1:-1]), hops)
