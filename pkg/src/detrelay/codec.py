"""The single-symbol transmission scheme built from a decomposed flow.

The source writes the ``R`` message symbols into the columns of ``G_1``
picked by the first hop's solution and zeros elsewhere.  Every relay
copies the received entries picked by the previous hop's solution, in
order, into its transmit entries picked by the next hop's solution, again
with zeros elsewhere.  Since only the picked entries are ever nonzero,
the picked received entries after hop ``i`` are ``G_{d_i}`` times the
picked transmitted ones, and the destination undoes the chain with the
product of the inverses.
"""

from __future__ import annotations

import random
from dataclasses import dataclass

import numpy as np

from .fmatrix import BlockMatrix, IndexSelection, inverse, matmul, matmul_mod
from .gf import FieldElement, PrimeField
from .netmodel import LayeredNetwork, NetworkFlow
from .transversal import FlowSolution, find_solution

EXHAUSTIVE_LIMIT = 10**4
DEFAULT_SAMPLES = 1000


class SchemeError(ValueError):
    """The scheme does not fit the network or the message."""


@dataclass(frozen=True)
class TransmissionScheme:
    """Index maps and decoding matrix of a rate-``rate`` scheme.

    ``selections[i]`` holds the global rows and columns of ``G_i`` forming
    its solution.  ``populate[i]`` maps each node of layer ``i`` to the
    local transmit indices it fills, ``extract[i]`` each node of layer
    ``i + 1`` to the local receive indices it reads.
    """

    field: PrimeField
    rate: int
    layers: tuple[tuple[str, ...], ...]
    selections: tuple[IndexSelection, ...]
    populate: tuple[dict, ...]
    extract: tuple[dict, ...]
    hop_inverses: tuple[BlockMatrix, ...]
    decode_matrix: BlockMatrix
    dest_dims: tuple[int, ...]


def _local_map(layer, sizes, indices) -> dict:
    out = {}
    start = 0
    for v, s in zip(layer, sizes):
        out[v] = tuple(i - start for i in indices if start <= i < start + s)
        start += s
    return out


def build_scheme(net: LayeredNetwork, flow: NetworkFlow) -> TransmissionScheme:
    """Extract a solution per hop and assemble the relay maps and decoder."""
    if len(flow.hops) != len(net.transfers):
        raise SchemeError(f"flow has {len(flow.hops)} hops, network has {len(net.transfers)}")
    solutions: list[FlowSolution] = [find_solution(G, d) for G, d in zip(net.transfers, flow.hops)]
    populate, extract = [], []
    for i, (G, sol) in enumerate(zip(net.transfers, solutions)):
        populate.append(_local_map(net.layers[i], G.col_blocks, sol.selection.col_indices))
        extract.append(_local_map(net.layers[i + 1], G.row_blocks, sol.selection.row_indices))
    inverses = tuple(inverse(sol.matrix) for sol in solutions)
    decode = inverses[0]
    for inv in inverses[1:]:
        decode = matmul(decode, inv)
    return TransmissionScheme(net.field, flow.rate, net.layers,
                              tuple(sol.selection for sol in solutions),
                              tuple(populate), tuple(extract), inverses, decode,
                              tuple(net.rx_dim[v] for v in net.layers[-1]))


def _offsets(layer, dims) -> dict:
    out, s = {}, 0
    for v in layer:
        out[v] = s
        s += dims[v]
    return out


def _check_fit(net: LayeredNetwork, scheme: TransmissionScheme) -> None:
    if scheme.field != net.field:
        raise SchemeError("scheme and network use different fields")
    if scheme.layers != net.layers:
        raise SchemeError("scheme was built for a different layer structure")


def _gather(layer, dims, maps, vec) -> np.ndarray:
    offs = _offsets(layer, dims)
    idx = []
    for v in layer:
        for k in maps.get(v, ()):
            if not 0 <= k < dims[v]:
                raise SchemeError(f"index {k} outside the {dims[v]} entries of node {v}")
            idx.append(offs[v] + k)
    return vec[idx]


def _scatter(layer, dims, maps, values, width) -> np.ndarray:
    offs = _offsets(layer, dims)
    out = np.zeros((sum(dims[v] for v in layer), width), dtype=np.int64)
    pos = 0
    for v in layer:
        for k in maps.get(v, ()):
            if not 0 <= k < dims[v]:
                raise SchemeError(f"index {k} outside the {dims[v]} entries of node {v}")
            if pos >= values.shape[0]:
                raise SchemeError("more populated entries than symbols to place")
            out[offs[v] + k] = values[pos]
            pos += 1
    if pos != values.shape[0]:
        raise SchemeError(f"{values.shape[0]} symbols but {pos} populated entries")
    return out


@dataclass(frozen=True)
class Trace:
    """Transmitted and received vectors of every layer for a batch of messages.

    ``xs[i]`` is what layer ``i`` sends, ``ys[i]`` what layer ``i + 1``
    receives; columns are messages.
    """

    xs: tuple[np.ndarray, ...]
    ys: tuple[np.ndarray, ...]


def _as_batch(field: PrimeField, messages, rate: int) -> np.ndarray:
    rows = [[int(s) for s in m] for m in messages]
    for m in rows:
        if len(m) != rate:
            raise SchemeError(f"message has {len(m)} symbols, scheme rate is {rate}")
    return np.array(rows, dtype=np.int64).reshape(len(rows), rate).T % field.q


def simulate(net: LayeredNetwork, scheme: TransmissionScheme, messages) -> Trace:
    """Run the scheme layer by layer on a batch of messages."""
    return _simulate(net, scheme, _as_batch(net.field, messages, scheme.rate))


def _simulate(net: LayeredNetwork, scheme: TransmissionScheme, X: np.ndarray) -> Trace:
    _check_fit(net, scheme)
    q = net.field.q
    width = X.shape[1]
    x = _scatter(net.layers[0], net.tx_dim, scheme.populate[0], X, width)
    xs, ys = [x], []
    for i, G in enumerate(net.transfers):
        y = matmul_mod(G.entries, x, q)
        ys.append(y)
        if i + 1 < len(net.transfers):
            picked = _gather(net.layers[i + 1], net.rx_dim, scheme.extract[i], y)
            x = _scatter(net.layers[i + 1], net.tx_dim, scheme.populate[i + 1], picked, width)
            xs.append(x)
    return Trace(tuple(xs), tuple(ys))


def transmit(net: LayeredNetwork, scheme: TransmissionScheme, message) -> np.ndarray:
    """What the last layer receives when ``message`` is sent."""
    return simulate(net, scheme, [message]).ys[-1][:, 0]


def _decode_batch(scheme: TransmissionScheme, Y: np.ndarray) -> np.ndarray:
    dims = dict(zip(scheme.layers[-1], scheme.dest_dims))
    picked = _gather(scheme.layers[-1], dims, scheme.extract[-1], Y)
    if picked.shape[0] != scheme.decode_matrix.cols:
        raise SchemeError(f"destination reads {picked.shape[0]} entries, "
                          f"decoder expects {scheme.decode_matrix.cols}")
    return matmul_mod(scheme.decode_matrix.entries, picked, scheme.field.q)


def decode(scheme: TransmissionScheme, received) -> tuple[FieldElement, ...]:
    """Recover the message from the destination's received vector."""
    y = np.array([int(v) for v in received], dtype=np.int64)
    if y.shape != (sum(scheme.dest_dims),):
        raise SchemeError(f"received vector has {y.size} entries, "
                          f"destination has {sum(scheme.dest_dims)}")
    out = _decode_batch(scheme, y.reshape(-1, 1) % scheme.field.q)[:, 0]
    return tuple(scheme.field(int(v)) for v in out)


def message_from_index(field: PrimeField, rate: int, index: int) -> tuple[FieldElement, ...]:
    """Message number ``index`` (1-based): base-q digits of ``index - 1``, least significant first."""
    if not 1 <= index <= field.q ** rate:
        raise ValueError(f"message index {index} outside 1..{field.q ** rate}")
    n = index - 1
    digits = []
    for _ in range(rate):
        n, d = divmod(n, field.q)
        digits.append(field(d))
    return tuple(digits)


def _digits(indices: np.ndarray, q: int, rate: int) -> np.ndarray:
    out = np.empty((rate, indices.size), dtype=np.int64)
    n = indices - 1
    for k in range(rate):
        n, out[k] = np.divmod(n, q)
    return out


@dataclass(frozen=True)
class VerificationReport:
    passed: bool
    checked: int
    exhaustive: bool
    failed_index: int | None = None
    sent: tuple[int, ...] | None = None
    decoded: tuple[int, ...] | None = None
    reason: str | None = None

    def __bool__(self):
        return self.passed


def verify_scheme(net: LayeredNetwork, scheme: TransmissionScheme, exhaustive: bool | None = None,
                  samples: int = DEFAULT_SAMPLES, seed: int = 0) -> VerificationReport:
    """Send messages through the scheme and check each decodes to itself.

    By default every message is tried when there are at most ``10**4`` of
    them and ``samples`` seeded random messages otherwise.
    """
    q, R = net.field.q, scheme.rate
    total = q ** R
    if exhaustive is None:
        exhaustive = total <= EXHAUSTIVE_LIMIT
    if exhaustive:
        indices = list(range(1, total + 1))
    else:
        rng = random.Random(seed)
        indices = [rng.randrange(total) + 1 for _ in range(samples)]
    if total < 2**62:
        X = _digits(np.array(indices, dtype=np.int64), q, R)
    else:
        X = np.array([[int(s) for s in message_from_index(net.field, R, w)] for w in indices],
                     dtype=np.int64).reshape(-1, R).T
    try:
        _check_fit(net, scheme)
        out = _decode_batch(scheme, _simulate(net, scheme, X).ys[-1])
    except SchemeError as exc:
        return VerificationReport(False, 0, exhaustive, reason=str(exc))
    bad = np.flatnonzero((out != X).any(axis=0))
    if bad.size:
        k = int(bad[0])
        return VerificationReport(False, k + 1, exhaustive, indices[k],
                                  tuple(X[:, k].tolist()), tuple(out[:, k].tolist()),
                                  "decoded message differs from the one sent")
    return VerificationReport(True, len(indices), exhaustive)
