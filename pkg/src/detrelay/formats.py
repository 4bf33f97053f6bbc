"""JSON documents for networks, single matrices and transmission schemes.

Network::

    {"q": 2,
     "layers": [["S"], ["A", "B"], ["D"]],
     "nodes": {"S": {"tx": 1}, "A": {"tx": 1, "rx": 1}, ...},
     "edges": [{"from": "S", "to": "A", "matrix": [[1]]}, ...]}

Missing ``tx``/``rx`` dimensions are 0 and missing edges are zero blocks.
Matrix::

    {"q": 2, "matrix": [[1, 0], [0, 0]], "row_blocks": [1, 1], "col_blocks": [1, 1]}

Entries outside ``0..q-1`` are reduced mod ``q`` with a warning.
"""

from __future__ import annotations

import json
import warnings

from .codec import TransmissionScheme
from .fmatrix import BlockMatrix, IndexSelection
from .gf import PrimeField
from .netmodel import LayeredNetwork


class FormatError(ValueError):
    """The document is not valid JSON or does not describe the expected object."""


class ReducedEntryWarning(UserWarning):
    pass


def _load_json(text: str, what: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise FormatError(f"{what}: line {exc.lineno}, column {exc.colno}: {exc.msg}") from None


def _need(doc: dict, key: str, kind, where: str):
    if not isinstance(doc, dict) or key not in doc:
        raise FormatError(f"{where}: missing key {key!r}")
    value = doc[key]
    if not isinstance(value, kind) or isinstance(value, bool):
        raise FormatError(f"{where}: {key!r} has the wrong type")
    return value


def _field(doc: dict, where: str) -> PrimeField:
    q = _need(doc, "q", int, where)
    try:
        return PrimeField(q)
    except ValueError as exc:
        raise FormatError(f"{where}: {exc}") from None


def _int_list(value, where: str) -> list[int]:
    if not isinstance(value, list) or not all(isinstance(v, int) and not isinstance(v, bool)
                                              for v in value):
        raise FormatError(f"{where}: expected a list of integers")
    return value


def _entries(rows, q: int, where: str) -> list[list[int]]:
    if not isinstance(rows, list):
        raise FormatError(f"{where}: matrix must be a list of rows")
    out = []
    for i, row in enumerate(rows):
        row = _int_list(row, f"{where} row {i}")
        if any(not 0 <= v < q for v in row):
            warnings.warn(f"{where} row {i}: entries reduced mod {q}", ReducedEntryWarning,
                          stacklevel=3)
        out.append([v % q for v in row])
    if len({len(r) for r in out}) > 1:
        raise FormatError(f"{where}: rows have different lengths")
    return out


# -- networks -----------------------------------------------------------------

def network_from_dict(doc) -> LayeredNetwork:
    where = "network"
    field = _field(doc, where)
    layers = _need(doc, "layers", list, where)
    if not all(isinstance(layer, list) and all(isinstance(v, str) for v in layer)
               for layer in layers):
        raise FormatError(f"{where}: layers must be lists of node names")
    nodes = doc.get("nodes", {})
    if not isinstance(nodes, dict):
        raise FormatError(f"{where}: 'nodes' must map node names to dimensions")
    tx, rx = {}, {}
    for v, dims in nodes.items():
        if not isinstance(dims, dict):
            raise FormatError(f"{where}: node {v!r} needs an object with 'tx'/'rx'")
        for key, store in (("tx", tx), ("rx", rx)):
            d = dims.get(key, 0)
            if not isinstance(d, int) or isinstance(d, bool) or d < 0:
                raise FormatError(f"{where}: node {v!r} has an invalid {key} dimension")
            store[v] = d
    edges = {}
    for k, e in enumerate(doc.get("edges", [])):
        ew = f"{where} edge {k}"
        u = _need(e, "from", str, ew)
        v = _need(e, "to", str, ew)
        if (u, v) in edges:
            raise FormatError(f"{ew}: duplicate edge {u}->{v}")
        edges[u, v] = _entries(_need(e, "matrix", list, ew), field.q, f"{ew} ({u}->{v})")
    try:
        return LayeredNetwork.from_edges(field, layers, tx, rx, edges)
    except ValueError as exc:
        raise FormatError(f"{where}: {exc}") from None


def network_to_dict(net: LayeredNetwork) -> dict:
    edges = []
    for i in range(net.num_layers - 1):
        for u in net.layers[i]:
            for v in net.layers[i + 1]:
                block = net.edge_block(u, v)
                if block.size and block.any():
                    edges.append({"from": u, "to": v, "matrix": block.tolist()})
    return {"q": net.field.q,
            "layers": [list(layer) for layer in net.layers],
            "nodes": {v: {"tx": net.tx_dim[v], "rx": net.rx_dim[v]} for v in net.nodes},
            "edges": edges}


def load_network(path: str) -> LayeredNetwork:
    with open(path) as fh:
        return network_from_dict(_load_json(fh.read(), path))


# -- single matrices ----------------------------------------------------------

def matrix_from_dict(doc, row_blocks=None, col_blocks=None) -> BlockMatrix:
    where = "matrix"
    field = _field(doc, where)
    rows = _entries(_need(doc, "matrix", list, where), field.q, where)
    if row_blocks is None and "row_blocks" in doc:
        row_blocks = _int_list(doc["row_blocks"], f"{where}: row_blocks")
    if col_blocks is None and "col_blocks" in doc:
        col_blocks = _int_list(doc["col_blocks"], f"{where}: col_blocks")
    try:
        return BlockMatrix.from_rows(field, rows, row_blocks, col_blocks)
    except ValueError as exc:
        raise FormatError(f"{where}: {exc}") from None


def load_matrix(path: str, row_blocks=None, col_blocks=None) -> BlockMatrix:
    with open(path) as fh:
        return matrix_from_dict(_load_json(fh.read(), path), row_blocks, col_blocks)


# -- schemes ------------------------------------------------------------------

def _block_to_dict(m: BlockMatrix) -> dict:
    return {"matrix": m.tolist(), "row_blocks": list(m.row_blocks),
            "col_blocks": list(m.col_blocks)}


def _block_from_dict(doc, field: PrimeField, where: str) -> BlockMatrix:
    rows = _entries(_need(doc, "matrix", list, where), field.q, where)
    rb = _int_list(_need(doc, "row_blocks", list, where), where)
    cb = _int_list(_need(doc, "col_blocks", list, where), where)
    try:
        return BlockMatrix.from_rows(field, rows, rb, cb)
    except ValueError as exc:
        raise FormatError(f"{where}: {exc}") from None


def scheme_to_dict(s: TransmissionScheme) -> dict:
    return {
        "q": s.field.q,
        "rate": s.rate,
        "layers": [list(layer) for layer in s.layers],
        "dest_dims": list(s.dest_dims),
        "hops": [{"rows": list(sel.row_indices), "cols": list(sel.col_indices)}
                 for sel in s.selections],
        "populate": [{v: list(ix) for v, ix in m.items()} for m in s.populate],
        "extract": [{v: list(ix) for v, ix in m.items()} for m in s.extract],
        "hop_inverses": [_block_to_dict(m) for m in s.hop_inverses],
        "decode_matrix": _block_to_dict(s.decode_matrix),
    }


def _index_maps(value, where: str) -> tuple[dict, ...]:
    if not isinstance(value, list) or not all(isinstance(m, dict) for m in value):
        raise FormatError(f"{where}: expected a list of node -> index-list maps")
    return tuple({v: tuple(_int_list(ix, f"{where} node {v}")) for v, ix in m.items()}
                 for m in value)


def scheme_from_dict(doc) -> TransmissionScheme:
    where = "scheme"
    field = _field(doc, where)
    rate = _need(doc, "rate", int, where)
    layers = tuple(tuple(layer) for layer in _need(doc, "layers", list, where))
    hops = []
    for k, h in enumerate(_need(doc, "hops", list, where)):
        rows = _int_list(_need(h, "rows", list, f"{where} hop {k}"), f"{where} hop {k}")
        cols = _int_list(_need(h, "cols", list, f"{where} hop {k}"), f"{where} hop {k}")
        try:
            hops.append(IndexSelection(tuple(rows), tuple(cols)))
        except (ValueError, IndexError) as exc:
            raise FormatError(f"{where} hop {k}: {exc}") from None
    inverses = tuple(_block_from_dict(m, field, f"{where} inverse {k}")
                     for k, m in enumerate(_need(doc, "hop_inverses", list, where)))
    return TransmissionScheme(
        field, rate, layers, tuple(hops),
        _index_maps(_need(doc, "populate", list, where), f"{where} populate"),
        _index_maps(_need(doc, "extract", list, where), f"{where} extract"),
        inverses,
        _block_from_dict(_need(doc, "decode_matrix", dict, where), field, f"{where} decoder"),
        tuple(_int_list(_need(doc, "dest_dims", list, where), f"{where} dest_dims")))


def dump_scheme(s: TransmissionScheme, path: str) -> None:
    with open(path, "w") as fh:
        json.dump(scheme_to_dict(s), fh, indent=1)
        fh.write("\n")


def load_scheme(path: str) -> TransmissionScheme:
    with open(path) as fh:
        return scheme_from_dict(_load_json(fh.read(), path))
