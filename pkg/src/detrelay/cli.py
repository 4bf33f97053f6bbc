"""Command-line entry points.

Results go to stdout as ``key=value`` lines; diagnostics go to stderr.
Exit status: 0 success, 1 refusal (rate above capacity, unsupported flow,
failed verification), 2 bad input.  Block indices printed by
``check-support`` are 1-based.
"""

from __future__ import annotations

import argparse
import logging
import random
import sys
import warnings

from . import codec, netmodel, sfm
from .fmatrix import MatrixError
from .formats import FormatError, dump_scheme, load_matrix, load_network, load_scheme
from .gf import PrimeField
from .transversal import FlowVector, InvalidFlowError, supports_flow

log = logging.getLogger("detrelay")

OK, REFUSED, BAD_INPUT = 0, 1, 2


class _Refusal(Exception):
    pass


def _ints(text: str) -> list[int]:
    try:
        return [int(v) for v in text.split(",") if v.strip() != ""]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


def _out(key: str, value) -> None:
    print(f"{key}={value}")


def _join(values) -> str:
    return ",".join(str(v) for v in values)


def _nodes_in_order(net, nodes) -> str:
    return _join(v for v in net.nodes if v in nodes)


def _end_counts(net, args) -> tuple[list[int], list[int]]:
    if args.rate is not None:
        if len(net.layers[0]) != 1 or len(net.layers[-1]) != 1:
            raise netmodel.NetworkError("--rate needs a single source and destination; "
                                        "use --first/--last")
        if args.rate < 0:
            raise netmodel.InvalidEndCountsError("rate must be non-negative")
        return [args.rate], [args.rate]
    if args.first is None or args.last is None:
        raise netmodel.InvalidEndCountsError("give --rate, or both --first and --last")
    return args.first, args.last


def _decomposed(net, first, last) -> netmodel.NetworkFlow:
    verdict = netmodel.supports_network_flow(net, first, last)
    if not verdict:
        _out("refused", "flow exceeds a cut")
        _out("cut", _nodes_in_order(net, verdict.cut))
        _out("cut_capacity", netmodel.cut_capacity(net, verdict.cut))
        _out("required", netmodel.cut_capacity(net, verdict.cut) - verdict.slack)
        raise _Refusal
    return netmodel.decompose_flow(net, first, last)


def cmd_capacity(args) -> int:
    net = load_network(args.network)
    value, cut = netmodel.capacity(net)
    _out("capacity", value)
    _out("cut", _nodes_in_order(net, cut))
    return OK


def cmd_scheme(args) -> int:
    net = load_network(args.network)
    first, last = _end_counts(net, args)
    flow = _decomposed(net, first, last)
    scheme = codec.build_scheme(net, flow)
    dump_scheme(scheme, args.out)
    _out("rate", scheme.rate)
    _out("scheme", args.out)
    return OK


def cmd_decompose(args) -> int:
    net = load_network(args.network)
    first, last = _end_counts(net, args)
    flow = _decomposed(net, first, last)
    _out("rate", flow.rate)
    for i, counts in enumerate(flow.per_layer, start=1):
        _out(f"layer_{i}", _join(counts))
    for i, d in enumerate(flow.hops, start=1):
        _out(f"hop_{i}", d)
    return OK


def cmd_verify(args) -> int:
    net = load_network(args.network)
    scheme = load_scheme(args.scheme)
    exhaustive = True if args.exhaustive else (False if args.samples is not None else None)
    samples = args.samples if args.samples is not None else codec.DEFAULT_SAMPLES
    report = codec.verify_scheme(net, scheme, exhaustive=exhaustive, samples=samples,
                                 seed=args.seed)
    if report.reason and report.failed_index is None:
        raise codec.SchemeError(report.reason)
    _out("result", "pass" if report else "fail")
    _out("mode", "exhaustive" if report.exhaustive else "sampled")
    _out("checked", report.checked)
    if not report:
        _out("message_index", report.failed_index)
        _out("sent", _join(report.sent))
        _out("decoded", _join(report.decoded))
        return REFUSED
    return OK


def cmd_simulate(args) -> int:
    net = load_network(args.network)
    scheme = load_scheme(args.scheme)
    field = net.field
    if args.message is not None:
        message = tuple(field(v) for v in args.message)
        if len(message) != scheme.rate:
            raise codec.SchemeError(f"message has {len(message)} symbols, rate is {scheme.rate}")
    else:
        index = args.index
        if index is None:
            index = random.Random(args.seed).randrange(field.q ** scheme.rate) + 1
        message = codec.message_from_index(field, scheme.rate, index)
        _out("message_index", index)
    received = codec.transmit(net, scheme, message)
    decoded = codec.decode(scheme, received)
    _out("sent", _join(int(s) for s in message))
    _out("received", _join(received.tolist()))
    _out("decoded", _join(int(s) for s in decoded))
    ok = tuple(int(s) for s in decoded) == tuple(int(s) for s in message)
    _out("ok", "true" if ok else "false")
    return OK if ok else REFUSED


def cmd_check_support(args) -> int:
    G = load_matrix(args.matrix, args.row_blocks, args.col_blocks)
    d = FlowVector(args.tx, args.rx)
    verdict = supports_flow(G, d)
    _out("supported", "true" if verdict else "false")
    _out("flow", d)
    if not verdict:
        rank = G.masked_rank(G.row_mask(verdict.W), G.col_mask(verdict.U))
        _out("U", _join(j + 1 for j in verdict.U))
        _out("W", _join(k + 1 for k in verdict.W))
        _out("rank", rank)
        _out("required", rank - verdict.slack)
        return REFUSED
    return OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="detrelay",
        description="Capacity and explicit coding schemes for layered linear deterministic "
                    "relay networks over prime fields.")
    parser.add_argument("--seed", type=int, default=0,
                        help="seed for sampled verification and random messages (default 0)")
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging on stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("capacity", help="min-cut capacity and one minimising cut")
    p.add_argument("network")
    p.set_defaults(func=cmd_capacity)

    def end_counts(p):
        p.add_argument("--rate", type=int, help="rate R for a single source and destination")
        p.add_argument("--first", type=_ints, help="first-layer counts, e.g. 2,1")
        p.add_argument("--last", type=_ints, help="last-layer counts")

    p = sub.add_parser("scheme", help="build a transmission scheme and write it as JSON")
    p.add_argument("network")
    end_counts(p)
    p.add_argument("--out", required=True, help="scheme file to write")
    p.set_defaults(func=cmd_scheme)

    p = sub.add_parser("decompose", help="print the per-layer counts of a flow")
    p.add_argument("network")
    end_counts(p)
    p.set_defaults(func=cmd_decompose)

    p = sub.add_parser("verify", help="round-trip messages through a scheme")
    p.add_argument("network")
    p.add_argument("scheme")
    mode = p.add_mutually_exclusive_group()
    mode.add_argument("--exhaustive", action="store_true", help="try every message")
    mode.add_argument("--samples", type=int, help="try this many seeded random messages")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("simulate", help="send one message through a scheme")
    p.add_argument("network")
    p.add_argument("scheme")
    which = p.add_mutually_exclusive_group()
    which.add_argument("--message", type=_ints, help="message symbols, e.g. 1,0,2")
    which.add_argument("--index", type=int, help="message number in 1..q^R")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("check-support", help="test whether a block matrix supports a flow")
    p.add_argument("matrix")
    p.add_argument("--row-blocks", type=_ints, help="row block sizes, e.g. 1,1")
    p.add_argument("--col-blocks", type=_ints, help="column block sizes")
    p.add_argument("--tx", type=_ints, required=True, help="columns per column block")
    p.add_argument("--rx", type=_ints, required=True, help="rows per row block")
    p.set_defaults(func=cmd_check_support)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s: %(message)s", stream=sys.stderr)
    logging.captureWarnings(True)
    warnings.simplefilter("always")
    try:
        return args.func(args)
    except _Refusal:
        return REFUSED
    except netmodel.UnsupportedNetworkFlowError as exc:
        log.error("%s", exc)
        return REFUSED
    except sfm.GroundSetTooLargeError as exc:
        log.error("%s", exc)
        return BAD_INPUT
    except (FormatError, InvalidFlowError, MatrixError, netmodel.NetworkError,
            netmodel.InvalidEndCountsError, codec.SchemeError, OSError) as exc:
        log.error("%s", exc)
        return BAD_INPUT


if __name__ == "__main__":
    sys.exit(main())
