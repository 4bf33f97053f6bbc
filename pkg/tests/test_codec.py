import dataclasses

import numpy as np
import pytest

from detrelay.codec import (SchemeError, build_scheme, decode, message_from_index, simulate,
                            transmit, verify_scheme)
from detrelay.fmatrix import BlockMatrix, matmul, submatrix
from detrelay.gf import PrimeField
from detrelay.netmodel import LayeredNetwork, capacity, decompose_flow, supports_network_flow

from netgen import networks, random_network


def identity_chain(q, dim, hops):
    names = ["S"] + [f"N{i}" for i in range(hops - 1)] + ["D"]
    eye = np.eye(dim, dtype=int).tolist()
    return LayeredNetwork.from_edges(
        PrimeField(q), [[v] for v in names], {v: dim for v in names[:-1]},
        {v: dim for v in names[1:]}, {(names[i], names[i + 1]): eye for i in range(hops)})


def scaled_diamond():
    F = PrimeField(3)
    edges = {("S", "A"): [[2]], ("S", "B"): [[1]], ("A", "D"): [[2]], ("B", "D"): [[1]]}
    return LayeredNetwork.from_edges(F, [["S"], ["A", "B"], ["D"]], {"S": 1, "A": 1, "B": 1},
                                     {"A": 1, "B": 1, "D": 1}, edges)


def scheme_at(net, R):
    return build_scheme(net, decompose_flow(net, [R], [R]))


def test_identity_chain_scheme():
    net = identity_chain(5, 3, 3)
    scheme = scheme_at(net, 2)
    # rows and columns are deleted lowest index first, so the trailing ones survive
    assert all(sel.row_indices == (1, 2) and sel.col_indices == (1, 2)
               for sel in scheme.selections)
    assert scheme.decode_matrix == BlockMatrix.identity(net.field, 2)
    F = net.field
    msg = (F(4), F(2))
    y = transmit(net, scheme, msg)
    assert y.tolist() == [0, 4, 2]
    assert decode(scheme, y) == msg


def test_diamond_decoder_is_product_of_scalar_inverses():
    net = scaled_diamond()
    scheme = scheme_at(net, 1)
    # hop 1 keeps S->A (2), hop 2 keeps A->D (2); 2^-1 * 2^-1 = 2 * 2 = 1 mod 3
    assert [m.tolist() for m in scheme.hop_inverses] == [[[2]], [[2]]]
    assert scheme.decode_matrix.tolist() == [[(pow(2, -1, 3) * pow(2, -1, 3)) % 3]]
    F = net.field
    for v in range(3):
        assert decode(scheme, transmit(net, scheme, (F(v),))) == (F(v),)


def test_zero_rate_scheme():
    net = scaled_diamond()
    scheme = scheme_at(net, 0)
    assert scheme.rate == 0 and scheme.decode_matrix.shape == (0, 0)
    assert transmit(net, scheme, ()).tolist() == [0]
    assert decode(scheme, [0]) == ()
    report = verify_scheme(net, scheme)
    assert report and report.checked == 1


def test_zero_message_and_additivity():
    rng = np.random.default_rng(1)
    for net in networks(20, seed=2):
        C = capacity(net)[0]
        if C == 0:
            continue
        scheme = scheme_at(net, C)
        q = net.field.q
        assert not transmit(net, scheme, (0,) * C).any()
        assert decode(scheme, [0] * len(transmit(net, scheme, (0,) * C))) == (net.field.zero,) * C
        for _ in range(10):
            m1, m2 = rng.integers(0, q, size=(2, C))
            lhs = transmit(net, scheme, tuple((m1 + m2) % q))
            rhs = (transmit(net, scheme, tuple(m1)) + transmit(net, scheme, tuple(m2))) % q
            assert (lhs == rhs).all()


def test_unpopulated_entries_stay_zero():
    for net in networks(20, seed=3):
        C = capacity(net)[0]
        scheme = scheme_at(net, C)
        q = net.field.q
        msgs = np.random.default_rng(4).integers(0, q, size=(16, C)).tolist()
        trace = simulate(net, scheme, msgs)
        for i, x in enumerate(trace.xs):
            layer = net.layers[i]
            keep = []
            off = 0
            for v in layer:
                keep += [off + k for k in scheme.populate[i].get(v, ())]
                off += net.tx_dim[v]
            mask = np.ones(x.shape[0], dtype=bool)
            mask[keep] = False
            assert not x[mask].any()


def test_decoder_inverts_the_hop_product():
    for net in networks(25, seed=5):
        C = capacity(net)[0]
        scheme = scheme_at(net, C)
        prod = BlockMatrix.identity(net.field, C)
        for G, sel in zip(net.transfers, scheme.selections):
            prod = matmul(submatrix(G, sel).reblock((C,), (C,)), prod)
        assert matmul(scheme.decode_matrix, prod) == BlockMatrix.identity(net.field, C)


def test_round_trip_all_messages():
    for net in networks(30, seed=6):
        C = capacity(net)[0]
        scheme = scheme_at(net, C)
        report = verify_scheme(net, scheme)
        assert report and report.exhaustive and report.checked == net.field.q ** C
        # one message by hand, independent of the batched path
        msg = message_from_index(net.field, C, net.field.q ** C)
        assert decode(scheme, transmit(net, scheme, msg)) == msg


def test_round_trip_multi_end():
    rng = np.random.default_rng(7)
    done = 0
    while done < 15:
        net = random_network(rng, end_width=2, min_layers=3, max_layers=4)
        first = [1] * len(net.layers[0])
        last = [0] * len(net.layers[-1])
        last[-1] = len(first)
        if not supports_network_flow(net, first, last):
            continue
        scheme = build_scheme(net, decompose_flow(net, first, last))
        assert verify_scheme(net, scheme)
        done += 1


def test_sampled_verification_is_seeded():
    net = identity_chain(5, 3, 2)
    scheme = scheme_at(net, 3)
    a = verify_scheme(net, scheme, exhaustive=False, samples=50, seed=3)
    assert a and not a.exhaustive and a.checked == 50


def test_tampered_scheme_fails_with_witness():
    net = identity_chain(2, 2, 2)
    scheme = scheme_at(net, 2)
    last = dict(scheme.extract[-1])
    last["D"] = (1, 0)
    bad = dataclasses.replace(scheme, extract=scheme.extract[:-1] + (last,))
    report = verify_scheme(net, bad)
    assert not report
    # message 1 is all zeros and survives; message 2 is (1, 0) and comes back swapped
    assert report.failed_index == 2 and report.sent == (1, 0) and report.decoded == (0, 1)


def test_out_of_range_index_is_reported():
    net = identity_chain(2, 2, 2)
    scheme = scheme_at(net, 2)
    pop = dict(scheme.populate[0])
    pop["S"] = (0, 5)
    report = verify_scheme(net, dataclasses.replace(scheme, populate=(pop,) + scheme.populate[1:]))
    assert not report and report.failed_index is None and "outside" in report.reason


def test_scheme_must_match_network():
    scheme = scheme_at(identity_chain(2, 2, 2), 1)
    with pytest.raises(SchemeError):
        transmit(identity_chain(3, 2, 2), scheme, (1,))
    with pytest.raises(SchemeError):
        decode(scheme, [1, 0, 0])


def test_message_from_index():
    F = PrimeField(3)
    assert message_from_index(F, 2, 1) == (F(0), F(0))
    assert message_from_index(F, 2, 2) == (F(1), F(0))
    assert message_from_index(F, 2, 4) == (F(0), F(1))
    assert message_from_index(F, 2, 9) == (F(2), F(2))
    seen = {message_from_index(F, 3, w) for w in range(1, 28)}
    assert len(seen) == 27
    with pytest.raises(ValueError):
        message_from_index(F, 2, 10)
    with pytest.raises(ValueError):
        message_from_index(F, 2, 0)
