import json
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dscore import bayesnet as B
from dscore import errors as E
from dscore import graph as G
from dscore.bif import NamedNetwork, default_names, parse_bif, read_bif, serialize_bif

HERE = Path(__file__).parent / "fixtures" / "bif"
REAL = sorted(HERE.glob("*.bif"))
MUTATIONS = json.loads((HERE / "mutations" / "expected.json").read_text())


def test_minimal_root():
    net = parse_bif("network n {}\nvariable A { type discrete [ 2 ] { a0, a1 }; }\n"
                    "probability ( A ) { table 0.3, 0.7; }\n")
    assert net.names == ("A",) and net.state_names == (("a0", "a1"),)
    np.testing.assert_array_equal(net.bn.cpts[0], [[0.3, 0.7]])


def test_two_variable_conditional_rows():
    text = """
    // comment
    variable X { type discrete [ 2 ] { lo, hi }; }
    variable Y { type discrete [ 3 ] { a, b, c }; }   /* block
    comment */
    probability ( X ) { table 0.5, 0.5; }
    probability ( Y | X ) {
      (hi) 0.2, 0.3, 0.5;
      (lo) 0.6, 0.3, 0.1;
    }
    """
    net = parse_bif(text)
    assert net.bn.dag.edges() == [(0, 1)]
    for x, row in [(0, [0.6, 0.3, 0.1]), (1, [0.2, 0.3, 0.5])]:
        np.testing.assert_allclose(net.bn.cpts[1][x], row)
        np.testing.assert_allclose(B.exact_singleton_conditional(net.bn, 1, [x, 0]), row, atol=1e-15)


def test_non_normalized_row():
    with pytest.raises(E.NonNormalizedRow) as info:
        parse_bif("variable A { type discrete [ 2 ] { a, b }; }\nprobability ( A ) { table 0.5, 0.4; }")
    assert info.value.line == 2


def test_near_normalized_row_is_rescaled():
    net = parse_bif("variable A { type discrete [ 2 ] { a, b }; }\nprobability ( A ) { table 0.33335, 0.6667; }")
    assert net.bn.cpts[0].sum() == pytest.approx(1.0, abs=1e-15)


def test_parent_order_is_resorted():
    # parents declared (C, A) but stored ascending (A, C) with C fastest
    text = """
    variable A { type discrete [ 2 ] { a0, a1 }; }
    variable B { type discrete [ 2 ] { b0, b1 }; }
    variable C { type discrete [ 3 ] { c0, c1, c2 }; }
    probability ( A ) { table 0.4, 0.6; }
    probability ( C ) { table 0.2, 0.3, 0.5; }
    probability ( B | C, A ) {
    """
    rows = {}
    rng = np.random.default_rng(0)
    for c in range(3):
        for a in range(2):
            p = float(np.round(rng.uniform(0.05, 0.95), 6))
            rows[(a, c)] = [p, 1 - p]
            text += f"  (c{c}, a{a}) {p!r}, {1 - p!r};\n"
    text += "}\n"
    net = parse_bif(text)
    assert net.bn.parents(1) == (0, 2)
    for (a, c), row in rows.items():
        np.testing.assert_allclose(net.bn.cpts[1][a * 3 + c], row, atol=1e-15)


def test_default_row_and_properties():
    text = """
    network "demo" { property note = (1, 2); }
    variable A { type discrete [ 3 ] { x, y, z }; property pos = 3; }
    variable B { type discrete [ 2 ] { u, v }; }
    probability ( A ) { table 0.2, 0.3, 0.5; }
    probability ( B | A ) {
      (y) 0.9, 0.1;
      default 0.5, 0.5;
    }
    """
    net = parse_bif(text)
    np.testing.assert_allclose(net.bn.cpts[1], [[0.5, 0.5], [0.9, 0.1], [0.5, 0.5]])


def test_conditional_flat_table_unsupported():
    text = """variable A { type discrete [ 2 ] { a, b }; }
    variable B { type discrete [ 2 ] { a, b }; }
    probability ( A ) { table 0.5, 0.5; }
    probability ( B | A ) { table 0.1, 0.9, 0.2, 0.8; }"""
    with pytest.raises(E.UnsupportedFeature):
        parse_bif(text)


def test_probability_cycle_rejected():
    text = """variable A { type discrete [ 2 ] { a, b }; }
    variable B { type discrete [ 2 ] { a, b }; }
    probability ( A | B ) { (a) 0.5, 0.5; (b) 0.5, 0.5; }
    probability ( B | A ) { (a) 0.5, 0.5; (b) 0.5, 0.5; }"""
    with pytest.raises(E.BifSyntaxError):
        parse_bif(text)


def test_missing_probability_block():
    with pytest.raises(E.MissingBlock):
        parse_bif("variable A { type discrete [ 2 ] { a, b }; }")


@pytest.mark.parametrize("path", REAL, ids=lambda p: p.name)
def test_real_network_round_trip(path):
    net = read_bif(path)
    for i in range(net.bn.d):
        assert net.bn.cpts[i].shape[0] == int(np.prod([net.bn.cards[p] for p in net.bn.parents(i)]))
    text = serialize_bif(net)
    again = parse_bif(text)
    assert again == net
    assert serialize_bif(again) == text


def test_earthquake_values():
    net = read_bif(HERE / "earthquake.bif")
    assert net.names == ("Burglary", "Earthquake", "Alarm", "JohnCalls", "MaryCalls")
    assert net.bn.dag.edges() == [(0, 2), (1, 2), (2, 3), (2, 4)]
    # rows ordered (B, E) with E fastest: TT, TF, FT, FF
    np.testing.assert_allclose(net.bn.cpts[2][:, 0], [0.95, 0.94, 0.29, 0.001])
    # P(Alarm = True) = sum over B, E
    pa = sum(pb * pe * p for (pb, pe), p in zip(
        [(0.01, 0.02), (0.01, 0.98), (0.99, 0.02), (0.99, 0.98)], [0.95, 0.94, 0.29, 0.001]))
    assert B.marginal(net.bn, [2])[0] == pytest.approx(pa, abs=1e-15)


def test_asia_either_is_logical_or():
    net = read_bif(HERE / "asia.bif")
    e = net.names.index("either")
    assert [net.names[p] for p in net.bn.parents(e)] == ["tub", "lung"]
    np.testing.assert_array_equal(net.bn.cpts[e][:, 0], [1, 1, 1, 0])


@pytest.mark.parametrize("case", MUTATIONS, ids=lambda m: m["file"])
def test_mutation_rejected_with_position(case):
    text = (HERE / "mutations" / case["file"]).read_text()
    with pytest.raises(E.BifError) as info:
        parse_bif(text)
    err = info.value
    assert type(err).__name__ == case["error"]
    assert err.line == case["line"] and err.col is not None and err.col >= 1


def test_mutation_corpus_size():
    assert len(MUTATIONS) == 15


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 8), st.integers(0, 2**32 - 1))
def test_generated_round_trip(d, seed):
    rng = np.random.default_rng(seed)
    dag = G.gen_er(d, int(rng.integers(0, d * (d - 1) // 2 + 1)), rng)
    bn = B.gen_dirichlet_cpts(dag, B.random_cards(d, rng, 2, 5), 3.0, rng)
    net = default_names(bn)
    text = serialize_bif(net)
    back = parse_bif(text)
    assert back == net
    for a, b in zip(back.bn.cpts, bn.cpts):
        assert np.array_equal(a, b)  # bitwise
    assert serialize_bif(back) == text


def test_large_generated_round_trip():
    rng = np.random.default_rng(37)
    dag = G.gen_er(37, 46, rng)
    bn = B.gen_uniform_cpts(dag, B.random_cards(37, rng, 2, 4), rng)
    net = NamedNetwork(bn, tuple(f"V{i:02d}" for i in range(37)),
                       tuple(tuple(f"s{k}" for k in range(n)) for n in bn.cards))
    assert parse_bif(serialize_bif(net)) == net


def test_state_names_with_symbols_from_real_files():
    net = read_bif(HERE / "child.bif")
    states = dict(zip(net.names, net.state_names))
    assert "Asy/Patch" in states["ChestXray"]
    assert "<7.5" in sum(states.values(), ()) and ">=7.5" in sum(states.values(), ())


def test_slash_before_comment_is_not_part_of_a_name():
    net = parse_bif("variable A { type discrete [ 2 ] { a/b, c// trailing\n }; }\n"
                    "probability ( A ) { table 0.5, 0.5; }/* end */")
    assert net.state_names == (("a/b", "c"),)


def test_alarm_structure():
    net = read_bif(HERE / "alarm.bif")
    assert net.bn.d == 37 and net.bn.dag.num_edges == 46
