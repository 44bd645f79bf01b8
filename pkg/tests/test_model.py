import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gaussbn.model import (
    LinkParams,
    Network,
    NoisyMaxCpd,
    SizeLimitError,
    TabularCpd,
    Variable,
    expand_noisy_max,
    mean_cpt,
    prior_cpd,
    validate_network,
)
from gaussbn.oracle import random_gate

from conftest import binary


def test_clean_chain_validates(chain):
    rep = validate_network(chain)
    assert rep.errors == []
    assert rep.ok


def test_std_ratio_warning():
    net = Network(
        [binary("U", False), binary("X", False)],
        [prior_cpd("U", [0.5], [0.05]), TabularCpd("X", ["U"], [[0.5], [0.5]], [[0.45], [0.05]])],
    )
    rep = validate_network(net)
    assert rep.ok
    assert any("ratio exceeded" in w for w in rep.warnings)


def test_std_hard_cap_is_error():
    net = Network([binary("U", False)], [prior_cpd("U", [0.3], [0.3])])
    rep = validate_network(net)
    assert not rep.ok


def test_diamond_not_singly_connected():
    names = "ABCD"
    vs = [binary(n, False) for n in names]
    cpds = [
        prior_cpd("A", [0.5], [0.0]),
        TabularCpd("B", ["A"], [[0.5], [0.5]], np.zeros((2, 1))),
        TabularCpd("C", ["A"], [[0.5], [0.5]], np.zeros((2, 1))),
        TabularCpd("D", ["B", "C"], np.full((2, 2, 1), 0.5), np.zeros((2, 2, 1))),
    ]
    rep = validate_network(Network(vs, cpds))
    assert any("not singly connected" in e for e in rep.errors)


def test_directed_cycle():
    vs = [binary("A", False), binary("B", False)]
    cpds = [
        TabularCpd("A", ["B"], [[0.5], [0.5]], np.zeros((2, 1))),
        TabularCpd("B", ["A"], [[0.5], [0.5]], np.zeros((2, 1))),
    ]
    assert any("cycle" in e for e in validate_network(Network(vs, cpds)).errors)


@pytest.mark.parametrize(
    "means, msg",
    [([[0.5], [1.2]], "outside the open interval"), ([[0.0], [0.5]], "outside the open interval")],
)
def test_mean_bounds(means, msg):
    net = Network(
        [binary("U", False), binary("X", False)],
        [prior_cpd("U", [0.5], [0.0]), TabularCpd("X", ["U"], means, np.zeros((2, 1)))],
    )
    assert any(msg in e for e in validate_network(net).errors)


def test_column_sum_and_shape_errors():
    x = Variable("X", ("a", "b", "c"))
    net = Network([x], [prior_cpd("X", [0.6, 0.5], [0.0, 0.0])])
    assert any("sum" in e for e in validate_network(net).errors)
    net = Network([x], [prior_cpd("X", [0.3], [0.0])])
    assert any("shape" in e for e in validate_network(net).errors)


def test_max_gate_needs_graded_variables():
    net = Network(
        [binary("U", False), binary("X")],
        [prior_cpd("U", [0.5], [0.0]), NoisyMaxCpd("X", ["U"], [LinkParams([[0.5]], [[0.0]])])],
    )
    assert any("graded" in e for e in validate_network(net).errors)


def test_graded_state_zero_name_warning():
    net = Network([Variable("X", ("none", "some"), graded=True)], [prior_cpd("X", [0.5], [0.0])])
    rep = validate_network(net)
    assert rep.ok and any("absent" in w for w in rep.warnings)


def test_mean_cpt_examples():
    assert np.allclose(mean_cpt(prior_cpd("X", [0.7], [0.0])), [0.3, 0.7])
    assert np.allclose(mean_cpt(prior_cpd("X", [0.2, 0.5], [0.0, 0.0])), [0.3, 0.2, 0.5])


@given(st.lists(st.floats(0.001, 0.3), min_size=1, max_size=3), st.integers(1, 3))
def test_mean_cpt_columns_are_distributions(col, n_cfg):
    cpd = TabularCpd("X", ["U"] if n_cfg > 1 else [], np.tile(col, (n_cfg, 1)) if n_cfg > 1 else col,
                     np.zeros((n_cfg, len(col))) if n_cfg > 1 else np.zeros(len(col)))
    t = mean_cpt(cpd)
    assert np.all(t >= -1e-12)
    assert np.allclose(t.sum(axis=-1), 1.0, atol=1e-12)


def _gate(mus, leak=None):
    vs = [binary(f"U{i}") for i in range(len(mus))] + [binary("X")]
    links = [LinkParams([[m]], [[0.0]]) for m in mus]
    lk = LinkParams([[leak]], [[0.0]]) if leak is not None else None
    gate = NoisyMaxCpd("X", [v.name for v in vs[:-1]], links, lk)
    cpds = [gate] + [prior_cpd(v.name, [0.5], [0.0]) for v in vs[:-1]]
    return Network(vs, cpds), gate


def test_expand_all_absent_no_leak():
    net, gate = _gate([0.3, 0.6])
    t = expand_noisy_max(gate, net)
    assert np.array_equal(t[0, 0], [1.0, 0.0])


def test_expand_single_parent():
    u = Variable("U", ("absent", "a", "b"), graded=True)
    x = Variable("X", ("absent", "x1", "x2"), graded=True)
    link = LinkParams([[0.2, 0.1], [0.3, 0.5]], np.zeros((2, 2)))
    gate = NoisyMaxCpd("X", ["U"], [link])
    net = Network([u, x], [prior_cpd("U", [0.3, 0.3], [0, 0]), gate])
    t = expand_noisy_max(gate, net)
    assert np.allclose(t[1], [0.7, 0.2, 0.1])
    assert np.allclose(t[2], [0.2, 0.3, 0.5])


def test_expand_two_binary_causes():
    net, gate = _gate([0.3, 0.6])
    t = expand_noisy_max(gate, net)
    assert t[1, 1, 0] == pytest.approx(0.7 * 0.4, abs=1e-15)


def test_expand_leak_acts_as_present_cause():
    net, gate = _gate([0.3], leak=0.1)
    t = expand_noisy_max(gate, net)
    assert np.allclose(t[0], [0.9, 0.1])
    assert np.allclose(t[1], [0.9 * 0.7, 1 - 0.9 * 0.7])


def test_expand_cap():
    net, gate = _gate([0.3] * 5)
    with pytest.raises(SizeLimitError):
        expand_noisy_max(gate, net, max_configs=16)


def _ordered_link(rng, g_u, g_x):
    # tails P(X > x | U = u) non-increasing in x and non-decreasing in u
    z = np.sort(rng.uniform(0.05, 0.85, size=(g_u, g_x)), axis=1)[:, ::-1]
    tails = np.maximum.accumulate(z, axis=0)
    tails = tails + np.arange(g_x)[::-1] * 1e-3 + np.arange(g_u)[:, None] * 1e-3
    return tails - np.hstack([tails[:, 1:], np.zeros((g_u, 1))])


@pytest.mark.parametrize("seed", range(20))
def test_expand_columns_are_distributions(seed):
    rng = np.random.default_rng(seed)
    net, gate = random_gate(rng, int(rng.integers(1, 4)), leak=bool(seed % 2))
    t = expand_noisy_max(gate, net)
    assert np.all(t >= -1e-12)
    assert np.allclose(t.sum(axis=-1), 1.0, atol=1e-12)
    # switching a cause on from absent never raises P(X <= x)
    cum = np.cumsum(t, axis=-1)
    for u in itertools.product(*map(range, t.shape[:-1])):
        for i, ui in enumerate(u):
            if ui == 0:
                for v in range(1, t.shape[i]):
                    w = u[:i] + (v,) + u[i + 1:]
                    assert np.all(cum[w] <= cum[u] + 1e-12)


@pytest.mark.parametrize("seed", range(20))
def test_expand_monotone_for_ordered_links(seed):
    rng = np.random.default_rng(seed)
    g_x = int(rng.integers(1, 4))
    parents = [Variable.with_cardinality(f"U{i}", int(rng.integers(2, 5)), graded=True) for i in range(3)]
    child = Variable.with_cardinality("X", g_x + 1, graded=True)
    links = [LinkParams(_ordered_link(rng, p.degrees, g_x), np.zeros((p.degrees, g_x))) for p in parents]
    gate = NoisyMaxCpd("X", [p.name for p in parents], links)
    cpds = [gate] + [prior_cpd(p.name, np.full(p.degrees, 0.1), np.zeros(p.degrees)) for p in parents]
    net = Network(parents + [child], cpds)
    assert validate_network(net).ok
    cum = np.cumsum(expand_noisy_max(gate, net), axis=-1)
    cards = cum.shape[:-1]
    for u in itertools.product(*map(range, cards)):
        for i in range(len(cards)):
            if u[i] + 1 < cards[i]:
                v = u[:i] + (u[i] + 1,) + u[i + 1:]
                assert np.all(cum[v] <= cum[u] + 1e-12)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10_000))
def test_expand_parent_permutation(seed):
    rng = np.random.default_rng(seed)
    net, gate = random_gate(rng, 3, leak=bool(seed % 2))
    perm = rng.permutation(3)
    flipped = NoisyMaxCpd(gate.child, [gate.parents[i] for i in perm], [gate.links[i] for i in perm], gate.leak)
    a = expand_noisy_max(gate, net)
    b = expand_noisy_max(flipped, net)
    assert np.allclose(np.transpose(a, tuple(perm) + (3,)), b, atol=1e-15)
