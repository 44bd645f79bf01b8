import numpy as np
import pytest

from gaussbn.model import CaseRecord, Network, ParamId, SizeLimitError, TabularCpd, prior_cpd
from gaussbn.oracle import (
    enumerate_joint,
    forward_sample,
    oracle_conditional,
    posterior_moment_quadrature,
    random_polytree,
    simpson_weights,
)
from gaussbn.propagation import ZeroProbabilityError

from conftest import binary, two_node


def test_single_node_joint():
    net = Network([binary("A")], [prior_cpd("A", [0.7], [0.0])])
    assert np.allclose(enumerate_joint(net).table, [0.3, 0.7])


def test_chain_joint_is_product():
    net = two_node(0.55, 0.0, prior=0.6)
    j = enumerate_joint(net).table
    pu = np.array([0.4, 0.6])
    px = np.array([[0.8, 0.2], [0.45, 0.55]])
    assert np.allclose(j, pu[:, None] * px, atol=1e-15)


def test_joint_sums_to_one_and_cap():
    net = random_polytree(np.random.default_rng(0), 8)
    j = enumerate_joint(net)
    assert j.table.sum() == pytest.approx(1.0, abs=1e-12)
    assert np.all(j.table >= 0)
    with pytest.raises(SizeLimitError):
        enumerate_joint(net, cap=10)


def test_oracle_conditional_zero_evidence():
    net = Network(
        [binary("A"), binary("B")],
        [prior_cpd("A", [0.5], [0]), TabularCpd("B", ["A"], [[0.5], [0.5]], [[0], [0]])],
    )
    joint = enumerate_joint(net)
    joint.table[1, 1] = 0.0
    with pytest.raises(ZeroProbabilityError):
        oracle_conditional(joint, CaseRecord({"A": 1, "B": 1}))


def test_simpson_integrates_cubic_exactly():
    x, w = simpson_weights(2001)
    assert (w * x**3).sum() == pytest.approx(0.25, abs=1e-15)
    with pytest.raises(ValueError):
        simpson_weights(2000)


def test_quadrature_without_evidence_returns_prior():
    net = two_node(0.55, 0.04)
    pid = ParamId("X", "table", None, (1,), 1)
    m, v = posterior_moment_quadrature(net, CaseRecord({}), [pid])
    assert m[0] == pytest.approx(0.55, abs=1e-12)
    assert v[0] == pytest.approx(0.04**2, rel=1e-10)


def test_quadrature_point_mass():
    net = two_node(0.55, 0.0)
    pid = ParamId("X", "table", None, (1,), 1)
    m, v = posterior_moment_quadrature(net, net.case({"X": "present"}), [pid])
    assert m[0] == 0.55 and v[0] == 0.0


def test_quadrature_grid_and_tensor_agree():
    net = two_node(0.45, 0.03)
    pid = ParamId("X", "table", None, (1,), 1)
    case = net.case({"X": "present"})
    a = posterior_moment_quadrature(net, case, [pid])
    b = posterior_moment_quadrature(net, case, [pid], method="grid")
    assert np.allclose(a[0], b[0], rtol=1e-13)
    assert np.allclose(a[1], b[1], rtol=1e-10)


def test_quadrature_variance_shrinks_with_evidence():
    net = Network(
        [binary("U"), binary("X")],
        [prior_cpd("U", [0.6], [0.03]), TabularCpd("X", ["U"], [[0.2], [0.5]], [[0.02], [0.04]])],
    )
    pids = [ParamId("U", "table", None, (), 1), ParamId("X", "table", None, (0,), 1), ParamId("X", "table", None, (1,), 1)]
    m, v = posterior_moment_quadrature(net, net.case({"X": "present"}), pids)
    assert np.all(v <= np.array([0.03, 0.02, 0.04]) ** 2)


def test_forward_sample_basics():
    net = Network([binary("A")], [prior_cpd("A", [0.3], [0.0])])
    assert forward_sample(net, 0, seed=1) == []
    a = forward_sample(net, 50, seed=4)
    b = forward_sample(net, 50, seed=4)
    assert a == b


def test_forward_sample_deterministic_net():
    # means at the edge of the valid range give an (almost) deterministic table
    net = Network(
        [binary("A"), binary("B")],
        [prior_cpd("A", [1 - 1e-300], [0]), TabularCpd("B", ["A"], [[1e-300], [1 - 1e-16]], [[0], [0]])],
    )
    cases = forward_sample(net, 100, seed=2)
    assert len({tuple(sorted(c.assignments.items())) for c in cases}) == 1


def test_forward_sample_frequency():
    p, n = 0.3, 10_000
    net = Network([binary("A")], [prior_cpd("A", [p], [0.0])])
    freq = np.mean([c.assignments["A"] for c in forward_sample(net, n, seed=123)])
    assert abs(freq - p) <= 3 * np.sqrt(p * (1 - p) / n)


def test_forward_sample_mask():
    net = random_polytree(np.random.default_rng(1), 6)
    cases = forward_sample(net, 200, seed=9, mask=0.5)
    sizes = [len(c.assignments) for c in cases]
    assert 0 < np.mean(sizes) < 6
