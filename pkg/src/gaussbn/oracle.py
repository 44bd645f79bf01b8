"""Brute-force references: joint enumeration, parameter quadrature, sampling.

Nothing here touches the message-passing code; these routines exist to check
it.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .model import (
    DEFAULT_MAX_CONFIGS,
    CaseRecord,
    GaussianParam,
    LinkParams,
    Network,
    NoisyMaxCpd,
    ParamId,
    SizeLimitError,
    TabularCpd,
    Variable,
    check_case,
    iter_params,
    point_cpt,
    with_params,
)
from .propagation import ZeroProbabilityError

DEFAULT_JOINT_CAP = 10**7
QUADRATURE_NODES = 2001


@dataclass
class JointTable:
    names: list[str]
    table: np.ndarray

    def axis(self, name: str) -> int:
        return self.names.index(name)


def enumerate_joint(
    net: Network, cap: int = DEFAULT_JOINT_CAP, max_configs: int = DEFAULT_MAX_CONFIGS
) -> JointTable:
    """Chain-rule product of every point table at parameter means."""
    names = net.names
    cards = [net.cardinality(n) for n in names]
    size = int(np.prod(cards, dtype=object))
    if size > cap:
        raise SizeLimitError(f"joint table needs {size} entries (cap {cap})")
    joint = np.ones(cards)
    letters = "abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ"
    if len(names) > len(letters):
        raise SizeLimitError("too many variables for joint enumeration")
    out = letters[: len(names)]
    for n in names:
        cpt = point_cpt(net, n, max_configs)
        sub = "".join(letters[names.index(p)] for p in net.parents(n)) + letters[names.index(n)]
        joint = np.einsum(f"{out},{sub}->{out}", joint, cpt)
    return JointTable(list(names), joint)


def _restrict(joint: JointTable, case: CaseRecord) -> np.ndarray:
    t = joint.table
    for name, state in case.assignments.items():
        mask = np.zeros(t.shape[joint.axis(name)])
        mask[state] = 1.0
        shape = [1] * t.ndim
        shape[joint.axis(name)] = -1
        t = t * mask.reshape(shape)
    return t


def evidence_probability(joint: JointTable, case: CaseRecord) -> float:
    return float(_restrict(joint, case).sum())


def oracle_conditional(joint: JointTable, case: CaseRecord) -> dict[str, np.ndarray]:
    """Exact posterior marginals by summing the restricted joint."""
    t = _restrict(joint, case)
    z = t.sum()
    if not z > 0:
        raise ZeroProbabilityError("<joint>", "evidence has zero probability")
    out = {}
    for i, name in enumerate(joint.names):
        axes = tuple(j for j in range(t.ndim) if j != i)
        out[name] = t.sum(axis=axes) / z
    return out


# ----------------------------------------------------------------------------
# parameter posterior by quadrature


def simpson_weights(n: int = QUADRATURE_NODES) -> tuple[np.ndarray, np.ndarray]:
    """Composite Simpson nodes and weights on [0, 1]; n must be odd."""
    if n < 3 or n % 2 == 0:
        raise ValueError("Simpson rule needs an odd node count >= 3")
    x = np.linspace(0.0, 1.0, n)
    h = 1.0 / (n - 1)
    w = np.ones(n)
    w[1:-1:2] = 4.0
    w[2:-1:2] = 2.0
    return x, w * h / 3.0


def likelihood(net: Network, case: CaseRecord, values: dict[ParamId, float]) -> float:
    """P(case) with the given parameters set to ``values`` and all others at means.

    Values outside the valid range are used as-is (the complement column may
    go negative); the likelihood stays the same polynomial in the parameters.
    """
    current = dict(iter_params(net))
    upd = {pid: GaussianParam(v, current[pid].std) for pid, v in values.items()}
    joint = enumerate_joint(with_params(net, upd))
    return evidence_probability(joint, case)


def posterior_moment_quadrature(
    net: Network,
    case: CaseRecord,
    targets: Sequence[ParamId],
    nodes: int = QUADRATURE_NODES,
    method: str = "tensor",
) -> tuple[np.ndarray, np.ndarray]:
    """Posterior means and variances of up to three parameters.

    The posterior density on the unit box is P(case | theta) times the product
    of the Gaussian priors of the targets; every other parameter stays at its
    mean. Integrals use the composite Simpson rule with ``nodes`` points per
    dimension.

    ``method="grid"`` (one target only) evaluates the likelihood by joint
    enumeration at every node. ``method="tensor"`` evaluates it at the 2**k
    corners of the box and integrates the tensor-product rule dimension by
    dimension, which equals the full tensor grid sum because the likelihood
    is affine in each parameter separately; this is checked at an interior
    point before integrating.
    """
    check_case(net, case)
    targets = list(targets)
    k = len(targets)
    if not 1 <= k <= 3:
        raise ValueError("between 1 and 3 target parameters supported")
    prior = dict(iter_params(net))
    mu = np.array([prior[t].mean for t in targets])
    sd = np.array([prior[t].std for t in targets])
    x, w = simpson_weights(nodes)

    # per-dimension Gaussian weights; a zero std is a point mass at the mean
    dens = []
    for m, s in zip(mu, sd):
        if s == 0:
            dens.append(None)
        else:
            dens.append(w * np.exp(-0.5 * ((x - m) / s) ** 2))

    if method == "grid":
        if k != 1:
            raise ValueError("grid method supports a single target")
        if dens[0] is None:
            return mu.copy(), np.zeros(1)
        lik = np.array([likelihood(net, case, {targets[0]: xi}) for xi in x])
        f = lik * dens[0]
        z = f.sum()
        if not z > 0:
            raise ZeroProbabilityError("<quadrature>", "evidence has zero probability")
        d = x - mu[0]
        shift = (d * f).sum() / z
        var = ((d - shift) ** 2 * f).sum() / z
        return mu + shift, np.array([var])

    if method != "tensor":
        raise ValueError(f"unknown quadrature method {method!r}")

    corners = np.zeros((2,) * k)
    for idx in np.ndindex(corners.shape):
        corners[idx] = likelihood(net, case, {t: float(c) for t, c in zip(targets, idx)})
    rng = np.random.default_rng(0)
    probe = rng.uniform(0.2, 0.8, size=k)
    direct = likelihood(net, case, {t: float(v) for t, v in zip(targets, probe)})
    interp = 0.0
    for idx in np.ndindex(corners.shape):
        interp += corners[idx] * np.prod([p if c else 1 - p for p, c in zip(probe, idx)])
    if not np.isclose(direct, interp, rtol=1e-9, atol=1e-15):
        raise RuntimeError("likelihood is not affine in each target; use the grid method")

    # m[i][c, r] = integral of basis_c(theta_i) * (theta_i - mu_i)**r * density_i
    moments = []
    for i in range(k):
        if dens[i] is None:
            basis = np.array([1 - mu[i], mu[i]])
            moments.append(np.stack([basis, np.zeros(2), np.zeros(2)], axis=1))
            continue
        d = x - mu[i]
        basis = np.stack([1 - x, x])
        moments.append(np.stack([(basis * d**r * dens[i]).sum(axis=1) for r in range(3)], axis=1))

    def integral(powers):
        total = 0.0
        for idx in np.ndindex(corners.shape):
            term = corners[idx]
            for i, c in enumerate(idx):
                term *= moments[i][c, powers[i]]
            total += term
        return total

    z = integral([0] * k)
    if not z > 0:
        raise ZeroProbabilityError("<quadrature>", "evidence has zero probability")
    means, variances = np.empty(k), np.empty(k)
    for i in range(k):
        p1 = [0] * k
        p1[i] = 1
        p2 = [0] * k
        p2[i] = 2
        shift = integral(p1) / z
        means[i] = mu[i] + shift
        variances[i] = integral(p2) / z - shift**2
    return means, variances


# ----------------------------------------------------------------------------
# sampling and random networks


def forward_sample(
    net: Network, n: int, seed: int | None = None, mask: float = 0.0
) -> list[CaseRecord]:
    """Ancestral samples at parameter means.

    With ``mask > 0`` each variable is hidden independently with that
    probability, giving incomplete cases.
    """
    rng = np.random.default_rng(seed)
    order = net.topological_order()
    tables = {name: point_cpt(net, name) for name in order}
    cases = []
    for i in range(n):
        values: dict[str, int] = {}
        for name in order:
            col = tables[name][tuple(values[p] for p in net.parents(name))]
            col = np.clip(col, 0.0, None)
            values[name] = int(rng.choice(col.size, p=col / col.sum()))
        if mask > 0:
            hidden = rng.random(len(order)) < mask
            values = {k: v for (k, v), h in zip(values.items(), hidden) if not h}
        cases.append(CaseRecord(values, id=f"c{i}"))
    return cases


def _random_column(rng: np.random.Generator, k: int, floor: float) -> np.ndarray:
    # k non-reference means, each >= floor, reference state keeps >= floor too
    p = rng.dirichlet(np.ones(k + 1))
    p = floor + p * (1 - (k + 1) * floor)
    return p[1:]


def random_polytree(
    rng: np.random.Generator,
    n_nodes: int,
    max_card: int = 4,
    p_max: float = 0.5,
    p_leak: float = 0.5,
    std: float = 0.02,
    floor: float = 0.05,
) -> Network:
    """Random singly connected network mixing tables and noisy-MAX gates.

    Every variable is graded so that any family may become a gate.
    """
    names = [f"V{i}" for i in range(n_nodes)]
    cards = [int(rng.integers(2, max_card + 1)) for _ in names]
    parents: dict[str, list[str]] = {n: [] for n in names}
    for i in range(1, n_nodes):
        j = int(rng.integers(0, i))
        a, b = names[i], names[j]
        if rng.random() < 0.5:
            parents[a].append(b)
        else:
            parents[b].append(a)
    variables = [Variable.with_cardinality(n, c, graded=True) for n, c in zip(names, cards)]
    card = dict(zip(names, cards))
    cpds = []
    for n in names:
        ps = sorted(parents[n], key=names.index)
        if ps and rng.random() < p_max:
            links = []
            for p in ps:
                m = np.array([_random_column(rng, card[n] - 1, floor) for _ in range(card[p] - 1)])
                links.append(LinkParams(m, np.full(m.shape, std)))
            leak = None
            if rng.random() < p_leak:
                m = _random_column(rng, card[n] - 1, floor)[None, :] * 0.3
                leak = LinkParams(m, np.full(m.shape, std * 0.1))
            cpds.append(NoisyMaxCpd(n, ps, links, leak))
        else:
            shape = tuple(card[p] for p in ps)
            m = np.empty(shape + (card[n] - 1,))
            for idx in np.ndindex(shape):
                m[idx] = _random_column(rng, card[n] - 1, floor)
            cpds.append(TabularCpd(n, ps, m, np.full(m.shape, std)))
    return Network(variables, cpds)


def random_gate(
    rng: np.random.Generator, n_parents: int, max_degree: int = 3, leak: bool = False, floor: float = 0.05
) -> tuple[Network, NoisyMaxCpd]:
    """A lone noisy-MAX family with random degrees; parents get flat priors."""
    g_x = int(rng.integers(1, max_degree + 1))
    child = Variable.with_cardinality("X", g_x + 1, graded=True)
    pvars = [
        Variable.with_cardinality(f"U{i}", int(rng.integers(1, max_degree + 1)) + 1, graded=True)
        for i in range(n_parents)
    ]
    links = []
    for v in pvars:
        m = np.array([_random_column(rng, g_x, floor) for _ in range(v.degrees)])
        links.append(LinkParams(m, np.full(m.shape, 0.01)))
    lk = None
    if leak:
        m = _random_column(rng, g_x, floor)[None, :] * 0.3
        lk = LinkParams(m, np.full(m.shape, 0.005))
    gate = NoisyMaxCpd("X", [v.name for v in pvars], links, lk)
    cpds = [gate]
    for v in pvars:
        m = np.full(v.degrees, 1.0 / v.cardinality)
        cpds.append(TabularCpd(v.name, (), m, np.zeros_like(m)))
    return Network([child] + pvars, cpds), gate
