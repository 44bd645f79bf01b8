"""Sequential adjustment of Gaussian parameters from propagated messages.

For every case the network is propagated once at parameter means. Each
family then sees a likelihood that is affine in its own parameters, so the
posterior mean shifts by ``delta = var * b / (a + b . mean)`` and the variance
shrinks by ``delta**2``. Correlations between parameters are dropped after
every case.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .model import (
    DEFAULT_STD_RATIO,
    CaseRecord,
    GaussianParam,
    LinkParams,
    Network,
    NoisyMaxCpd,
    ParamId,
    TabularCpd,
    iter_params,
    link_survival,
    param_label,
    require_valid,
    validate_network,
)
from .propagation import FamilyMessages, ZeroProbabilityError, propagate

DEFAULT_EPS = 1e-6
DEFAULT_VAR_FLOOR = 1e-12


@dataclass
class LinearWeight:
    """Affine likelihood ``a + sum_i b[i] * theta[i]`` over a set of parameters."""

    a: float
    b: np.ndarray

    def min_over_box(self) -> float:
        # minimum of an affine function over [0, 1]^n sits on a corner
        return float(self.a + np.minimum(self.b, 0.0).sum())


@dataclass
class UpdateDelta:
    delta: np.ndarray
    new_mean: np.ndarray
    new_var: np.ndarray
    max_cov: float = 0.0


def linear_gaussian_moments(w: LinearWeight, means, stds) -> UpdateDelta:
    """First two moments after reweighting independent Gaussians by ``w``.

    Assumes the Gaussians put negligible mass outside the unit box. Shapes of
    ``w.b``, ``means`` and ``stds`` must agree; results keep that shape.
    """
    means = np.asarray(means, float)
    var = np.asarray(stds, float) ** 2
    b = np.asarray(w.b, float)
    denom = w.a + float((b * means).sum())
    if not denom > 0:
        raise ZeroProbabilityError("<family>", f"non-positive evidence weight {denom!r}")
    delta = var * b / denom
    flat = np.sort(np.abs(delta).ravel())
    max_cov = float(flat[-1] * flat[-2]) if flat.size > 1 else 0.0
    return UpdateDelta(delta, means + delta, var - delta**2, max_cov)


def _config_weights(parent_pis: Sequence[np.ndarray]) -> np.ndarray:
    w = np.ones(())
    for p in parent_pis:
        w = np.multiply.outer(w, p)
    return w


def general_cpt_delta(cpd: TabularCpd, fam: FamilyMessages) -> UpdateDelta:
    """Updates for every parameter of a full table (or prior).

    The likelihood of the family is lambda(0) plus, for every configuration u
    and non-reference state x, (lambda(x) - lambda(0)) * prod_i pi_X(u_i) *
    theta[u, x].
    """
    lam = np.asarray(fam.lam, float)
    w = _config_weights(fam.parent_pis)
    b = np.multiply.outer(w, lam[1:] - lam[0])
    return linear_gaussian_moments(LinearWeight(float(lam[0]), b), cpd.means, cpd.stds)


def link_q(means: np.ndarray, pi_u: np.ndarray) -> np.ndarray:
    """Q_V(x) of one link at parameter means."""
    return 1.0 - np.asarray(pi_u, float)[1:] @ (1.0 - link_survival(means))


def noisy_max_delta(cpd: NoisyMaxCpd, fam: FamilyMessages, qprofile=None) -> list[UpdateDelta]:
    """Updates for every link of a noisy-MAX gate, the leak last.

    Each link is treated with all other links integrated out at their means:
    with R(x) = (lambda(x) - lambda(x + 1)) * prod_{V != U} Q_V(x) (and
    lambda(g) * prod Q_V(g) at the top degree) the likelihood of link U is
    sum_x R(x) - sum_{u, x'} theta[u, x'] * pi(u) * sum_{x < x'} R(x).
    """
    lam = np.asarray(fam.lam, float)
    pis = [np.asarray(p, float) for p in fam.parent_pis]
    links = cpd.all_links()
    if cpd.leak is not None:
        pis.append(np.array([0.0, 1.0]))
    if qprofile is not None:
        qs = [np.asarray(q, float) for q in qprofile.links]
    else:
        qs = [link_q(l.means, p) for l, p in zip(links, pis)]
    lam_next = np.append(lam[1:], 0.0)
    out = []
    for i, (link, pi_u) in enumerate(zip(links, pis)):
        others = np.ones_like(lam)
        for j, q in enumerate(qs):
            if j != i:
                others = others * q
        r = (lam - lam_next) * others
        below = np.cumsum(r)[:-1]  # sum_{x < x'} R(x) for x' = 1..g
        b = -np.multiply.outer(pi_u[1:], below)
        out.append(linear_gaussian_moments(LinearWeight(float(r.sum()), b), link.means, link.stds))
    return out


def binary_or_delta(mean: float, std: float, pi_present: float, lam, others_absent: float = 1.0) -> float:
    """Closed-form shift for a binary cause of a binary noisy-OR child.

    ``others_absent`` is prod_{V != U} Q_V(0), the probability that the other
    causes (leak included) leave the child absent; 1 for a lone cause.
    """
    lam0, lam1 = float(lam[0]), float(lam[1])
    diff = lam1 - lam0
    denom = lam1 - diff * others_absent * (1.0 - pi_present * mean)
    if not denom > 0:
        raise ZeroProbabilityError("<family>", f"non-positive evidence weight {denom!r}")
    return std**2 * pi_present * diff * others_absent / denom


# ----------------------------------------------------------------------------
# committing a case


@dataclass
class ParamUpdate:
    pid: ParamId
    label: str
    delta: float
    old_mean: float
    new_mean: float
    old_var: float
    new_var: float
    flags: tuple[str, ...] = ()


@dataclass
class CaseReport:
    seq: int
    case_id: str | None
    evidence_probability: float | None = None
    updates: list[ParamUpdate] = field(default_factory=list)
    max_cov: float = 0.0
    warnings: list[str] = field(default_factory=list)
    error: str | None = None

    @property
    def accepted(self) -> bool:
        return self.error is None


def family_deltas(net: Network, msgs) -> tuple[dict[ParamId, float], float]:
    """Raw shifts for every parameter, all from the same message set."""
    deltas: dict[ParamId, float] = {}
    covs = []
    for cpd in net.cpds:
        fam = msgs.family(cpd.child)
        if isinstance(cpd, TabularCpd):
            upd = general_cpt_delta(cpd, fam)
            covs.append(upd.max_cov)
            for idx in np.ndindex(cpd.means.shape):
                pid = ParamId(cpd.child, "table", None, tuple(int(i) for i in idx[:-1]), idx[-1] + 1)
                deltas[pid] = float(upd.delta[idx])
        else:
            ups = noisy_max_delta(cpd, fam, msgs.qprofiles.get(cpd.child))
            names = list(cpd.parents) + ([None] if cpd.leak is not None else [])
            for name, upd in zip(names, ups):
                covs.append(upd.max_cov)
                kind = "leak" if name is None else "link"
                for (u, x) in np.ndindex(upd.delta.shape):
                    deltas[ParamId(cpd.child, kind, name, u + 1, x + 1)] = float(upd.delta[u, x])
    return deltas, max(covs, default=0.0)


def _rebuild(net: Network, values: dict[ParamId, list], eps: float) -> tuple[Network, dict[ParamId, set]]:
    """New network from per-parameter [mean, var]; applies column guards."""
    flags: dict[ParamId, set] = {pid: set() for pid in values}
    new_cpds = []
    for cpd in net.cpds:
        if isinstance(cpd, TabularCpd):
            m = np.empty(cpd.means.shape)
            v = np.empty(cpd.means.shape)
            pids = {}
            for idx in np.ndindex(m.shape):
                pid = ParamId(cpd.child, "table", None, tuple(int(i) for i in idx[:-1]), idx[-1] + 1)
                m[idx], v[idx] = values[pid]
                pids[idx] = pid
            groups = [(m, v, pids)]
        else:
            groups = []
            names = list(cpd.parents) + ([None] if cpd.leak is not None else [])
            for name, link in zip(names, cpd.all_links()):
                kind = "leak" if name is None else "link"
                m = np.empty(link.means.shape)
                v = np.empty(link.means.shape)
                pids = {}
                for (u, x) in np.ndindex(m.shape):
                    pid = ParamId(cpd.child, kind, name, u + 1, x + 1)
                    m[u, x], v[u, x] = values[pid]
                    pids[(u, x)] = pid
                groups.append((m, v, pids))
        for m, v, pids in groups:
            _guard_columns(m, pids, flags, eps)
            _cap_std(m, v, pids, flags)
        if isinstance(cpd, TabularCpd):
            m, v, _ = groups[0]
            new_cpds.append(TabularCpd(cpd.child, cpd.parents, m, np.sqrt(v)))
        else:
            lps = [LinkParams(m, np.sqrt(v)) for m, v, _ in groups]
            leak = lps.pop() if cpd.leak is not None else None
            new_cpds.append(NoisyMaxCpd(cpd.child, cpd.parents, tuple(lps), leak))
        for m, v, pids in groups:
            for idx, pid in pids.items():
                values[pid] = [float(m[idx]), float(v[idx])]
    return net.replace_cpds(new_cpds), flags


def _guard_columns(m: np.ndarray, pids: dict, flags: dict, eps: float) -> None:
    sums = m.sum(axis=-1)
    for idx in np.ndindex(sums.shape):
        if sums[idx] >= 1.0 - eps:
            m[idx] *= (1.0 - eps) / sums[idx]
            for x in range(m.shape[-1]):
                flags[pids[idx + (x,)]].add("column_rescaled")


def _cap_std(m: np.ndarray, v: np.ndarray, pids: dict, flags: dict) -> None:
    room = np.minimum(m, 1.0 - m)
    for idx in np.ndindex(m.shape):
        if v[idx] > 0 and np.sqrt(v[idx]) >= room[idx]:
            v[idx] = (0.999 * room[idx]) ** 2
            flags[pids[idx]].add("std_capped")


def apply_case(
    net: Network,
    case: CaseRecord,
    learning_rate: float = 1.0,
    eps: float = DEFAULT_EPS,
    var_floor: float = DEFAULT_VAR_FLOOR,
    std_ratio: float = DEFAULT_STD_RATIO,
    seq: int = 0,
) -> tuple[Network, CaseReport]:
    """Propagate one case and commit the updates of every family at once.

    A case with zero probability is rejected: the input network is returned
    and the report carries the error.
    """
    if not 0 < learning_rate <= 1:
        raise ValueError("learning rate must lie in (0, 1]")
    require_valid(net, std_ratio)
    report = CaseReport(seq, case.id)
    try:
        msgs = propagate(net, case, validate=False)
        deltas, max_cov = family_deltas(net, msgs)
    except ZeroProbabilityError as exc:
        report.error = str(exc)
        return net, report
    report.evidence_probability = msgs.evidence_probability
    report.max_cov = max_cov * learning_rate**2

    old = dict(iter_params(net))
    values: dict[ParamId, list] = {}
    pre_flags: dict[ParamId, set] = {}
    for pid, gp in old.items():
        d = learning_rate * deltas[pid]
        var = gp.std**2
        mean, new_var = gp.mean + d, var - d * d
        fl = set()
        if d == 0.0:
            mean, new_var = gp.mean, var
        if mean < eps or mean > 1.0 - eps:
            mean = min(max(mean, eps), 1.0 - eps)
            fl.add("mean_clamped")
        if var > 0 and new_var < var_floor:
            new_var = min(var_floor, var)
            fl.add("var_floored")
        values[pid] = [mean, new_var]
        pre_flags[pid] = fl

    new_net, flags = _rebuild(net, values, eps)
    for pid, gp in old.items():
        report.updates.append(
            ParamUpdate(
                pid,
                param_label(net, pid),
                deltas[pid] * learning_rate,
                gp.mean,
                values[pid][0],
                gp.std**2,
                values[pid][1],
                tuple(sorted(pre_flags[pid] | flags[pid])),
            )
        )
    post = validate_network(new_net, std_ratio)
    report.warnings = list(post.warnings)
    if not post.ok:
        raise RuntimeError("committed parameters failed validation: " + "; ".join(post.errors))
    return new_net, report


def learn_stream(
    net: Network, cases: Iterable[CaseRecord], start_seq: int = 0, **kwargs
) -> tuple[Network, list[CaseReport]]:
    """Apply cases strictly in order; each sees the network left by the previous one."""
    reports = []
    for i, case in enumerate(cases):
        net, rep = apply_case(net, case, seq=start_seq + i, **kwargs)
        reports.append(rep)
    return net, reports


def param_snapshot(net: Network) -> dict[ParamId, GaussianParam]:
    return dict(iter_params(net))
