"""Exact pi/lambda message passing on polytrees at parameter means.

Noisy-MAX families are evaluated through per-link cumulative profiles, so the
cost of a family grows linearly with its number of parents instead of with
the size of its conditional table.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .model import (
    DEFAULT_MAX_CONFIGS,
    CaseRecord,
    Network,
    NoisyMaxCpd,
    TabularCpd,
    check_case,
    expand_noisy_max,
    link_survival,
    mean_cpt,
    require_valid,
)


class ZeroProbabilityError(ValueError):
    """Evidence has probability zero under the mean-parameter network."""

    def __init__(self, node: str, message: str | None = None):
        self.node = node
        super().__init__(message or f"contradictory evidence detected at node {node!r}")


class OpCounter:
    """Tally of scalar arithmetic operations performed by the gate routines."""

    def __init__(self):
        self.count = 0

    def add(self, n: int) -> None:
        self.count += int(n)


@dataclass
class QProfile:
    """Cumulative profiles of a noisy-MAX family.

    ``links[i][x]`` is P(X <= x) attributable to link i alone (the leak, when
    present, is the last entry) and ``q`` is their product over links.
    """

    links: list[np.ndarray]
    q: np.ndarray


@dataclass
class FamilyMessages:
    """What a family needs for learning: lambda(x) of the child and pi_X(u_i)."""

    lam: np.ndarray
    parent_pis: tuple[np.ndarray, ...]


@dataclass
class MessageSet:
    pi: dict[str, np.ndarray] = field(default_factory=dict)
    lam: dict[str, np.ndarray] = field(default_factory=dict)
    lam_evidence: dict[str, np.ndarray] = field(default_factory=dict)
    pi_msg: dict[tuple[str, str], np.ndarray] = field(default_factory=dict)
    lambda_msg: dict[tuple[str, str], np.ndarray] = field(default_factory=dict)
    qprofiles: dict[str, QProfile] = field(default_factory=dict)
    evidence_probability: float = 1.0
    parents: dict[str, tuple[str, ...]] = field(default_factory=dict)

    def family(self, child: str) -> FamilyMessages:
        return FamilyMessages(
            self.lam[child], tuple(self.pi_msg[(p, child)] for p in self.parents[child])
        )

    def marginal(self, node: str) -> np.ndarray:
        return posterior_marginal(self, node)


def posterior_marginal(msgs: MessageSet, node: str) -> np.ndarray:
    """Normalized product lambda(x) * pi(x)."""
    bel = msgs.lam[node] * msgs.pi[node]
    z = bel.sum()
    if not z > 0:
        raise ZeroProbabilityError(node)
    return bel / z


# ----------------------------------------------------------------------------
# noisy-MAX gate


def _link_q(surv: np.ndarray, pi: np.ndarray, counter: OpCounter | None) -> np.ndarray:
    # Q_U(x) = 1 - sum_{u>=1} pi(u) * sum_{x'>x} theta[u, x']
    tail = 1.0 - surv
    q = 1.0 - pi[1:] @ tail
    if counter is not None:
        g_u, width = tail.shape
        counter.add(g_u * width)  # tail
        counter.add(g_u * width + (g_u - 1) * width)  # weighted sum
        counter.add(width)  # complement
    return q


def noisy_max_pi(
    cpd: NoisyMaxCpd,
    incoming: Sequence[np.ndarray],
    counter: OpCounter | None = None,
) -> tuple[QProfile, np.ndarray]:
    """pi(x) of a noisy-MAX child from the normalized pi_X(u) of its parents.

    Returns the per-link cumulative profiles, their product Q(x), and
    pi(x) = Q(x) - Q(x - 1).
    """
    qs = []
    for link, pi_u in zip(cpd.links, incoming):
        surv = link_survival(link.means)
        if counter is not None:
            counter.add(surv.size + link.means.size)
        qs.append(_link_q(surv, np.asarray(pi_u, float), counter))
    if cpd.leak is not None:
        surv = link_survival(cpd.leak.means)
        if counter is not None:
            counter.add(surv.size + cpd.leak.means.size)
        qs.append(surv[0])
    if not qs:
        raise ValueError(f"noisy-MAX family {cpd.child!r} has no causes")
    width = qs[0].size
    q = np.ones(width)
    for qu in qs:
        q = q * qu
    if counter is not None:
        counter.add(len(qs) * width)
    pi = np.diff(q, prepend=0.0)
    if counter is not None:
        counter.add(width - 1)
    return QProfile(qs, q), pi


def noisy_max_lambda(
    cpd: NoisyMaxCpd,
    incoming: Sequence[np.ndarray | None],
    lam: np.ndarray,
    targets: Sequence[int] | None = None,
) -> list[np.ndarray | None]:
    """lambda_X(u) for each requested parent link of a noisy-MAX child.

    ``incoming[i]`` may be None only for a link that is the sole target, since
    link i's own message never enters its outgoing lambda.
    """
    lam = np.asarray(lam, float)
    n = len(cpd.links)
    if targets is None:
        targets = range(n)
    missing = [i for i, p in enumerate(incoming) if p is None]
    if missing and (len(missing) > 1 or list(targets) != missing):
        raise ValueError("only the target link may lack an incoming pi message")
    width = lam.size
    survs = [link_survival(l.means) for l in cpd.links]
    qs = [np.ones(width) if p is None else _link_q(s, np.asarray(p, float), None) for s, p in zip(survs, incoming)]
    if cpd.leak is not None:
        qs.append(link_survival(cpd.leak.means)[0])
    m = len(qs)
    prefix = np.ones((m + 1, width))
    suffix = np.ones((m + 1, width))
    for i in range(m):
        prefix[i + 1] = prefix[i] * qs[i]
        suffix[m - 1 - i] = suffix[m - i] * qs[m - 1 - i]

    out: list[np.ndarray | None] = [None] * n
    const = bool(np.all(lam == lam[0]))
    for i in targets:
        g_u = survs[i].shape[0]
        if const:
            out[i] = np.full(g_u + 1, lam[0])
            continue
        others = prefix[i] * suffix[i + 1]
        cum = np.vstack([others, others * survs[i]])  # rows u = 0..g_U
        out[i] = np.diff(cum, axis=1, prepend=0.0) @ lam
    return out


# ----------------------------------------------------------------------------
# message passing


def _tabular_pi(cpt: np.ndarray, pis: Sequence[np.ndarray]) -> np.ndarray:
    t = cpt
    for p in pis:
        t = np.tensordot(p, t, axes=(0, 0))
    return t


def _tabular_lambda(cpt: np.ndarray, pis: Sequence[np.ndarray | None], lam: np.ndarray, target: int) -> np.ndarray:
    if np.all(lam == lam[0]):
        return np.full(cpt.shape[target], lam[0])
    t = cpt @ lam  # shape = parent cards
    for j in reversed(range(len(pis))):
        if j == target:
            continue
        t = np.tensordot(t, pis[j], axes=(j, 0))
    return t


class _Propagator:
    def __init__(self, net: Network, case: CaseRecord, fast_max: bool, max_configs: int):
        self.net = net
        self.fast_max = fast_max
        self.msgs = MessageSet(parents={n: net.parents(n) for n in net.names})
        self.tables: dict[str, np.ndarray] = {}
        for n in net.names:
            cpd = net.cpd(n)
            if isinstance(cpd, TabularCpd):
                self.tables[n] = mean_cpt(cpd)
            elif not fast_max:
                self.tables[n] = expand_noisy_max(cpd, net, max_configs)
            ev = np.ones(net.cardinality(n))
            if n in case.assignments:
                ev = np.zeros_like(ev)
                ev[case.assignments[n]] = 1.0
            self.msgs.lam_evidence[n] = ev

    def node_pi(self, n: str) -> np.ndarray:
        if n in self.msgs.pi:
            return self.msgs.pi[n]
        cpd = self.net.cpd(n)
        pis = [self.msgs.pi_msg[(p, n)] for p in cpd.parents]
        if isinstance(cpd, NoisyMaxCpd) and self.fast_max:
            prof, pi = noisy_max_pi(cpd, pis)
            self.msgs.qprofiles[n] = prof
        else:
            pi = _tabular_pi(self.tables[n], pis)
        self.msgs.pi[n] = pi
        return pi

    def node_lambda(self, n: str, skip: str | None = None) -> np.ndarray:
        lam = self.msgs.lam_evidence[n].copy()
        for c in self.net.children(n):
            if c != skip:
                lam = lam * self.msgs.lambda_msg[(c, n)]
        return lam

    def send(self, src: str, dst: str) -> float:
        """Compute the message src -> dst; returns its normalizer (1 for lambda)."""
        net = self.net
        if dst in net.children(src):
            raw = self.node_pi(src) * self.node_lambda(src, skip=dst)
            z = raw.sum()
            if not z > 0:
                raise ZeroProbabilityError(src)
            self.msgs.pi_msg[(src, dst)] = raw / z
            return float(z)
        cpd = net.cpd(src)
        lam = self.node_lambda(src)
        i = cpd.parents.index(dst)
        pis = [None if p == dst else self.msgs.pi_msg[(p, src)] for p in cpd.parents]
        if isinstance(cpd, NoisyMaxCpd) and self.fast_max:
            msg = noisy_max_lambda(cpd, pis, lam, targets=[i])[i]
        else:
            msg = _tabular_lambda(self.tables[src], pis, lam, i)
        self.msgs.lambda_msg[(src, dst)] = msg
        return 1.0

    def run(self) -> MessageSet:
        net = self.net
        seen: set[str] = set()
        log_pe = 0.0
        for root in net.names:
            if root in seen:
                continue
            order, up = [], {root: None}
            stack = [root]
            while stack:
                n = stack.pop()
                order.append(n)
                seen.add(n)
                for nb in net.parents(n) + net.children(n):
                    if nb not in up:
                        up[nb] = n
                        stack.append(nb)
            for n in reversed(order[1:]):
                log_pe += math.log(self.send(n, up[n]))
            for n in order:
                for nb in net.parents(n) + net.children(n):
                    if nb != up[n]:
                        self.send(n, nb)
            top = float(np.dot(self.node_lambda(root), self.node_pi(root)))
            if not top > 0:
                raise ZeroProbabilityError(root)
            log_pe += math.log(top)
        for n in net.names:
            self.node_pi(n)
            self.msgs.lam[n] = self.node_lambda(n)
            if not float(np.dot(self.msgs.lam[n], self.msgs.pi[n])) > 0:
                raise ZeroProbabilityError(n)
        self.msgs.evidence_probability = math.exp(log_pe)
        return self.msgs


def propagate(
    net: Network,
    case: CaseRecord,
    fast_max: bool = True,
    max_configs: int = DEFAULT_MAX_CONFIGS,
    validate: bool = True,
) -> MessageSet:
    """Propagate hard evidence through a polytree.

    Runs one collect pass toward a root of each connected component and one
    distribute pass back out. pi vectors are normalized conditionals; lambda
    vectors are left unnormalized. With ``fast_max=False`` noisy-MAX families
    are expanded to full tables first.
    """
    if validate:
        require_valid(net)
    check_case(net, case)
    return _Propagator(net, case, fast_max, max_configs).run()
