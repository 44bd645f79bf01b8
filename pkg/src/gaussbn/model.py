"""Variables, CPD families with Gaussian-distributed parameters, and networks.

Every variable uses state index 0 as its reference state: the probability of
state 0 is never stored, it is the complement of the other states.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Iterator, Mapping, NamedTuple, Sequence, Union

import numpy as np

DEFAULT_STD_RATIO = 1.0 / 3.0
DEFAULT_MAX_CONFIGS = 10**6


class InvalidNetworkError(ValueError):
    def __init__(self, report: "ValidationReport"):
        self.report = report
        super().__init__("invalid network: " + "; ".join(report.errors))


class SizeLimitError(ValueError):
    pass


class CaseError(ValueError):
    pass


@dataclass(frozen=True)
class Variable:
    name: str
    states: tuple[str, ...]
    graded: bool = False

    def __post_init__(self):
        object.__setattr__(self, "states", tuple(self.states))

    @classmethod
    def with_cardinality(cls, name: str, cardinality: int, graded: bool = False) -> "Variable":
        if graded:
            states = ("absent",) + tuple(f"d{i}" for i in range(1, cardinality))
        else:
            states = tuple(f"s{i}" for i in range(cardinality))
        return cls(name, states, graded)

    @property
    def cardinality(self) -> int:
        return len(self.states)

    @property
    def degrees(self) -> int:
        return len(self.states) - 1

    def state_index(self, state: Union[str, int]) -> int:
        if isinstance(state, (int, np.integer)):
            return int(state)
        try:
            return self.states.index(state)
        except ValueError:
            raise CaseError(f"variable {self.name!r} has no state {state!r}") from None


@dataclass(frozen=True)
class GaussianParam:
    mean: float
    std: float


def _frozen_array(a) -> np.ndarray:
    arr = np.array(a, dtype=float)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class TabularCpd:
    """Full conditional table for ``child`` given ``parents``.

    ``means`` and ``stds`` have shape ``(*parent_cards, child_card - 1)``;
    entry ``[u..., x - 1]`` is the parameter for child state ``x`` under
    parent configuration ``u``. A table without parents is a prior.
    """

    child: str
    parents: tuple[str, ...]
    means: np.ndarray
    stds: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "parents", tuple(self.parents))
        object.__setattr__(self, "means", _frozen_array(self.means))
        object.__setattr__(self, "stds", _frozen_array(self.stds))

    @property
    def is_prior(self) -> bool:
        return not self.parents

    def param(self, u: Sequence[int], x: int) -> GaussianParam:
        idx = tuple(u) + (x - 1,)
        return GaussianParam(float(self.means[idx]), float(self.stds[idx]))


def prior_cpd(child: str, means: Sequence[float], stds: Sequence[float]) -> TabularCpd:
    """Prior over a root node, learned like a table with one configuration."""
    return TabularCpd(child, (), means, stds)


@dataclass(frozen=True, eq=False)
class LinkParams:
    """Parameters of one noisy-MAX link, shape ``(g_parent, g_child)``.

    Entry ``[u - 1, x - 1]`` is P(X = x | U = u, every other cause absent).
    """

    means: np.ndarray
    stds: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "means", _frozen_array(np.atleast_2d(self.means)))
        object.__setattr__(self, "stds", _frozen_array(np.atleast_2d(self.stds)))


@dataclass(frozen=True, eq=False)
class NoisyMaxCpd:
    """Generalized noisy-OR (MAX) gate.

    The optional ``leak`` is an always-present binary pseudo-cause with a
    single row of parameters.
    """

    child: str
    parents: tuple[str, ...]
    links: tuple[LinkParams, ...]
    leak: LinkParams | None = None

    def __post_init__(self):
        object.__setattr__(self, "parents", tuple(self.parents))
        object.__setattr__(self, "links", tuple(self.links))

    def all_links(self) -> tuple[LinkParams, ...]:
        return self.links + ((self.leak,) if self.leak is not None else ())


Cpd = Union[TabularCpd, NoisyMaxCpd]


class ParamId(NamedTuple):
    """Address of one uncertain parameter.

    kind is ``"table"`` (u is the parent configuration tuple), ``"link"``
    (link names the parent, u is its degree) or ``"leak"``.
    """

    child: str
    kind: str
    link: str | None
    u: tuple[int, ...] | int
    x: int


@dataclass(frozen=True)
class CaseRecord:
    assignments: Mapping[str, int]
    id: str | None = None

    def __post_init__(self):
        object.__setattr__(self, "assignments", dict(self.assignments))


@dataclass(frozen=True, eq=False)
class Network:
    variables: tuple[Variable, ...]
    cpds: tuple[Cpd, ...]
    _var: dict = field(init=False, repr=False)
    _cpd: dict = field(init=False, repr=False)
    _children: dict = field(init=False, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "variables", tuple(self.variables))
        object.__setattr__(self, "cpds", tuple(self.cpds))
        object.__setattr__(self, "_var", {v.name: v for v in self.variables})
        object.__setattr__(self, "_cpd", {c.child: c for c in self.cpds})
        children = {v.name: [] for v in self.variables}
        for c in self.cpds:
            for p in c.parents:
                if p in children:
                    children[p].append(c.child)
        object.__setattr__(self, "_children", {k: tuple(v) for k, v in children.items()})

    @property
    def names(self) -> list[str]:
        return [v.name for v in self.variables]

    def variable(self, name: str) -> Variable:
        return self._var[name]

    def cpd(self, name: str) -> Cpd:
        return self._cpd[name]

    def parents(self, name: str) -> tuple[str, ...]:
        return self._cpd[name].parents

    def children(self, name: str) -> tuple[str, ...]:
        return self._children[name]

    def edges(self) -> list[tuple[str, str]]:
        return [(p, c.child) for c in self.cpds for p in c.parents]

    def cardinality(self, name: str) -> int:
        return self._var[name].cardinality

    def topological_order(self) -> list[str]:
        indeg = {n: len(self.parents(n)) for n in self.names}
        ready = [n for n in self.names if indeg[n] == 0]
        order = []
        while ready:
            n = ready.pop(0)
            order.append(n)
            for ch in self.children(n):
                indeg[ch] -= 1
                if indeg[ch] == 0:
                    ready.append(ch)
        if len(order) != len(self.names):
            raise InvalidNetworkError(ValidationReport(["network has a directed cycle"], []))
        return order

    def replace_cpds(self, new: Sequence[Cpd]) -> "Network":
        repl = {c.child: c for c in new}
        return Network(self.variables, tuple(repl.get(c.child, c) for c in self.cpds))

    def case(self, assignments: Mapping[str, Union[str, int]], id: str | None = None) -> CaseRecord:
        """Build a CaseRecord from state names or indices, checking ranges."""
        out = {}
        for name, state in assignments.items():
            if name not in self._var:
                raise CaseError(f"unknown variable {name!r}")
            out[name] = self._var[name].state_index(state)
        rec = CaseRecord(out, id)
        check_case(self, rec)
        return rec


def check_case(net: Network, case: CaseRecord) -> None:
    for name, idx in case.assignments.items():
        if name not in net._var:
            raise CaseError(f"unknown variable {name!r}")
        if not 0 <= idx < net.cardinality(name):
            raise CaseError(f"state index {idx} out of range for {name!r}")


# ----------------------------------------------------------------------------
# validation


@dataclass
class ValidationReport:
    errors: list[str] = field(default_factory=list)
    warnings: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.errors


def _check_params(where: str, means: np.ndarray, stds: np.ndarray, ratio: float, rep: ValidationReport):
    for idx in np.ndindex(means.shape):
        mu, sd = float(means[idx]), float(stds[idx])
        tag = f"{where}{list(idx)}"
        if not (0.0 < mu < 1.0) or not np.isfinite(mu):
            rep.errors.append(f"{tag}: mean {mu!r} outside the open interval (0, 1)")
            continue
        if not sd >= 0.0 or not np.isfinite(sd):
            rep.errors.append(f"{tag}: std {sd!r} must be finite and non-negative")
            continue
        room = min(mu, 1.0 - mu)
        if sd >= room:
            rep.errors.append(f"{tag}: std {sd:g} >= min(mean, 1 - mean) = {room:g}")
        elif sd > ratio * room:
            rep.warnings.append(
                f"{tag}: std/min(mean, 1 - mean) ratio exceeded ({sd:g} > {ratio:g} * {room:g})"
            )


def _check_columns(where: str, means: np.ndarray, rep: ValidationReport):
    sums = means.sum(axis=-1)
    for idx in np.ndindex(sums.shape):
        if not sums[idx] < 1.0:
            rep.errors.append(
                f"{where}{list(idx)}: non-reference means sum to {float(sums[idx]):g}, must be < 1"
            )


def _undirected_forest(names: Sequence[str], edges: Sequence[tuple[str, str]]) -> bool:
    root = {n: n for n in names}

    def find(n):
        while root[n] != n:
            root[n] = root[root[n]]
            n = root[n]
        return n

    for a, b in edges:
        ra, rb = find(a), find(b)
        if ra == rb:
            return False
        root[ra] = rb
    return True


def validate_network(net: Network, std_ratio: float = DEFAULT_STD_RATIO) -> ValidationReport:
    """Check structure and parameters; the report is the result."""
    rep = ValidationReport()
    names = [v.name for v in net.variables]
    if len(set(names)) != len(names):
        rep.errors.append("duplicate variable names")
    for v in net.variables:
        if v.cardinality < 2:
            rep.errors.append(f"variable {v.name!r} needs at least 2 states")
        if len(set(v.states)) != len(v.states):
            rep.errors.append(f"variable {v.name!r} has duplicate state names")
        if v.graded and v.states and v.states[0] != "absent":
            rep.warnings.append(f"graded variable {v.name!r}: state 0 is {v.states[0]!r}, not 'absent'")

    seen: dict[str, int] = {}
    for c in net.cpds:
        seen[c.child] = seen.get(c.child, 0) + 1
    for n in names:
        if seen.get(n, 0) != 1:
            rep.errors.append(f"variable {n!r} has {seen.get(n, 0)} CPDs, expected exactly 1")
    for child in seen:
        if child not in net._var:
            rep.errors.append(f"CPD for unknown variable {child!r}")
    if rep.errors:
        return rep

    for c in net.cpds:
        for p in c.parents:
            if p not in net._var:
                rep.errors.append(f"{c.child!r}: unknown parent {p!r}")
        if len(set(c.parents)) != len(c.parents) or c.child in c.parents:
            rep.errors.append(f"{c.child!r}: repeated or self parent")
    if rep.errors:
        return rep

    try:
        net.topological_order()
    except InvalidNetworkError:
        rep.errors.append("network has a directed cycle")
        return rep
    if not _undirected_forest(names, net.edges()):
        rep.errors.append("network is not singly connected (undirected cycle)")

    for c in net.cpds:
        child = net.variable(c.child)
        if isinstance(c, TabularCpd):
            shape = tuple(net.cardinality(p) for p in c.parents) + (child.cardinality - 1,)
            if c.means.shape != shape or c.stds.shape != shape:
                rep.errors.append(
                    f"{c.child!r}: table shape {c.means.shape}/{c.stds.shape}, expected {shape}"
                )
                continue
            _check_params(f"{c.child}", c.means, c.stds, std_ratio, rep)
            _check_columns(f"{c.child}", c.means, rep)
        else:
            if not child.graded:
                rep.errors.append(f"{c.child!r}: noisy-MAX child must be graded")
            if len(c.links) != len(c.parents):
                rep.errors.append(f"{c.child!r}: {len(c.links)} links for {len(c.parents)} parents")
                continue
            for p, link in zip(c.parents, c.links):
                par = net.variable(p)
                if not par.graded:
                    rep.errors.append(f"{c.child!r}: noisy-MAX parent {p!r} must be graded")
                shape = (par.degrees, child.degrees)
                if link.means.shape != shape or link.stds.shape != shape:
                    rep.errors.append(f"{c.child!r}<-{p}: link shape {link.means.shape}, expected {shape}")
                    continue
                _check_params(f"{c.child}<-{p}", link.means, link.stds, std_ratio, rep)
                _check_columns(f"{c.child}<-{p}", link.means, rep)
            if c.leak is not None:
                shape = (1, child.degrees)
                if c.leak.means.shape != shape or c.leak.stds.shape != shape:
                    rep.errors.append(f"{c.child!r}: leak shape {c.leak.means.shape}, expected {shape}")
                else:
                    _check_params(f"{c.child}<-leak", c.leak.means, c.leak.stds, std_ratio, rep)
                    _check_columns(f"{c.child}<-leak", c.leak.means, rep)
    return rep


def require_valid(net: Network, std_ratio: float = DEFAULT_STD_RATIO) -> ValidationReport:
    rep = validate_network(net, std_ratio)
    if not rep.ok:
        raise InvalidNetworkError(rep)
    return rep


# ----------------------------------------------------------------------------
# point tables at parameter means


def mean_cpt(cpd: TabularCpd) -> np.ndarray:
    """Point table P(x | u) at parameter means, shape ``(*parent_cards, card)``.

    The reference column is the complement of the stored means, so every
    column sums to one.
    """
    m = cpd.means
    ref = 1.0 - m.sum(axis=-1, keepdims=True)
    return np.concatenate([ref, m], axis=-1)


def link_survival(means: np.ndarray) -> np.ndarray:
    """1 - sum_{x' > x} mean[u, x'] for each cause degree u >= 1 and x = 0..g_X.

    Row ``u - 1`` is P(X <= x | U = u, other causes absent).
    """
    g_u, g_x = means.shape
    tail = np.zeros((g_u, g_x + 1))
    # tail[:, x] = sum of columns x'+1..g_X, i.e. means[:, x:]
    tail[:, :g_x] = np.cumsum(means[:, ::-1], axis=1)[:, ::-1]
    return 1.0 - tail


def expand_noisy_max(cpd: NoisyMaxCpd, net: Network, max_configs: int = DEFAULT_MAX_CONFIGS) -> np.ndarray:
    """Full table of a noisy-MAX gate at parameter means.

    The cumulative distribution of the child is the product over causes of
    the per-cause cumulative distributions; the leak acts as one more cause
    fixed at its present state.
    """
    g_x = net.variable(cpd.child).degrees
    cards = [net.cardinality(p) for p in cpd.parents]
    n_configs = int(np.prod(cards, dtype=object)) if cards else 1
    if n_configs > max_configs:
        raise SizeLimitError(
            f"noisy-MAX expansion of {cpd.child!r} needs {n_configs} configurations (cap {max_configs})"
        )
    cum = np.ones(tuple(cards) + (g_x + 1,))
    for i, link in enumerate(cpd.links):
        per_u = np.vstack([np.ones(g_x + 1), link_survival(link.means)])
        shape = [1] * len(cards) + [g_x + 1]
        shape[i] = cards[i]
        cum = cum * per_u.reshape(shape)
    if cpd.leak is not None:
        cum = cum * link_survival(cpd.leak.means)[0]
    table = np.diff(cum, axis=-1, prepend=0.0)
    return table


def point_cpt(net: Network, name: str, max_configs: int = DEFAULT_MAX_CONFIGS) -> np.ndarray:
    cpd = net.cpd(name)
    if isinstance(cpd, TabularCpd):
        return mean_cpt(cpd)
    return expand_noisy_max(cpd, net, max_configs)


# ----------------------------------------------------------------------------
# parameter addressing


def iter_params(net: Network) -> Iterator[tuple[ParamId, GaussianParam]]:
    for c in net.cpds:
        if isinstance(c, TabularCpd):
            for idx in np.ndindex(c.means.shape):
                pid = ParamId(c.child, "table", None, tuple(int(i) for i in idx[:-1]), idx[-1] + 1)
                yield pid, GaussianParam(float(c.means[idx]), float(c.stds[idx]))
        else:
            for p, link in zip(c.parents, c.links):
                for (u, x) in np.ndindex(link.means.shape):
                    yield ParamId(c.child, "link", p, u + 1, x + 1), GaussianParam(
                        float(link.means[u, x]), float(link.stds[u, x])
                    )
            if c.leak is not None:
                for x in range(c.leak.means.shape[1]):
                    yield ParamId(c.child, "leak", None, 1, x + 1), GaussianParam(
                        float(c.leak.means[0, x]), float(c.leak.stds[0, x])
                    )


def param_index(pid: ParamId) -> tuple:
    """Array index of ``pid`` inside its table or link array."""
    if pid.kind == "table":
        return tuple(pid.u) + (pid.x - 1,)
    return (pid.u - 1, pid.x - 1)


def with_params(net: Network, values: Mapping[ParamId, GaussianParam]) -> Network:
    """Copy of ``net`` with the given parameters replaced."""
    by_child: dict[str, list] = {}
    for pid, gp in values.items():
        by_child.setdefault(pid.child, []).append((pid, gp))
    new = []
    for child, items in by_child.items():
        c = net.cpd(child)
        if isinstance(c, TabularCpd):
            m, s = np.array(c.means), np.array(c.stds)
            for pid, gp in items:
                m[param_index(pid)], s[param_index(pid)] = gp.mean, gp.std
            new.append(TabularCpd(c.child, c.parents, m, s))
        else:
            links = [[np.array(l.means), np.array(l.stds)] for l in c.all_links()]
            for pid, gp in items:
                k = len(c.links) if pid.kind == "leak" else c.parents.index(pid.link)
                links[k][0][param_index(pid)] = gp.mean
                links[k][1][param_index(pid)] = gp.std
            lp = [LinkParams(m, s) for m, s in links]
            leak = lp.pop() if c.leak is not None else None
            new.append(NoisyMaxCpd(c.child, c.parents, tuple(lp), leak))
    return net.replace_cpds(new)


def param_label(net: Network, pid: ParamId) -> str:
    child = net.variable(pid.child)
    xs = child.states[pid.x]
    if pid.kind == "table":
        if not pid.u:
            return f"{pid.child}={xs}"
        cond = ",".join(f"{p}={net.variable(p).states[s]}" for p, s in zip(net.parents(pid.child), pid.u))
        return f"{pid.child}={xs}|{cond}"
    if pid.kind == "link":
        return f"{pid.child}={xs}|{pid.link}={net.variable(pid.link).states[pid.u]};max"
    return f"{pid.child}={xs}|leak;max"


def configurations(cards: Sequence[int]) -> Iterator[tuple[int, ...]]:
    return itertools.product(*(range(c) for c in cards))
