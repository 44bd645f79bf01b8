"""Text formats: network documents, case streams and learning reports.

A network document is JSON with sorted keys and every float written with 17
significant digits, so two documents can be diffed parameter by parameter.
Case streams and reports are JSON lines.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Iterable, Iterator, TextIO

import numpy as np

from .learning import CaseReport
from .model import (
    CaseError,
    CaseRecord,
    LinkParams,
    Network,
    NoisyMaxCpd,
    TabularCpd,
    Variable,
    configurations,
    validate_network,
)

FORMAT_VERSION = "1"


@dataclass
class FormatIssue:
    message: str
    line: int | None = None
    column: int | None = None

    def __str__(self) -> str:
        if self.line is None:
            return self.message
        return f"{self.line}:{self.column}: {self.message}"


class NetworkFormatError(ValueError):
    def __init__(self, issues: list[FormatIssue]):
        self.issues = issues
        super().__init__("; ".join(str(i) for i in issues))


# ----------------------------------------------------------------------------
# deterministic JSON


def _fmt_float(x: float) -> str:
    if not math.isfinite(x):
        raise ValueError(f"cannot serialize non-finite number {x!r}")
    s = format(x, ".17g")
    if "e" not in s and "." not in s:
        s += ".0"
    return s


def dumps(obj, indent: int | None = 2, _level: int = 0) -> str:
    """JSON with sorted keys and fixed 17-significant-digit floats."""
    if indent is None:
        sep, pad, inner = ", ", "", ""
    else:
        sep = ","
        pad = "\n" + " " * (indent * _level)
        inner = "\n" + " " * (indent * (_level + 1))
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{inner}{json.dumps(str(k))}: {dumps(obj[k], indent, _level + 1)}" for k in sorted(obj)]
        return "{" + sep.join(items) + pad + "}"
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        items = [inner + dumps(v, indent, _level + 1) for v in obj]
        return "[" + sep.join(items) + pad + "]"
    if isinstance(obj, bool) or obj is None:
        return json.dumps(obj)
    if isinstance(obj, (float, np.floating)):
        return _fmt_float(float(obj))
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    return json.dumps(obj)


# ----------------------------------------------------------------------------
# networks


def _param_doc(mean: float, std: float) -> dict:
    return {"mean": float(mean), "std": float(std)}


def network_to_dict(net: Network) -> dict:
    cpds = []
    for c in net.cpds:
        child = net.variable(c.child)
        if isinstance(c, TabularCpd) and c.is_prior:
            cpds.append({
                "type": "prior",
                "child": c.child,
                "params": {child.states[x + 1]: _param_doc(c.means[x], c.stds[x]) for x in range(child.degrees)},
            })
        elif isinstance(c, TabularCpd):
            rows = []
            cards = [net.cardinality(p) for p in c.parents]
            for u in configurations(cards):
                rows.append({
                    "config": [net.variable(p).states[s] for p, s in zip(c.parents, u)],
                    "params": {
                        child.states[x + 1]: _param_doc(c.means[u + (x,)], c.stds[u + (x,)])
                        for x in range(child.degrees)
                    },
                })
            cpds.append({"type": "table", "child": c.child, "parents": list(c.parents), "rows": rows})
        else:
            links = []
            for p, link in zip(c.parents, c.links):
                pv = net.variable(p)
                params = [
                    {"u": pv.states[u + 1], "x": child.states[x + 1], **_param_doc(link.means[u, x], link.stds[u, x])}
                    for u, x in np.ndindex(link.means.shape)
                ]
                links.append({"parent": p, "params": params})
            doc = {"type": "noisy_max", "child": c.child, "links": links, "leak": None}
            if c.leak is not None:
                doc["leak"] = [
                    {"x": child.states[x + 1], **_param_doc(c.leak.means[0, x], c.leak.stds[0, x])}
                    for x in range(child.degrees)
                ]
            cpds.append(doc)
    return {
        "format_version": FORMAT_VERSION,
        "variables": [{"name": v.name, "states": list(v.states), "graded": v.graded} for v in net.variables],
        "cpds": cpds,
    }


def serialize_network(net: Network) -> str:
    return dumps(network_to_dict(net)) + "\n"


class _Reader:
    """Strict field access that collects issues instead of raising at once."""

    def __init__(self):
        self.issues: list[FormatIssue] = []

    def fail(self, msg: str):
        self.issues.append(FormatIssue(msg))
        raise _Abort

    def obj(self, d, where: str, required: set, optional: set = frozenset()) -> dict:
        if not isinstance(d, dict):
            self.fail(f"{where}: expected an object")
        keys = set(d)
        if keys - required - optional:
            self.fail(f"{where}: unknown fields {sorted(keys - required - optional)}")
        if required - keys:
            self.fail(f"{where}: missing fields {sorted(required - keys)}")
        return d

    def typed(self, v, typ, where: str):
        if typ is float:
            if isinstance(v, bool) or not isinstance(v, (int, float)):
                self.fail(f"{where}: expected a number")
            return float(v)
        if not isinstance(v, typ) or (typ is int and isinstance(v, bool)):
            self.fail(f"{where}: expected {typ.__name__}")
        return v


class _Abort(Exception):
    pass


def _state(r: _Reader, var: Variable, name, where: str) -> int:
    if name not in var.states:
        r.fail(f"{where}: {var.name!r} has no state {name!r}")
    return var.states.index(name)


def _parse_param(r: _Reader, d, where: str, extra: set = frozenset()) -> tuple[float, float]:
    d = r.obj(d, where, {"mean", "std"} | set(extra))
    return r.typed(d["mean"], float, where + ".mean"), r.typed(d["std"], float, where + ".std")


def _network_from_doc(r: _Reader, doc) -> Network:
    doc = r.obj(doc, "document", {"format_version", "variables", "cpds"})
    if doc["format_version"] != FORMAT_VERSION:
        r.fail(f"unsupported format_version {doc['format_version']!r}")
    variables = []
    for i, vd in enumerate(r.typed(doc["variables"], list, "variables")):
        vd = r.obj(vd, f"variables[{i}]", {"name", "states", "graded"})
        states = r.typed(vd["states"], list, f"variables[{i}].states")
        for s in states:
            r.typed(s, str, f"variables[{i}].states")
        variables.append(Variable(r.typed(vd["name"], str, f"variables[{i}].name"), tuple(states),
                                  r.typed(vd["graded"], bool, f"variables[{i}].graded")))
    by_name = {v.name: v for v in variables}

    cpds = []
    for i, cd in enumerate(r.typed(doc["cpds"], list, "cpds")):
        where = f"cpds[{i}]"
        if not isinstance(cd, dict) or cd.get("type") not in ("table", "noisy_max", "prior"):
            r.fail(f"{where}: type must be one of 'table', 'noisy_max', 'prior'")
        child_name = cd.get("child")
        if child_name not in by_name:
            r.fail(f"{where}: unknown child {child_name!r}")
        child = by_name[child_name]
        g = child.degrees

        if cd["type"] == "prior":
            cd = r.obj(cd, where, {"type", "child", "params"})
            m, s = np.zeros(g), np.zeros(g)
            params = r.typed(cd["params"], dict, where + ".params")
            if sorted(params) != sorted(child.states[1:]):
                r.fail(f"{where}.params: need exactly the non-reference states {list(child.states[1:])}")
            for name, pd in params.items():
                x = _state(r, child, name, where)
                m[x - 1], s[x - 1] = _parse_param(r, pd, f"{where}.params.{name}")
            cpds.append(TabularCpd(child.name, (), m, s))

        elif cd["type"] == "table":
            cd = r.obj(cd, where, {"type", "child", "parents", "rows"})
            parents = r.typed(cd["parents"], list, where + ".parents")
            for p in parents:
                if p not in by_name:
                    r.fail(f"{where}: unknown parent {p!r}")
            cards = [by_name[p].cardinality for p in parents]
            shape = tuple(cards) + (g,)
            m, s = np.zeros(shape), np.zeros(shape)
            seen = set()
            rows = r.typed(cd["rows"], list, where + ".rows")
            for j, row in enumerate(rows):
                rw = f"{where}.rows[{j}]"
                row = r.obj(row, rw, {"config", "params"})
                config = r.typed(row["config"], list, rw + ".config")
                if len(config) != len(parents):
                    r.fail(f"{rw}: config length {len(config)} != {len(parents)} parents")
                u = tuple(_state(r, by_name[p], st, rw) for p, st in zip(parents, config))
                if u in seen:
                    r.fail(f"{rw}: duplicate configuration {config}")
                seen.add(u)
                params = r.typed(row["params"], dict, rw + ".params")
                if sorted(params) != sorted(child.states[1:]):
                    r.fail(f"{rw}.params: need exactly the non-reference states {list(child.states[1:])}")
                for name, pd in params.items():
                    x = _state(r, child, name, rw)
                    m[u + (x - 1,)], s[u + (x - 1,)] = _parse_param(r, pd, f"{rw}.params.{name}")
            if len(seen) != int(np.prod(cards, dtype=int)):
                r.fail(f"{where}: {len(seen)} rows for {int(np.prod(cards, dtype=int))} configurations")
            cpds.append(TabularCpd(child.name, parents, m, s))

        else:
            cd = r.obj(cd, where, {"type", "child", "links"}, {"leak"})
            parents, links = [], []
            for j, ld in enumerate(r.typed(cd["links"], list, where + ".links")):
                lw = f"{where}.links[{j}]"
                ld = r.obj(ld, lw, {"parent", "params"})
                p = ld["parent"]
                if p not in by_name:
                    r.fail(f"{lw}: unknown parent {p!r}")
                pv = by_name[p]
                m, s = np.zeros((pv.degrees, g)), np.zeros((pv.degrees, g))
                seen = set()
                for k, pd in enumerate(r.typed(ld["params"], list, lw + ".params")):
                    pw = f"{lw}.params[{k}]"
                    pd = r.obj(pd, pw, {"u", "x", "mean", "std"})
                    u, x = _state(r, pv, pd["u"], pw), _state(r, child, pd["x"], pw)
                    if u == 0 or x == 0:
                        r.fail(f"{pw}: absent states carry no parameters")
                    if (u, x) in seen:
                        r.fail(f"{pw}: duplicate entry")
                    seen.add((u, x))
                    m[u - 1, x - 1], s[u - 1, x - 1] = _parse_param(r, pd, pw, {"u", "x"})
                if len(seen) != m.size:
                    r.fail(f"{lw}: {len(seen)} parameters, expected {m.size}")
                parents.append(p)
                links.append(LinkParams(m, s))
            leak = None
            if cd.get("leak") is not None:
                m, s = np.zeros((1, g)), np.zeros((1, g))
                seen = set()
                for k, pd in enumerate(r.typed(cd["leak"], list, where + ".leak")):
                    pw = f"{where}.leak[{k}]"
                    pd = r.obj(pd, pw, {"x", "mean", "std"})
                    x = _state(r, child, pd["x"], pw)
                    if x == 0 or x in seen:
                        r.fail(f"{pw}: invalid or duplicate state")
                    seen.add(x)
                    m[0, x - 1], s[0, x - 1] = _parse_param(r, pd, pw, {"x"})
                if len(seen) != g:
                    r.fail(f"{where}.leak: {len(seen)} parameters, expected {g}")
                leak = LinkParams(m, s)
            cpds.append(NoisyMaxCpd(child.name, parents, links, leak))
    return Network(variables, cpds)


def parse_network(text: str, validate: bool = True) -> Network:
    """Parse and (by default) validate a network document.

    Raises NetworkFormatError listing every problem found; JSON syntax errors
    carry line and column.
    """
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise NetworkFormatError([FormatIssue(exc.msg, exc.lineno, exc.colno)]) from None
    r = _Reader()
    try:
        net = _network_from_doc(r, doc)
    except _Abort:
        raise NetworkFormatError(r.issues) from None
    if validate:
        rep = validate_network(net)
        if not rep.ok:
            raise NetworkFormatError([FormatIssue(e) for e in rep.errors])
    return net


def load_network(path, validate: bool = True) -> Network:
    with open(path, encoding="utf-8") as fh:
        return parse_network(fh.read(), validate)


def save_network(net: Network, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(serialize_network(net))


# ----------------------------------------------------------------------------
# case streams


def iter_cases(lines: Iterable[str], net: Network) -> Iterator[CaseRecord]:
    """Read a case stream lazily; blank lines are skipped."""
    seen: set[str] = set()
    for lineno, line in enumerate(lines, 1):
        if not line.strip():
            continue
        try:
            rec = json.loads(line)
        except json.JSONDecodeError as exc:
            raise CaseError(f"line {lineno}:{exc.colno}: {exc.msg}") from None
        if not isinstance(rec, dict) or set(rec) != {"id", "assignments"}:
            raise CaseError(f"line {lineno}: a case needs exactly the fields 'id' and 'assignments'")
        cid = str(rec["id"])
        if cid in seen:
            raise CaseError(f"line {lineno}: duplicate case id {cid!r}")
        seen.add(cid)
        if not isinstance(rec["assignments"], dict):
            raise CaseError(f"line {lineno}: assignments must be an object")
        try:
            yield net.case(rec["assignments"], id=cid)
        except CaseError as exc:
            raise CaseError(f"line {lineno}: {exc}") from None


def load_cases(path, net: Network) -> list[CaseRecord]:
    with open(path, encoding="utf-8") as fh:
        return list(iter_cases(fh, net))


def case_to_line(net: Network, case: CaseRecord) -> str:
    assignments = {k: net.variable(k).states[v] for k, v in case.assignments.items()}
    return dumps({"id": case.id, "assignments": assignments}, indent=None)


def write_cases(net: Network, cases: Iterable[CaseRecord], fh: TextIO) -> None:
    for c in cases:
        fh.write(case_to_line(net, c) + "\n")


# ----------------------------------------------------------------------------
# learning reports


def report_header() -> dict:
    return {"format_version": FORMAT_VERSION, "kind": "learning_report"}


def report_record(rep: CaseReport) -> dict:
    if rep.error is not None:
        return {"seq": rep.seq, "id": rep.case_id, "error": rep.error}
    return {
        "seq": rep.seq,
        "id": rep.case_id,
        "evidence_probability": rep.evidence_probability,
        "max_cov": rep.max_cov,
        "warnings": list(rep.warnings),
        "params": [
            {
                "param": u.label,
                "delta": u.delta,
                "mean": u.new_mean,
                "var": u.new_var,
                "flags": list(u.flags),
            }
            for u in rep.updates
        ],
    }


def write_report(reports: Iterable[CaseReport]) -> str:
    lines = [dumps(report_header(), indent=None)]
    lines += [dumps(report_record(r), indent=None) for r in reports]
    return "\n".join(lines) + "\n"
