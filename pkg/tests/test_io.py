import json

import numpy as np
import pytest

from gaussbn import io
from gaussbn.learning import learn_stream
from gaussbn.model import CaseError, iter_params

from conftest import load

CORPUS = ["chain", "alarm", "graded"]

MINIMAL = """{
  "format_version": "1",
  "variables": [
    {"name": "U", "states": ["absent", "present"], "graded": true},
    {"name": "X", "states": ["absent", "present"], "graded": true}
  ],
  "cpds": [
    {"type": "prior", "child": "U", "params": {"present": {"mean": 0.3, "std": 0.02}}},
    {"type": "noisy_max", "child": "X",
     "links": [{"parent": "U", "params": [{"u": "present", "x": "present", "mean": 0.6, "std": 0.03}]}],
     "leak": [{"x": "present", "mean": 0.01, "std": 0.001}]}
  ]
}"""


def test_minimal_document_parses():
    net = io.parse_network(MINIMAL)
    assert net.names == ["U", "X"]
    assert net.cpd("X").leak.means[0, 0] == 0.01


@pytest.mark.parametrize("name", CORPUS)
def test_round_trip_byte_stable(name, fixtures_dir):
    text = (fixtures_dir / f"{name}.json").read_text()
    once = io.serialize_network(io.parse_network(text))
    assert once == text
    assert io.serialize_network(io.parse_network(once)) == once


def test_normalization_pass_then_stable():
    once = io.serialize_network(io.parse_network(MINIMAL))
    assert once != MINIMAL
    assert io.serialize_network(io.parse_network(once)) == once


def test_every_parameter_survives_serialization():
    net = load("graded")
    again = io.parse_network(io.serialize_network(net))
    assert dict(iter_params(net)) == dict(iter_params(again))


def test_table_with_no_parents_normalizes_to_prior():
    doc = json.loads(MINIMAL)
    doc["cpds"][0] = {"type": "table", "child": "U", "parents": [],
                      "rows": [{"config": [], "params": {"present": {"mean": 0.3, "std": 0.02}}}]}
    text = io.serialize_network(io.parse_network(json.dumps(doc)))
    assert '"type": "prior"' in text


def test_mean_out_of_bounds():
    with pytest.raises(io.NetworkFormatError) as err:
        io.parse_network(MINIMAL.replace('"mean": 0.6', '"mean": 1.2'))
    assert "outside the open interval (0, 1)" in str(err.value)


def test_syntax_error_has_position():
    with pytest.raises(io.NetworkFormatError) as err:
        io.parse_network(MINIMAL.replace('"graded": true}', '"graded": true', 1))
    issue = err.value.issues[0]
    assert issue.line is not None and issue.column is not None


@pytest.mark.parametrize(
    "mutate",
    [
        lambda d: d["variables"][0].update(extra=1),
        lambda d: d["cpds"][0].update(colour="red"),
        lambda d: d.update(format_version="9"),
        lambda d: d["cpds"][1]["links"][0]["params"].append(dict(d["cpds"][1]["links"][0]["params"][0])),
        lambda d: d["cpds"][1]["links"][0]["params"][0].update(u="absent"),
        lambda d: d["cpds"][0]["params"].pop("present"),
        lambda d: d["cpds"][0].update(type="dirichlet"),
    ],
)
def test_strict_document_errors(mutate):
    doc = json.loads(MINIMAL)
    mutate(doc)
    with pytest.raises(io.NetworkFormatError):
        io.parse_network(json.dumps(doc))


def test_case_stream(alarm, fixtures_dir):
    cases = io.load_cases(fixtures_dir / "alarm_cases.jsonl", alarm)
    assert len(cases) == 40
    lines = (fixtures_dir / "alarm_cases.jsonl").read_text().splitlines()
    assert [io.case_to_line(alarm, c) for c in cases] == lines


@pytest.mark.parametrize(
    "lines, msg",
    [
        (['{"id": "a", "assignments": {}}', '{"id": "a", "assignments": {}}'], "duplicate"),
        (['{"id": "a", "assignments": {"Z": "yes"}}'], "unknown variable"),
        (['{"id": "a", "assignments": {"D": "maybe"}}'], "no state"),
        (['{"id": "a"}'], "exactly the fields"),
        (['{"id": "a", "assignments": {}'], "line 1"),
    ],
)
def test_case_stream_errors(alarm, lines, msg):
    with pytest.raises(CaseError, match=msg):
        list(io.iter_cases(lines, alarm))


def test_empty_report_is_header_only():
    text = io.write_report([])
    assert text.count("\n") == 1
    assert json.loads(text) == {"format_version": "1", "kind": "learning_report"}


def test_report_golden(alarm, fixtures_dir):
    cases = io.load_cases(fixtures_dir / "report3_cases.jsonl", alarm)
    _, reports = learn_stream(alarm, cases)
    text = io.write_report(reports)
    assert text == (fixtures_dir / "report3_golden.jsonl").read_text()
    records = [json.loads(line) for line in text.splitlines()]
    assert "error" in records[3] and "params" not in records[3]
    assert all(len(r["params"]) == 6 for r in records[1:3])


def test_dumps_floats_fixed_precision():
    assert io.dumps({"b": 0.1, "a": [1, 2.0]}, indent=None) == '{"a": [1, 2.0], "b": 0.10000000000000001}'
    with pytest.raises(ValueError):
        io.dumps(float("nan"))
