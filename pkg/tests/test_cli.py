"""Presentation parsing, canonical output, the pipeline runner and the CLI."""
from __future__ import annotations

import copy
import json

import jsonschema
import pytest

from conftest import z6_session
from fibredk import cli

BAD_LUNIT = {"kind": "lunit", "key": ["F2:[1]"], "value": "F2:[1]|id_F2|[1]->[1]:0"}


def _f2_data() -> dict:
    return copy.deepcopy(cli.parse("f2-vect").data)


def _errors(data) -> list[str]:
    text = data if isinstance(data, str) else json.dumps(data)
    with pytest.raises(cli.ParseError) as e:
        cli.parse_text(text)
    return e.value.errors


@pytest.fixture(scope="module")
def f2_report():
    return cli.run(cli.parse("f2-vect"))


@pytest.fixture(scope="module")
def f2_broken_report():
    d = _f2_data()
    d["overrides"] = [BAD_LUNIT]
    return cli.run(cli.parse_text(json.dumps(d)))


# parsing -----------------------------------------------------------------------


def test_schema_is_valid_draft_2020_12():
    jsonschema.Draft202012Validator.check_schema(cli.schema())


def test_every_bundled_example_parses():
    names = cli.bundled_examples()
    assert set(names) == {"f2-vect", "finset-terminal", "z6-cover", "z6-mutant-assoc", "z6-mutant-cleavage",
                          "z6-mutant-unit"}
    for name in names:
        assert cli.parse(name) == cli.parse(str(cli.example_path(name)))


def test_z6_cover_golden():
    s = z6_session()
    assert s.base.objects() == ["Z2", "Z3", "Z6"]
    assert s.ext.B.objects() == ["U", "V", "X"]
    assert s.J.families(s.ext.B, "X") == [("id_X",), ("a", "b")]
    assert sorted(s.designations) == ["free", "free-constant-rank"]


@pytest.mark.parametrize("name", ["f2-vect", "finset-terminal", "z6-cover", "z6-mutant-unit"])
def test_round_trip(name):
    pres = cli.parse(name)
    text = cli.serialize(pres)
    again = cli.parse_text(text)
    assert again == pres
    assert cli.serialize(again) == text


def test_unknown_backend_is_named():
    d = _f2_data()
    d["fibres"]["F2"]["backend"] = "banach-space"
    assert any("unknown backend tag" in e and "fibres.F2" in e for e in _errors(d))


def test_missing_tensor_object_names_the_field():
    text = cli.serialize(cli.parse("z6-mutant-unit"))
    d = json.loads(text)
    d["fibres"] = {"Z6": {"backend": "enumerated", "category": {"objects": ["I"], "arrows": {}},
                          "tensor": {"objects": {"I|I": "K"}, "morphisms": {}}, "unit": "I",
                          "assoc": {}, "lunit": {}, "runit": {}}}
    d["base"] = {"objects": ["Z6"], "arrows": {}}
    d.pop("overrides")
    errs = _errors(d)
    assert any(e.startswith("fibres.Z6.tensor.objects.I|I: references missing object 'K'") for e in errs)


def test_version_mismatch_is_reported_first():
    d = _f2_data()
    d["format"] = "fibredk-presentation/9"
    errs = _errors(d)
    assert errs[0].startswith("format: unsupported version")


def test_dangling_arrow():
    d = _f2_data()
    d["base"]["arrows"]["f"] = ["F2", "F4"]
    assert any("F4" in e and e.startswith("base") for e in _errors(d))


def test_json_syntax_error_has_position():
    errs = _errors('{"format": ')
    assert errs[0].startswith("<string>:1:")


def test_schema_errors_carry_a_path():
    d = _f2_data()
    d["universe"]["bound"] = 0
    assert any(e.startswith("universe.bound:") for e in _errors(d))


def test_bad_override_value(tmp_path, capsys):
    d = _f2_data()
    d["overrides"] = [dict(BAD_LUNIT, value="not a morphism")]
    path = tmp_path / "bad.json"
    path.write_text(json.dumps(d))
    # override values are resolved against the engine, so the error appears at run time
    assert cli.main(["run", str(path)]) == 2
    assert "overrides[0].value" in capsys.readouterr().err


# running and reports -------------------------------------------------------------


def test_f2_report_shape(f2_report):
    assert f2_report["format"] == "fibredk-report/1"
    assert [s["stage"] for s in f2_report["stages"]] == list(cli.STAGES)
    assert f2_report["summary"] == {"status": "truncated", "exit_code": 0, "failed_checks": 0,
                                    "truncated_checks": 1, "error": None}
    site = next(s for s in f2_report["stages"] if s["stage"] == "site")
    assert site["status"] == "skipped" and site["reason"]


def test_diff_of_report_with_itself_is_empty(f2_report):
    assert cli.diff_reports(f2_report, f2_report) == ""


def test_diff_names_the_failing_stage(f2_report, f2_broken_report):
    assert f2_broken_report["summary"]["exit_code"] == 1
    text = cli.diff_reports(f2_report, f2_broken_report)
    assert "verify-monoidal" in text
    assert all(line[0] in "-+~" for line in text.splitlines())


def test_diff_rejects_other_versions(f2_report):
    other = dict(f2_report, format="fibredk-report/0")
    with pytest.raises(cli.ParseError):
        cli.diff_reports(f2_report, other)


def test_universe_bound_changes_omitted_pairs(f2_report):
    small = cli.run(cli.parse("f2-vect"), cli.Settings(universe_bound=4))
    assert small["settings"]["universe_bound"] == 4
    assert len(small["k0"][0]["classes"]) == 3
    assert small["k0"][0]["group"]["group"] == "Z"
    assert "omitted_pairs" in cli.diff_reports(f2_report, small)


def test_stage_stops_the_pipeline():
    rep = cli.run(cli.parse("f2-vect"), cli.Settings(stage="validate"))
    statuses = {s["stage"]: (s["status"], s["reason"]) for s in rep["stages"]}
    assert statuses["validate"][0] == "pass"
    assert statuses["build"][0] == "skipped" and "validate" in statuses["build"][1]


def test_human_report_lists_stages(f2_report):
    text = cli.human_report(f2_report)
    for stage in cli.STAGES:
        assert stage in text


def test_timings_can_be_dropped(f2_report):
    assert "timings" in json.loads(cli.serialize_report(f2_report))
    assert "timings" not in json.loads(cli.serialize_report(f2_report, timings=False))


# the command line ----------------------------------------------------------------


def test_main_exit_codes(tmp_path, capsys):
    assert cli.main(["run", "f2-vect", "--format", "machine"]) == 0
    assert cli.main(["run", "f2-vect", "--strict"]) == 3
    bad = tmp_path / "broken.json"
    d = _f2_data()
    d["overrides"] = [BAD_LUNIT]
    bad.write_text(json.dumps(d))
    assert cli.main(["run", str(bad)]) == 1
    assert cli.main(["run", str(tmp_path / "missing.json")]) == 2
    assert cli.main(["run", "f2-vect", "--universe-bound", "0"]) == 2
    capsys.readouterr()


def test_main_report_file_and_diff(tmp_path, capsys):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    assert cli.main(["run", "f2-vect", "--report", str(a)]) == 0
    assert cli.main(["run", "f2-vect", "--report", str(b), "--no-timings"]) == 0
    assert cli.main(["diff", str(a), str(b)]) == 0
    d = json.loads(b.read_text())
    d["k0"][0]["status"] = "fail"
    b.write_text(json.dumps(d))
    capsys.readouterr()
    assert cli.main(["diff", str(a), str(b)]) == 1
    assert "k0" in capsys.readouterr().out


def test_main_parse_and_examples(capsys):
    assert cli.main(["parse", "f2-vect"]) == 0
    assert capsys.readouterr().out == cli.serialize(cli.parse("f2-vect"))
    assert cli.main(["examples"]) == 0
    assert len(capsys.readouterr().out.splitlines()) == len(cli.bundled_examples())


def test_invalid_workers_setting(monkeypatch, capsys):
    monkeypatch.setenv(cli.WORKERS_ENV, "many")
    assert cli.main(["run", "f2-vect"]) == 2
    assert cli.WORKERS_ENV in capsys.readouterr().err
