import math

import pytest
import yaml

import checks
import main
import results
import suites
import system
from errors import ConfigurationError
from results import ResultRow
from system import LabSystem

SMALL_POLYMER = {"levels": 3, "steps": 40, "t_final": 1.0, "seeds": 3, "positivity_seeds": 5}


def _write_config(tmp_path, out_dir, **sections):
    config = {"experiment": "polymer-suite", "polymer": SMALL_POLYMER, "output": {"directory": str(out_dir)}}
    config.update(sections)
    path = tmp_path / "config.yaml"
    path.write_text(yaml.safe_dump(config), encoding="utf-8")
    return path


def _row(check_id="a.b", passed=True, diagnostic=False):
    return ResultRow(experiment="polymer-suite", check_id=check_id, claim="lgv-polymer", quantity="q",
                     value=0.5, error=1e-3, reference=0.5, tolerance=1e-2, passed=passed,
                     diagnostic=diagnostic, seed=3)


### Configuration ###

def test_merge_rejects_unknown_entries() -> None:
    with pytest.raises(ConfigurationError):
        system.merge_config(system.DEFAULTS, {"gird": {}})
    with pytest.raises(ConfigurationError):
        system.merge_config(system.DEFAULTS, {"grid": {"n_z": 3}})
    with pytest.raises(ConfigurationError):
        system.merge_config(system.DEFAULTS, {"tolerances": {"made_up": 1.0}})
    with pytest.raises(ConfigurationError):
        system.merge_config(system.DEFAULTS, {"grid": 5})


def test_merge_keeps_defaults() -> None:
    merged = system.merge_config(system.DEFAULTS, {"grid": {"n_t": 100}, "tolerances": {"flow": 0.1}})
    assert merged["grid"]["n_t"] == 100
    assert merged["grid"]["n_y"] == system.DEFAULTS["grid"]["n_y"]
    assert merged["tolerances"] == {"flow": 0.1}
    assert system.DEFAULTS["grid"]["n_t"] == 500


def test_validate_config() -> None:
    config = system.merge_config(system.DEFAULTS, {})
    assert system.validate_config(config) is config
    for overrides in ({"experiment": "everything"}, {"layers": {"n_max": 6}}, {"mc": {"samples": 1}},
                      {"grid": {"n_t": 2.5}}, {"grid": {"y_min": -2.0}}):
        with pytest.raises(ConfigurationError):
            system.validate_config(system.merge_config(system.DEFAULTS, overrides))


def test_settings_setter_validates(tmp_path) -> None:
    lab = LabSystem(out_dir=tmp_path)
    with pytest.raises(ValueError):
        lab.settings = "grid"
    lab.update_status({"note": "ok"})
    lab.update_status("not a dict")
    assert lab.status["note"] == "ok"
    lab.cleanup()


def test_tolerance_registry() -> None:
    assert checks.tolerance("flow") == pytest.approx(2e-2)
    assert checks.tolerance("flow", {"flow": 0.5}) == 0.5
    assert checks.tolerance("convergence_band") == [3.0, 5.0]
    with pytest.raises(KeyError):
        checks.tolerance("made_up")


def test_check_predicates_answer_false_when_undecidable() -> None:
    assert checks.check_relative(1.0005, 1.0, 1e-3)
    assert not checks.check_relative(float("nan"), 1.0, 1e-3)
    assert not checks.check_relative(1.0, 0.0, 1e-3)
    assert checks.check_within_sigma(1.02, 1.0, 0.01, 3.0)
    assert not checks.check_within_sigma(1.0, 1.0, 0.0, 3.0)
    assert checks.check_within_sigma(1.0, 1.0, 0.0, 3.0, reference_error=0.1)
    assert checks.check_band(4.0, [3.0, 5.0])
    assert not checks.check_band(float("nan"), [3.0, 5.0])
    assert not checks.check_band(4.0, "wide")
    assert checks.check_at_most([0.1, 0.2], 0.2)
    assert not checks.check_at_least([1.0, float("nan")], 0.0)
    assert checks.spread([1.0, 1.01, 0.99]) == pytest.approx(1.01 / 0.99 - 1.0)
    assert not checks.check_spread([], 0.1)


### Results ###

def test_result_row_validation() -> None:
    with pytest.raises(ValueError):
        ResultRow(experiment="x", check_id="a", claim="unknown", quantity="q", value=1.0)
    with pytest.raises(ValueError):
        ResultRow(experiment="x", check_id="a", claim="lgv-polymer", quantity="q", value=1.0, provenance="guess")
    assert _row(passed=False).failing
    assert not _row(passed=False, diagnostic=True).failing


def test_results_written_and_read_back(tmp_path) -> None:
    rows = [_row("a.one"), _row("a.two", passed=False), _row("a.three", passed=False, diagnostic=True)]
    rows[0].wall_time = 1.5
    results.write_results(rows, tmp_path)
    results.write_timings(rows, tmp_path)
    header = (tmp_path / results.RESULTS_FILE).read_text(encoding="utf-8").splitlines()[0]
    assert header.split(",") == results.COLUMNS
    assert "wall_time" not in header
    loaded = results.load_results(tmp_path)
    assert [r.check_id for r in loaded] == ["a.one", "a.two", "a.three"]
    assert loaded[1].passed is False and loaded[2].diagnostic is True
    assert loaded[0].seed == 3
    assert "1.500" in (tmp_path / results.TIMINGS_FILE).read_text(encoding="utf-8")


def test_summary_lists_failures_first() -> None:
    summary = results.summarize([_row("a.one"), _row("a.two", passed=False)])
    assert not summary.passed
    text = summary.render()
    assert text.startswith("FAILING (1):")
    assert "a.two" in text
    assert summary.by_claim["lgv-polymer"] == {"pass": 1, "fail": 1, "diag": 0}


def test_summary_prints_the_statement_of_each_claim() -> None:
    assert set(results.CLAIM_STATEMENTS) == set(results.CLAIMS)
    text = results.summarize([_row("a.one")]).render()
    assert results.CLAIM_STATEMENTS["lgv-polymer"] in text
    assert results.CLAIM_STATEMENTS["flow-property"] not in text


def test_missing_claims() -> None:
    assert results.missing_claims("polymer-suite", [_row()]) == []
    assert results.missing_claims("calibrate", []) == results.SUITE_CLAIMS["calibrate"]


### Suites ###

def _config(**overrides):
    return system.validate_config(system.merge_config(system.DEFAULTS, {"polymer": SMALL_POLYMER, **overrides}))


def test_crashed_suite_writes_a_failing_row(monkeypatch) -> None:
    def crash(ctx):
        raise RuntimeError("boom")

    monkeypatch.setitem(suites.SUITES, "polymer-suite", crash)
    rows, ledger = suites.run_suite("polymer-suite", _config())
    assert [r.check_id for r in rows] == ["polymer-suite.crashed"]
    assert rows[0].failing
    assert "boom" in rows[0].quantity
    assert math.isnan(rows[0].value)
    assert ledger == []


def test_silent_suite_fails_coverage(monkeypatch) -> None:
    monkeypatch.setitem(suites.SUITES, "calibrate", lambda ctx: None)
    rows, _ = suites.run_suite("calibrate", _config())
    assert {r.claim for r in rows} == set(results.SUITE_CLAIMS["calibrate"])
    assert all(r.failing and ".coverage." in r.check_id for r in rows)


def test_unknown_suite() -> None:
    with pytest.raises(KeyError):
        suites.run_suite("nope", _config())


def test_polymer_suite_rows() -> None:
    rows, _ = suites.run_suite("polymer-suite", _config())
    by_id = {r.check_id.split(".", 1)[1]: r for r in rows}
    assert {"closed.z13", "closed.top", "closed.increments", "lgv.brute-force", "positivity",
            "shift-covariance"} <= set(by_id)
    assert by_id["closed.z13"].passed
    assert by_id["closed.top"].passed
    assert by_id["shift-covariance"].passed
    assert all(r.experiment == "polymer-suite" for r in rows)


### System and command line ###

def test_run_writes_every_output(tmp_path) -> None:
    out = tmp_path / "out"
    lab = LabSystem(config_path=_write_config(tmp_path, out))
    try:
        summary = lab.run()
    finally:
        lab.cleanup()
    for name in (results.RESULTS_FILE, results.TIMINGS_FILE, results.LEDGER_FILE, system.RESOLVED_FILE,
                 "plots/plot_checks.py", "plots/plot_ledger.py"):
        assert (out / name).is_file()
    resolved = yaml.safe_load((out / system.RESOLVED_FILE).read_text(encoding="utf-8"))
    assert resolved["polymer"]["steps"] == 40
    assert len(summary.rows) == len(results.load_results(out))
    assert lab.status["suites"]["polymer-suite"]["checks"] == len(summary.rows)


def test_results_identical_across_thread_counts(tmp_path) -> None:
    outputs = []
    for threads in (1, 3):
        out = tmp_path / f"threads{threads}"
        lab = LabSystem(config_path=_write_config(tmp_path, out), threads=threads)
        try:
            lab.run()
        finally:
            lab.cleanup()
        outputs.append((out / results.RESULTS_FILE).read_bytes())
    assert outputs[0] == outputs[1]


def test_seed_override(tmp_path) -> None:
    lab = LabSystem(config_path=_write_config(tmp_path, tmp_path / "out"), seed=5)
    assert lab.settings["mc"]["master_seed"] == 5
    with pytest.raises(ConfigurationError):
        LabSystem(config_path=_write_config(tmp_path, tmp_path / "out"), threads=0)
    lab.cleanup()


def test_command_line_exit_codes(tmp_path) -> None:
    out = tmp_path / "out"
    assert main.main(["report", "--in", str(tmp_path / "empty")]) == main.EXIT_USAGE
    assert main.main(["run", "--config", str(tmp_path / "missing.yaml")]) == main.EXIT_USAGE
    assert main.main(["run", "--config", str(_write_config(tmp_path, out, layers={"n_max": 9}))]) == main.EXIT_USAGE
    assert main.main(["frobnicate"]) == main.EXIT_USAGE

    code = main.main(["run", "--config", str(_write_config(tmp_path, out)), "--threads", "2"])
    summary = results.report(out)
    assert code == (main.EXIT_OK if summary.passed else main.EXIT_FAILED)
    assert main.main(["report", "--in", str(out)]) == main.EXIT_OK
