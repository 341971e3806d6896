import csv
import io
import json

import pytest

from fejerlab import harness
from fejerlab.harness import ConfigError, ExperimentConfig


def bundled(name):
    return json.loads(harness.bundled_config_path(name).read_text())


def test_bundled_configs_listed():
    assert {"orthant2", "trivial", "nonfejer", "km_ball", "wedge_pi2", "wedge_pi8", "wedge_pi32"} <= set(
        harness.bundled_configs())


@pytest.mark.parametrize("name", harness.bundled_configs())
def test_bundled_config_runs_certified(name):
    report = harness.run_experiment(harness.bundled_config_path(name))
    assert report.status == "certified", {k: c for k, c in report.checks.items() if c["status"] != "certified"}
    assert report.exit_code == 0


def test_start_in_C_all_checks_constant_trace():
    report = harness.run_experiment(bundled("trivial"))
    assert report.trace["max_residual"] == 0.0
    assert report.trace["x_T"] == bundled("trivial")["instance"]["x0"]
    assert set(report.checks) == set(bundled("trivial")["checks"])


def test_checks_run_in_dependency_order():
    raw = bundled("orthant2")
    raw["checks"] = list(reversed(raw["checks"]))
    report = harness.run_experiment(raw)
    order = list(report.checks)
    assert order.index("regularity-discovery") < order.index("phi") < order.index("cauchy-rate")
    assert order.index("cauchy-rate") < order.index("metastability")


def test_unknown_modulus_is_fatal_and_named():
    raw = bundled("orthant2")
    raw["moduli"] = {"rho": "no-such-modulus"}
    with pytest.raises(ConfigError) as err:
        ExperimentConfig.from_dict(raw)
    assert err.value.field == "moduli.rho"


@pytest.mark.parametrize("patch,field", [
    ({"horizon": 0}, "horizon"),
    ({"checks": ["fejer-uniform", "bogus"]}, "checks.1"),
    ({"seed": -1}, "seed"),
    ({"surprise": 1}, "config"),
    ({"counterfunctions": ["n^2"]}, "counterfunctions.0"),
])
def test_schema_errors_name_the_field(patch, field):
    raw = {**bundled("orthant2"), **patch}
    with pytest.raises(ConfigError) as err:
        ExperimentConfig.from_dict(raw)
    assert err.value.field == field


def test_invalid_instance_is_config_error():
    raw = bundled("orthant2")
    raw["instance"]["z"] = [5.0, 5.0]
    with pytest.raises(ConfigError) as err:
        ExperimentConfig.from_dict(raw)
    assert err.value.field == "instance"


def test_check_failure_is_recorded_not_fatal():
    raw = bundled("orthant2")
    raw["discovery"] = {"grid_step": 0.5}  # too coarse for k_max = 10
    raw["checks"] = ["regularity-discovery", "cauchy-rate", "fejer-uniform"]
    report = harness.run_experiment(raw)
    assert report.checks["regularity-discovery"]["status"] == "error"
    assert "CoarseGridError" in report.checks["regularity-discovery"]["note"]
    assert report.checks["cauchy-rate"]["status"] == "error"
    assert report.checks["fejer-uniform"]["status"] == "certified"
    assert report.exit_code == 1


def test_zero_mu_flips_cauchy_verdict():
    raw = bundled("orthant2")
    raw["moduli"] = {"mu": "zero"}
    raw["checks"] = ["phi", "cauchy-rate", "regularity-falsify"]
    report = harness.run_experiment(raw)
    assert report.checks["cauchy-rate"]["status"] == "violated"
    assert report.checks["cauchy-rate"]["certificate"]["witness"] is not None
    assert report.checks["regularity-falsify"]["status"] == "violated"
    assert report.status == "violated"


def test_determinism_byte_identical(tmp_path):
    raw = bundled("orthant2")
    a = harness.run_experiment(raw)
    b = harness.run_experiment(raw)
    files_a = a.write(tmp_path / "a")
    b.write(tmp_path / "b")
    for path in files_a:
        if path.name == "timings.json":
            continue
        assert path.read_bytes() == (tmp_path / "b" / path.name).read_bytes(), path.name


def test_different_seed_changes_samples():
    raw = bundled("orthant2")
    raw["checks"] = ["fejer-uniform"]
    a = harness.run_experiment(raw).to_json()
    raw["seed"] = raw["seed"] + 1
    assert harness.run_experiment(raw).to_json() != a


def test_report_files(tmp_path):
    report = harness.run_experiment(bundled("orthant2"))
    names = {p.name for p in report.write(tmp_path)}
    assert {"report.json", "summary.csv", "rates.csv", "trace.csv", "trace.json", "mu.json"} <= names
    rows = list(csv.DictReader(io.StringIO((tmp_path / "rates.csv").read_text())))
    assert {r["kind"] for r in rows} == {"cauchy", "metastability"}
    assert len([r for r in rows if r["kind"] == "metastability"]) == 3 * 6
    d = json.loads((tmp_path / "report.json").read_text())
    assert d["config"]["seed"] == bundled("orthant2")["seed"]
    assert "output" not in d["config"]
    assert json.loads((tmp_path / "mu.json").read_text())[0] >= 1


def test_format_restricts_side_files(tmp_path):
    report = harness.run_experiment({**bundled("orthant2"), "checks": ["phi"]})
    names = {p.name for p in report.write(tmp_path, "json")}
    assert "trace.json" in names and "trace.csv" not in names and "report.json" in names


def test_reversal_needs_fixed_point_scheme():
    raw = bundled("orthant2")
    raw["checks"] = ["reversal-regularity"]
    with pytest.raises(ConfigError) as err:
        ExperimentConfig.from_dict(raw)
    assert err.value.field == "reversal"
