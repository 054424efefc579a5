import json

import numpy as np
import pytest

from sphere_sw.bench import BenchRunner, build_problem, epsilon_sweep, harmonic_test_integrand, run_experiment
from sphere_sw.config import ExperimentConfig, MethodSpec, ProblemSpec
from sphere_sw.exceptions import ConfigError
from sphere_sw.transport import SWIntegrand


def halfsphere_config(**kwargs):
    data = {
        "problem": {"kind": "halfsphere", "d": 3},
        "methods": ["iid", "spiral3d", "unifortho"],
        "n": [20],
        "replications": 5,
        "seed": 1,
    }
    data.update(kwargs)
    return ExperimentConfig.model_validate(data)


def test_harmonic_test_integrand_integrates_to_one(product_rule):
    rule = product_rule(8, 16)
    f = harmonic_test_integrand(3, 4)
    assert rule.weights @ f(rule.nodes) == pytest.approx(1.0, abs=1e-12)


def test_build_problem():
    assert build_problem(ProblemSpec(kind="halfsphere"), 2.0, 0).exact == 0.5
    problem = build_problem(ProblemSpec(kind="gaussian", d=4, atoms=30), 2.0, 0)
    assert isinstance(problem.integrand, SWIntegrand)
    assert problem.exact is None
    assert problem.mu.dimension == 4


def test_build_problem_checks_file_dimensions(tmp_path):
    from sphere_sw.data import gen_gaussian_pair, save_point_cloud

    mu, nu = gen_gaussian_pair(2, 10, 0)
    files = [str(save_point_cloud(mu, tmp_path / "x.csv")), str(save_point_cloud(nu, tmp_path / "y.csv"))]
    with pytest.raises(ConfigError):
        build_problem(ProblemSpec(kind="files", d=3, files=files), 2.0, 0)


def test_run_experiment_on_an_exact_problem(tmp_path):
    report = run_experiment(halfsphere_config())
    assert report.reference == 0.5
    assert report.reference_method == "exact"
    assert [row.method for row in report.rows] == ["iid+mean", "spiral3d+mean", "unifortho+mean"]
    assert not report.failed
    assert all(row.summary.count == 5 for row in report.rows)
    assert report.rows[0].level == pytest.approx(1 - 0.05 / 3)

    csv_path, json_path = report.write(tmp_path / "out")
    text = csv_path.read_text()
    assert text.splitlines()[0] == "method,n,epsilon,statistic,value"
    assert "reference,0,,value,0.5" in text
    assert "wall_time" not in text
    assert "wall_time" in json_path.read_text()
    assert json.loads(json_path.read_text())["config"]["seed"] == 1


def test_csv_is_reproducible(tmp_path):
    a = run_experiment(halfsphere_config()).to_csv(tmp_path / "a.csv").read_bytes()
    b = run_experiment(halfsphere_config()).to_csv(tmp_path / "b.csv").read_bytes()
    assert a == b


def test_workers_do_not_change_results():
    serial = run_experiment(halfsphere_config(methods=["iid"]))
    parallel = run_experiment(halfsphere_config(methods=["iid"], workers=3))
    assert serial.rows[0].summary == parallel.rows[0].summary


def test_failing_method_is_recorded():
    report = run_experiment(halfsphere_config(methods=["iid+cv_low", "iid"]))
    assert report.failed
    failed, ok = report.rows
    assert failed.status == "failed"
    assert "transport problem" in failed.error
    assert ok.status == "ok"


def test_isvmf_replications_reuse_pilot_values():
    runner = BenchRunner(halfsphere_config(methods=["isvmf"]))
    result = runner.run_once(MethodSpec.parse("isvmf"), 50, 0)
    assert result.estimator == "is"
    assert result.evaluations == 50
    assert np.isfinite(result.value) and result.value >= 0.0


def test_transport_problem_with_control_variates():
    config = ExperimentConfig.model_validate(
        {
            "problem": {"kind": "gaussian", "d": 3, "atoms": 40},
            "methods": ["iid+cv_up", "unifortho+shcv:2", "iid"],
            "n": [30],
            "replications": 4,
            "reference": {"n": 2000},
        }
    )
    report = run_experiment(config)
    assert report.reference_method == "spiral3d"
    assert report.reference_n == 2000
    assert report.reference > 0
    assert not report.failed
    assert all(np.isfinite(row.summary.mean) for row in report.rows)


def test_epsilon_sweep_needs_enough_replications():
    with pytest.raises(ConfigError):
        epsilon_sweep(halfsphere_config(epsilon=[0.1]))
    with pytest.raises(ConfigError):
        epsilon_sweep(halfsphere_config(replications=30))


def test_epsilon_sweep_adds_the_unrepelled_row():
    config = halfsphere_config(methods=["iid"], n=[10], replications=30, epsilon=[0.01])
    sweep = epsilon_sweep(config)
    assert [row.epsilon for row in sweep.rows] == [0.0, 0.01]
    assert all(row.method == "repelled:iid+repelled" for row in sweep.rows)
    assert sweep.rows[0].level == pytest.approx(0.95)
    plain = run_experiment(config)
    assert sweep.rows[0].summary.mean == plain.rows[0].summary.mean


@pytest.mark.slow
def test_control_variates_reduce_variance():
    config = ExperimentConfig.model_validate(
        {
            "problem": {"kind": "gaussian", "d": 3, "atoms": 200},
            "methods": ["iid", "iid+cv_up"],
            "n": [100],
            "replications": 100,
            "reference": {"n": 20_000},
        }
    )
    plain, controlled = run_experiment(config).rows
    assert controlled.summary.variance < plain.summary.variance


@pytest.mark.slow
def test_harmonic_controls_beat_plain_monte_carlo():
    config = ExperimentConfig.model_validate(
        {
            "problem": {"kind": "gaussian", "d": 3, "atoms": 200},
            "methods": ["iid", "iid+shcv"],
            "n": [500],
            "replications": 200,
            "reference": {"n": 20_000},
        }
    )
    plain, controlled = run_experiment(config).rows
    assert not plain.failed and not controlled.failed
    assert controlled.summary.mse < plain.summary.mse


@pytest.mark.slow
@pytest.mark.parametrize(
    "d, methods",
    [
        (2, ["iid", "grid2d", "unifortho", "cue", "repelled:iid"]),
        (3, ["iid", "spiral3d", "unifortho", "repelled:iid", "spherical", "harmonic", "ope"]),
    ],
)
def test_uniform_target_methods_are_unbiased(d, methods):
    config = ExperimentConfig.model_validate(
        {
            "problem": {"kind": "harmonic", "d": d, "degree": 4},
            "methods": methods,
            "n": [16],
            "replications": 1000,
            "seed": 3,
        }
    )
    report = run_experiment(config)
    assert report.reference == 1.0
    for row in report.rows:
        assert not row.failed, row.error
        se = np.sqrt(row.summary.variance / row.summary.count)
        assert abs(row.summary.bias) <= 4 * se + 1e-10, row.method
