import pytest

from sphere_sw.config import ExperimentConfig, MethodSpec, ReferenceSpec, load_config
from sphere_sw.exceptions import ConfigError

CONFIG = """
p = 2
n = [10, 20]
replications = 5
methods = ["iid", "isvmf", "repelled:iid+shcv:2", { name = "poisson", params = { rho = 30 } }]

[problem]
kind = "halfsphere"
d = 3
"""


def test_method_defaults():
    assert MethodSpec.parse("iid").estimator == "mean"
    assert MethodSpec.parse("isvmf").estimator == "is"
    assert MethodSpec.parse("repelled:unifortho").estimator == "repelled"
    assert MethodSpec.parse("harmonic:3+cv_up").label == "harmonic:3+cv_up"


@pytest.mark.parametrize(
    "text", ["sobol", "iid+median", "iid:3", "harmonic:x", "iid+shcv:a", "repelled:isvmf", "repelled:ope"]
)
def test_method_errors(text):
    with pytest.raises(ConfigError):
        MethodSpec.parse(text)


def test_load_config_with_overrides(tmp_path):
    path = tmp_path / "exp.toml"
    path.write_text(CONFIG)
    config = load_config(path, seed=4, d=5, workers=None)
    assert config.seed == 4
    assert config.problem.d == 5
    assert config.problem.kind == "halfsphere"
    assert config.n == [10, 20]
    assert config.workers == 1
    assert [m.label for m in config.methods] == ["iid+mean", "isvmf+is", "repelled:iid+shcv:2", "poisson+mean"]
    assert config.methods[3].params == {"rho": 30}


def test_invalid_toml(tmp_path):
    path = tmp_path / "bad.toml"
    path.write_text("n = [1,")
    with pytest.raises(ConfigError):
        load_config(path)


def test_missing_config_file(tmp_path):
    with pytest.raises(ConfigError):
        load_config(tmp_path / "absent.toml")


def test_variance_needs_two_replications():
    with pytest.raises(ConfigError):
        ExperimentConfig(replications=1)


def test_default_orders():
    assert ExperimentConfig().order == 2.0
    assert ExperimentConfig(problem={"kind": "banana", "d": 2}).order == 1.0
    assert ExperimentConfig(p=3).order == 3.0
    with pytest.raises(ConfigError):
        ExperimentConfig(p=0.5)


def test_problem_validation():
    with pytest.raises(ConfigError):
        ExperimentConfig(problem={"kind": "files", "files": ["a.csv"]})
    with pytest.raises(ConfigError):
        ExperimentConfig(problem={"kind": "banana", "d": 3})


def test_reference_resolution():
    assert ReferenceSpec().resolved(2, 100) == ("grid2d", 100_000)
    assert ReferenceSpec().resolved(3, 100) == ("spiral3d", 100_000)
    assert ReferenceSpec().resolved(5, 200_000) == ("iid", 2_000_000)
    assert ReferenceSpec(method="unifortho", n=500).resolved(5, 10) == ("unifortho", 500)


def test_reference_must_dominate_the_node_counts():
    with pytest.raises(ConfigError):
        ExperimentConfig(n=[100], reference={"n": 500})
    assert ExperimentConfig(problem={"kind": "halfsphere"}, n=[100], reference={"n": 500}).n == [100]


def test_negative_repulsion_steps():
    with pytest.raises(ConfigError):
        ExperimentConfig(epsilon=[0.1, -0.1])
