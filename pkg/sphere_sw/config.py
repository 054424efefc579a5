from __future__ import annotations

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib
from pathlib import Path
from typing import Any, Literal

from pydantic import BaseModel, Field, ValidationError, field_validator, model_validator

from sphere_sw.exceptions import ConfigError

ProblemKind = Literal["gaussian", "banana", "files", "halfsphere", "harmonic"]

NODE_METHODS = ("iid", "grid2d", "spiral3d", "unifortho", "isvmf", "spherical", "cue", "harmonic", "ope", "poisson")
ESTIMATORS = ("mean", "is", "cv_low", "cv_up", "shcv", "repelled")
# node processes whose weights depend on the sampling density
WEIGHTED_NODES = ("isvmf", "ope")

# problems whose integral is known in closed form
EXACT_PROBLEMS = ("halfsphere", "harmonic")


def _check_nodes(name: str) -> None:
    base = name
    while base.startswith("repelled:"):
        base = base.split(":", 1)[1]
    head, _, arg = base.partition(":")
    if head not in NODE_METHODS:
        raise ConfigError(f"Unknown node method {name!r}")
    if head in WEIGHTED_NODES and base != name:
        raise ConfigError(f"Cannot repel {head!r} nodes: they carry non-uniform importance weights ({name!r})")
    if arg and head != "harmonic":
        raise ConfigError(f"Method {head!r} takes no ':' argument, got {name!r}")
    if head == "harmonic" and arg and not arg.isdigit():
        raise ConfigError(f"Harmonic ensemble degree must be an integer, got {arg!r}")


class MethodSpec(BaseModel):
    """One benchmarked method, written ``<nodes>[+<estimator>]`` (e.g. ``repelled:iid+shcv``)."""

    nodes: str
    estimator: str
    params: dict[str, float | int | bool] = {}

    @classmethod
    def parse(cls, text: str, params: dict[str, Any] | None = None) -> MethodSpec:
        nodes, _, estimator = text.strip().partition("+")
        _check_nodes(nodes)
        if not estimator:
            if nodes == "isvmf":
                estimator = "is"
            elif nodes.startswith("repelled:"):
                estimator = "repelled"
            else:
                estimator = "mean"
        head, _, arg = estimator.partition(":")
        if head not in ESTIMATORS:
            raise ConfigError(f"Unknown estimator {estimator!r} in {text!r}; known: {', '.join(ESTIMATORS)}")
        if arg and (head != "shcv" or not arg.isdigit()):
            raise ConfigError(f"Invalid estimator argument in {text!r}")
        return cls(nodes=nodes, estimator=estimator, params=params or {})

    @property
    def label(self) -> str:
        return f"{self.nodes}+{self.estimator}"


class ProblemSpec(BaseModel):
    kind: ProblemKind = "gaussian"
    d: int = Field(default=3, ge=2)
    atoms: int = Field(default=1000, ge=1)
    files: list[str] = []
    history: str | None = None
    degree: int = Field(default=4, ge=0)

    @model_validator(mode="after")
    def _check(self) -> ProblemSpec:
        if self.kind == "files" and len(self.files) != 2:
            raise ConfigError(f"Problem 'files' needs two point-cloud paths, got {len(self.files)}")
        if self.kind == "banana" and self.d % 2:
            raise ConfigError(f"Problem 'banana' needs an even dimension, got {self.d}")
        return self

    @property
    def exact(self) -> bool:
        return self.kind in EXACT_PROBLEMS


class ReferenceSpec(BaseModel):
    method: str | None = None
    n: int | None = Field(default=None, ge=1)

    def resolved(self, d: int, max_n: int) -> tuple[str, int]:
        """Spiral/grid with 10^5 nodes up to d = 3, i.i.d. with 10^6 beyond."""
        if d == 2:
            method, n = "grid2d", 100_000
        elif d == 3:
            method, n = "spiral3d", 100_000
        else:
            method, n = "iid", 1_000_000
        return self.method or method, self.n or max(n, 10 * max_n)


class ExperimentConfig(BaseModel):
    problem: ProblemSpec = ProblemSpec()
    p: float | None = None
    methods: list[MethodSpec] = [MethodSpec(nodes="iid", estimator="mean")]
    n: list[int] = [100]
    replications: int = Field(default=100, ge=1)
    seed: int = Field(default=0, ge=0)
    reference: ReferenceSpec = ReferenceSpec()
    level: float = Field(default=0.95, gt=0, lt=1)
    epsilon: list[float] = []
    shcv_degree: int | None = Field(default=None, ge=0)
    workers: int = Field(default=1, ge=1)
    output: str | None = None

    @field_validator("methods", mode="before")
    @classmethod
    def _parse_methods(cls, value: Any) -> Any:
        if isinstance(value, (str, dict)):
            value = [value]
        out = []
        for item in value:
            if isinstance(item, str):
                out.append(MethodSpec.parse(item))
            elif isinstance(item, dict) and "name" in item:
                out.append(MethodSpec.parse(item["name"], item.get("params")))
            else:
                out.append(item)
        return out

    @field_validator("n", mode="before")
    @classmethod
    def _as_list(cls, value: Any) -> Any:
        return [value] if isinstance(value, int) else value

    @model_validator(mode="after")
    def _check(self) -> ExperimentConfig:
        if not self.n or min(self.n) < 1:
            raise ConfigError(f"Node counts must be a nonempty list of positive integers, got {self.n}")
        if self.replications < 2:
            raise ConfigError("Variance statistics need at least 2 replications")
        if self.order < 1:
            raise ConfigError(f"Transport order p must be >= 1, got {self.order}")
        if not self.problem.exact and self.reference.n is not None and self.reference.n < 10 * max(self.n):
            raise ConfigError(
                f"Reference node count {self.reference.n} is below 10 x the largest node count {max(self.n)}"
            )
        if any(e < 0 for e in self.epsilon):
            raise ConfigError(f"Repulsion steps must be >= 0, got {self.epsilon}")
        return self

    @property
    def order(self) -> float:
        """p, defaulting to 1 for the banana problem and 2 otherwise."""
        if self.p is not None:
            return self.p
        return 1.0 if self.problem.kind == "banana" else 2.0


def load_config(path: str | Path | None = None, **overrides: Any) -> ExperimentConfig:
    """Read a TOML experiment file (optional) and apply non-None overrides on top."""
    data: dict[str, Any] = {}
    if path is not None:
        path = Path(path)
        try:
            with path.open("rb") as fh:
                data = tomllib.load(fh)
        except OSError as exc:
            raise ConfigError(f"Cannot read config {path}: {exc}") from exc
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"Invalid TOML in {path}: {exc}") from exc
    for key, value in overrides.items():
        if value is None:
            continue
        if key in ProblemSpec.model_fields and key not in ExperimentConfig.model_fields:
            data.setdefault("problem", {})[key] = value
        else:
            data[key] = value
    try:
        return ExperimentConfig.model_validate(data)
    except ValidationError as exc:
        raise ConfigError(f"Invalid experiment config: {exc}") from exc
