from __future__ import annotations

import csv
import json
import logging
from pathlib import Path
from typing import TYPE_CHECKING, Any

from pydantic import BaseModel

from sphere_sw.exceptions import SphereSWError
from sphere_sw.stats import SampleSummary, bonferroni, summarize

if TYPE_CHECKING:
    from sphere_sw.bench import BenchRunner, Replicates

logger = logging.getLogger(__name__)

# statistics that depend on the clock, kept out of the CSV
TIMING_STATISTICS = ("wall_time", "generation_time", "eval_time")


class ReportRow(BaseModel):
    method: str
    n: int
    epsilon: float | None = None
    status: str = "ok"
    error: str | None = None
    level: float | None = None
    summary: SampleSummary | None = None
    evaluations: float | None = None
    wall_time: float | None = None
    generation_time: float | None = None
    eval_time: float | None = None
    flags: list[str] = []

    @property
    def failed(self) -> bool:
        return self.status != "ok"

    def statistics(self) -> dict[str, float]:
        if self.summary is None:
            return {}
        s = self.summary
        return {
            "mean": s.mean,
            "variance": s.variance,
            "spread": s.spread,
            "bias": s.bias,
            "mse": s.mse,
            "mean_ci_lower": s.mean_ci.lower,
            "mean_ci_upper": s.mean_ci.upper,
            "variance_ci_lower": s.variance_ci.lower,
            "variance_ci_upper": s.variance_ci.upper,
            "level": s.mean_ci.level,
            "replications": float(s.count),
            "evaluations": self.evaluations or 0.0,
            "wall_time": self.wall_time or 0.0,
            "generation_time": self.generation_time or 0.0,
            "eval_time": self.eval_time or 0.0,
        }


class Report(BaseModel):
    kind: str = "bench"
    reference: float
    reference_method: str
    reference_n: int
    target_level: float
    rows: list[ReportRow] = []
    config: dict[str, Any] = {}

    @property
    def failed(self) -> bool:
        return any(row.failed for row in self.rows)

    def to_csv(self, path: str | Path) -> Path:
        """Long format: one line per (method, n, epsilon, statistic); timing statistics are omitted."""
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with path.open("w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["method", "n", "epsilon", "statistic", "value"])
            writer.writerow(["reference", self.reference_n, "", "value", repr(self.reference)])
            for row in self.rows:
                eps = "" if row.epsilon is None else repr(row.epsilon)
                if row.failed:
                    writer.writerow([row.method, row.n, eps, "error", row.error])
                    continue
                for name, value in row.statistics().items():
                    if name not in TIMING_STATISTICS:
                        writer.writerow([row.method, row.n, eps, name, repr(float(value))])
        return path

    def to_json(self, path: str | Path) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps(self.model_dump(mode="json"), indent=2))
        return path

    def write(self, output: str | Path) -> tuple[Path, Path]:
        """Write ``<output>.csv`` and ``<output>.json``."""
        base = Path(output)
        if base.suffix in (".csv", ".json"):
            base = base.with_suffix("")
        return self.to_csv(base.with_suffix(".csv")), self.to_json(base.with_suffix(".json"))


def _row(method: str, n: int, replicates: Replicates, reference: float, level: float, epsilon: float | None) -> ReportRow:
    return ReportRow(
        method=method,
        n=n,
        epsilon=epsilon,
        level=level,
        summary=summarize(replicates.values, reference, level),
        evaluations=replicates.evaluations,
        wall_time=replicates.wall_time,
        generation_time=replicates.generation_time,
        eval_time=replicates.eval_time,
        flags=replicates.flags,
    )


class ExperimentReporter:
    """Assembles a :class:`Report` from a runner; one failing row never stops the others."""

    def __init__(self, runner: BenchRunner) -> None:
        self._runner = runner

    def report(self) -> Report:
        r = self._runner
        cfg = r.config
        cells = [(method, n) for method in cfg.methods for n in cfg.n]
        level = bonferroni(cfg.level, len(cells))
        rows = []
        for method, n in cells:
            try:
                replicates = r.replicate(method, n)
                rows.append(_row(method.label, n, replicates, r.reference(), level, None))
            except (SphereSWError, ValueError) as exc:
                logger.warning("%s at n=%d failed: %s", method.label, n, exc)
                rows.append(ReportRow(method=method.label, n=n, status="failed", error=str(exc), level=level))
        return self._assemble("bench", rows)

    def sweep(self) -> Report:
        """Repelled estimator over the epsilon grid, plus an epsilon = 0 reference row."""
        r = self._runner
        cfg = r.config
        grid = list(cfg.epsilon)
        if 0.0 not in grid:
            grid = [0.0] + grid
        level = bonferroni(cfg.level, max(len(cfg.epsilon), 1))
        method = r.sweep_method()
        rows = []
        for n in cfg.n:
            for eps in grid:
                try:
                    replicates = r.replicate(method, n, epsilon=eps)
                    rows.append(_row(method.label, n, replicates, r.reference(), level, eps))
                except (SphereSWError, ValueError) as exc:
                    logger.warning("%s at n=%d, epsilon=%g failed: %s", method.label, n, eps, exc)
                    rows.append(ReportRow(method=method.label, n=n, epsilon=eps, status="failed", error=str(exc), level=level))
        return self._assemble("sweep-eps", rows)

    def _assemble(self, kind: str, rows: list[ReportRow]) -> Report:
        r = self._runner
        method, n = r.reference_spec()
        return Report(
            kind=kind,
            reference=r.reference(),
            reference_method=method,
            reference_n=n,
            target_level=r.config.level,
            rows=rows,
            config=r.config.model_dump(mode="json"),
        )
