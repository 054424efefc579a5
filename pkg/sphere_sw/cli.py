from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from sphere_sw.bench import BenchRunner, epsilon_sweep, run_experiment
from sphere_sw.config import ExperimentConfig, MethodSpec, load_config
from sphere_sw.data import gen_banana_sample, gen_gaussian_pair, load_point_cloud, save_point_cloud
from sphere_sw.estimators import default_shcv_degree
from sphere_sw.exceptions import SphereSWError
from sphere_sw.harmonics import build_basis
from sphere_sw.report import Report
from sphere_sw.spectral import spectral_profile, unifortho_variance_predict

logger = logging.getLogger("sphere_sw")


def _setup_logging(verbosity: int) -> None:
    level = logging.WARNING if verbosity <= 0 else logging.INFO if verbosity == 1 else logging.DEBUG
    logging.basicConfig(level=level, format="%(asctime)s %(levelname)s %(name)s: %(message)s")
    logging.captureWarnings(True)


def _floats(text: str) -> list[float]:
    return [float(v) for v in text.split(",") if v.strip()]


def _ints(text: str) -> list[int]:
    return [int(v) for v in text.split(",") if v.strip()]


def _add_experiment_args(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("config", nargs="?", help="TOML experiment file")
    parser.add_argument("--problem", dest="kind", help="gaussian | banana | files | halfsphere | harmonic")
    parser.add_argument("--d", type=int, help="ambient dimension")
    parser.add_argument("--atoms", type=int, help="atoms per generated measure")
    parser.add_argument("--p", type=float, help="transport order")
    parser.add_argument("--method", action="append", dest="methods", help="<nodes>[+<estimator>], repeatable")
    parser.add_argument("--n", type=_ints, help="comma-separated node counts")
    parser.add_argument("--replications", type=int)
    parser.add_argument("--seed", type=int)
    parser.add_argument("--workers", type=int)
    parser.add_argument("--output", help="output path prefix for CSV and JSON")


def _config_from(args: argparse.Namespace, **extra: object) -> ExperimentConfig:
    return load_config(
        args.config,
        kind=args.kind,
        d=args.d,
        atoms=args.atoms,
        p=args.p,
        methods=args.methods,
        n=args.n,
        replications=args.replications,
        seed=args.seed,
        workers=args.workers,
        output=args.output,
        **extra,
    )


def _emit(report: Report, output: str | None) -> int:
    for row in report.rows:
        if row.failed:
            print(f"{row.method:<28} n={row.n:<7} FAILED: {row.error}")
            continue
        s = row.summary
        eps = "" if row.epsilon is None else f" eps={row.epsilon:<10.4g}"
        print(f"{row.method:<28} n={row.n:<7}{eps} mean={s.mean:.6g} var={s.variance:.3e} mse={s.mse:.3e} time={row.wall_time:.3g}s")
    if output:
        csv_path, json_path = report.write(output)
        print(f"wrote {csv_path} and {json_path}")
    return 1 if report.failed else 0


def cmd_estimate(args: argparse.Namespace) -> int:
    mu = load_point_cloud(args.x)
    nu = load_point_cloud(args.y)
    method = MethodSpec.parse(args.method)
    config = ExperimentConfig.model_validate(
        {
            "problem": {"kind": "files", "d": mu.dimension, "files": [args.x, args.y]},
            "p": args.p,
            "methods": [method.label],
            "n": [args.n],
            "replications": 2,
            "seed": args.seed,
        }
    )
    result = BenchRunner(config).run_once(method, args.n, 0)
    print(json.dumps(result.model_dump(mode="json"), indent=2))
    return 0


def cmd_bench(args: argparse.Namespace) -> int:
    config = _config_from(args)
    return _emit(run_experiment(config), config.output)


def cmd_sweep(args: argparse.Namespace) -> int:
    config = _config_from(args, epsilon=args.epsilon)
    return _emit(epsilon_sweep(config), config.output)


def cmd_spectrum(args: argparse.Namespace) -> int:
    config = _config_from(args)
    runner = BenchRunner(config)
    d = runner.problem.dimension
    degree = args.degree if args.degree is not None else 2 * default_shcv_degree(d) + 4
    basis = build_basis(d, degree, config.seed)
    profile = spectral_profile(runner.problem.integrand, basis, degree, seed=config.seed)
    for ell, energy in enumerate(profile.energies):
        print(f"degree {ell:>3}  energy {energy:.6e}")
    prediction = unifortho_variance_predict(profile, max(config.n))
    print(f"Var f = {profile.variance:.6e}; UnifOrtho per-frame variance {prediction.per_frame:.6e}, "
          f"N={max(config.n)}: {prediction.full:.6e}")
    if config.output:
        path = profile.to_csv(Path(config.output).with_suffix(".csv"))
        print(f"wrote {path}")
    return 0


def cmd_gen(args: argparse.Namespace) -> int:
    prefix = Path(args.output)
    if args.kind == "gaussian":
        mu, nu = gen_gaussian_pair(args.d, args.atoms, args.seed)
    else:
        mu = gen_banana_sample(args.d, args.atoms, args.seed, substream=3)
        nu = gen_banana_sample(args.d, args.atoms, args.seed)
    for name, measure in (("x", mu), ("y", nu)):
        path = save_point_cloud(measure, prefix.with_name(f"{prefix.name}_{name}.csv"))
        print(f"wrote {path}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="sphere-sw", description="Sliced Wasserstein estimation on the sphere")
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)

    p_est = sub.add_parser("estimate", help="one-shot SW estimate between two point clouds")
    p_est.add_argument("x")
    p_est.add_argument("y")
    p_est.add_argument("--p", type=float, default=2.0)
    p_est.add_argument("--method", default="iid")
    p_est.add_argument("--n", type=int, default=1000)
    p_est.add_argument("--seed", type=int, default=0)
    p_est.set_defaults(func=cmd_estimate)

    p_bench = sub.add_parser("bench", help="replicated benchmark of quadrature methods")
    _add_experiment_args(p_bench)
    p_bench.set_defaults(func=cmd_bench)

    p_sweep = sub.add_parser("sweep-eps", help="variance of the repelled estimator over a step grid")
    _add_experiment_args(p_sweep)
    p_sweep.add_argument("--epsilon", type=_floats, help="comma-separated repulsion steps")
    p_sweep.set_defaults(func=cmd_sweep)

    p_spec = sub.add_parser("spectrum", help="spectral profile of the problem integrand")
    _add_experiment_args(p_spec)
    p_spec.add_argument("--degree", type=int, help="maximal harmonic degree")
    p_spec.set_defaults(func=cmd_spectrum)

    p_gen = sub.add_parser("gen", help="generate toy point clouds")
    p_gen.add_argument("kind", choices=["gaussian", "banana"])
    p_gen.add_argument("--d", type=int, default=3)
    p_gen.add_argument("--atoms", type=int, default=1000)
    p_gen.add_argument("--seed", type=int, default=0)
    p_gen.add_argument("--output", default="cloud")
    p_gen.set_defaults(func=cmd_gen)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    _setup_logging(args.verbose)
    try:
        return args.func(args)
    except SphereSWError as exc:
        logger.error("%s", exc)
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
