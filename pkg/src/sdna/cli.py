"""Command-line entry point: ``sdna {rates,solve,epoch-timing,ihs-verify}``.

Settings come from an optional JSON config (``--config``) overridden by flags.
The output directory is resolved as ``--out``, then ``$SDNA_OUT_DIR``, then the
config's ``"out"``, then ``./out``.

Exit codes: 0 success, 2 configuration error, 3 invariant violation (including
a failed equivalence check), 4 numerical failure.
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from dataclasses import dataclass, field

import numpy as np

from . import bench
from .data import generate_synthetic, load_libsvm, normalize_columns, to_problem
from .errors import (
    ConfigError,
    DivergenceError,
    FactorizationError,
    FormatError,
    InnerSolverError,
    InvariantViolation,
)
from .ihs import verify_ihs_equivalence
from .rates import erm_rate_report, method2_matrix, smooth_rate_report
from .sampling import ENUMERATION_CAP, SamplingSpec, expected_pseudoinverse, make_rng
from .trace import atomic_write_text

EXIT_OK, EXIT_CONFIG, EXIT_INVARIANT, EXIT_NUMERICAL = 0, 2, 3, 4
OUT_ENV = "SDNA_OUT_DIR"

EXAMPLE_MATRIX = [[1.0, 0.99, 0.9999], [0.99, 1.0, 0.99], [0.9999, 0.99, 1.0]]
DEFAULT_SYNTHETIC = {"d": 128, "n": 256, "seed": 0, "density": 1.0, "label_noise": 0.1}

log = logging.getLogger("sdna")


@dataclass
class ExperimentConfig:
    data: dict = field(default_factory=lambda: {"synthetic": dict(DEFAULT_SYNTHETIC)})
    loss: str = "quadratic"
    lam: float | None = None
    solvers: list = field(default_factory=lambda: ["sdna", "sdca"])
    taus: list = field(default_factory=lambda: [1, 8, 64])
    seeds: list = field(default_factory=lambda: [0])
    epochs: float = 20.0
    eps: float = 1e-6
    out: str | None = None
    gram: str = "lazy"
    checkpoint_every: int | None = None
    timing_epochs: int = 5
    workers: int = 1
    mc_samples: int = 100_000
    rates: dict = field(default_factory=dict)
    ihs: dict = field(default_factory=dict)

    @classmethod
    def from_dict(cls, raw: dict) -> "ExperimentConfig":
        raw = dict(raw)
        if "lambda" in raw:
            raw["lam"] = raw.pop("lambda")
        known = set(cls.__dataclass_fields__)
        unknown = set(raw) - known
        if unknown:
            raise ConfigError(f"unknown config keys {sorted(unknown)}")
        return cls(**raw)

    def validate(self, n: int | None = None):
        if self.loss not in ("quadratic", "logistic"):
            raise ConfigError(f"unknown loss {self.loss!r}")
        if not self.seeds:
            raise ConfigError("seeds must be nonempty")
        if not self.eps > 0:
            raise ConfigError("eps must be positive")
        if self.epochs < 0:
            raise ConfigError("epochs must be nonnegative")
        if self.lam is not None and not self.lam > 0:
            raise ConfigError("lambda must be positive")
        bad = [s for s in self.solvers if s not in ("sdna", "sdca")]
        if bad or not self.solvers:
            raise ConfigError(f"solvers must be a nonempty subset of sdna, sdca; got {self.solvers}")
        if self.gram not in ("lazy", "precomputed"):
            raise ConfigError(f"gram must be 'lazy' or 'precomputed', got {self.gram!r}")
        if n is not None:
            bad = [t for t in self.taus if not 1 <= t <= n]
            if bad or not self.taus:
                raise ConfigError(f"taus must lie in [1, {n}]; got {self.taus}")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON experiment config")
    common.add_argument("--out", help="output directory")
    common.add_argument("--seed", type=int, action="append", help="seed (repeatable)")
    common.add_argument("--tau", type=int, action="append", help="minibatch size (repeatable)")
    common.add_argument("--solver", action="append", choices=("sdna", "sdca"), help="solver (repeatable)")
    common.add_argument("--epochs", type=float, help="epoch budget")
    common.add_argument("--eps", type=float, help="duality-gap target")
    common.add_argument("--mc-samples", type=int, help="Monte Carlo samples when enumeration is too large")
    common.add_argument("--workers", type=int, help="parallel workers for sweeps")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="sdna", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    rates = sub.add_parser("rates", parents=[common], help="print the rate report of a fixture")
    rates.add_argument("--fixture", choices=("example", "identity", "random", "matrix", "erm"))
    rates.add_argument("--n", type=int, help="dimension for the identity and random fixtures")
    sub.add_parser("solve", parents=[common], help="run solver sweeps and write trace CSVs")
    sub.add_parser("epoch-timing", parents=[common], help="median seconds per epoch per (solver, tau)")
    ihs = sub.add_parser("ihs-verify", parents=[common], help="check SDNA against the sketched update")
    ihs.add_argument("--inject-fault", action="store_true", help=argparse.SUPPRESS)
    return parser


def load_config(args) -> ExperimentConfig:
    raw = {}
    if args.config:
        try:
            with open(args.config) as fh:
                raw = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {args.config}: {exc}") from exc
        if not isinstance(raw, dict):
            raise ConfigError("config must be a JSON object")
    try:
        cfg = ExperimentConfig.from_dict(raw)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc
    for flag, attr in (("seed", "seeds"), ("tau", "taus"), ("solver", "solvers"), ("epochs", "epochs"),
                       ("eps", "eps"), ("mc_samples", "mc_samples"), ("workers", "workers")):
        value = getattr(args, flag, None)
        if value is not None:
            setattr(cfg, attr, value)
    cfg.out = args.out or os.environ.get(OUT_ENV) or cfg.out or "out"
    cfg.validate()
    return cfg


def load_problem(cfg: ExperimentConfig):
    data = cfg.data
    if "libsvm" in data:
        raw = load_libsvm(data["libsvm"], data.get("dim"))
    elif "synthetic" in data:
        syn = {**DEFAULT_SYNTHETIC, **data["synthetic"]}
        syn.setdefault("task", "regression" if cfg.loss == "quadratic" else "classification")
        try:
            raw = generate_synthetic(**syn)
        except TypeError as exc:
            raise ConfigError(f"bad synthetic config: {exc}") from exc
    else:
        raise ConfigError("data must contain 'libsvm' or 'synthetic'")
    if data.get("normalize", True):
        raw = normalize_columns(raw)
    return to_problem(raw, cfg.loss, cfg.lam)


def _write_json(obj, path):
    atomic_write_text(path, lambda fh: fh.write(json.dumps(obj, indent=2, sort_keys=True) + "\n"))


def _mode(spec):
    return "exact" if spec.support_size() <= ENUMERATION_CAP else "monte_carlo"


def cmd_rates(args, cfg: ExperimentConfig) -> int:
    rc = dict(cfg.rates)
    fixture = args.fixture or rc.get("fixture", "example")
    seed = cfg.seeds[0]
    rng = make_rng(seed)
    if fixture == "erm":
        problem = load_problem(cfg)
        tau = rc.get("tau", cfg.taus[0])
        cfg.validate(problem.n)
        spec = SamplingSpec.tau_nice(problem.n, tau)
        mode = _mode(spec)
        report = erm_rate_report(problem.A, problem.lam, problem.gamma, spec,
                                 mode=mode, samples=cfg.mc_samples, rng=rng)
    else:
        v = rc.get("v")
        if fixture == "example":
            M = np.array(EXAMPLE_MATRIX)
            tau = rc.get("tau", 2)
            v = v if v is not None else [2.0, 2.0, 2.0]
        elif fixture == "identity":
            n = args.n or rc.get("n", 4)
            M = np.eye(n)
            tau = rc.get("tau", max(1, n // 2))
        elif fixture == "random":
            n = args.n or rc.get("n", 6)
            B = rng.standard_normal((n, n))
            M = B @ B.T / n + 0.1 * np.eye(n)
            tau = rc.get("tau", max(1, n // 2))
        elif fixture == "matrix":
            if "matrix" not in rc:
                raise ConfigError("the matrix fixture needs rates.matrix in the config")
            M = np.array(rc["matrix"], dtype=float)
            tau = rc.get("tau", 1)
        else:
            raise ConfigError(f"unknown rates fixture {fixture!r}")
        if args.tau:
            tau = args.tau[0]
        if not 1 <= tau <= M.shape[0]:
            raise ConfigError(f"tau must lie in [1, {M.shape[0]}]")
        spec = SamplingSpec.tau_nice(M.shape[0], tau)
        mode = _mode(spec)
        G = np.array(rc["G"], dtype=float) if "G" in rc else None
        report = smooth_rate_report(M, spec, G=G, v=v, gamma=rc.get("gamma", 0.0),
                                    mode=mode, samples=cfg.mc_samples, rng=rng)
        if M.shape[0] <= 8 and mode == "exact":
            report.context["expected_pseudoinverse"] = expected_pseudoinverse(spec, M).tolist()
            report.context["method2_matrix"] = method2_matrix(spec, M).tolist()
    report.context["fixture"] = fixture
    text = report.dumps()
    print(text)
    _write_json(report.to_json(), os.path.join(cfg.out, "rates.json"))
    if not all(report.checks.values()):
        log.error("ordering check failed: %s", report.checks)
        return EXIT_INVARIANT
    return EXIT_OK


def cmd_solve(args, cfg: ExperimentConfig) -> int:
    problem = load_problem(cfg)
    cfg.validate(problem.n)
    traces = bench.sweep(problem, cfg.solvers, cfg.taus, cfg.seeds, cfg.epochs, cfg.out, eps=cfg.eps,
                         checkpoint_every=cfg.checkpoint_every, gram=cfg.gram, workers=cfg.workers)
    summary = []
    for (solver, tau, seed), trace in traces.items():
        last = trace[-1]
        summary.append({"solver": solver, "tau": tau, "seed": seed, "iterations": last.iteration,
                        "epochs": last.epoch, "gap": last.gap, "reached_eps": last.gap < cfg.eps,
                        "epochs_to_eps": bench.epochs_to_gap(trace, cfg.eps)})
    print(json.dumps(summary, indent=2))
    return EXIT_OK


def cmd_epoch_timing(args, cfg: ExperimentConfig) -> int:
    problem = load_problem(cfg)
    cfg.validate(problem.n)
    rows = bench.epoch_timing(problem, cfg.solvers, cfg.taus, seed=cfg.seeds[0],
                              epochs=max(3, cfg.timing_epochs), gram=cfg.gram)
    bench.write_timing_csv(rows, os.path.join(cfg.out, "epoch_timing.csv"))
    for r in rows:
        print(f"{r['solver']:>5} tau={r['tau']:<5d} {r['seconds_per_epoch']:.6e} s/epoch")
    return EXIT_OK


def cmd_ihs_verify(args, cfg: ExperimentConfig) -> int:
    ic = {"d": 16, "n": 64, "tau": 4, "steps": 50, "tol": 1e-8, "seed": 0, **cfg.ihs}
    if args.tau:
        ic["tau"] = args.tau[0]
    if args.seed:
        ic["seed"] = args.seed[0]
    if not 1 <= ic["tau"] <= ic["n"]:
        raise ConfigError(f"tau must lie in [1, {ic['n']}]")
    raw = generate_synthetic(ic["d"], ic["n"], ic["seed"], 1.0, 0.1, task="regression")
    problem = to_problem(raw, "quadratic", cfg.lam)
    report = verify_ihs_equivalence(problem, SamplingSpec.tau_nice(ic["n"], ic["tau"]), ic["steps"],
                                    make_rng(ic["seed"]), tol=ic["tol"], fault=args.inject_fault)
    print(report.dumps())
    _write_json(report.to_json(), os.path.join(cfg.out, "ihs_report.json"))
    return EXIT_OK if report.passed else EXIT_INVARIANT


COMMANDS = {"rates": cmd_rates, "solve": cmd_solve, "epoch-timing": cmd_epoch_timing,
            "ihs-verify": cmd_ihs_verify}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args)
        return COMMANDS[args.command](args, cfg)
    except (ConfigError, FormatError, OSError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except InvariantViolation as exc:
        print(f"invariant violation: {exc}", file=sys.stderr)
        return EXIT_INVARIANT
    except (FactorizationError, InnerSolverError, DivergenceError, np.linalg.LinAlgError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
