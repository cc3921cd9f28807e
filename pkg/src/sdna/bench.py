"""Sweep and timing harness for the ERM solvers.

A cell is one (solver, tau, seed) run. Every cell owns its random stream
(seeded by ``seed`` alone, so cells with the same seed share their draws)
and writes its trace atomically, which makes cells safe to run on parallel
workers.
"""
from __future__ import annotations

import csv
import os
import statistics
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .erm import ErmProblem, run_erm
from .sampling import SamplingSpec, make_rng
from .trace import atomic_write_text, write_trace_csv

TIMING_COLUMNS = ("tau", "solver", "seconds_per_epoch")


def epochs_to_gap(trace, eps: float) -> float:
    """Epoch count at the first checkpoint with gap below ``eps`` (inf if never)."""
    for rec in trace:
        if rec.gap < eps:
            return rec.epoch
    return float("inf")


def trace_filename(solver: str, tau: int, seed) -> str:
    return f"{solver}_tau{tau}_seed{seed}.csv"


@dataclass
class Cell:
    solver: str
    tau: int
    seed: int


def run_cell(problem: ErmProblem, cell: Cell, epochs: float, eps: float | None = None,
             checkpoint_every: int | None = None, gram: str = "lazy"):
    spec = SamplingSpec.tau_nice(problem.n, cell.tau)
    return run_erm(cell.solver, problem, spec, epochs, make_rng(cell.seed),
                   checkpoint_every=checkpoint_every, eps=eps, seed=cell.seed, gram=gram)


def _run_and_write(args):
    problem, cell, epochs, eps, checkpoint_every, gram, out_dir = args
    trace = run_cell(problem, cell, epochs, eps, checkpoint_every, gram)
    path = os.path.join(out_dir, trace_filename(cell.solver, cell.tau, cell.seed))
    write_trace_csv(trace if epochs > 0 else [], path)
    return path, trace


def sweep(problem: ErmProblem, solvers, taus, seeds, epochs: float, out_dir, eps: float | None = None,
          checkpoint_every: int | None = None, gram: str = "lazy", workers: int = 1):
    """Run every (solver, tau, seed) cell and write one trace CSV per cell.

    Returns ``{cell: trace}``. A zero-epoch budget writes header-only files.
    """
    cells = [Cell(s, t, seed) for s in solvers for t in taus for seed in seeds]
    jobs = [(problem, c, epochs, eps, checkpoint_every, gram, os.fspath(out_dir)) for c in cells]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_run_and_write, jobs))
    else:
        results = [_run_and_write(j) for j in jobs]
    return {(c.solver, c.tau, c.seed): trace for c, (_, trace) in zip(cells, results)}


def seconds_per_epoch(problem: ErmProblem, solver: str, tau: int, seed: int = 0,
                      epochs: int = 5, gram: str = "lazy") -> float:
    """Median wall time of ``epochs`` timed epochs, after one discarded warm-up epoch."""
    if epochs < 1:
        raise ValueError("need at least one timed epoch")
    spec = SamplingSpec.tau_nice(problem.n, tau)
    per_epoch = max(1, round(problem.n / tau))
    trace = run_erm(solver, problem, spec, (epochs + 1) * per_epoch * tau / problem.n,
                    make_rng(seed), checkpoint_every=per_epoch, gram=gram)
    seconds = np.diff([rec.seconds for rec in trace])
    return float(statistics.median(seconds[1:]))


def epoch_timing(problem: ErmProblem, solvers, taus, seed: int = 0, epochs: int = 5,
                 gram: str = "lazy") -> list[dict]:
    """One row per (solver, tau) with the median seconds per epoch."""
    return [{"tau": tau, "solver": s,
             "seconds_per_epoch": seconds_per_epoch(problem, s, tau, seed, epochs, gram)}
            for s in solvers for tau in taus]


def write_timing_csv(rows, path):
    def write(fh):
        w = csv.writer(fh)
        w.writerow(TIMING_COLUMNS)
        for r in rows:
            w.writerow((r["tau"], r["solver"], repr(r["seconds_per_epoch"])))

    atomic_write_text(path, write)
