"""Per-checkpoint solver telemetry and its CSV serialization."""
from __future__ import annotations

import csv
import math
import os
import tempfile
from dataclasses import dataclass

ERM_COLUMNS = ("solver", "tau", "seed", "iter", "epoch", "seconds", "primal", "dual", "gap")
SMOOTH_COLUMNS = ("iteration", "epoch_equivalent", "residual")


@dataclass
class TraceRecord:
    """One checkpoint of a run.

    For ERM runs ``primal``/``dual``/``gap`` are P(w), D(alpha) and their
    difference. For smooth and composite runs ``primal`` holds the objective
    value, ``dual`` is NaN and ``gap`` is the residual ``F(x) - F(x*)``.
    """

    solver: str
    tau: float
    seed: int | None
    iteration: int
    epoch: float
    seconds: float
    primal: float
    dual: float = math.nan
    gap: float = math.nan

    @property
    def residual(self) -> float:
        return self.gap

    def erm_row(self):
        return (self.solver, self.tau, self.seed, self.iteration, repr(self.epoch),
                repr(self.seconds), repr(self.primal), repr(self.dual), repr(self.gap))

    def smooth_row(self):
        return (self.iteration, repr(self.epoch), repr(self.gap))


def atomic_write_text(path, write):
    """Write a file via a temporary in the same directory followed by a rename."""
    path = os.fspath(path)
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            write(fh)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_trace_csv(records, path, schema: str = "erm"):
    if schema == "erm":
        columns, row = ERM_COLUMNS, TraceRecord.erm_row
    elif schema == "smooth":
        columns, row = SMOOTH_COLUMNS, TraceRecord.smooth_row
    else:
        raise ValueError(f"unknown schema {schema!r}")

    def write(fh):
        w = csv.writer(fh)
        w.writerow(columns)
        for rec in records:
            w.writerow(row(rec))

    atomic_write_text(path, write)


def read_trace_csv(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))
