"""
Benchmark grids and Dolan-More performance profiles.

For a cost table t[p, s] (problem p, solver s) the performance ratio is
r[p, s] = t[p, s] / min_s t[p, s]; failed runs get r_failed, which is
twice the largest finite ratio. The profile of solver s is

    rho_s(tau) = #{p : r[p, s] <= tau} / n_problems.
"""

from __future__ import annotations

import csv
import json
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .core import NlsProblem, Status
from .solvers import Solver

log = logging.getLogger(__name__)

MEASURES = ("N_i", "N_f", "mixed", "T")
METRIC_COLUMNS = ["problem", "solver", "status", "N_i", "N_f", "T", "hnorm", "gnorm", "mixed"]


@dataclass
class MetricsRow:
    problem: str
    solver: str
    status: str
    N_i: int
    N_f: int
    T: float
    hnorm: float
    gnorm: float

    @property
    def mixed(self) -> int:
        return self.N_f + 3 * self.N_i

    @property
    def solved(self) -> bool:
        return Status(self.status).converged

    def measure(self, name: str) -> float:
        if name == "mixed":
            return float(self.mixed)
        if name not in MEASURES:
            raise ValueError(f"unknown measure {name!r}; choose from {MEASURES}")
        return float(getattr(self, name))

    def record(self) -> dict:
        out = asdict(self)
        out["mixed"] = self.mixed
        return out


@dataclass
class MetricsTable:
    rows: list = field(default_factory=list)

    def __len__(self):
        return len(self.rows)

    @property
    def problems(self) -> list:
        return list(dict.fromkeys(r.problem for r in self.rows))

    @property
    def solvers(self) -> list:
        return list(dict.fromkeys(r.solver for r in self.rows))

    def get(self, problem: str, solver: str) -> MetricsRow:
        for r in self.rows:
            if r.problem == problem and r.solver == solver:
                return r
        raise KeyError((problem, solver))


@dataclass
class Ratios:
    problems: list
    solvers: list
    values: np.ndarray          # n_problems x n_solvers
    r_failed: float
    measure: str


@dataclass
class ProfileCurves:
    measure: str
    tau: np.ndarray
    rho: dict                   # solver -> array aligned with tau
    r_failed: float


# -------------------------------------------------------------------------
#  Running
# -------------------------------------------------------------------------
def run_benchmark(problems: Sequence[NlsProblem], solvers: Sequence[Solver], jobs: int = 1) -> MetricsTable:
    """Solve every (problem, solver) pair from the problem's default start.

    Cells are independent; with ``jobs > 1`` they run on a thread pool and
    the table keeps grid order regardless of completion order.
    """
    if not problems or not solvers:
        raise ValueError("benchmark needs at least one problem and one solver")
    cells = [(p, s) for p in problems for s in solvers]

    def run(cell):
        p, s = cell
        rep = s(p, p.start())
        return MetricsRow(p.name, s.name, rep.status.value, rep.n_iter, rep.n_f, rep.elapsed,
                          rep.hnorm_final, rep.gnorm_final)

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            rows = list(pool.map(run, cells))
    else:
        rows = [run(c) for c in cells]
    for r in rows:
        if not r.solved:
            log.info("%s failed on %s: %s", r.solver, r.problem, r.status)
    return MetricsTable(rows)


# -------------------------------------------------------------------------
#  Profiles
# -------------------------------------------------------------------------
# N_i is zero when x0 already solves the problem; costs are floored so the
# ratio stays defined (every solver then ties at 1).
_FLOOR = {"N_i": 1.0, "N_f": 1.0, "mixed": 1.0, "T": 1e-9}


def performance_ratios(table: MetricsTable, measure: str = "N_f") -> Ratios:
    if measure not in MEASURES:
        raise ValueError(f"unknown measure {measure!r}; choose from {MEASURES}")
    problems, solvers = table.problems, table.solvers
    t = np.full((len(problems), len(solvers)), np.nan)
    for r in table.rows:
        if r.solved:
            t[problems.index(r.problem), solvers.index(r.solver)] = max(r.measure(measure), _FLOOR[measure])
    ratios = np.full_like(t, np.nan)
    for i, p in enumerate(problems):
        ok = ~np.isnan(t[i])
        if not ok.any():
            log.warning("no solver solved %s", p)
            continue
        ratios[i, ok] = t[i, ok] / t[i, ok].min()
    finite = ratios[~np.isnan(ratios)]
    r_failed = 2.0 * (finite.max() if finite.size else 1.0)
    ratios[np.isnan(ratios)] = r_failed
    return Ratios(problems, solvers, ratios, r_failed, measure)


def tau_grid(r_failed: float, points: int = 200) -> np.ndarray:
    """Log-spaced grid on [1, r_failed); stops short of r_failed so failures never count."""
    return np.logspace(0.0, math.log10(r_failed), points, endpoint=False)


def performance_profile(ratios: Ratios, tau: np.ndarray | None = None) -> ProfileCurves:
    tau = tau_grid(ratios.r_failed) if tau is None else np.asarray(tau, dtype=float)
    if tau.size == 0 or tau[0] != 1.0 or np.any(np.diff(tau) < 0):
        raise ValueError("tau grid must be sorted and start at 1")
    n_p = ratios.values.shape[0]
    rho = {}
    for j, s in enumerate(ratios.solvers):
        col = np.sort(ratios.values[:, j])
        rho[s] = np.searchsorted(col, tau, side="right") / n_p
    return ProfileCurves(ratios.measure, tau, rho, ratios.r_failed)


# -------------------------------------------------------------------------
#  Output
# -------------------------------------------------------------------------
def _rows_of(obj):
    if isinstance(obj, MetricsTable):
        return METRIC_COLUMNS, [r.record() for r in obj.rows]
    if isinstance(obj, ProfileCurves):
        cols = ["tau"] + list(obj.rho)
        recs = []
        for i, t in enumerate(obj.tau):
            rec = {"tau": float(t)}
            rec.update({s: float(v[i]) for s, v in obj.rho.items()})
            recs.append(rec)
        return cols, recs
    raise TypeError(f"cannot emit {type(obj).__name__}")


def emit(obj, path, fmt: str | None = None) -> Path:
    """Write a metrics table or profile as CSV or JSON (chosen by suffix unless ``fmt`` is given)."""
    path = Path(path)
    fmt = fmt or ("json" if path.suffix == ".json" else "csv")
    cols, recs = _rows_of(obj)
    try:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            if fmt == "csv":
                w = csv.DictWriter(fh, fieldnames=cols)
                w.writeheader()
                w.writerows(recs)
            elif fmt == "json":
                doc = {"columns": cols, "records": recs}
                if isinstance(obj, ProfileCurves):
                    doc.update(measure=obj.measure, r_failed=obj.r_failed)
                json.dump(doc, fh, indent=1)
                fh.write("\n")
            else:
                raise ValueError(f"unknown format {fmt!r}")
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc.strerror or exc}") from exc
    return path


def read_metrics_csv(path) -> MetricsTable:
    with open(path, newline="", encoding="utf-8") as fh:
        rows = [
            MetricsRow(r["problem"], r["solver"], r["status"], int(r["N_i"]), int(r["N_f"]), float(r["T"]),
                       float(r["hnorm"]), float(r["gnorm"]))
            for r in csv.DictReader(fh)
        ]
    return MetricsTable(rows)


def read_profile_csv(path) -> ProfileCurves:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        solvers = [c for c in reader.fieldnames if c != "tau"]
        recs = list(reader)
    tau = np.array([float(r["tau"]) for r in recs])
    rho = {s: np.array([float(r[s]) for r in recs]) for s in solvers}
    return ProfileCurves("", tau, rho, math.nan)
