"""Experiment drivers: (mu, k) feasibility sweeps, k* bisection, trajectory runs."""

from __future__ import annotations

import csv
import logging
import os
import time
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .model import example_system
from .sdp import FEASIBLE, INCONCLUSIVE, INFEASIBLE
from .simulator import SimulationConfig, simulate
from .synthesis import SynthesisOptions, hurwitz_check, synthesize

log = logging.getLogger(__name__)

SKIPPED = "Skipped"
CELL_STATUSES = (FEASIBLE, INFEASIBLE, INCONCLUSIVE, SKIPPED)
CSV_COLUMNS = ("mu", "k", "status", "margin", "seconds", "abscissa")


class BracketWarning(UserWarning):
    """The bisection bracket did not behave like a monotone predicate."""


class SynthesisFailed(RuntimeError):
    def __init__(self, status, message):
        super().__init__(f"{status}: {message}")
        self.status = status


def log_space(a: float, b: float, n: int) -> list:
    if not (a > 0 and b > 0):
        raise ValueError("log-spaced ranges must be positive")
    return [float(v) for v in np.geomspace(a, b, n)]


def lin_space(a: float, b: float, n: int) -> list:
    if not (a > 0 and b > 0):
        raise ValueError("ranges must be positive")
    return [float(v) for v in np.linspace(a, b, n)]


@dataclass
class SweepGrid:
    """Cell ``(i, j)`` is ``mu[i]``, ``k[j]``."""

    mu: list
    k: list
    status: list
    margin: list
    seconds: list
    abscissa: list

    @classmethod
    def empty(cls, mu, k) -> "SweepGrid":
        m, n = len(mu), len(k)
        return cls(list(map(float, mu)), list(map(float, k)), [[SKIPPED] * n for _ in range(m)],
                   [[None] * n for _ in range(m)], [[0.0] * n for _ in range(m)],
                   [[None] * n for _ in range(m)])

    @property
    def shape(self) -> tuple:
        return len(self.mu), len(self.k)

    def cells(self):
        for i, mu in enumerate(self.mu):
            for j, k in enumerate(self.k):
                yield i, j, mu, k

    def count(self, status) -> int:
        return sum(row.count(status) for row in self.status)

    def feasible_columns(self) -> list:
        """Per ``k``: does some ``mu`` give a Feasible cell?"""
        return [any(self.status[i][j] == FEASIBLE for i in range(len(self.mu)))
                for j in range(len(self.k))]

    def rows(self):
        for i, j, mu, k in self.cells():
            yield mu, k, self.status[i][j], self.margin[i][j], self.seconds[i][j], self.abscissa[i][j]

    def to_csv(self, path):
        def fmt(v):
            if v is None:
                return ""
            return v if isinstance(v, str) else repr(float(v))

        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(CSV_COLUMNS)
            for row in self.rows():
                w.writerow([fmt(v) for v in row])

    @classmethod
    def from_csv(cls, path) -> "SweepGrid":
        with open(path, newline="") as fh:
            rows = list(csv.DictReader(fh))
        mus = list(dict.fromkeys(float(r["mu"]) for r in rows))
        ks = list(dict.fromkeys(float(r["k"]) for r in rows))
        grid = cls.empty(mus, ks)
        if len(rows) != len(mus) * len(ks):
            raise ValueError("sweep CSV is not a full grid")
        opt = lambda s: float(s) if s != "" else None  # noqa: E731
        for r in rows:
            i, j = mus.index(float(r["mu"])), ks.index(float(r["k"]))
            if r["status"] not in CELL_STATUSES:
                raise ValueError(f"unknown status {r['status']!r}")
            grid.status[i][j] = r["status"]
            grid.margin[i][j] = opt(r["margin"])
            grid.seconds[i][j] = float(r["seconds"])
            grid.abscissa[i][j] = opt(r.get("abscissa", ""))
        return grid

    def __eq__(self, other):
        if not isinstance(other, SweepGrid):
            return NotImplemented
        return all(getattr(self, f) == getattr(other, f)
                   for f in ("mu", "k", "status", "margin", "seconds", "abscissa"))


@dataclass(frozen=True)
class CellResult:
    status: str
    margin: float | None
    seconds: float
    abscissa: float | None
    message: str = ""


def solve_cell(system_factory, k: float, options: SynthesisOptions) -> CellResult:
    """One synthesis; any exception becomes an Inconclusive cell."""
    t0 = time.perf_counter()
    try:
        sys = system_factory(k)
        res = synthesize(sys, options)
        absc = None
        if res.realization is not None:
            absc = max(hurwitz_check(sys, res.realization))
        return CellResult(res.status, res.margin, time.perf_counter() - t0, absc, res.message)
    except Exception as exc:  # noqa: BLE001 - recorded, sweep continues
        log.warning("cell k=%g mu=%g failed: %s", k, options.mu, exc)
        return CellResult(INCONCLUSIVE, None, time.perf_counter() - t0, None, repr(exc))


def _cell_job(args):
    factory, k, opts = args
    return solve_cell(factory, k, opts)


def sweep(mu_values, k_values, options: SynthesisOptions | None = None, *,
          system_factory=example_system, workers: int | None = None,
          deadline: float | None = None, order: str = "mu", progress=None) -> SweepGrid:
    """Feasibility status over the ``mu x k`` grid.

    ``deadline`` (seconds) leaves cells not started in time as ``Skipped``.
    ``order="mu"`` visits every ``k`` at the first ``mu`` before moving on;
    ``order="k"`` finishes a column first. Results land by cell index, so the
    grid does not depend on ``workers``.
    """
    base = options or SynthesisOptions()
    grid = SweepGrid.empty(mu_values, k_values)
    cells = list(grid.cells())
    if order == "k":
        cells.sort(key=lambda c: (c[1], c[0]))
    elif order != "mu":
        raise ValueError("order must be 'mu' or 'k'")
    jobs = [(system_factory, k, SynthesisOptions(**{**base.to_dict(), "mu": mu}))
            for _, _, mu, k in cells]
    workers = workers or os.cpu_count() or 1
    t0 = time.perf_counter()

    def record(idx, res):
        i, j, mu, k = cells[idx]
        grid.status[i][j] = res.status
        grid.margin[i][j] = res.margin
        grid.seconds[i][j] = res.seconds
        grid.abscissa[i][j] = res.abscissa
        if progress:
            progress(mu, k, res)

    def expired():
        return deadline is not None and time.perf_counter() - t0 > deadline

    if workers <= 1:
        for idx, job in enumerate(jobs):
            if expired():
                break
            record(idx, _cell_job(job))
        return grid

    with ProcessPoolExecutor(max_workers=workers) as pool:
        futures = [pool.submit(_cell_job, job) for job in jobs]
        for idx, fut in enumerate(futures):
            if expired():
                for f in futures[idx:]:
                    f.cancel()
            if fut.cancelled():
                continue
            record(idx, fut.result())
    return grid


@dataclass
class BisectionResult:
    k_star: float | None
    bracket: tuple
    probes: list = field(default_factory=list)
    warnings: list = field(default_factory=list)

    @property
    def inconclusive_probes(self) -> list:
        return [k for k, s in self.probes if s == INCONCLUSIVE]


def bisect_kstar(mu: float, k_lo: float, k_hi: float, tol_k: float = 1.0,
                 options: SynthesisOptions | None = None, *,
                 system_factory=example_system, progress=None) -> BisectionResult:
    """Largest Feasible ``k`` in ``[k_lo, k_hi]`` up to ``tol_k``.

    Inconclusive probes count as infeasible. A Feasible ``k_hi`` returns
    ``k_hi`` with a warning; an infeasible ``k_lo`` raises ``ValueError``.
    """
    if not (0 < k_lo < k_hi) or not tol_k > 0:
        raise ValueError("need 0 < k_lo < k_hi and tol_k > 0")
    opts = SynthesisOptions(**{**(options or SynthesisOptions()).to_dict(), "mu": mu})
    probes = []

    def feasible(k):
        res = solve_cell(system_factory, k, opts)
        probes.append((k, res.status))
        if progress:
            progress(k, res)
        return res.status == FEASIBLE

    out = BisectionResult(None, (k_lo, k_hi), probes)

    def warn(msg):
        out.warnings.append(msg)
        warnings.warn(msg, BracketWarning, stacklevel=3)

    hi_ok = feasible(k_hi)
    lo_ok = feasible(k_lo)
    if not lo_ok:
        if hi_ok:
            warn(f"feasible at k_hi={k_hi:g} but not at k_lo={k_lo:g}; not monotone")
            out.k_star = k_hi
            return out
        raise ValueError(f"no feasible k in [{k_lo:g}, {k_hi:g}] at mu={mu:g}")
    if hi_ok:
        warn(f"feasible at both ends; widen the bracket above k_hi={k_hi:g}")
        out.k_star = k_hi
        return out

    lo, hi = k_lo, k_hi
    while hi - lo > tol_k:
        mid = 0.5 * (lo + hi)
        if feasible(mid):
            lo = mid
        else:
            hi = mid
    out.k_star, out.bracket = lo, (lo, hi)
    bad = [k for k, s in probes if s == FEASIBLE and k > hi]
    if bad:
        warn(f"feasible probes above the final bracket: {bad}; predicate not monotone")
    if out.inconclusive_probes:
        warn(f"inconclusive probes treated as infeasible: {out.inconclusive_probes}")
    return out


def run_trajectory(k: float, mu: float, gamma: float, x0, alpha, ahat0, t_end: float,
                   dt: float = 1e-4, out=None, options: SynthesisOptions | None = None,
                   clamp_simplex: bool = False, realization=None):
    """Synthesize at ``(k, mu)`` (unless ``realization`` is given) and simulate.

    Writes ``out`` (CSV) and its JSON manifest when ``out`` is set. Returns
    ``(trace, summary)``.
    """
    sys = example_system(k)
    if realization is None:
        res = synthesize(sys, options or SynthesisOptions(mu=mu))
        if res.status != FEASIBLE:
            raise SynthesisFailed(res.status, res.message)
        realization = res.realization
    cfg = SimulationConfig(x0=x0, alpha=alpha, ahat0=ahat0, gamma=gamma, t_end=t_end, dt=dt,
                           clamp_simplex=clamp_simplex)
    trace = simulate(sys, realization, cfg)
    trace.meta.update({"k": float(k), "mu": float(mu)})
    if out is not None:
        trace.write(Path(out))
    return trace, trace.summary()
