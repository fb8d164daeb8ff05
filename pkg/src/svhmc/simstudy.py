"""Synthetic-data generation and the bias/smse replication harness.

A study grid crosses series lengths with persistence and volatility-of-
volatility values; every cell runs m replications.  Each replication draws
a fresh series, fits it, and records the posterior means of the scalar
parameters.  The harness aggregates bias and root-mean-square error per
cell and parameter, carries sampler health (worst split-Rhat, smallest
bulk ESS, divergence rate) alongside, and flags any replication whose
divergence rate exceeds a budget instead of dropping it.

Randomness is organized so the report is a pure function of (grid, seed):
one master sequence spawns a child per (cell, replication), and each child
splits into a data stream and a sampler seed.  Scheduling replications
across a worker pool cannot change any stream.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from . import dist, hmc, svmodel

__all__ = [
    "SimGrid",
    "CellResult",
    "SimReport",
    "simulate_sv",
    "bias_smse",
    "run_study",
    "DIVERGENCE_BUDGET",
]

DIVERGENCE_BUDGET = 0.05


@dataclass(frozen=True)
class SimGrid:
    """Replication layout: one cell per (n, phi, sigma_eta) combination."""

    mu: float = -9.0
    phi_set: tuple[float, ...] = (0.95, 0.99)
    sigma_set: tuple[float, ...] = (0.05, 0.15)
    n_set: tuple[int, ...] = (500, 1000, 1500)
    m: int = 20
    sampler: hmc.SamplerConfig = hmc.SamplerConfig(warmup=2000, draws=2000)
    seed: int = 0

    def __post_init__(self) -> None:
        if self.m < 1:
            raise ValueError(f"replication count m must be >= 1, got {self.m}")
        if not math.isfinite(self.mu):
            raise ValueError("grid mu must be finite")
        for phi in self.phi_set:
            if not -1.0 < phi < 1.0:
                raise ValueError(f"every phi must lie in (-1, 1), got {phi}")
        for sig in self.sigma_set:
            if not sig > 0.0:
                raise ValueError(f"every sigma_eta must be positive, got {sig}")
        for n in self.n_set:
            if n < 2:
                raise ValueError(f"every series length must be >= 2, got {n}")
        if not self.phi_set or not self.sigma_set or not self.n_set:
            raise ValueError("grid axes must be non-empty")

    def cells(self) -> list[tuple[int, float, float]]:
        return [
            (n, phi, sig)
            for n in self.n_set
            for phi in self.phi_set
            for sig in self.sigma_set
        ]


def simulate_sv(mu: float, phi: float, sigma_eta: float, family: dist.ErrorFamily,
                n: int, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    """Draw (returns, latent path) of length n.

    The first latent value comes from the stationary distribution; the
    innovations for h are drawn before the observation errors, which pins
    the stream layout for reproducibility.  sigma_eta = 0 is allowed and
    gives the degenerate flat path.
    """
    if not -1.0 < phi < 1.0:
        raise ValueError(f"phi must lie in (-1, 1), got {phi}")
    if not sigma_eta >= 0.0:
        raise ValueError(f"sigma_eta must be nonnegative, got {sigma_eta}")
    if not math.isfinite(mu):
        raise ValueError("mu must be finite")
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    z = rng.standard_normal(n)
    h = svmodel.latent_path(mu, phi, sigma_eta, z)
    eps = dist.sample_error(family, rng, n)
    return np.exp(0.5 * h) * eps, h


def bias_smse(estimates, truth: float) -> tuple[float, float]:
    """Mean error and root-mean-square error of point estimates."""
    est = np.asarray(estimates, dtype=float)
    if est.ndim != 1 or est.size < 1:
        raise ValueError("estimates must be a non-empty vector")
    if not np.all(np.isfinite(est)):
        raise ValueError("estimates must be finite")
    err = est - truth
    return float(err.mean()), float(math.sqrt(np.mean(err * err)))


@dataclass
class CellResult:
    n: int
    phi: float
    sigma_eta: float
    truth: dict[str, float]
    estimates: dict[str, np.ndarray]
    bias: dict[str, float]
    smse: dict[str, float]
    max_rhat: float
    min_ess: float
    divergence_rate: float
    flagged_reps: list[int]


@dataclass
class SimReport:
    grid: SimGrid
    family: str
    cells: list[CellResult]

    @property
    def flagged(self) -> list[tuple[int, int]]:
        return [
            (ci, rep) for ci, cell in enumerate(self.cells) for rep in cell.flagged_reps
        ]

    def to_rows(self) -> list[dict]:
        """One row per cell and parameter, ready for CSV."""
        rows = []
        for cell in self.cells:
            for param in cell.bias:
                rows.append({
                    "n": cell.n,
                    "phi": cell.phi,
                    "sigma_eta": cell.sigma_eta,
                    "parameter": param,
                    "truth": cell.truth[param],
                    "bias": cell.bias[param],
                    "smse": cell.smse[param],
                    "min_ess": cell.min_ess,
                    "max_rhat": cell.max_rhat,
                    "divergence_rate": cell.divergence_rate,
                    "flagged_reps": len(cell.flagged_reps),
                })
        return rows

    def to_dict(self) -> dict:
        return {
            "family": self.family,
            "mu": self.grid.mu,
            "m": self.grid.m,
            "seed": self.grid.seed,
            "warmup": self.grid.sampler.warmup,
            "draws": self.grid.sampler.draws,
            "chains": self.grid.sampler.chains,
            "cells": [
                {
                    "n": c.n,
                    "phi": c.phi,
                    "sigma_eta": c.sigma_eta,
                    "truth": c.truth,
                    "bias": c.bias,
                    "smse": c.smse,
                    "estimates": {k: v.tolist() for k, v in c.estimates.items()},
                    "min_ess": c.min_ess,
                    "max_rhat": c.max_rhat,
                    "divergence_rate": c.divergence_rate,
                    "flagged_reps": c.flagged_reps,
                }
                for c in self.cells
            ],
        }


def _default_fitter(spec: svmodel.ModelSpec, y: np.ndarray,
                    config: hmc.SamplerConfig) -> tuple[dict, dict]:
    fit = svmodel.fit(spec, y, config)
    estimates = {
        name: stats["mean"] for name, stats in fit.scalar_summaries().items()
    }
    diag = fit.diagnostics()
    rhats = [v for v in diag["rhat"].values() if not math.isnan(v)]
    esses = [v for v in diag["ess_bulk"].values() if not math.isnan(v)]
    return estimates, {
        "max_rhat": max(rhats) if rhats else math.nan,
        "min_ess": min(esses) if esses else math.nan,
        "divergence_rate": diag["divergence_rate"],
    }


def _replication(args):
    (mu, phi, sigma, n, family_name, true_nu, data_ss, sampler_seed,
     config, fitter) = args
    spec = svmodel.ModelSpec(family_name)
    family = dist.ErrorFamily(family_name, true_nu)
    rng = np.random.Generator(np.random.Philox(data_ss))
    y, _ = simulate_sv(mu, phi, sigma, family, n, rng)
    cfg = replace(config, seed=sampler_seed)
    if fitter is None:
        fitter = _default_fitter
    estimates, diag = fitter(spec, y, cfg)
    return estimates, diag


def run_study(grid: SimGrid, spec: svmodel.ModelSpec, true_nu: float | None = None,
              workers: int = 1, fitter=None) -> SimReport:
    """Run every replication of every cell and aggregate bias/smse.

    Data are simulated from the fitted family (true_nu supplies the shape
    for the non-Gaussian families).  ``fitter`` can replace the posterior
    machinery for harness tests; it receives (spec, y, config) and returns
    (estimates dict, diagnostics dict).  ``workers`` > 1 spreads
    replications over a process pool; the fitter must then be picklable.
    """
    if spec.has_shape and true_nu is None:
        raise ValueError(f"{spec.family} family needs true_nu for simulation")
    if not spec.has_shape and true_nu is not None:
        raise ValueError("true_nu is meaningless for the gaussian family")
    dist.ErrorFamily(spec.family, true_nu)  # validate the shape value

    cells = grid.cells()
    master = np.random.SeedSequence(grid.seed)
    children = master.spawn(len(cells) * grid.m)
    tasks = []
    for ci, (n, phi, sigma) in enumerate(cells):
        for rep in range(grid.m):
            child = children[ci * grid.m + rep]
            data_ss, fit_ss = child.spawn(2)
            sampler_seed = int(fit_ss.generate_state(1, np.uint32)[0])
            tasks.append((grid.mu, phi, sigma, n, spec.family, true_nu,
                          data_ss, sampler_seed, grid.sampler, fitter))

    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_replication, tasks))
    else:
        results = [_replication(t) for t in tasks]

    param_names = list(spec.scalar_param_names())
    report_cells = []
    for ci, (n, phi, sigma) in enumerate(cells):
        truth = {"mu": grid.mu, "phi": phi, "sigma_eta": sigma}
        if spec.has_shape:
            truth["nu"] = float(true_nu)
        block = results[ci * grid.m:(ci + 1) * grid.m]
        estimates = {
            p: np.array([est[p] for est, _ in block]) for p in param_names
        }
        bias = {}
        smse = {}
        for p in param_names:
            bias[p], smse[p] = bias_smse(estimates[p], truth[p])
        rhats = np.array([diag["max_rhat"] for _, diag in block])
        rhats = rhats[~np.isnan(rhats)]
        esses = np.array([diag["min_ess"] for _, diag in block])
        esses = esses[~np.isnan(esses)]
        rates = np.array([diag["divergence_rate"] for _, diag in block])
        flagged = [rep for rep, rate in enumerate(rates) if rate > DIVERGENCE_BUDGET]
        report_cells.append(CellResult(
            n=n, phi=phi, sigma_eta=sigma, truth=truth, estimates=estimates,
            bias=bias, smse=smse,
            max_rhat=float(rhats.max()) if rhats.size else math.nan,
            min_ess=float(esses.min()) if esses.size else math.nan,
            divergence_rate=float(rates.mean()),
            flagged_reps=flagged,
        ))
    return SimReport(grid=grid, family=spec.family, cells=report_cells)
