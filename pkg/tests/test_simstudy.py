"""Data generator and replication-harness behavior."""

import math

import numpy as np
import pytest

from svhmc import dist, hmc, simstudy, svmodel

GAUSS = dist.ErrorFamily("gaussian")


class TestSimulate:
    def test_zero_vol_of_vol_is_exact(self):
        rng = np.random.default_rng(0)
        y, h = simstudy.simulate_sv(-9.0, 0.95, 0.0, GAUSS, 200, rng)
        assert np.all(h == -9.0)
        rng2 = np.random.default_rng(0)
        rng2.standard_normal(200)  # the latent innovations drawn first
        eps = dist.sample_error(GAUSS, rng2, 200)
        assert np.allclose(y, math.exp(-4.5) * eps, rtol=1e-15)

    def test_lag1_autocorrelation(self):
        rng = np.random.default_rng(1)
        _, h = simstudy.simulate_sv(-9.0, 0.95, 0.15, GAUSS, 100_000, rng)
        lag1 = np.corrcoef(h[:-1], h[1:])[0, 1]
        assert abs(lag1 - 0.95) <= 0.02

    def test_latent_mean(self):
        rng = np.random.default_rng(2)
        n = 100_000
        _, h = simstudy.simulate_sv(-9.0, 0.95, 0.15, GAUSS, n, rng)
        var_h = 0.15**2 / (1 - 0.95**2)
        ess = n * (1 - 0.95) / (1 + 0.95)
        assert abs(h.mean() + 9.0) <= 3.0 * math.sqrt(var_h / ess)

    def test_support_checks(self):
        rng = np.random.default_rng(3)
        with pytest.raises(ValueError):
            simstudy.simulate_sv(-9.0, 1.0, 0.1, GAUSS, 10, rng)
        with pytest.raises(ValueError):
            simstudy.simulate_sv(-9.0, 0.9, -0.1, GAUSS, 10, rng)
        with pytest.raises(ValueError):
            simstudy.simulate_sv(np.inf, 0.9, 0.1, GAUSS, 10, rng)
        with pytest.raises(ValueError):
            simstudy.simulate_sv(-9.0, 0.9, 0.1, GAUSS, 0, rng)

    def test_heavy_tail_family_used(self):
        rng = np.random.default_rng(4)
        fam = dist.ErrorFamily("student-t", 5.0)
        y, h = simstudy.simulate_sv(-9.0, 0.0, 0.0, fam, 200_000, rng)
        eps = y / math.exp(-4.5)
        # standardized t(5) has kurtosis 9
        kurt = np.mean(eps**4) / np.mean(eps**2) ** 2
        assert kurt > 5.0


class TestBiasSmse:
    def test_perfect_estimates(self):
        bias, smse = simstudy.bias_smse(np.full(7, 2.0), 2.0)
        assert bias == 0.0
        assert smse == 0.0

    def test_symmetric_errors(self):
        bias, smse = simstudy.bias_smse(np.array([1.0, 3.0]), 2.0)
        assert bias == 0.0
        assert smse == 1.0

    def test_hand_computation(self):
        bias, smse = simstudy.bias_smse(np.array([2.1, 2.3]), 2.0)
        assert bias == pytest.approx(0.2, rel=1e-12)
        assert smse == pytest.approx(math.sqrt(0.05), rel=1e-12)

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            simstudy.bias_smse(np.array([]), 1.0)
        with pytest.raises(ValueError):
            simstudy.bias_smse(np.array([1.0, np.nan]), 1.0)

    def test_smse_dominates_bias(self):
        rng = np.random.default_rng(5)
        for _ in range(20):
            est = rng.standard_normal(9) + rng.uniform(-2, 2)
            bias, smse = simstudy.bias_smse(est, 0.3)
            assert smse >= abs(bias) - 1e-12


class TestGrid:
    def test_validation(self):
        with pytest.raises(ValueError):
            simstudy.SimGrid(m=0)
        with pytest.raises(ValueError):
            simstudy.SimGrid(phi_set=(1.0,))
        with pytest.raises(ValueError):
            simstudy.SimGrid(sigma_set=(0.0,))
        with pytest.raises(ValueError):
            simstudy.SimGrid(n_set=(1,))
        with pytest.raises(ValueError):
            simstudy.SimGrid(n_set=())

    def test_cell_order(self):
        grid = simstudy.SimGrid(phi_set=(0.9,), sigma_set=(0.1, 0.2), n_set=(50, 60), m=1)
        assert grid.cells() == [(50, 0.9, 0.1), (50, 0.9, 0.2), (60, 0.9, 0.1), (60, 0.9, 0.2)]


def oracle_fitter(spec, y, config):
    return (
        {"mu": -9.0, "phi": 0.95, "sigma_eta": 0.15},
        {"max_rhat": 1.0, "min_ess": 1e6, "divergence_rate": 0.0},
    )


def tiny_grid(**kw):
    defaults = dict(
        mu=-9.0, phi_set=(0.95,), sigma_set=(0.15,), n_set=(40,), m=2,
        sampler=hmc.SamplerConfig(warmup=150, draws=60, chains=2, seed=0),
        seed=11,
    )
    defaults.update(kw)
    return simstudy.SimGrid(**defaults)


class TestRunStudy:
    def test_oracle_fitter_zero_bias(self):
        grid = tiny_grid(m=1)
        report = simstudy.run_study(grid, svmodel.ModelSpec("gaussian"),
                                    fitter=oracle_fitter)
        cell = report.cells[0]
        for p in ("mu", "phi", "sigma_eta"):
            assert cell.bias[p] == 0.0
            assert cell.smse[p] == 0.0
        assert cell.flagged_reps == []
        assert report.flagged == []

    def test_reproducible(self):
        grid = tiny_grid()
        spec = svmodel.ModelSpec("gaussian")
        r1 = simstudy.run_study(grid, spec)
        r2 = simstudy.run_study(grid, spec)
        for c1, c2 in zip(r1.cells, r2.cells):
            for p in c1.estimates:
                assert np.array_equal(c1.estimates[p], c2.estimates[p])
            assert c1.bias == c2.bias
            assert c1.max_rhat == c2.max_rhat

    def test_replications_independent(self):
        # same cell, different replication streams: the simulated series
        # must be essentially uncorrelated
        collected = []

        def recording_fitter(spec, y, config):
            collected.append(y.copy())
            return oracle_fitter(spec, y, config)

        grid = tiny_grid(m=2, n_set=(4000,))
        simstudy.run_study(grid, svmodel.ModelSpec("gaussian"), fitter=recording_fitter)
        assert len(collected) == 2
        assert not np.array_equal(collected[0], collected[1])
        r = np.corrcoef(collected[0], collected[1])[0, 1]
        assert abs(r) < 0.05

    def test_divergent_replication_flagged_not_dropped(self):
        def diverging_fitter(spec, y, config):
            est, diag = oracle_fitter(spec, y, config)
            diag = dict(diag)
            diag["divergence_rate"] = 0.2
            return est, diag

        grid = tiny_grid(m=2)
        report = simstudy.run_study(grid, svmodel.ModelSpec("gaussian"),
                                    fitter=diverging_fitter)
        cell = report.cells[0]
        assert cell.flagged_reps == [0, 1]
        assert cell.estimates["mu"].size == 2
        assert report.flagged == [(0, 0), (0, 1)]

    def test_rows_and_dict_serialization(self):
        grid = tiny_grid(m=1)
        report = simstudy.run_study(grid, svmodel.ModelSpec("gaussian"),
                                    fitter=oracle_fitter)
        rows = report.to_rows()
        assert len(rows) == 3
        assert {r["parameter"] for r in rows} == {"mu", "phi", "sigma_eta"}
        for r in rows:
            assert r["n"] == 40
            assert r["smse"] >= abs(r["bias"])
        d = report.to_dict()
        assert d["family"] == "gaussian"
        assert len(d["cells"]) == 1

    def test_shape_family_needs_true_nu(self):
        grid = tiny_grid(m=1)
        with pytest.raises(ValueError):
            simstudy.run_study(grid, svmodel.ModelSpec("student-t"))
        with pytest.raises(ValueError):
            simstudy.run_study(grid, svmodel.ModelSpec("gaussian"), true_nu=6.0)

    def test_real_fit_recovers_parameters_roughly(self):
        grid = simstudy.SimGrid(
            mu=-9.0, phi_set=(0.95,), sigma_set=(0.15,), n_set=(300,), m=2,
            sampler=hmc.SamplerConfig(warmup=300, draws=300, chains=2, seed=0),
            seed=21,
        )
        report = simstudy.run_study(grid, svmodel.ModelSpec("gaussian"))
        cell = report.cells[0]
        assert abs(cell.bias["mu"]) < 1.0
        assert abs(cell.bias["phi"]) < 0.25
        assert cell.min_ess > 20.0
        assert cell.max_rhat < 1.2

    def test_worker_pool_matches_sequential(self):
        grid = tiny_grid(m=2, n_set=(60,))
        spec = svmodel.ModelSpec("gaussian")
        seq = simstudy.run_study(grid, spec, workers=1)
        par = simstudy.run_study(grid, spec, workers=2)
        for c1, c2 in zip(seq.cells, par.cells):
            for p in c1.estimates:
                assert np.array_equal(c1.estimates[p], c2.estimates[p])
