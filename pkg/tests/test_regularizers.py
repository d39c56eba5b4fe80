import math

import numpy as np
import pytest

import nestcov as nc
from nestcov.errors import DegenerateSample, FoldTooSmall, SampleTooSmall


def _sample(n, N, key, scale=None):
    rng = np.random.Generator(np.random.Philox(key=key))
    X = rng.standard_normal((n, N))
    if scale is not None:
        X = X * np.sqrt(scale)[:, None]
    return nc.SampleSet(X, seed=key)


class TestLedoitWolf:
    def test_spherical_sample_gives_zero_gamma(self):
        # orthogonal equal-norm columns make the sample covariance spherical
        s = nc.SampleSet(np.array([[2.0, 0.0], [0.0, 2.0]]))
        res = nc.ledoit_wolf(s)
        assert res.gamma == 0.0
        np.testing.assert_allclose(res.estimate.values, 2.0 * np.eye(2), rtol=1e-15)

    def test_identical_columns_boundary(self):
        x = np.array([1.0, 2.0, -1.0])
        s = nc.SampleSet(np.column_stack([x, x, x]))
        res = nc.ledoit_wolf(s)
        # no estimation noise at all: full weight on the sample covariance
        assert res.gamma == pytest.approx(1.0, abs=1e-12)

    def test_rank_one_plus_noise_is_positive_definite(self):
        rng = np.random.Generator(np.random.Philox(key=41))
        x = np.array([1.0, 2.0, -1.0, 0.5])
        X = x[:, None] + 0.01 * rng.standard_normal((4, 6))
        res = nc.ledoit_wolf(nc.SampleSet(X))
        assert res.gamma < 1.0
        assert np.linalg.eigvalsh(res.estimate.values).min() > 0

    def test_gamma_tends_to_one_with_many_samples(self):
        scale = np.linspace(1.0, 10.0, 10)
        s = _sample(10, 10_000, key=42, scale=scale)
        res = nc.ledoit_wolf(s)
        assert res.gamma > 0.9

    def test_convex_combination_exact(self):
        s = _sample(5, 8, key=43)
        res = nc.ledoit_wolf(s)
        S = nc.sample_covariance(s)
        expect = res.gamma * S + (1 - res.gamma) * res.target_scale * np.eye(5)
        np.testing.assert_array_equal(res.estimate.values, expect)

    def test_eigenvalues_between_extremes(self):
        s = _sample(6, 4, key=44)
        res = nc.ledoit_wolf(s)
        sample_eigs = np.linalg.eigvalsh(nc.sample_covariance(s))
        lo = min(sample_eigs.min(), res.target_scale)
        hi = max(sample_eigs.max(), res.target_scale)
        est_eigs = np.linalg.eigvalsh(res.estimate.values)
        assert est_eigs.min() >= lo - 1e-12
        assert est_eigs.max() <= hi + 1e-12

    def test_rotation_equivariance(self):
        s = _sample(5, 7, key=45)
        rng = np.random.Generator(np.random.Philox(key=46))
        Q, _ = np.linalg.qr(rng.standard_normal((5, 5)))
        rotated = nc.SampleSet(Q @ s.data)
        res = nc.ledoit_wolf(s)
        res_rot = nc.ledoit_wolf(rotated)
        assert res_rot.gamma == pytest.approx(res.gamma, rel=1e-10)
        np.testing.assert_allclose(
            res_rot.estimate.values, Q @ res.estimate.values @ Q.T, atol=1e-12
        )

    def test_degenerate_sample(self):
        with pytest.raises(DegenerateSample):
            nc.ledoit_wolf(nc.SampleSet(np.zeros((3, 4))))

    def test_single_column_rejected(self):
        with pytest.raises(SampleTooSmall):
            nc.ledoit_wolf(nc.SampleSet(np.ones((3, 1))))


class TestCondRegSolve:
    def test_inactive_constraint(self):
        eigs = np.array([4.0, 2.0, 1.0])
        tau, shrunk = nc.cond_reg_solve(eigs, 4.0)
        np.testing.assert_array_equal(shrunk, eigs)
        assert tau == 1.0

    def test_kappa_one_gives_mean(self):
        # comparison-based 1-D search resolves the maximizer to ~sqrt(eps)
        tau, shrunk = nc.cond_reg_solve(np.array([9.0, 1.0]), 1.0)
        assert tau == pytest.approx(5.0, rel=1e-6)
        np.testing.assert_allclose(shrunk, [5.0, 5.0], rtol=1e-6)

    def test_against_grid_oracle(self):
        eigs = np.array([10.0, 4.0, 0.5, 0.1])
        kappa = 3.0
        tau, shrunk = nc.cond_reg_solve(eigs, kappa)

        def obj(t):
            m = np.clip(eigs, t, kappa * t)
            return float(np.sum(-np.log(m) - eigs / m))

        grid = np.linspace(eigs[-1] / kappa, eigs[0], 20001)[1:]
        assert obj(tau) >= max(obj(t) for t in grid) - 1e-9

    def test_huge_kappa_identity(self):
        eigs = np.array([5.0, 1.0, 0.01])
        tau, shrunk = nc.cond_reg_solve(eigs, 1e12)
        np.testing.assert_array_equal(shrunk, eigs)

    def test_condition_bound_holds(self):
        rng = np.random.Generator(np.random.Philox(key=47))
        for kappa in (1.5, 4.0, 20.0):
            eigs = np.sort(rng.uniform(0.0, 10.0, size=8))[::-1]
            eigs[0] = max(eigs[0], 1e-3)
            _, shrunk = nc.cond_reg_solve(eigs, kappa)
            assert shrunk.max() / shrunk.min() <= kappa * (1 + 1e-8)

    def test_zero_tail_clipped_up(self):
        eigs = np.array([4.0, 1.0, 0.0, 0.0])
        tau, shrunk = nc.cond_reg_solve(eigs, 10.0)
        assert tau > 0
        assert shrunk.min() == pytest.approx(tau)


class TestCondRegCv:
    def test_single_kappa_selected_trivially(self):
        s = _sample(4, 8, key=48)
        res = nc.cond_reg_cv(s, kappa_grid=(7.0,), K=4)
        assert res.kappa == 7.0
        assert len(res.cv_scores) == 1

    def test_estimate_shares_eigenvectors_and_bounds_condition(self):
        s = _sample(5, 12, key=49)
        res = nc.cond_reg_cv(s, kappa_grid=(2.0, 5.0), K=3)
        eigs = np.linalg.eigvalsh(res.estimate.values)
        assert eigs.min() > 0
        assert eigs.max() / eigs.min() <= res.kappa * (1 + 1e-8)
        # shared eigenvectors: estimate commutes with the sample covariance
        S = nc.sample_covariance(s)
        comm = res.estimate.values @ S - S @ res.estimate.values
        assert np.abs(comm).max() <= 1e-10 * np.abs(S).max()

    def test_consistency_majority_vote(self):
        # truth with condition number 50; CV should pick kappa = 50 from
        # {10, 50, 10000} for most seeds at a comfortable sample size
        scale = np.geomspace(1.0, 50.0, 10)
        hits = 0
        for key in range(20):
            s = _sample(10, 400, key=1000 + key, scale=scale)
            res = nc.cond_reg_cv(s, kappa_grid=(10.0, 50.0, 10_000.0), K=5)
            hits += res.kappa == 50.0
        assert hits > 10

    def test_heldout_scores_finite(self):
        s = _sample(8, 6, key=50)  # N < n: every training covariance singular
        res = nc.cond_reg_cv(s, kappa_grid=(3.0, 30.0), K=3)
        assert all(math.isfinite(score) for _, score in res.cv_scores)

    def test_fold_too_small(self):
        X = np.zeros((3, 6))
        X[:, 5] = 1.0  # the only nonzero column
        with pytest.raises(FoldTooSmall):
            nc.cond_reg_cv(nc.SampleSet(X, seed=3), kappa_grid=(2.0,), K=3)

    def test_rotation_equivariance(self):
        s = _sample(5, 9, key=51)
        rng = np.random.Generator(np.random.Philox(key=52))
        Q, _ = np.linalg.qr(rng.standard_normal((5, 5)))
        rotated = nc.SampleSet(Q @ s.data, seed=s.seed)
        res = nc.cond_reg_cv(s, kappa_grid=(2.0, 8.0), K=3)
        res_rot = nc.cond_reg_cv(rotated, kappa_grid=(2.0, 8.0), K=3)
        assert res_rot.kappa == res.kappa
        np.testing.assert_allclose(
            res_rot.estimate.values, Q @ res.estimate.values @ Q.T, atol=1e-9
        )

    def test_training_likelihood_dominates_grid_alternatives(self):
        s = _sample(6, 20, key=53)
        res = nc.cond_reg_cv(s, kappa_grid=(4.0,), K=4)
        S = nc.sample_covariance(s)
        eigs = np.sort(np.maximum(np.linalg.eigvalsh(S), 0.0))[::-1]
        kappa = 4.0

        def train_ll(t):
            m = np.clip(eigs, t, kappa * t)
            return float(np.sum(-np.log(m) - eigs / m))

        grid = np.linspace(eigs[-1] / kappa, eigs[0], 101)[1:]
        assert train_ll(res.tau) >= max(train_ll(t) for t in grid) - 1e-9
