import math

import numpy as np
import pytest

import nestcov as nc
from nestcov.errors import GridTooSmall, NonPositiveVariance, NotPositiveDefinite


class TestLaplaceEigenvalues:
    def test_single_node(self):
        # h = 1/2 in both directions, sin^2(pi/4) = 1/2
        lam = nc.laplace_eigenvalues(1, 1)
        assert lam.shape == (1,)
        assert lam[0] == pytest.approx(-16.0, abs=1e-12)

    def test_benchmark_grid_against_closed_form(self):
        # Independent evaluation of the closed-form eigenvalue formula.
        lam = nc.laplace_eigenvalues(10, 10)
        oracle = sorted(
            (
                -4 * 11**2 * math.sin(j * math.pi / 22) ** 2
                - 4 * 11**2 * math.sin(l * math.pi / 22) ** 2
                for j in range(1, 11)
                for l in range(1, 11)
            ),
            reverse=True,
        )
        assert lam.shape == (100,)
        np.testing.assert_allclose(lam, oracle, rtol=1e-13)
        assert lam.max() == pytest.approx(-19.6054, abs=1e-3)
        assert np.all(lam < 0)

    def test_two_by_one_distinct(self):
        lam = nc.laplace_eigenvalues(2, 1)
        assert np.all(lam < 0)
        assert lam[0] != lam[1]

    @pytest.mark.parametrize("m,k", [(1, 1), (2, 3), (5, 4), (10, 10)])
    def test_sorted_negative_and_transpose_invariant(self, m, k):
        lam = nc.laplace_eigenvalues(m, k)
        assert np.all(lam < 0)
        assert np.all(np.diff(lam) <= 0)
        lam_t = nc.laplace_eigenvalues(k, m)
        np.testing.assert_allclose(lam, lam_t, rtol=1e-13)


class TestDecayDiagonal:
    def test_alpha_zero_gives_ones(self, small_lam):
        model = nc.DecayModel.two_param(small_lam, 1.0, 0.0)
        d = nc.decay_diagonal(model)
        np.testing.assert_array_equal(d.d, np.ones(4))

    def test_benchmark_parameters(self, bench_lam):
        # d_i = (1/30) exp(0.002 lam_i): positive and decreasing.
        model = nc.DecayModel.two_param(bench_lam, 30.0, 0.002)
        d = nc.decay_diagonal(model).d
        np.testing.assert_allclose(d, np.exp(0.002 * bench_lam) / 30.0, rtol=1e-14)
        assert np.all(d > 0)
        assert np.all(np.diff(d) <= 0)

    def test_three_param_nests_two_param(self, small_lam):
        a = 0.13
        d2 = nc.decay_diagonal(nc.DecayModel.two_param(small_lam, 1.0, a))
        d3 = nc.decay_diagonal(nc.DecayModel.three_param(small_lam, 1.0, 0.0, a))
        np.testing.assert_array_equal(d2.d, d3.d)

    def test_non_positive_c_rejected(self, small_lam):
        with pytest.raises(NonPositiveVariance):
            nc.DecayModel.two_param(small_lam, -1.0, 0.0)
        with pytest.raises(NonPositiveVariance):
            nc.DecayModel.two_param(small_lam, 0.0, 0.1)

    def test_non_positive_linear_term_rejected(self, small_lam):
        # c1 + c2*h goes negative at h = 7 for c1=1, c2=-0.2
        with pytest.raises(NonPositiveVariance):
            nc.DecayModel.three_param(small_lam, 1.0, -0.2, 0.0)

    def test_equal_spectrum_rejected(self):
        with pytest.raises(ValueError):
            nc.DecayModel.two_param(np.array([-2.0, -2.0, -2.0]), 1.0, 0.1)

    def test_zero_eigenvalue_rejected(self):
        with pytest.raises(ValueError):
            nc.DecayModel.two_param(np.array([0.0, -1.0]), 1.0, 0.1)


class TestGmrfStructure:
    def test_benchmark_basis_counts(self):
        s = nc.gmrf_structure(10, 10, nc.NeighborLevel.N4)
        assert len(s.bases) == 3
        # 9 vertical links per column, 10 columns, stored directed both ways.
        assert len(s.bases[1]) == 180
        assert len(s.bases[2]) == 180

    def test_vertical_pairs_match_brute_force(self):
        m, k = 10, 10
        s = nc.gmrf_structure(m, k, nc.NeighborLevel.N4)
        expected = set()
        for c in range(k):
            for r in range(m - 1):
                a, b = c * m + r, c * m + r + 1
                expected |= {(a, b), (b, a)}
        assert s.bases[1] == expected

    def test_no_wrap_between_columns(self):
        s = nc.gmrf_structure(10, 10, nc.NeighborLevel.N4)
        # bottom of column 1 (index 9) and top of column 2 (index 10) are not
        # vertical neighbors
        assert (9, 10) not in s.bases[1]
        assert (10, 9) not in s.bases[1]

    def test_minimum_grid_n12(self):
        s = nc.gmrf_structure(3, 3, nc.NeighborLevel.N12)
        assert len(s.bases) == 7
        assert all(len(b) > 0 for b in s.bases)

    def test_grid_too_small(self):
        with pytest.raises(GridTooSmall):
            nc.gmrf_structure(2, 5, nc.NeighborLevel.N4)

    @pytest.mark.parametrize("level", list(nc.NeighborLevel))
    def test_bases_partition(self, level):
        s = nc.gmrf_structure(4, 5, level)
        seen = set()
        for b in s.bases:
            assert not (seen & b)
            seen |= b

    def test_parameter_counts(self):
        for level, count in [(nc.NeighborLevel.N4, 3), (nc.NeighborLevel.N8, 5), (nc.NeighborLevel.N12, 7)]:
            assert nc.gmrf_structure(3, 4, level).n_params == count


class TestPrecisionAssemble:
    def test_unit_vector_gives_identity(self):
        s = nc.gmrf_structure(4, 4, nc.NeighborLevel.N8)
        theta = np.zeros(5)
        theta[0] = 1.0
        P = nc.precision_assemble(s, theta)
        np.testing.assert_array_equal(P.values, np.eye(16))
        assert P.pd_certificate is not None

    def test_benchmark_theta_positive_definite(self):
        s = nc.gmrf_structure(10, 10, nc.NeighborLevel.N4)
        P = nc.precision_assemble(s, np.array([5.0, -0.2, 0.5]))
        assert P.pd_certificate is not None
        assert np.all(np.linalg.eigvalsh(P.values) > 0)

    def test_infeasible_theta_rejected(self):
        s = nc.gmrf_structure(10, 10, nc.NeighborLevel.N4)
        with pytest.raises(NotPositiveDefinite):
            nc.precision_assemble(s, np.array([0.1, -0.2, 0.5]))


class TestSpdMatrix:
    def test_asymmetric_rejected(self):
        with pytest.raises(ValueError):
            nc.SpdMatrix(values=np.array([[1.0, 0.5], [0.2, 1.0]]))

    def test_certificate_round_trip(self):
        A = np.array([[4.0, 1.0], [1.0, 3.0]])
        spd = nc.SpdMatrix.certified(A)
        np.testing.assert_allclose(spd.pd_certificate @ spd.pd_certificate.T, A, rtol=1e-12)

    def test_indefinite_rejected(self):
        with pytest.raises(NotPositiveDefinite):
            nc.SpdMatrix.certified(np.array([[1.0, 2.0], [2.0, 1.0]]))


class TestSampleSet:
    def test_non_finite_rejected(self):
        with pytest.raises(ValueError):
            nc.SampleSet(np.array([[1.0, np.inf]]))

    def test_dimensions(self):
        s = nc.SampleSet(np.zeros((3, 7)))
        assert (s.n, s.N) == (3, 7)

    def test_data_is_readonly(self):
        s = nc.SampleSet(np.ones((2, 2)))
        with pytest.raises(ValueError):
            s.data[0, 0] = 2.0
