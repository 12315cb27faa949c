import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays
from numpy.testing import assert_allclose, assert_array_equal

from dcclab import matrixkit as mk
from dcclab.errors import DomainError, NumericError

from conftest import random_spd


def brute_force_order(m):
    """Column-wise lower triangle enumeration, 1-based."""
    order = []
    for j in range(1, m + 1):
        for i in range(1, m + 1):
            if i >= j:
                order.append((i, j))
    return order


class TestPhi:
    @pytest.mark.parametrize("k, expected", [(1, (1, 1)), (2, (2, 1)), (3, (2, 2))])
    def test_m2(self, k, expected):
        assert mk.phi(k, 2) == expected

    @pytest.mark.parametrize("m", range(1, 8))
    def test_last_position_is_corner(self, m):
        assert mk.phi(mk.vech_length(m), m) == (m, m)

    def test_m3_k4(self):
        # brute-force order for m=3: (1,1) (2,1) (3,1) (2,2) (3,2) (3,3)
        assert brute_force_order(3)[3] == (2, 2)
        assert mk.phi(4, 3) == (2, 2)

    @pytest.mark.parametrize("m", range(1, 11))
    def test_bijection_against_enumeration(self, m):
        order = brute_force_order(m)
        assert [mk.phi(k, m) for k in range(1, len(order) + 1)] == order
        for k, (i, j) in enumerate(order, start=1):
            assert mk.phi_inv(i, j, m) == k
        idx = mk.sym_index_map(m)
        assert idx.m_star == m * (m + 1) // 2
        for k in range(idx.m_star):
            i, j = idx.forward[k]
            assert idx.backward[i, j] == k
        lower = {(i, j) for i in range(m) for j in range(i + 1)}
        assert {tuple(p) for p in idx.forward.tolist()} == lower

    @pytest.mark.parametrize("k", [0, 4, -1])
    def test_out_of_range(self, k):
        with pytest.raises(DomainError):
            mk.phi(k, 2)


class TestVech:
    def test_small(self):
        assert_array_equal(mk.vech([[1, 2], [2, 3]]), [1, 2, 3])
        assert_array_equal(mk.vech(np.eye(3)), [1, 0, 0, 1, 0, 1])

    def test_entries_follow_phi(self, rng):
        S = random_spd(rng, 4)
        v = mk.vech(S)
        for k in range(1, 11):
            i, j = mk.phi(k, 4)
            assert v[k - 1] == S[i - 1, j - 1]

    def test_roundtrip(self, rng):
        for _ in range(20):
            X = rng.standard_normal((4, 4))
            S = X + X.T
            assert_array_equal(mk.unvech(mk.vech(S)), S)

    def test_asymmetric_rejected(self):
        with pytest.raises(DomainError):
            mk.vech([[1.0, 2.0], [2.5, 1.0]])

    def test_bad_length(self):
        with pytest.raises(DomainError):
            mk.unvech(np.ones(4))


def test_vecd_and_diag_embed():
    assert_array_equal(mk.vecd(np.eye(3)), np.ones(3))
    assert_array_equal(mk.vecd([[1, 2], [3, 4]]), [1, 4])
    assert_array_equal(mk.diag_embed([2, 5]), [[2, 0], [0, 5]])
    assert_array_equal(mk.vecd(mk.diag_embed([0.3, -1.0, 7.0])), [0.3, -1.0, 7.0])


class TestKron:
    def test_identity(self):
        assert_array_equal(mk.kron(np.eye(2), np.eye(3)), np.eye(6))

    def test_power_one(self, rng):
        A = rng.standard_normal((3, 3))
        assert_array_equal(mk.kron_power(A, 1), A)

    def test_power_zero_rejected(self):
        with pytest.raises(DomainError):
            mk.kron_power(np.eye(2), 0)

    @pytest.mark.parametrize("p", [1, 2, 3])
    def test_functoriality(self, rng, p):
        for _ in range(10):
            A = rng.standard_normal((2, 2))
            x = rng.standard_normal(2)
            # direct expansion of (Ax)^{(x)p}
            y = A @ x
            lhs = y
            xp = x
            for _ in range(p - 1):
                lhs = np.array([a * b for a in lhs for b in y])
                xp = np.array([a * b for a in xp for b in x])
            assert_allclose(mk.kron_power(A, p) @ xp, lhs, atol=1e-12, rtol=1e-12)


class TestNorms:
    @pytest.mark.parametrize("m", [1, 2, 5])
    def test_identity(self, m):
        I = np.eye(m)
        for f in (mk.norm_max, mk.norm_spectral, mk.norm_induced_inf, mk.spectral_radius):
            assert f(I) == pytest.approx(1.0, abs=1e-15)
        assert mk.lambda_min_spd(I) == pytest.approx(1.0)

    def test_shift_is_nilpotent(self):
        T44 = mk.companion([np.zeros((3, 3))] * 3)
        assert mk.spectral_radius(T44) == pytest.approx(0.0, abs=1e-12)

    def test_scalar_order_one_volatility_block(self):
        assert mk.spectral_radius([[0.8, 0.1], [0.8, 0.1]]) == pytest.approx(0.9, abs=1e-14)

    def test_induced_inf_is_row_sum(self):
        M = np.array([[1.0, -2.0], [0.5, 0.25]])
        assert mk.norm_induced_inf(M) == 3.0
        assert mk.norm_max(M) == 2.0

    def test_norm_ordering(self, rng):
        for m in range(1, 7):
            for _ in range(20):
                M = rng.standard_normal((m, m))
                s = mk.norm_spectral(M)
                assert mk.norm_max(M) <= s + 1e-12
                assert s <= m * mk.norm_max(M) + 1e-12

    def test_spd_radius_equals_spectral_norm(self, rng):
        S = random_spd(rng, 4)
        assert mk.spectral_radius(S) == pytest.approx(mk.norm_spectral(S), rel=1e-12)

    def test_rank_one_spectral_norm(self, rng):
        for _ in range(50):
            eta = rng.standard_normal(int(rng.integers(1, 6)))
            assert mk.norm_spectral(np.outer(eta, eta)) == pytest.approx(eta @ eta, rel=1e-12, abs=1e-12)

    def test_power_iteration_matches_eig(self, rng):
        for _ in range(20):
            blocks = [rng.uniform(0, 0.5, (2, 2)) for _ in range(3)]
            C = mk.companion(blocks)
            assert mk.spectral_radius(C, method="power") == pytest.approx(
                mk.spectral_radius(C), abs=1e-9
            )

    def test_power_iteration_nonconvergence_reported(self):
        C = mk.companion([np.array([[0.5]]), np.array([[0.3]])])
        with pytest.raises(NumericError, match="did not converge"):
            mk.spectral_radius(C, method="power", max_iter=2)

    def test_power_rejects_negative(self):
        with pytest.raises(DomainError):
            mk.spectral_radius([[0.0, -1.0], [1.0, 0.0]], method="power")

    def test_lambda_min_requires_spd(self):
        with pytest.raises(DomainError):
            mk.lambda_min_spd([[1.0, 2.0], [2.0, 1.0]])


class TestSqrtSpd:
    def test_diagonal(self):
        assert_allclose(mk.sqrt_spd(np.diag([4.0, 9.0])), np.diag([2.0, 3.0]), atol=1e-15)

    @pytest.mark.parametrize("m", [1, 3, 6])
    def test_identity(self, m):
        assert_allclose(mk.sqrt_spd(np.eye(m)), np.eye(m), atol=1e-15)

    def test_w0(self):
        W0 = np.array([[1.0, 0.5], [0.5, 1.0]])
        S = mk.sqrt_spd(W0)
        assert_allclose(S @ S, W0, atol=1e-10)
        assert np.all(np.linalg.eigvalsh(S) > 0)

    def test_random(self, rng):
        for m in (2, 3, 5, 8):
            M = random_spd(rng, m)
            S = mk.sqrt_spd(M)
            scale = mk.norm_spectral(M)
            assert_allclose(S @ S, M, atol=mk.TAU_SQRT * scale)
            assert_allclose(S @ M, M @ S, atol=mk.TAU_SQRT * scale)
            assert_array_equal(S, S.T)
            assert np.linalg.eigvalsh(S)[0] > 0

    def test_not_spd(self):
        with pytest.raises(DomainError):
            mk.sqrt_spd([[1.0, 2.0], [2.0, 1.0]])


def lift_oracle(M, Q):
    return mk.vech(M @ Q @ M.T)


class TestLiftCongruence:
    @pytest.mark.parametrize("m", [1, 2, 3, 4])
    def test_scalar_identity(self, m):
        L = mk.lift_congruence(0.7 * np.eye(m))
        assert_allclose(L, 0.49 * np.eye(mk.vech_length(m)), atol=1e-15)

    def test_diagonal_entries(self):
        d = np.array([0.5, -0.8, 0.9])
        L = mk.lift_congruence(np.diag(d))
        expected = [d[mk.phi(l, 3)[0] - 1] * d[mk.phi(l, 3)[1] - 1] for l in range(1, 7)]
        assert_allclose(L, np.diag(expected), atol=1e-15)

    @pytest.mark.parametrize("m", [2, 3, 4])
    def test_defining_identity(self, rng, m):
        for _ in range(100):
            M = rng.standard_normal((m, m))
            Q = random_spd(rng, m)
            assert_allclose(mk.lift_congruence(M) @ mk.vech(Q), lift_oracle(M, Q), atol=1e-12, rtol=1e-12)

    def test_displayed_formula_misses_cross_terms(self, rng):
        # without the symmetrization term the identity breaks for a full M
        M = rng.standard_normal((2, 2))
        Q = random_spd(rng, 2)
        off = ~np.isclose(mk.lift_congruence_displayed(M) @ mk.vech(Q), lift_oracle(M, Q))
        assert off.any()
        # the two formulas coincide on diagonal M
        D = np.diag(rng.standard_normal(3))
        assert_array_equal(mk.lift_congruence_displayed(D), mk.lift_congruence(D))

    def test_dimension_mismatch(self):
        with pytest.raises(DomainError):
            mk.lift_congruence(np.eye(3), mk.sym_index_map(2))


finite = st.floats(-10, 10, allow_nan=False, allow_infinity=False)


@settings(max_examples=200, deadline=None)
@given(arrays(np.float64, (3, 3), elements=finite), arrays(np.float64, (3, 3), elements=finite))
def test_lift_identity_property(M, X):
    Q = X + X.T
    expected = lift_oracle(M, Q)
    got = mk.lift_congruence(M) @ mk.vech(Q)
    assert_allclose(got, expected, atol=1e-9 * (1 + np.abs(expected).max()))


@settings(max_examples=200, deadline=None)
@given(arrays(np.float64, (4, 4), elements=finite))
def test_vech_roundtrip_property(X):
    S = X + X.T
    assert_array_equal(mk.unvech(mk.vech(S)), S)


def test_companion_layout():
    C = mk.companion([np.full((2, 2), 1.0), np.full((2, 2), 2.0)])
    assert_array_equal(C[:2], [[1, 1, 2, 2], [1, 1, 2, 2]])
    assert_array_equal(C[2:], [[1, 0, 0, 0], [0, 1, 0, 0]])
    assert_array_equal(mk.companion([0.5]), [[0.5]])
