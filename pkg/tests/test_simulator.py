import numpy as np
import pytest
from numpy.testing import assert_allclose, assert_array_equal

from dcclab import matrixkit as mk
from dcclab.errors import DomainError
from dcclab.innovations import InnovationSpec, Standardization
from dcclab.model import BENCHMARK_W0, build_scalar
from dcclab.simulator import (
    SimConfig,
    correlation_of,
    ensemble,
    initial_history,
    moment_diagnostics,
    resolve_parallelism,
    simulate,
    step,
    summarize,
)

from conftest import random_spec


def ccc_spec(m=2):
    W0 = np.array([[1.0, 0.3], [0.3, 1.0]]) if m == 2 else np.eye(m)
    return build_scalar(m, [0.0], [0.0], [0.0], [0.0], 0.4, W0)


class TestStep:
    def test_ccc_regime(self):
        spec = build_scalar(2, [0.5], [0.2], [0.0], [0.0], 1.0, BENCHMARK_W0)
        traj = simulate(spec, SimConfig(horizon=200), InnovationSpec.gaussian(seed=1))
        assert_allclose(traj.vech_Q, np.tile(mk.vech(BENCHMARK_W0), (200, 1)), rtol=0, atol=0)
        assert_allclose(traj.vech_R[:, 1], 0.5, rtol=1e-15)

    def test_constant_volatility(self, s4_stable):
        spec = s4_stable.replace(A=np.zeros((1, 2, 2)), B=np.zeros((1, 2, 2)))
        traj = simulate(spec, SimConfig(horizon=200), InnovationSpec.gaussian(seed=1))
        assert_array_equal(traj.h, 0.25)

    def test_one_step_hand_oracle(self, s4_stable):
        cfg = SimConfig(horizon=1)
        eta_pre = np.array([[0.7, -1.3]])
        hist = initial_history(s4_stable, cfg, eta_pre)
        # R0 = I so eps_0 = eta_0, z_0 = sqrt(1/2) eps_0
        assert_allclose(hist.eps[0], eta_pre[0], rtol=1e-15)
        eta1 = np.array([0.2, 0.4])
        rec, new = step(s4_stable, hist, eta1)
        e0 = eta_pre[0]
        Q1 = BENCHMARK_W0 + 0.999 * np.eye(2) + 3.0 * np.outer(e0, e0)
        assert_allclose(rec.Q, Q1, rtol=1e-14)
        h1 = 0.25 + 0.8 * 0.5 + 0.1 * 0.5 * e0**2
        assert_allclose(rec.h, h1, rtol=1e-14)
        d = 1 / np.sqrt(np.diag(Q1))
        R1 = Q1 * np.outer(d, d)
        assert_allclose(rec.R, R1, rtol=1e-14)
        assert_allclose(rec.eps, mk.sqrt_spd(R1) @ eta1, rtol=1e-12)
        assert_allclose(rec.z, np.sqrt(h1) * rec.eps, rtol=1e-14)
        assert new.Q[0] is rec.Q

    def test_step_matches_simulate(self, s4_stable):
        cfg = SimConfig(horizon=50)
        inn = InnovationSpec.gaussian(seed=4)
        traj = simulate(s4_stable, cfg, inn)
        hist = initial_history(s4_stable, cfg, traj.eta_pre)
        for k in range(50):
            rec, hist = step(s4_stable, hist, traj.eta[k])
            assert_array_equal(rec.z, traj.z[k])
            assert_array_equal(mk.vech(rec.Q), traj.vech_Q[k])

    def test_pre_sample_length(self):
        spec = build_scalar(2, [0.1], [0.1, 0.1, 0.1], [0.5], [0.1], 1.0, np.eye(2))
        with pytest.raises(DomainError):
            initial_history(spec, SimConfig(horizon=5), np.zeros((2, 2)))

    def test_non_finite_state(self, s4_stable):
        cfg = SimConfig(horizon=5)
        hist = initial_history(s4_stable, cfg, np.array([[1e200, 1e200]]))
        with pytest.raises(FloatingPointError):
            step(s4_stable, hist, np.zeros(2))


class TestSimulate:
    def test_invariants_on_random_specs(self):
        rng = np.random.default_rng(31)
        for case in range(8):
            spec = random_spec(rng, max_order=2)
            traj = simulate(spec, SimConfig(horizon=1000), InnovationSpec.gaussian(seed=case))
            assert not traj.exploded
            idx = mk.sym_index_map(spec.m)
            diag = idx.rows == idx.cols
            assert_array_equal(traj.vech_R[:, diag], 1.0)
            assert np.all(np.abs(traj.vech_R) <= 1 + 1e-12)
            for k in range(0, 1000, 97):
                assert np.linalg.eigvalsh(traj.R_at(k))[0] >= -1e-12
            assert np.all(traj.lam_min_Q >= np.linalg.eigvalsh(spec.W0)[0] - 1e-12)
            assert np.all(traj.h >= spec.V0 * (1 - 1e-15))

    def test_deterministic(self, s4_stable):
        cfg = SimConfig(horizon=500)
        a = simulate(s4_stable, cfg, InnovationSpec.gaussian(seed=7))
        b = simulate(s4_stable, cfg, InnovationSpec.gaussian(seed=7))
        for name in ("z", "eps", "eta", "h", "vech_Q", "vech_R", "qmax"):
            assert getattr(a, name).tobytes() == getattr(b, name).tobytes()
        c = simulate(s4_stable, cfg, InnovationSpec.gaussian(seed=8))
        assert not np.array_equal(a.z, c.z)
        d = simulate(s4_stable, cfg, InnovationSpec.gaussian(seed=7), run=1)
        assert not np.array_equal(a.z, d.z)

    def test_stride_and_burn_in(self, s4_stable):
        inn = InnovationSpec.gaussian(seed=2)
        full = simulate(s4_stable, SimConfig(horizon=1000), inn)
        strided = simulate(s4_stable, SimConfig(horizon=1000, burn_in=100, stride=10), inn)
        assert len(strided.t) == 90
        assert_array_equal(strided.t, np.arange(110, 1001, 10))
        assert_array_equal(strided.vech_Q, full.vech_Q[strided.t - 1])
        assert_array_equal(strided.qmax, full.qmax)

    def test_explosion_flag(self, s4_explosive):
        cfg = SimConfig(horizon=10_000, explode_threshold=1e6)
        traj = simulate(s4_explosive, cfg, InnovationSpec.gaussian(seed=1))
        assert traj.exploded
        t = traj.first_explosion_time
        assert traj.qmax[t - 1] > 1e6
        assert np.all(traj.qmax[: t - 1] <= 1e6)
        assert np.all(np.isnan(traj.qmax[t:]))
        assert traj.t[-1] == t - 1
        with pytest.raises(DomainError):
            moment_diagnostics(traj)

    def test_benchmark_stable_run(self, s4_stable):
        traj = simulate(s4_stable, SimConfig(horizon=10_000), InnovationSpec.gaussian(seed=0))
        assert not traj.exploded
        assert np.all(np.abs(traj.vech_R[:, 1]) <= 1)
        # stationary mean of Q_ii is (W0_ii + n^2) / (1 - m^2) = 4000
        tail = traj.qmax[5000:]
        assert 2000 < np.median(tail) < 8000

    def test_explosive_run_growth(self, s4_explosive):
        traj = simulate(s4_explosive, SimConfig(horizon=10_000), InnovationSpec.gaussian(seed=0))
        assert traj.qmax[-1] > 10 * traj.qmax[999]
        # R_12 settles while Q blows up
        r12 = traj.vech_R[:, 1]
        assert np.std(r12[-500:]) < 0.05

    def test_ccc_covariance(self):
        spec = ccc_spec()
        traj = simulate(spec, SimConfig(horizon=50_000), InnovationSpec.gaussian(seed=12))
        H = 0.4 * np.array([[1.0, 0.3], [0.3, 1.0]])
        z = traj.z
        prods = np.stack([z[:, 0] ** 2, z[:, 0] * z[:, 1], z[:, 1] ** 2], axis=1)
        mean = prods.mean(axis=0)
        se = prods.std(axis=0, ddof=1) / np.sqrt(len(z))
        assert np.all(np.abs(mean - mk.vech(H)) <= 3 * se)

    def test_conditional_correlation_law(self):
        # eps = R^{1/2} eta with R held fixed has covariance R
        R = np.array([[1.0, -0.6, 0.2], [-0.6, 1.0, 0.1], [0.2, 0.1, 1.0]])
        S = mk.sqrt_spd(R)
        eta = InnovationSpec.gaussian(seed=3).draw(np.random.default_rng(3), 1_000_000, 3)
        eps = eta @ S.T
        for i in range(3):
            for j in range(i + 1):
                p = eps[:, i] * eps[:, j]
                se = p.std(ddof=1) / np.sqrt(p.size)
                assert abs(p.mean() - R[i, j]) <= 3 * se

    def test_correlation_of(self, rng):
        from conftest import random_spd

        Q = random_spd(rng, 4)
        R = correlation_of(Q)
        assert_array_equal(np.diag(R), 1.0)
        assert_allclose(R, R.T, atol=1e-15)

    def test_config_validation(self):
        with pytest.raises(DomainError):
            SimConfig(horizon=10, burn_in=10)
        with pytest.raises(DomainError):
            SimConfig(explode_threshold=0)
        with pytest.raises(DomainError):
            SimConfig(stride=0)
        with pytest.raises(DomainError):
            SimConfig(h0=-1.0).initial_h(2)


class TestMoments:
    def test_ccc_second_moment(self):
        spec = ccc_spec()
        traj = simulate(spec, SimConfig(horizon=50_000), InnovationSpec.gaussian(seed=5))
        est = moment_diagnostics(traj, orders=(2, 4))[("z", 2)]
        assert np.all(np.abs(est.mean - 0.4) <= 3 * est.std_error)
        assert est.stable()

    def test_benchmark_window_stability(self, s4_stable):
        traj = simulate(s4_stable, SimConfig(horizon=10_000), InnovationSpec.gaussian(seed=6))
        md = moment_diagnostics(traj)
        assert md.stable("z", 2)
        assert set(md.estimates) == {(s, p) for s in ("z", "h", "Q", "eps") for p in (2, 4)}

    def test_heavy_tail_fourth_moment_unstable(self, s4_stable):
        unstable = 0
        for seed in range(10):
            traj = simulate(s4_stable, SimConfig(horizon=10_000), InnovationSpec.student(1.5, seed=seed))
            if traj.exploded or not moment_diagnostics(traj, orders=(4,)).stable("z", 4):
                unstable += 1
        assert unstable >= 6

    def test_short_window(self, s4_stable):
        traj = simulate(s4_stable, SimConfig(horizon=3), InnovationSpec.gaussian())
        with pytest.raises(DomainError):
            moment_diagnostics(traj)


class TestInnovations:
    def test_student_unit_variance(self):
        inn = InnovationSpec.student(4.0, seed=1)
        assert inn.resolved_standardization is Standardization.UNIT_VARIANCE
        assert inn.scale == pytest.approx(np.sqrt(0.5))
        x = inn.draw(inn.generator(), 400_000, 1)[:, 0]
        assert x.var() == pytest.approx(1.0, abs=0.05)
        assert inn.mean_norm_sq(2) == pytest.approx(2.0)

    def test_student_low_dof_is_unit_scale(self):
        inn = InnovationSpec.student(1.2)
        assert inn.resolved_standardization is Standardization.UNIT_SCALE
        assert inn.scale == 1.0
        assert inn.mean_norm_sq(2) == np.inf

    def test_unit_variance_needs_dof_above_two(self):
        with pytest.raises(DomainError):
            InnovationSpec.student(1.5, standardization="unit_variance")

    def test_seed_range(self):
        with pytest.raises(DomainError):
            InnovationSpec.gaussian(seed=2**64)

    def test_dict_roundtrip(self):
        inn = InnovationSpec.student(2.5, seed=9, stream=3)
        assert InnovationSpec.from_dict(inn.to_dict()) == inn

    def test_components_independent(self):
        inn = InnovationSpec.student(4.0, seed=2)
        x = inn.draw(inn.generator(), 200_000, 2)
        p = x[:, 0] * x[:, 1]
        assert abs(p.mean()) <= 3 * p.std() / np.sqrt(p.size)


class TestEnsemble:
    def test_single_run_equals_simulate(self, s4_stable):
        cfg = SimConfig(horizon=500)
        inn = InnovationSpec.gaussian(seed=3)
        res = ensemble(s4_stable, cfg, inn, 1)
        direct = summarize(simulate(s4_stable, cfg, inn, run=0), 0)
        s = res.summaries[0]
        assert s.max_qmax == direct.max_qmax
        assert_array_equal(s.terminal_R_offdiag, direct.terminal_R_offdiag)
        assert_array_equal(s.second_moment_ratio, direct.second_moment_ratio)

    def test_parallel_invariance(self, s4_stable):
        cfg = SimConfig(horizon=300)
        inn = InnovationSpec.gaussian(seed=3)
        a = ensemble(s4_stable, cfg, inn, 4, parallelism=1)
        b = ensemble(s4_stable, cfg, inn, 4, parallelism=2)
        assert [s.max_qmax for s in a.summaries] == [s.max_qmax for s in b.summaries]
        assert_array_equal(a.terminal_R12, b.terminal_R12)

    def test_runs_differ(self, s4_stable):
        res = ensemble(s4_stable, SimConfig(horizon=300), InnovationSpec.gaussian(seed=3), 3)
        assert len(set(res.terminal_R12.tolist())) == 3

    def test_errors_do_not_abort(self, s4_stable, monkeypatch):
        import dcclab.simulator as sim

        real = sim.simulate

        def flaky(spec, config, innovations, run=0, observer=None):
            if run == 1:
                raise RuntimeError("boom")
            return real(spec, config, innovations, run=run)

        monkeypatch.setattr(sim, "simulate", flaky)
        res = ensemble(s4_stable, SimConfig(horizon=100), InnovationSpec.gaussian(), 3)
        assert res.error_count == 1
        assert "boom" in res.summaries[1].error
        assert res.summaries[1].unstable
        assert res.summaries[2].error is None

    def test_n_runs_positive(self, s4_stable):
        with pytest.raises(DomainError):
            ensemble(s4_stable, SimConfig(horizon=10), InnovationSpec.gaussian(), 0)

    def test_resolve_parallelism(self, monkeypatch):
        monkeypatch.delenv("DCC_LAB_THREADS", raising=False)
        assert resolve_parallelism(None) == 1
        monkeypatch.setenv("DCC_LAB_THREADS", "3")
        assert resolve_parallelism(None) == 3
        assert resolve_parallelism(2) == 2
        monkeypatch.setenv("DCC_LAB_THREADS", "lots")
        assert resolve_parallelism(None) == 1

    def test_aggregates(self, s4_explosive):
        res = ensemble(s4_explosive, SimConfig(horizon=3000, explode_threshold=1e5), InnovationSpec.gaussian(), 4)
        d = res.to_dict()
        assert d["n_runs"] == 4
        assert 0 <= d["explosion_fraction"] <= 1
        q = res.max_qmax_quantiles()
        assert q[0.05] <= q[0.5] <= q[0.95]
