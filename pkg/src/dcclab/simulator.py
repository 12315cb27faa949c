"""
Trajectory generation for the DCC process.

A run starts from ``Q_0`` (default identity), ``R_0`` its correlation
matrix and ``h_{k,0}`` (default 1/2).  Residual and return lags before
``t = 1`` are drawn as ``eps_{-l} = R_0^{1/2} eta_{-l}`` and
``z_{-j} = D_0^{1/2} eps_{-j}``.  Each step computes ``D_t`` and ``Q_t``
from the lags, then ``R_t``, then ``eps_t = R_t^{1/2} eta_t`` and
``z_t = D_t^{1/2} eps_t``.
"""

from __future__ import annotations

import logging
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from dcclab import matrixkit as mk
from dcclab.chain import StateVector, layout_for
from dcclab.errors import DomainError, NumericError
from dcclab.innovations import InnovationSpec
from dcclab.model import DccSpec

__all__ = [
    "SimConfig",
    "History",
    "StepRecord",
    "Trajectory",
    "initial_history",
    "history_state",
    "step",
    "simulate",
    "MomentEstimate",
    "MomentDiagnostics",
    "moment_diagnostics",
    "RunSummary",
    "EnsembleResult",
    "summarize",
    "ensemble",
]

log = logging.getLogger(__name__)

R_EIG_TOL = 1e-12


@dataclass(frozen=True)
class SimConfig:
    horizon: int = 10_000
    burn_in: int = 0
    Q0: np.ndarray | None = None
    h0: np.ndarray | float = 0.5
    explode_threshold: float = 1e12
    stride: int = 1

    def __post_init__(self):
        if not self.horizon > self.burn_in >= 0:
            raise DomainError(f"need horizon > burn_in >= 0, got {self.horizon}, {self.burn_in}")
        if not self.explode_threshold > 0:
            raise DomainError("explode_threshold must be positive")
        if self.stride < 1:
            raise DomainError("stride must be >= 1")

    def initial_Q(self, m: int) -> np.ndarray:
        if self.Q0 is None:
            return np.eye(m)
        return mk.as_spd(self.Q0, "Q0")

    def initial_h(self, m: int) -> np.ndarray:
        h0 = np.broadcast_to(np.asarray(self.h0, dtype=float), (m,)).copy()
        if np.any(h0 <= 0):
            raise DomainError("h0 must be positive")
        return h0

    def to_dict(self) -> dict:
        return {
            "horizon": self.horizon,
            "burn_in": self.burn_in,
            "Q0": None if self.Q0 is None else np.asarray(self.Q0).tolist(),
            "h0": np.asarray(self.h0, dtype=float).tolist(),
            "explode_threshold": self.explode_threshold,
            "stride": self.stride,
        }


@dataclass(frozen=True)
class History:
    """Lag buffers, most recent first: ``h[0]`` is ``Vecd(D_t)``."""

    h: tuple
    z: tuple
    Q: tuple
    eps: tuple


@dataclass(frozen=True)
class StepRecord:
    z: np.ndarray
    eps: np.ndarray
    eta: np.ndarray
    h: np.ndarray
    Q: np.ndarray
    R: np.ndarray


def correlation_of(Q: np.ndarray) -> np.ndarray:
    d = 1.0 / np.sqrt(np.diag(Q))
    R = Q * d[:, None] * d[None, :]
    np.fill_diagonal(R, 1.0)
    return R


def _sqrt_correlation(R: np.ndarray) -> np.ndarray:
    # near-singular correlations occur under heavy tails; tolerate rounding-level negatives
    w, V = np.linalg.eigh(R)
    if w[0] < -R_EIG_TOL:
        raise NumericError(f"correlation matrix lost semi-definiteness (eigenvalue {w[0]:.3g})")
    S = (V * np.sqrt(np.maximum(w, 0.0))) @ V.T
    return 0.5 * (S + S.T)


def initial_history(spec: DccSpec, config: SimConfig, eta_pre: np.ndarray) -> History:
    """Lag buffers at ``t = 0``; `eta_pre` holds ``eta_0, eta_{-1}, ...``."""
    m = spec.m
    n_pre = max(spec.s, spec.mu)
    eta_pre = np.asarray(eta_pre, dtype=float).reshape(-1, m)
    if eta_pre.shape[0] < n_pre:
        raise DomainError(f"need {n_pre} pre-sample innovations, got {eta_pre.shape[0]}")
    Q0 = config.initial_Q(m)
    h0 = config.initial_h(m)
    R0_sqrt = _sqrt_correlation(correlation_of(Q0))
    eps = [R0_sqrt @ e for e in eta_pre[:n_pre]]
    z = [np.sqrt(h0) * e for e in eps]
    return History(
        h=tuple(h0.copy() for _ in range(spec.r)),
        z=tuple(z[: spec.s]),
        Q=tuple(Q0.copy() for _ in range(spec.nu)),
        eps=tuple(eps[: spec.mu]),
    )


def history_state(history: History, spec: DccSpec) -> StateVector:
    """Markov state built from lag buffers (no SPD re-validation)."""
    idx = mk.sym_index_map(spec.m)
    parts = list(history.h) + [z**2 for z in history.z]
    parts += [Q[idx.rows, idx.cols] for Q in history.Q]
    parts += [np.outer(e, e)[idx.rows, idx.cols] for e in history.eps]
    return StateVector(layout_for(spec), np.concatenate(parts))


def _advance(spec: DccSpec, history: History):
    h = spec.V0.copy()
    for A, hl in zip(spec.A, history.h):
        h += A @ hl
    for B, zl in zip(spec.B, history.z):
        h += B @ (zl * zl)
    Q = spec.W0.copy()
    for M, Ql in zip(spec.M, history.Q):
        Q += M @ Ql @ M.T
    for N, el in zip(spec.N, history.eps):
        v = N @ el
        Q += np.outer(v, v)
    Q = 0.5 * (Q + Q.T)
    return h, Q


def step(spec: DccSpec, history: History, eta) -> tuple[StepRecord, History]:
    """Advance one period given the innovation `eta`; pure."""
    eta = np.asarray(eta, dtype=float)
    with np.errstate(over="ignore", invalid="ignore"):
        h, Q = _advance(spec, history)
    if not (np.all(np.isfinite(Q)) and np.all(np.isfinite(h))):
        raise FloatingPointError("non-finite state")
    lam = np.linalg.eigvalsh(Q)[0]
    if lam <= 0:
        raise NumericError(f"Q_t lost positive definiteness (smallest eigenvalue {lam:.3g})")
    R = correlation_of(Q)
    eps = _sqrt_correlation(R) @ eta
    z = np.sqrt(h) * eps
    rec = StepRecord(z=z, eps=eps, eta=eta, h=h, Q=Q, R=R)
    new = History(
        h=((h,) + history.h)[: spec.r],
        z=((z,) + history.z)[: spec.s],
        Q=((Q,) + history.Q)[: spec.nu],
        eps=((eps,) + history.eps)[: spec.mu],
    )
    return rec, new


@dataclass
class Trajectory:
    """Recorded path of one run.

    Per-record arrays are indexed like `t`.  ``qmax`` and ``lam_min_Q``
    cover every simulated step ``t = 1..horizon`` (NaN after an explosion),
    independent of stride and burn-in.
    """

    m: int
    t: np.ndarray
    z: np.ndarray
    eps: np.ndarray
    eta: np.ndarray
    h: np.ndarray
    vech_Q: np.ndarray
    vech_R: np.ndarray
    qmax: np.ndarray
    lam_min_Q: np.ndarray
    horizon: int
    burn_in: int
    first_explosion_time: int | None = None
    eta_pre: np.ndarray | None = None

    @property
    def exploded(self) -> bool:
        return self.first_explosion_time is not None

    @property
    def max_qmax(self) -> float:
        return float(np.nanmax(self.qmax)) if np.any(np.isfinite(self.qmax)) else np.nan

    @property
    def terminal_R_offdiag(self) -> np.ndarray:
        idx = mk.sym_index_map(self.m)
        off = idx.rows != idx.cols
        if len(self.t) == 0:
            return np.full(int(off.sum()), np.nan)
        return self.vech_R[-1, off]

    def z_moments(self, max_order: int = 4) -> dict[int, np.ndarray]:
        return {p: np.mean(np.abs(self.z) ** p, axis=0) for p in range(1, max_order + 1)}

    def Q_at(self, i: int) -> np.ndarray:
        return mk.unvech(self.vech_Q[i])

    def R_at(self, i: int) -> np.ndarray:
        return mk.unvech(self.vech_R[i])


def simulate(
    spec: DccSpec,
    config: SimConfig,
    innovations: InnovationSpec,
    run: int = 0,
    observer: Callable[[int, History, StepRecord | None], None] | None = None,
) -> Trajectory:
    """Simulate one trajectory; deterministic in ``(innovations.seed, stream, run)``.

    `observer`, if given, is called as ``observer(0, history, None)`` before
    the first step and ``observer(t, history, record)`` after each step.
    """
    m = spec.m
    T = config.horizon
    n_pre = max(spec.s, spec.mu)
    rng = innovations.generator(run)
    etas = innovations.draw(rng, n_pre + T, m)
    eta_pre, etas = etas[:n_pre], etas[n_pre:]
    history = initial_history(spec, config, eta_pre)
    if observer is not None:
        observer(0, history, None)

    idx = mk.sym_index_map(m)
    rows, cols = idx.rows, idx.cols
    n_rec = len(range(config.burn_in + config.stride, T + 1, config.stride))
    rec_t = np.zeros(n_rec, dtype=np.int64)
    buf = {
        "z": np.empty((n_rec, m)),
        "eps": np.empty((n_rec, m)),
        "eta": np.empty((n_rec, m)),
        "h": np.empty((n_rec, m)),
        "Q": np.empty((n_rec, idx.m_star)),
        "R": np.empty((n_rec, idx.m_star)),
    }
    qmax = np.full(T, np.nan)
    lam_min = np.full(T, np.nan)
    explosion = None
    k = 0
    with np.errstate(over="ignore", invalid="ignore"):
        for t in range(1, T + 1):
            eta = etas[t - 1]
            h, Q = _advance(spec, history)
            qm = float(np.max(np.abs(Q)))
            if not np.isfinite(qm) or qm > config.explode_threshold or not np.all(np.isfinite(h)):
                qmax[t - 1] = qm
                explosion = t
                break
            lam = np.linalg.eigvalsh(Q)[0]
            if lam <= 0:
                raise NumericError(f"Q_t lost positive definiteness at t={t} (eigenvalue {lam:.3g})")
            R = correlation_of(Q)
            eps = _sqrt_correlation(R) @ eta
            z = np.sqrt(h) * eps
            if not np.all(np.isfinite(z)):
                qmax[t - 1] = qm
                explosion = t
                break
            qmax[t - 1] = qm
            lam_min[t - 1] = lam
            history = History(
                h=((h,) + history.h)[: spec.r],
                z=((z,) + history.z)[: spec.s],
                Q=((Q,) + history.Q)[: spec.nu],
                eps=((eps,) + history.eps)[: spec.mu],
            )
            if observer is not None:
                observer(t, history, StepRecord(z, eps, eta, h, Q, R))
            if t > config.burn_in and (t - config.burn_in) % config.stride == 0:
                rec_t[k] = t
                buf["z"][k] = z
                buf["eps"][k] = eps
                buf["eta"][k] = eta
                buf["h"][k] = h
                buf["Q"][k] = Q[rows, cols]
                buf["R"][k] = R[rows, cols]
                k += 1
    if explosion is not None:
        log.info("run %d exploded at t=%d", run, explosion)
    return Trajectory(
        m=m,
        t=rec_t[:k],
        z=buf["z"][:k],
        eps=buf["eps"][:k],
        eta=buf["eta"][:k],
        h=buf["h"][:k],
        vech_Q=buf["Q"][:k],
        vech_R=buf["R"][:k],
        qmax=qmax,
        lam_min_Q=lam_min,
        horizon=T,
        burn_in=config.burn_in,
        first_explosion_time=explosion,
        eta_pre=eta_pre,
    )


@dataclass(frozen=True)
class MomentEstimate:
    mean: np.ndarray
    std_error: np.ndarray
    half_ratio: np.ndarray

    def stable(self, band: tuple[float, float] = (0.5, 2.0)) -> bool:
        lo, hi = band
        r = self.half_ratio
        return bool(np.all(np.isfinite(r)) and np.all((r >= lo) & (r <= hi)))


@dataclass
class MomentDiagnostics:
    estimates: dict = field(default_factory=dict)
    n: int = 0

    def __getitem__(self, key: tuple[str, int]) -> MomentEstimate:
        return self.estimates[key]

    def stable(self, series: str = "z", order: int = 2, band=(0.5, 2.0)) -> bool:
        return self.estimates[(series, order)].stable(band)


def _moment(x: np.ndarray, p: int) -> MomentEstimate:
    with np.errstate(over="ignore", invalid="ignore"):
        y = np.abs(x) ** p
        n = y.shape[0]
        mean = y.mean(axis=0)
        se = y.std(axis=0, ddof=1) / np.sqrt(n) if n > 1 else np.full(y.shape[1], np.nan)
        half = n // 2
        first, second = y[:half].mean(axis=0), y[half:].mean(axis=0)
        ratio = second / first
    return MomentEstimate(mean, se, ratio)


def moment_diagnostics(traj: Trajectory, orders=(2, 4)) -> MomentDiagnostics:
    """Sample moments of |z|, h, |Q_ij| and |eps| over the recorded window.

    ``half_ratio`` compares the second half of the window with the first;
    a ratio far from one signals a moment that is not settling.
    """
    if traj.exploded:
        raise DomainError(f"trajectory exploded at t={traj.first_explosion_time}")
    if len(traj.t) < 4:
        raise DomainError("recorded window too short for moment estimates")
    out = MomentDiagnostics(n=len(traj.t))
    series = {"z": traj.z, "h": traj.h, "Q": traj.vech_Q, "eps": traj.eps}
    for p in sorted(set(orders)):
        for name, x in series.items():
            out.estimates[(name, p)] = _moment(x, p)
    return out


@dataclass
class RunSummary:
    run: int
    first_explosion_time: int | None = None
    max_qmax: float = np.nan
    qmax_T: float = np.nan
    qmax_T10: float = np.nan
    terminal_R_offdiag: np.ndarray | None = None
    second_moment_ratio: np.ndarray | None = None
    moments_stable: bool | None = None
    error: str | None = None

    @property
    def exploded(self) -> bool:
        return self.first_explosion_time is not None

    @property
    def unstable(self) -> bool:
        """Exploded, failed, or a second moment of z that does not settle."""
        return self.exploded or self.error is not None or self.moments_stable is False


def summarize(traj: Trajectory, run: int = 0) -> RunSummary:
    T = traj.horizon
    s = RunSummary(run=run, first_explosion_time=traj.first_explosion_time)
    s.max_qmax = traj.max_qmax
    s.qmax_T = float(traj.qmax[T - 1])
    s.qmax_T10 = float(traj.qmax[max(T // 10, 1) - 1])
    s.terminal_R_offdiag = traj.terminal_R_offdiag
    if not traj.exploded and len(traj.t) >= 4:
        est = moment_diagnostics(traj, orders=(2,))[("z", 2)]
        s.second_moment_ratio = est.half_ratio
        s.moments_stable = est.stable()
    return s


@dataclass
class EnsembleResult:
    summaries: list[RunSummary]

    @property
    def n_runs(self) -> int:
        return len(self.summaries)

    @property
    def explosion_fraction(self) -> float:
        return float(np.mean([s.exploded for s in self.summaries]))

    @property
    def error_count(self) -> int:
        return sum(s.error is not None for s in self.summaries)

    @property
    def unstable_count(self) -> int:
        return sum(s.unstable for s in self.summaries)

    def max_qmax_quantiles(self, qs=(0.05, 0.5, 0.95)) -> dict[float, float]:
        vals = np.array([s.max_qmax for s in self.summaries], dtype=float)
        vals = vals[np.isfinite(vals)]
        if vals.size == 0:
            return {q: np.nan for q in qs}
        return {q: float(np.quantile(vals, q)) for q in qs}

    @property
    def growth_ratio(self) -> float:
        """median ||Q_T||_max / median ||Q_{T/10}||_max over runs that reached T."""
        a = np.array([s.qmax_T for s in self.summaries], dtype=float)
        b = np.array([s.qmax_T10 for s in self.summaries], dtype=float)
        ok = np.isfinite(a) & np.isfinite(b)
        if not ok.any():
            return np.nan
        return float(np.median(a[ok]) / np.median(b[ok]))

    @property
    def terminal_R12(self) -> np.ndarray:
        return np.array(
            [
                s.terminal_R_offdiag[0]
                if s.terminal_R_offdiag is not None and len(s.terminal_R_offdiag)
                else np.nan
                for s in self.summaries
            ]
        )

    @property
    def terminal_R12_std(self) -> float:
        v = self.terminal_R12
        v = v[np.isfinite(v)]
        return float(np.std(v, ddof=1)) if v.size > 1 else np.nan

    def to_dict(self) -> dict:
        return {
            "n_runs": self.n_runs,
            "explosion_fraction": self.explosion_fraction,
            "errors": self.error_count,
            "unstable_runs": self.unstable_count,
            "max_qmax_quantiles": {str(k): v for k, v in self.max_qmax_quantiles().items()},
            "growth_ratio_T_over_T10": self.growth_ratio,
            "terminal_R12_std": self.terminal_R12_std,
        }


def _run_one(args) -> RunSummary:
    spec, config, innovations, run = args
    try:
        return summarize(simulate(spec, config, innovations, run=run), run)
    except Exception as exc:  # per-run failures must not abort the ensemble
        return RunSummary(run=run, error=f"{type(exc).__name__}: {exc}")


def resolve_parallelism(parallel: int | None) -> int:
    if parallel is not None:
        return max(1, int(parallel))
    env = os.environ.get("DCC_LAB_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            log.warning("ignoring malformed DCC_LAB_THREADS=%r", env)
    return 1


def ensemble(
    spec: DccSpec,
    config: SimConfig,
    innovations: InnovationSpec,
    n_runs: int,
    parallelism: int | None = None,
) -> EnsembleResult:
    """Independent runs keyed ``run = 0..n_runs-1``; output independent of `parallelism`."""
    if n_runs < 1:
        raise DomainError("n_runs must be >= 1")
    jobs = [(spec, config, innovations, run) for run in range(n_runs)]
    workers = min(resolve_parallelism(parallelism), n_runs)
    if workers == 1:
        summaries = [_run_one(j) for j in jobs]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            summaries = list(pool.map(_run_one, jobs))
    return EnsembleResult(summaries)
