"""
Sufficient conditions for stationarity and uniqueness of DCC solutions.

All criteria here are sufficient, never necessary: a failed check means
"not established", and reports are worded accordingly.

Deterministic checks compare with a strict inequality and no slack.
Monte Carlo checks pass when ``estimate + 2 * std_error < 0``.
"""

from __future__ import annotations

import functools
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Callable

import numpy as np
from scipy.signal import lfilter

from dcclab import chain
from dcclab import matrixkit as mk
from dcclab.errors import DomainError, NumericError, StructureError
from dcclab.innovations import InnovationSpec, make_generator
from dcclab.model import DccSpec, StructureKind, detect_structure

__all__ = [
    "BoundConstants",
    "NormCheck",
    "SpectralCheck",
    "MarginCheck",
    "LyapunovEstimate",
    "LogMomentCheck",
    "XiSeries",
    "McSettings",
    "StationarityReport",
    "compute_constants",
    "check_existence_norms",
    "check_existence_spectral_p1",
    "check_diagonal_eq9",
    "check_scalar_sums",
    "t33_norm",
    "xi_process",
    "default_burn_in",
    "q_bound_process",
    "q_bound_bounded",
    "finite_start_Q_bound",
    "lambda_floor_path",
    "lambda_floor_horizon",
    "top_lyapunov",
    "estimate_lyapunov_N",
    "log_norm_upper_bound",
    "check_uniqueness_scalar_eq14",
    "full_report",
]

log = logging.getLogger(__name__)

NEAR_UNIT = 0.99
RESCALE_LO, RESCALE_HI = 1e-100, 1e100
LYAP_KEY = 7001
LOG_MOMENT_KEY = 7002


@dataclass(frozen=True)
class BoundConstants:
    """Eigenvalue and diagonal floors of ``Q_t``.

    ``C_lambda = lambda_min(W0)``, ``C_q = min_i W0_ii``; the starred
    versions divide by ``1 - sum_k (m^(k))^2`` and exist only when every
    ``M_k`` is scalar and that sum is below one.
    """

    C_lambda: float
    C_q: float
    C_lambda_star: float | None = None
    C_q_star: float | None = None

    @property
    def has_starred(self) -> bool:
        return self.C_lambda_star is not None


def _m_sq_sum(spec: DccSpec) -> float | None:
    st = detect_structure(spec)
    if not st.m_scalar:
        return None
    return float(sum(c * c for c in st.m_coefs))


def compute_constants(spec: DccSpec, require_starred: bool = False) -> BoundConstants:
    C_lambda = float(np.linalg.eigvalsh(spec.W0)[0])
    C_q = float(np.min(np.diag(spec.W0)))
    total = _m_sq_sum(spec)
    if total is None or not total < 1:
        if require_starred:
            raise StructureError(
                "starred constants need scalar M_k with sum of squared coefficients < 1"
            )
        return BoundConstants(C_lambda, C_q)
    return BoundConstants(C_lambda, C_q, C_lambda / (1 - total), C_q / (1 - total))


# -- existence ---------------------------------------------------------------


@dataclass(frozen=True)
class NormCheck:
    vol_sum: float
    corr_sum: float
    norm: str
    passed: bool


@dataclass(frozen=True)
class SpectralCheck:
    rho: float
    passed: bool


@dataclass(frozen=True)
class MarginCheck:
    vol_sums: np.ndarray
    corr_sums: np.ndarray
    passed: bool

    def to_dict(self) -> dict:
        return {
            "vol_sums": self.vol_sums.tolist(),
            "corr_sums": self.corr_sums.tolist(),
            "passed": self.passed,
        }


_NORMS = {"induced_inf": mk.norm_induced_inf, "spectral": mk.norm_spectral}


def check_existence_norms(spec: DccSpec, norm: str = "induced_inf") -> NormCheck:
    """Operator-norm sums over the volatility and lifted correlation matrices.

    The loading matrices N_l play no role.
    """
    try:
        f = _NORMS[norm]
    except KeyError:
        raise ValueError(f"norm must be one of {sorted(_NORMS)}, got {norm!r}") from None
    vol = sum(f(A) for A in spec.A) + sum(f(B) for B in spec.B)
    corr = sum(f(Mt) for Mt in chain.lifted_M(spec))
    return NormCheck(float(vol), float(corr), norm, bool(vol < 1 and corr < 1))


def check_existence_spectral_p1(spec: DccSpec) -> SpectralCheck:
    try:
        rho = mk.spectral_radius(chain.build_T_star(spec))
    except NumericError as exc:
        raise NumericError(f"first-moment spectral check: {exc}") from exc
    return SpectralCheck(rho, bool(rho < 1))


def check_diagonal_eq9(spec: DccSpec) -> MarginCheck:
    """Per-margin volatility sums and per-vech-position lifted correlation sums."""
    st = detect_structure(spec)
    if st.kind not in (StructureKind.DIAGONAL, StructureKind.SCALAR):
        raise StructureError(f"margin-wise criterion needs a diagonal model, got {st.kind.value}")
    vol = sum(np.diag(A) for A in spec.A) + sum(np.diag(B) for B in spec.B)
    idx = mk.sym_index_map(spec.m)
    corr = sum(np.abs(np.diag(M)[idx.rows] * np.diag(M)[idx.cols]) for M in spec.M)
    return MarginCheck(vol, corr, bool(np.max(vol) < 1 and np.max(corr) < 1))


def check_scalar_sums(spec: DccSpec) -> NormCheck:
    """Scalar-model reduction: ``sum a + sum b < 1`` and ``sum m^2 < 1``."""
    st = detect_structure(spec)
    if st.kind is not StructureKind.SCALAR:
        raise StructureError(f"scalar criterion needs a scalar model, got {st.kind.value}")
    vol = sum(st.a_coefs) + sum(st.b_coefs)
    corr = sum(c * c for c in st.m_coefs)
    return NormCheck(float(vol), float(corr), "scalar", bool(vol < 1 and corr < 1))


# -- bound processes ---------------------------------------------------------


def t33_norm(spec: DccSpec) -> float:
    return mk.norm_spectral(chain.build_T33(spec))


def default_burn_in(contraction: float) -> int:
    return int(max(1000, np.ceil(10.0 / (1.0 - contraction))))


@functools.lru_cache(maxsize=64)
def _warn_near_unit(rho: float) -> None:
    # Monte Carlo loops call the bound builders many times; say it once
    log.warning("||T33||_s = %.6g is close to one; forgetting is slow", rho)


def _require_u1(spec: DccSpec) -> float:
    rho = t33_norm(spec)
    if not rho < 1:
        raise DomainError(f"||T33||_s = {rho:.6g} >= 1: the bound series diverges")
    if rho > NEAR_UNIT:
        _warn_near_unit(rho)
    return rho


@dataclass(frozen=True)
class XiSeries:
    values: np.ndarray
    contraction: float
    init: float
    burn_in: int
    truncation_bound: float


def xi_process(
    spec: DccSpec,
    eta_norm_sq,
    burn_in: int | None = None,
    mean_norm_sq: float | None = None,
) -> XiSeries:
    """Geometric filter ``xi_t = ||T33||_s xi_{t-1} + ||eta_t||^2``.

    The filter starts at ``mean / (1 - ||T33||_s)`` where `mean_norm_sq`
    defaults to the sample mean of the input, then the first `burn_in`
    outputs are dropped.  ``truncation_bound`` is the weight the start value
    still carries on the first kept output.
    """
    rho = _require_u1(spec)
    x = np.asarray(eta_norm_sq, dtype=float)
    if burn_in is None:
        burn_in = default_burn_in(rho)
    if burn_in >= x.size:
        raise DomainError(f"burn_in={burn_in} leaves no output from {x.size} inputs")
    mean = float(np.mean(x)) if mean_norm_sq is None else float(mean_norm_sq)
    if not np.isfinite(mean):
        mean = float(np.mean(x))
    init = mean / (1.0 - rho)
    y, _ = lfilter([1.0], [1.0, -rho], x, zi=[rho * init])
    # weight of init on output index burn_in is rho^(burn_in + 1)
    trunc = init * rho ** (burn_in + 1)
    return XiSeries(y[burn_in:], rho, init, burn_in, float(trunc))


def _q_terms(spec: DccSpec, rho: float) -> tuple[float, np.ndarray]:
    m = spec.m
    base = np.linalg.norm(mk.vech(spec.W0)) / (1.0 - rho)
    weights = np.sqrt(m**3 * (m + 1) / 2.0) * np.array(
        [mk.norm_spectral(Nt) for Nt in chain.lifted_N(spec)]
    )
    return float(base), weights


def q_bound_process(spec: DccSpec, xi) -> np.ndarray:
    """Upper bound on ``||Q_t||_max`` driven by past ``xi`` values.

    With ``xi`` indexed ``0..n-1``, entry ``k`` of the result is the bound
    at time ``mu + k``, so the output has ``n - mu + 1`` entries.
    """
    rho = _require_u1(spec)
    base, w = _q_terms(spec, rho)
    xi = np.asarray(xi.values if isinstance(xi, XiSeries) else xi, dtype=float)
    mu = spec.mu
    if xi.size < mu:
        raise DomainError(f"need at least {mu} xi values")
    n_out = xi.size - mu + 1
    q = np.full(n_out, base)
    for l in range(1, mu + 1):
        q += w[l - 1] * xi[mu - l : mu - l + n_out]
    return q


def q_bound_bounded(spec: DccSpec, C_eta: float) -> float:
    """Constant bound when ``||eta_t||_2 <= C_eta`` almost surely."""
    rho = _require_u1(spec)
    base, w = _q_terms(spec, rho)
    return float(base + w.sum() * C_eta**2 / (1.0 - rho))


def finite_start_Q_bound(spec: DccSpec, x3_0, eps_seq) -> np.ndarray:
    """Bound on ``||X^(3)_t||_2`` for a chain started at a known ``X^(3)_0``.

    ``b_t = ||T33||_s b_{t-1} + ||pi_t||_2`` with ``b_0 = ||X^(3)_0||_2`` and
    ``pi_t = vech(W0) + sum_l Ntilde_l vech(eps_{t-l} eps_{t-l}')``.
    `eps_seq` is chronological, starting at ``eps_{1-mu}``; the result holds
    ``b_1 .. b_T`` with ``T = len(eps_seq) - mu + 1``.  No contraction
    condition is needed for this finite-horizon form.
    """
    rho = t33_norm(spec)
    eps_seq = np.asarray(eps_seq, dtype=float)
    mu = spec.mu
    idx = mk.sym_index_map(spec.m)
    outer = eps_seq[:, idx.rows] * eps_seq[:, idx.cols]
    n_out = eps_seq.shape[0] - mu + 1
    pi = np.tile(mk.vech(spec.W0), (n_out, 1))
    for l, Nt in enumerate(chain.lifted_N(spec), start=1):
        # eps_{t-l} sits at row (t - l) + (mu - 1) for t = 1..T
        pi += outer[mu - l : mu - l + n_out] @ Nt.T
    pnorm = np.linalg.norm(pi, axis=1)
    b0 = float(np.linalg.norm(x3_0))
    b, _ = lfilter([1.0], [1.0, -rho], pnorm, zi=[rho * b0])
    return b


def lambda_floor_path(spec: DccSpec, lam0, horizon: int) -> np.ndarray:
    """Deterministic lower bounds on ``lambda_min(Q_t)``, ``t = 1..horizon``.

    With scalar ``M_k``: ``l_t = lambda_min(W0) + sum_k m_k^2 l_{t-k}``,
    started from ``lam0`` (one value per lag, most recent first, or a
    scalar).  Without scalar ``M_k`` the floor is ``lambda_min(W0)``.
    """
    C_lambda = float(np.linalg.eigvalsh(spec.W0)[0])
    st = detect_structure(spec)
    if not st.m_scalar:
        return np.full(horizon, C_lambda)
    c = np.array([x * x for x in st.m_coefs])
    lags = list(np.broadcast_to(np.asarray(lam0, dtype=float), (spec.nu,)))
    out = np.empty(horizon)
    for t in range(horizon):
        cur = C_lambda + float(np.dot(c, lags))
        out[t] = cur
        lags = [cur] + lags[:-1]
    return out


def lambda_floor_horizon(spec: DccSpec, lam0, eps_trunc: float = 1e-6, max_horizon: int = 10**7) -> int:
    """First ``t`` with floor ``>= C*_lambda (1 - eps_trunc)`` (partially scalar regime)."""
    target = compute_constants(spec, require_starred=True).C_lambda_star * (1 - eps_trunc)
    n = 1024
    while n <= max_horizon:
        path = lambda_floor_path(spec, lam0, n)
        hit = np.flatnonzero(path >= target)
        if hit.size:
            return int(hit[0]) + 1
        n *= 4
    raise NumericError(f"floor did not reach {target:.6g} within {max_horizon} steps")


# -- Lyapunov exponent -------------------------------------------------------


@dataclass(frozen=True)
class LyapunovEstimate:
    gamma_hat: float
    std_error: float
    horizon: int
    replications: int
    rescalings: int
    per_replication: np.ndarray = field(repr=False)
    log_norm_bound: float | None = None

    @property
    def passed(self) -> bool:
        return bool(self.gamma_hat + 2 * self.std_error < 0)

    def to_dict(self) -> dict:
        return {
            "gamma_hat": self.gamma_hat,
            "std_error": self.std_error,
            "horizon": self.horizon,
            "replications": self.replications,
            "rescalings": self.rescalings,
            "log_norm_bound": self.log_norm_bound,
            "passed": self.passed,
        }


def _log_product_norm(mats: np.ndarray) -> tuple[float, int]:
    """``log ||N_1 N_2 ... N_t||_s`` with renormalization; returns (value, rescalings)."""
    if mats.shape[1] == 1:
        b = mats[:, 0, 0]
        with np.errstate(divide="ignore"):
            return float(np.sum(np.log(np.abs(b)))), 0
    P = np.eye(mats.shape[1])
    acc = 0.0
    rescales = 0
    for N in mats:
        P = P @ N
        a = np.max(np.abs(P))
        if not (RESCALE_LO <= a <= RESCALE_HI):
            if a == 0 or not np.isfinite(a):
                if a == 0:
                    return -np.inf, rescales
                raise NumericError("matrix product overflowed between renormalizations")
            s = mk.norm_spectral(P)
            P = P / s
            acc += np.log(s)
            rescales += 1
    s = mk.norm_spectral(P)
    return float(acc + (np.log(s) if s > 0 else -np.inf)), rescales


def top_lyapunov(
    draw: Callable[[np.random.Generator, int], np.ndarray],
    horizon: int,
    replications: int,
    seed: int = 0,
    key: int = LYAP_KEY,
    parallelism: int = 1,
) -> LyapunovEstimate:
    """Monte Carlo top Lyapunov exponent of i.i.d.-driven matrix products.

    ``draw(rng, horizon)`` returns the ``(horizon, k, k)`` sequence of one
    replication.  Replication ``i`` uses generator ``(seed, key, i)``, so
    the result does not depend on `parallelism` (number of worker threads).
    """
    if replications < 1 or horizon < 1:
        raise DomainError("horizon and replications must be positive")

    def one(i):
        mats = np.asarray(draw(make_generator(seed, key, i), horizon), dtype=float)
        return _log_product_norm(mats)

    if parallelism > 1:
        with ThreadPoolExecutor(max_workers=parallelism) as pool:
            results = list(pool.map(one, range(replications)))
    else:
        results = [one(i) for i in range(replications)]
    gammas = np.array([lp / horizon for lp, _ in results])
    total_rescales = sum(n for _, n in results)
    gamma = float(np.mean(gammas))
    if gamma == -np.inf or replications == 1:
        # a product that hits zero has exponent -inf; no spread to report
        se = 0.0
    else:
        se = float(np.std(gammas, ddof=1) / np.sqrt(replications))
    return LyapunovEstimate(gamma, se, horizon, replications, total_rescales, gammas)


def _constants_pair(spec: DccSpec, starred: bool) -> tuple[float, float]:
    c = compute_constants(spec, require_starred=starred)
    return (c.C_lambda_star, c.C_q_star) if starred else (c.C_lambda, c.C_q)


def _n_star_sequence(
    spec: DccSpec,
    innovations: InnovationSpec,
    rng: np.random.Generator,
    horizon: int,
    starred: bool,
    burn_in: int | None,
) -> np.ndarray:
    rho = _require_u1(spec)
    if burn_in is None:
        burn_in = default_burn_in(rho)
    mu = spec.mu
    n = burn_in + mu + horizon
    eta_sq = np.sum(innovations.draw(rng, n, spec.m) ** 2, axis=1)
    xi = xi_process(spec, eta_sq[:-1], burn_in=burn_in, mean_norm_sq=innovations.mean_norm_sq(spec.m))
    q = q_bound_process(spec, xi)[:horizon]
    eta_t = eta_sq[burn_in + mu : burn_in + mu + horizon]
    C_l, C_q = _constants_pair(spec, starred)
    mult = chain.beta_multiplier(spec.m, C_l, C_q)
    loading = mult * eta_t * np.sqrt(q)
    kappa = max(spec.nu, spec.mu)
    m_part = np.zeros(kappa)
    m_part[: spec.nu] = chain._spectral_sq(spec.M)
    n_part = np.zeros(kappa)
    n_part[: spec.mu] = chain._spectral_sq(spec.N)
    mats = np.zeros((horizon, kappa, kappa))
    mats[:, 0, :] = m_part[None, :] + loading[:, None] * n_part[None, :]
    if kappa > 1:
        mats[:, np.arange(1, kappa), np.arange(kappa - 1)] = 1.0
    return mats


def estimate_lyapunov_N(
    spec: DccSpec,
    innovations: InnovationSpec,
    horizon: int = 10_000,
    replications: int = 20,
    seed: int | None = None,
    starred: bool = False,
    burn_in: int | None = None,
    parallelism: int = 1,
) -> LyapunovEstimate:
    """Top Lyapunov exponent of the companion sequence built from ``beta_{j,t}``.

    Each replication simulates innovations, the geometric filter ``xi_t``,
    the bound ``q_t`` and the matrices ``N*_t``, then accumulates the log
    norm of their running product.  The cheap bound ``E ln ||N*_1||_s`` is
    returned alongside.
    """
    if horizon < 1000:
        raise DomainError(f"horizon must be >= 1000, got {horizon}")
    _require_u1(spec)
    seed = innovations.seed if seed is None else seed

    def draw(rng, T):
        return _n_star_sequence(spec, innovations, rng, T, starred, burn_in)

    est = top_lyapunov(draw, horizon, replications, seed=seed, parallelism=parallelism)
    bound = log_norm_upper_bound(spec, innovations, samples=horizon, seed=seed, starred=starred, burn_in=burn_in)
    return LyapunovEstimate(
        est.gamma_hat, est.std_error, est.horizon, est.replications, est.rescalings,
        est.per_replication, bound,
    )


def log_norm_upper_bound(
    spec: DccSpec,
    innovations: InnovationSpec,
    samples: int = 10_000,
    seed: int = 0,
    starred: bool = False,
    burn_in: int | None = None,
) -> float:
    """Sample mean of ``ln ||N*_t||_s``, an upper bound on the exponent."""
    mats = _n_star_sequence(spec, innovations, make_generator(seed, LYAP_KEY, 10**6), samples, starred, burn_in)
    with np.errstate(divide="ignore"):
        if mats.shape[1] == 1:
            return float(np.mean(np.log(np.abs(mats[:, 0, 0]))))
        return float(np.mean(np.log(np.linalg.norm(mats, ord=2, axis=(1, 2)))))


@dataclass(frozen=True)
class LogMomentCheck:
    expectation: float
    std_error: float
    samples: int
    passed: bool


def _stationary_xi_draws(rho, mean, burn_in, rng, innovations, n, m) -> np.ndarray:
    xi = np.full(n, mean / (1.0 - rho))
    for _ in range(burn_in):
        xi = rho * xi + np.sum(innovations.draw(rng, n, m) ** 2, axis=1)
    return xi


def check_uniqueness_scalar_eq14(
    spec: DccSpec,
    innovations: InnovationSpec,
    samples: int = 4000,
    seed: int | None = None,
    paired: bool = False,
    starred: bool = False,
    burn_in: int | None = None,
) -> LogMomentCheck:
    """Monte Carlo ``E ln(m^2 + n^2 c ||eta_t||^2 sqrt(q_t))`` for a scalar order-one model.

    ``q_t`` depends on innovations before ``t`` only, so it is drawn from
    `samples` independent stationary filter chains; ``eta_t`` comes from a
    separate stream unless `paired`, in which case it is the next draw of
    the chain's own stream.
    """
    st = detect_structure(spec)
    if st.kind is not StructureKind.SCALAR or spec.orders != (1, 1, 1, 1):
        raise StructureError("log-moment criterion needs a scalar model of order one")
    rho = _require_u1(spec)
    if burn_in is None:
        burn_in = default_burn_in(rho)
    seed = innovations.seed if seed is None else seed
    m = spec.m
    m1, n1 = st.m_coefs[0], st.n_coefs[0]
    C_l, C_q = _constants_pair(spec, starred)
    mult = chain.beta_multiplier(m, C_l, C_q)

    rng = make_generator(seed, LOG_MOMENT_KEY, 0)
    mean = innovations.mean_norm_sq(m)
    if not np.isfinite(mean):
        mean = float(np.mean(np.sum(innovations.draw(rng, samples, m) ** 2, axis=1)))
    xi_prev = _stationary_xi_draws(rho, mean, burn_in, rng, innovations, samples, m)
    base, w = _q_terms(spec, rho)
    q = base + w[0] * xi_prev
    eta_rng = rng if paired else make_generator(seed, LOG_MOMENT_KEY, 1)
    eta_sq = np.sum(innovations.draw(eta_rng, samples, m) ** 2, axis=1)
    with np.errstate(divide="ignore"):
        vals = np.log(m1 * m1 + n1 * n1 * mult * eta_sq * np.sqrt(q))
    est = float(np.mean(vals))
    se = 0.0 if est == -np.inf else float(np.std(vals, ddof=1) / np.sqrt(samples))
    return LogMomentCheck(est, se, samples, bool(est + 2 * se < 0))


# -- report ------------------------------------------------------------------


@dataclass(frozen=True)
class McSettings:
    horizon: int = 10_000
    replications: int = 20
    samples: int = 4000
    seed: int | None = None
    lyapunov: bool = True
    log_moment: bool = True


@dataclass
class StationarityReport:
    structure: str
    existence: dict
    uniqueness: dict
    constants: BoundConstants
    existence_verdict: str
    uniqueness_verdict: str
    existence_established: bool
    uniqueness_established: bool

    def to_dict(self) -> dict:
        return {
            "structure": self.structure,
            "existence": self.existence,
            "uniqueness": self.uniqueness,
            "constants": asdict(self.constants),
            "verdicts": {
                "existence": self.existence_verdict,
                "uniqueness": self.uniqueness_verdict,
                "existence_established": self.existence_established,
                "uniqueness_established": self.uniqueness_established,
            },
        }

    def to_text(self) -> str:
        lines = [f"model structure: {self.structure}", "", "existence checks:"]
        for name, res in self.existence.items():
            lines.append(f"  {name}: {_fmt(res)}")
        lines += ["", "uniqueness checks:"]
        for name, res in self.uniqueness.items():
            lines.append(f"  {name}: {_fmt(res)}")
        c = self.constants
        lines += [
            "",
            f"constants: C_lambda={c.C_lambda!r} C_q={c.C_q!r} "
            f"C_lambda*={c.C_lambda_star!r} C_q*={c.C_q_star!r}",
            "",
            f"existence: {self.existence_verdict}",
            f"uniqueness: {self.uniqueness_verdict}",
        ]
        return "\n".join(lines) + "\n"


def _fmt(res: dict) -> str:
    return ", ".join(f"{k}={v!r}" for k, v in res.items())


def full_report(
    spec: DccSpec,
    innovations: InnovationSpec | None = None,
    mc: McSettings | None = None,
    norm: str = "induced_inf",
) -> StationarityReport:
    """Run every check the model structure admits and assemble the verdicts."""
    innovations = innovations or InnovationSpec.gaussian()
    mc = mc or McSettings()
    st = detect_structure(spec)
    existence: dict = {}
    uniqueness: dict = {}

    def guarded(name, fn):
        try:
            return fn()
        except NumericError as exc:
            raise NumericError(f"{name}: {exc}") from exc

    sp = guarded("first_moment_spectral", lambda: check_existence_spectral_p1(spec))
    existence["first_moment_spectral"] = {"rho_T_star": sp.rho, "passed": sp.passed}
    nc = guarded("norm_sums", lambda: check_existence_norms(spec, norm))
    existence["norm_sums"] = {
        "vol_sum": nc.vol_sum, "corr_sum": nc.corr_sum, "norm": nc.norm, "passed": nc.passed,
    }
    if st.kind in (StructureKind.DIAGONAL, StructureKind.SCALAR):
        existence["diagonal_margins"] = check_diagonal_eq9(spec).to_dict()
    if st.kind is StructureKind.SCALAR:
        sc = check_scalar_sums(spec)
        existence["scalar_sums"] = {"vol_sum": sc.vol_sum, "corr_sum": sc.corr_sum, "passed": sc.passed}

    rho33 = t33_norm(spec)
    u1 = bool(rho33 < 1)
    uniqueness["t33_contraction"] = {"T33_norm": rho33, "passed": u1}
    rho_bar = guarded("volatility_contraction", lambda: mk.spectral_radius(chain.build_T_bar_star(spec)))
    u3 = bool(rho_bar < 1)
    uniqueness["volatility_contraction"] = {"rho_T_bar_star": rho_bar, "passed": u3}
    u4 = False
    if st.m_scalar:
        rho_m = mk.spectral_radius(chain.build_M_star(spec))
        u4 = bool(rho_m < 1)
        uniqueness["partially_scalar"] = {"applicable": True, "rho_M_star": rho_m, "passed": u4}
    else:
        uniqueness["partially_scalar"] = {"applicable": False, "passed": False}

    constants = compute_constants(spec)
    seed = innovations.seed if mc.seed is None else mc.seed
    u2_results = []
    if u1 and mc.lyapunov:
        variants = [False] + ([True] if u4 and constants.has_starred else [])
        for starred in variants:
            key = "lyapunov_contraction_starred" if starred else "lyapunov_contraction"
            est = guarded(key, lambda: estimate_lyapunov_N(
                spec, innovations, mc.horizon, mc.replications, seed=seed, starred=starred))
            uniqueness[key] = est.to_dict()
            u2_results.append(est.passed)
    elif not u1:
        uniqueness["lyapunov_contraction"] = {"skipped": "T33 contraction fails", "passed": False}
    if u1 and mc.log_moment and st.kind is StructureKind.SCALAR and spec.orders == (1, 1, 1, 1):
        variants = [False] + ([True] if constants.has_starred else [])
        for starred in variants:
            key = "scalar_log_moment_starred" if starred else "scalar_log_moment"
            lm = check_uniqueness_scalar_eq14(spec, innovations, mc.samples, seed=seed, starred=starred)
            uniqueness[key] = asdict(lm)
            u2_results.append(lm.passed)

    exist_ok = sp.passed or nc.passed or any(
        existence[k]["passed"] for k in ("diagonal_margins", "scalar_sums") if k in existence
    )
    if exist_ok:
        basis = "first-moment spectral radius" if sp.passed else "norm sums"
        ev = f"yes: a strictly stationary solution with finite second moments exists ({basis} criterion)"
    else:
        ev = "no sufficient condition satisfied (stationarity not established, not disproved)"

    uniq_ok = u1 and u3 and any(u2_results)
    if uniq_ok:
        uv = "yes: the stationary solution is unique and ergodic (contraction criteria hold)"
    else:
        failed = [k for k, v in uniqueness.items() if isinstance(v, dict) and v.get("passed") is False
                  and not (k == "partially_scalar" and not v.get("applicable"))]
        if failed:
            uv = "not established (failed: " + ", ".join(failed) + ")"
        else:
            uv = "not established (Monte Carlo contraction checks not evaluated)"
    return StationarityReport(
        structure=st.kind.value,
        existence=existence,
        uniqueness=uniqueness,
        constants=constants,
        existence_verdict=ev,
        uniqueness_verdict=uv,
        existence_established=bool(exist_ok),
        uniqueness_established=bool(uniq_ok),
    )
