"""
Markov-chain form of the DCC model.

The state stacks four blocks::

    X1 = (Vecd(D_t), ..., Vecd(D_{t-r+1}))                 r*m
    X2 = (z_t**2, ..., z_{t-s+1}**2)                       s*m
    X3 = (vech(Q_t), ..., vech(Q_{t-nu+1}))                nu*m*
    X4 = (vech(eps_t eps_t'), ..., vech(eps_{t-mu+1} ...)) mu*m*

and evolves as ``X_t = T_t X_{t-1} + zeta_t`` where ``T_t`` and ``zeta_t``
depend on the current standardized residual ``eps_t`` only.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from dcclab import matrixkit as mk
from dcclab.errors import DomainError, StructureError
from dcclab.model import DccSpec, detect_structure

__all__ = [
    "StateLayout",
    "StateVector",
    "AffineStep",
    "layout_for",
    "pack_state",
    "unpack_state",
    "build_affine_step",
    "build_T_star",
    "build_T_bar_star",
    "build_T33",
    "build_M_star",
    "lifted_M",
    "lifted_N",
    "beta_multiplier",
    "build_N_star_sample",
]


@dataclass(frozen=True)
class StateLayout:
    m: int
    r: int
    s: int
    nu: int
    mu: int

    @property
    def m_star(self) -> int:
        return mk.vech_length(self.m)

    @property
    def sizes(self) -> tuple[int, int, int, int]:
        ms = self.m_star
        return self.r * self.m, self.s * self.m, self.nu * ms, self.mu * ms

    @property
    def offsets(self) -> tuple[int, int, int, int]:
        s1, s2, s3, _ = self.sizes
        return 0, s1, s1 + s2, s1 + s2 + s3

    @property
    def d(self) -> int:
        return sum(self.sizes)

    def block(self, b: int) -> slice:
        """Slice of block ``b`` in 1..4."""
        start = self.offsets[b - 1]
        return slice(start, start + self.sizes[b - 1])


def layout_for(spec: DccSpec) -> StateLayout:
    return StateLayout(spec.m, spec.r, spec.s, spec.nu, spec.mu)


@dataclass(frozen=True)
class StateVector:
    layout: StateLayout
    data: np.ndarray

    def _chunks(self, b: int, width: int) -> np.ndarray:
        return self.data[self.layout.block(b)].reshape(-1, width)

    @property
    def vecd_D(self) -> np.ndarray:
        """Rows are Vecd(D_{t-i}), i = 0..r-1."""
        return self._chunks(1, self.layout.m)

    @property
    def z_sq(self) -> np.ndarray:
        return self._chunks(2, self.layout.m)

    @property
    def vech_Q(self) -> np.ndarray:
        return self._chunks(3, self.layout.m_star)

    @property
    def vech_eps_outer(self) -> np.ndarray:
        return self._chunks(4, self.layout.m_star)


@dataclass(frozen=True)
class AffineStep:
    T: np.ndarray
    zeta: np.ndarray
    layout: StateLayout

    def apply(self, x: np.ndarray) -> np.ndarray:
        return self.T @ x + self.zeta

    def block(self, i: int, j: int) -> np.ndarray:
        L = self.layout
        return self.T[L.block(i), L.block(j)]


def _check_len(seq, n: int, name: str) -> list:
    seq = list(seq)
    if len(seq) != n:
        raise DomainError(f"{name} history needs {n} entries, got {len(seq)}")
    return seq


def pack_state(
    vecd_D: Sequence,
    z_sq: Sequence,
    Q: Sequence,
    eps_outer: Sequence,
    layout: StateLayout,
) -> StateVector:
    """Stack lag histories (most recent first) into a state vector.

    `eps_outer` holds the matrices ``eps eps'``; `Q` must hold SPD matrices.
    """
    m = layout.m
    vecd_D = _check_len(vecd_D, layout.r, "D")
    z_sq = _check_len(z_sq, layout.s, "z**2")
    Q = _check_len(Q, layout.nu, "Q")
    eps_outer = _check_len(eps_outer, layout.mu, "eps eps'")
    parts = []
    for name, vecs in (("D", vecd_D), ("z**2", z_sq)):
        for v in vecs:
            v = np.asarray(v, dtype=float)
            if v.shape != (m,):
                raise DomainError(f"{name} entries must have length {m}, got {v.shape}")
            parts.append(v)
    for q in Q:
        mk.as_spd(q, "Q")
        parts.append(mk.vech(q))
    for e in eps_outer:
        e = np.asarray(e, dtype=float)
        if e.shape != (m, m):
            raise DomainError(f"eps eps' entries must be {m}x{m}, got {e.shape}")
        parts.append(mk.vech(e))
    return StateVector(layout, np.concatenate(parts))


def unpack_state(x: StateVector) -> tuple[list, list, list, list]:
    return (
        list(x.vecd_D.copy()),
        list(x.z_sq.copy()),
        [mk.unvech(v) for v in x.vech_Q],
        [mk.unvech(v) for v in x.vech_eps_outer],
    )


def lifted_M(spec: DccSpec) -> list[np.ndarray]:
    idx = mk.sym_index_map(spec.m)
    return [mk.lift_congruence(M, idx) for M in spec.M]


def lifted_N(spec: DccSpec) -> list[np.ndarray]:
    idx = mk.sym_index_map(spec.m)
    return [mk.lift_congruence(N, idx) for N in spec.N]


def _top_row(blocks: list[np.ndarray], rows: int, cols: int) -> np.ndarray:
    out = np.zeros((rows, cols))
    k = blocks[0].shape[0]
    out[:k, :] = np.hstack(blocks)
    return out


def _shift(n_blocks: int, k: int) -> np.ndarray:
    out = np.zeros((n_blocks * k, n_blocks * k))
    if n_blocks > 1:
        out[k:, :-k] = np.eye(k * (n_blocks - 1))
    return out


def build_affine_step(spec: DccSpec, eps_t) -> AffineStep:
    """Random transition ``(T_t, zeta_t)`` generated by the residual `eps_t`."""
    eps_t = np.asarray(eps_t, dtype=float)
    if eps_t.shape != (spec.m,):
        raise DomainError(f"eps_t must have length {spec.m}, got shape {eps_t.shape}")
    eps_sq = eps_t**2
    return _assemble(spec, eps_sq, np.outer(eps_t, eps_t), lifted_M(spec), lifted_N(spec))


def _assemble(spec, eps_sq, eps_outer, Mt, Nt) -> AffineStep:
    L = layout_for(spec)
    m, ms = spec.m, L.m_star
    T = np.zeros((L.d, L.d))
    b1, b2, b3, b4 = (L.block(i) for i in (1, 2, 3, 4))

    T[b1, b1] = mk.companion(list(spec.A))
    T[b1, b2] = _top_row(list(spec.B), L.r * m, L.s * m)
    T[b2, b1] = _top_row([eps_sq[:, None] * A for A in spec.A], L.s * m, L.r * m)
    T22 = _shift(L.s, m)
    T22[:m, :] = np.hstack([eps_sq[:, None] * B for B in spec.B])
    T[b2, b2] = T22
    T[b3, b3] = mk.companion(Mt)
    T[b3, b4] = _top_row(Nt, L.nu * ms, L.mu * ms)
    T[b4, b4] = _shift(L.mu, ms)

    zeta = np.zeros(L.d)
    zeta[b1.start : b1.start + m] = spec.V0
    zeta[b2.start : b2.start + m] = eps_sq * spec.V0
    zeta[b3.start : b3.start + ms] = mk.vech(spec.W0)
    zeta[b4.start : b4.start + ms] = mk.vech(eps_outer)
    return AffineStep(T, zeta, L)


def build_T_star(spec: DccSpec) -> np.ndarray:
    """Deterministic first-moment bound: ``|T_t|`` with squared residuals set to one."""
    ones = np.ones(spec.m)
    step = _assemble(spec, ones, np.eye(spec.m), lifted_M(spec), lifted_N(spec))
    return np.abs(step.T)


def build_T_bar_star(spec: DccSpec) -> np.ndarray:
    """Expected volatility block ``[[T11, T12], [T21, T22]]`` (squared residuals -> 1)."""
    m = spec.m
    r, s = spec.r, spec.s
    top = _top_row(list(spec.A), r * m, r * m) + _shift(r, m)
    T = np.zeros(((r + s) * m, (r + s) * m))
    T[: r * m, : r * m] = top
    T[: r * m, r * m :] = _top_row(list(spec.B), r * m, s * m)
    T[r * m :, : r * m] = _top_row(list(spec.A), s * m, r * m)
    T22 = _shift(s, m)
    T22[:m, :] = np.hstack(list(spec.B))
    T[r * m :, r * m :] = T22
    return T


def build_T33(spec: DccSpec) -> np.ndarray:
    """Companion of the lifted Q-autoregression matrices; time invariant."""
    return mk.companion(lifted_M(spec))


def build_M_star(spec: DccSpec) -> np.ndarray:
    structure = detect_structure(spec)
    if not structure.m_scalar:
        raise StructureError("M* requires every M_k to be a scalar multiple of the identity")
    return mk.companion([c * c for c in structure.m_coefs])


def beta_multiplier(m: int, C_lambda: float, C_q: float) -> float:
    """``4 (2m + 1) sqrt(m) / (sqrt(C_lambda) C_q)``."""
    if C_lambda <= 0 or C_q <= 0:
        raise DomainError(f"bound constants must be positive, got C_lambda={C_lambda}, C_q={C_q}")
    return 4.0 * (2 * m + 1) * np.sqrt(m) / (np.sqrt(C_lambda) * C_q)


def build_N_star_sample(
    spec: DccSpec,
    eta_norm_sq: float,
    q_t: float,
    constants,
    starred: bool = False,
) -> np.ndarray:
    """One draw of the ``kappa x kappa`` companion matrix driving the contraction bound.

    `constants` is a :class:`dcclab.stationarity.BoundConstants`; with
    ``starred=True`` the partially-scalar constants replace the plain ones.
    """
    if eta_norm_sq < 0 or q_t < 0:
        raise DomainError("eta_norm_sq and q_t must be nonnegative")
    C_l, C_q = (constants.C_lambda_star, constants.C_q_star) if starred else (
        constants.C_lambda,
        constants.C_q,
    )
    if C_l is None or C_q is None:
        raise DomainError("starred constants are not defined for this spec")
    mult = beta_multiplier(spec.m, C_l, C_q)
    return mk.companion(_beta_row(spec, mult * eta_norm_sq * np.sqrt(q_t)))


def _spectral_sq(mats) -> np.ndarray:
    return np.array([mk.norm_spectral(x) ** 2 for x in mats])


def _beta_row(spec: DccSpec, loading: float) -> np.ndarray:
    kappa = max(spec.nu, spec.mu)
    beta = np.zeros(kappa)
    beta[: spec.nu] += _spectral_sq(spec.M)
    beta[: spec.mu] += _spectral_sq(spec.N) * loading
    return beta
