"""
Dense linear algebra for small symmetric systems.

Half-vectorization uses the column-wise lower-triangle ordering: for an
``m x m`` symmetric matrix the vech components are
``(1,1), (2,1), ..., (m,1), (2,2), (3,2), ..., (m,m)``.  The public index
functions :func:`phi` and :func:`phi_inv` speak 1-based indices; every
array-facing function is 0-based, as numpy is.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from dcclab.errors import DomainError, NumericError

TAU_SYM = 1e-10
TAU_SQRT = 1e-9

__all__ = [
    "SymIndexMap",
    "sym_index_map",
    "vech_length",
    "phi",
    "phi_inv",
    "vech",
    "unvech",
    "vecd",
    "diag_embed",
    "kron",
    "kron_power",
    "norm_max",
    "norm_spectral",
    "norm_induced_inf",
    "spectral_radius",
    "lambda_min_spd",
    "sqrt_spd",
    "lift_congruence",
    "lift_congruence_displayed",
    "companion",
    "as_square",
    "as_spd",
    "is_symmetric",
]


def vech_length(m: int) -> int:
    return m * (m + 1) // 2


@dataclass(frozen=True)
class SymIndexMap:
    """Bijection between vech positions and lower-triangle pairs.

    ``forward[k]`` is the 0-based pair ``(i, j)``, ``i >= j``, stored at
    0-based vech position ``k``; ``backward[i, j]`` inverts it (and is
    symmetric, so ``backward[j, i]`` gives the same position).
    """

    m: int
    forward: np.ndarray = field(repr=False)
    backward: np.ndarray = field(repr=False)

    @property
    def m_star(self) -> int:
        return vech_length(self.m)

    @property
    def rows(self) -> np.ndarray:
        return self.forward[:, 0]

    @property
    def cols(self) -> np.ndarray:
        return self.forward[:, 1]


@lru_cache(maxsize=64)
def sym_index_map(m: int) -> SymIndexMap:
    if m < 1:
        raise DomainError(f"dimension must be positive, got {m}")
    pairs = [(i, j) for j in range(m) for i in range(j, m)]
    forward = np.array(pairs, dtype=np.intp).reshape(-1, 2)
    backward = np.full((m, m), -1, dtype=np.intp)
    for k, (i, j) in enumerate(pairs):
        backward[i, j] = k
        backward[j, i] = k
    forward.setflags(write=False)
    backward.setflags(write=False)
    return SymIndexMap(m, forward, backward)


def phi(k: int, m: int) -> tuple[int, int]:
    """Return the 1-based pair ``(i, j)``, ``i >= j``, at 1-based vech position `k`.

    The position satisfies ``k = [m + (m-1) + ... + (m-j+2)]^+ + (i-j+1)``.
    """
    m_star = vech_length(m)
    if not 1 <= k <= m_star:
        raise DomainError(f"vech position {k} outside 1..{m_star} for m={m}")
    i, j = sym_index_map(m).forward[k - 1]
    return int(i) + 1, int(j) + 1


def phi_inv(i: int, j: int, m: int) -> int:
    if not (1 <= j <= i <= m):
        raise DomainError(f"pair ({i}, {j}) is not in the lower triangle of an {m}x{m} matrix")
    # leading bracket is empty for j = 1
    return sum(m - c for c in range(j - 1)) + (i - j + 1)


def is_symmetric(M: np.ndarray, tol: float = TAU_SYM) -> bool:
    scale = max(1.0, float(np.max(np.abs(M)))) if M.size else 1.0
    return bool(np.max(np.abs(M - M.T), initial=0.0) <= tol * scale)


def as_square(M, name: str = "matrix") -> np.ndarray:
    A = np.asarray(M, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise DomainError(f"{name} must be square, got shape {A.shape}")
    if not np.all(np.isfinite(A)):
        raise DomainError(f"{name} has non-finite entries")
    return A


def as_spd(M, name: str = "matrix", rel_floor: float = 1e-12) -> np.ndarray:
    """Validate `M` as symmetric positive definite and return it as an array.

    Definiteness is judged relative to scale: the smallest eigenvalue must
    exceed ``rel_floor * ||M||_s``.
    """
    A = as_square(M, name)
    if not is_symmetric(A):
        raise DomainError(f"{name} is not symmetric")
    w = np.linalg.eigvalsh(A)
    if w[-1] <= 0 or w[0] <= rel_floor * w[-1]:
        raise DomainError(f"{name} is not positive definite (smallest eigenvalue {w[0]:.3g})")
    return A


def vech(M) -> np.ndarray:
    A = as_square(M)
    if not is_symmetric(A):
        raise DomainError("vech requires a symmetric matrix")
    idx = sym_index_map(A.shape[0])
    return A[idx.rows, idx.cols].copy()


def unvech(v) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    m = int(round((np.sqrt(8 * v.size + 1) - 1) / 2))
    if vech_length(m) != v.size:
        raise DomainError(f"length {v.size} is not a triangular number")
    idx = sym_index_map(m)
    out = np.empty((m, m))
    out[idx.rows, idx.cols] = v
    out[idx.cols, idx.rows] = v
    return out


def vecd(M) -> np.ndarray:
    return np.diag(as_square(M)).copy()


def diag_embed(v) -> np.ndarray:
    return np.diag(np.asarray(v, dtype=float))


def kron(A, B) -> np.ndarray:
    return np.kron(np.asarray(A, dtype=float), np.asarray(B, dtype=float))


def kron_power(A, p: int) -> np.ndarray:
    if p < 1:
        raise DomainError(f"Kronecker power must be >= 1, got {p}")
    A = np.asarray(A, dtype=float)
    out = A
    for _ in range(p - 1):
        out = np.kron(out, A)
    return out


def norm_max(M) -> float:
    return float(np.max(np.abs(M)))


def norm_spectral(M) -> float:
    M = np.asarray(M, dtype=float)
    if M.ndim == 1:
        return float(np.linalg.norm(M))
    try:
        return float(np.linalg.norm(M, 2))
    except np.linalg.LinAlgError as exc:
        raise NumericError(f"SVD failed: {exc}") from exc


def norm_induced_inf(M) -> float:
    """Maximum absolute row sum, the operator norm induced by the max vector norm."""
    return float(np.max(np.sum(np.abs(M), axis=1)))


def _power_radius(M: np.ndarray, tol: float, max_iter: int) -> float:
    # Collatz-Wielandt bracketing; valid for nonnegative matrices.
    n = M.shape[0]
    # a small perturbation keeps the iteration primitive for reducible/periodic inputs
    shift = 1.0
    B = M + shift * np.eye(n)
    x = np.ones(n)
    lo, hi = 0.0, np.inf
    for it in range(1, max_iter + 1):
        y = B @ x
        with np.errstate(divide="ignore", invalid="ignore"):
            ratios = np.where(x > 0, y / x, np.nan)
        lo, hi = np.nanmin(ratios), np.nanmax(ratios)
        if hi - lo <= tol * max(1.0, hi):
            return float(0.5 * (lo + hi) - shift)
        x = y / np.max(y)
    raise NumericError(
        f"power iteration did not converge after {max_iter} iterations "
        f"(bracket [{lo - shift:.15g}, {hi - shift:.15g}])"
    )


def spectral_radius(M, method: str = "eig", tol: float = 1e-12, max_iter: int = 100_000) -> float:
    """Largest eigenvalue modulus of a square matrix.

    ``method="power"`` uses a shifted power iteration and is only valid for
    nonnegative matrices.
    """
    A = as_square(M)
    if A.shape[0] == 0:
        return 0.0
    if method == "power":
        if np.any(A < 0):
            raise DomainError("power iteration requires a nonnegative matrix")
        return _power_radius(A, tol, max_iter)
    if method != "eig":
        raise ValueError(f"unknown method {method!r}")
    try:
        w = np.linalg.eigvals(A)
    except np.linalg.LinAlgError as exc:
        raise NumericError(f"eigenvalue computation failed for {A.shape} matrix: {exc}") from exc
    return float(np.max(np.abs(w)))


def lambda_min_spd(M) -> float:
    A = as_spd(M)
    return float(np.linalg.eigvalsh(A)[0])


def sqrt_spd(M) -> np.ndarray:
    """The unique symmetric positive definite square root, via eigendecomposition."""
    A = as_square(M)
    if not is_symmetric(A):
        raise DomainError("sqrt_spd requires a symmetric matrix")
    w, V = np.linalg.eigh(A)
    if w[0] <= 0:
        raise DomainError(f"matrix is not positive definite (smallest eigenvalue {w[0]:.3g})")
    S = (V * np.sqrt(w)) @ V.T
    return 0.5 * (S + S.T)


def lift_congruence(M, idx: SymIndexMap | None = None) -> np.ndarray:
    """Matrix ``L`` with ``vech(M Q M') = L vech(Q)`` for every symmetric ``Q``.

    For an off-diagonal column ``v = (p, q)`` the entry ``Q[p, q]`` appears
    twice in ``M Q M'``, so

        L[u, v] = M[i, p] M[j, q] + [p != q] M[i, q] M[j, p],   (i, j) = pair(u).
    """
    A = as_square(M)
    if idx is None:
        idx = sym_index_map(A.shape[0])
    elif idx.m != A.shape[0]:
        raise DomainError(f"index map is for m={idx.m}, matrix is {A.shape[0]}x{A.shape[0]}")
    i, j = idx.rows[:, None], idx.cols[:, None]
    p, q = idx.rows[None, :], idx.cols[None, :]
    L = A[i, p] * A[j, q]
    off = p != q
    return L + np.where(off, A[i, q] * A[j, p], 0.0)


def lift_congruence_displayed(M, idx: SymIndexMap | None = None) -> np.ndarray:
    """Entrywise product ``M[i, p] M[j, q]`` without the symmetrization term.

    Kept to document where it departs from :func:`lift_congruence`: the two
    agree for diagonal ``M`` only.
    """
    A = as_square(M)
    if idx is None:
        idx = sym_index_map(A.shape[0])
    i, j = idx.rows[:, None], idx.cols[:, None]
    p, q = idx.rows[None, :], idx.cols[None, :]
    return A[i, p] * A[j, q]


def companion(blocks, n: int | None = None) -> np.ndarray:
    """Block companion matrix with `blocks` on the top row and identities below.

    Scalars are accepted as 1x1 blocks.  With an empty list, `n` gives the
    block size and a zero matrix of that size is returned.
    """
    blocks = [np.atleast_2d(np.asarray(b, dtype=float)) for b in blocks]
    if not blocks:
        return np.zeros((n or 0, n or 0))
    k = blocks[0].shape[0]
    p = len(blocks)
    out = np.zeros((k * p, k * p))
    out[:k, :] = np.hstack(blocks)
    if p > 1:
        out[k:, :-k] = np.eye(k * (p - 1))
    return out
