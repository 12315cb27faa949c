"""
DCC model parameterization, validation and structure detection.

The model, for an ``m``-vector of detrended returns ``z_t``::

    Vecd(D_t) = V0 + sum_i A_i Vecd(D_{t-i}) + sum_j B_j (z_{t-j} ** 2)
    Q_t       = W0 + sum_k M_k Q_{t-k} M_k' + sum_l N_l eps_{t-l} eps_{t-l}' N_l'
    R_t       = diag(Q_t)^{-1/2} Q_t diag(Q_t)^{-1/2}
    z_t       = D_t^{1/2} eps_t,   eps_t = R_t^{1/2} eta_t
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from dcclab import matrixkit as mk
from dcclab.errors import DomainError

__all__ = [
    "DccSpec",
    "Violation",
    "ValidationReport",
    "StructureKind",
    "ModelStructure",
    "validate",
    "detect_structure",
    "build_scalar",
    "benchmark_spec",
    "BENCHMARK_W0",
]

PD_REL_FLOOR = 1e-12


def _freeze(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


def _stack(mats, m: int, name: str) -> np.ndarray:
    arr = np.asarray(mats, dtype=float)
    if arr.ndim == 2:
        arr = arr[None]
    if arr.ndim != 3 or arr.shape[1:] != (m, m):
        raise DomainError(f"{name} must be a list of {m}x{m} matrices, got shape {arr.shape}")
    if arr.shape[0] < 1:
        raise DomainError(f"{name} needs at least one lag matrix")
    return arr


@dataclass(frozen=True, eq=False)
class DccSpec:
    """Full parameterization of a DCC-GARCH model.

    Lag matrices are stored as 3-d arrays: ``A[i]`` is the matrix of lag
    ``i + 1``.  All arrays are read-only.  Construction checks shapes and
    finiteness only; admissibility is reported by :func:`validate`.
    """

    V0: np.ndarray
    A: np.ndarray
    B: np.ndarray
    W0: np.ndarray
    M: np.ndarray
    N: np.ndarray
    m: int = field(init=False)

    def __post_init__(self):
        V0 = np.atleast_1d(np.asarray(self.V0, dtype=float))
        if V0.ndim != 1:
            raise DomainError("V0 must be a vector")
        m = V0.size
        object.__setattr__(self, "m", m)
        W0 = np.asarray(self.W0, dtype=float)
        if W0.shape != (m, m):
            raise DomainError(f"W0 must be {m}x{m}, got shape {W0.shape}")
        values = {"V0": V0, "W0": W0}
        for name in ("A", "B", "M", "N"):
            values[name] = _stack(getattr(self, name), m, name)
        for name, arr in values.items():
            if not np.all(np.isfinite(arr)):
                raise DomainError(f"{name} has non-finite entries")
            object.__setattr__(self, name, _freeze(arr))

    @property
    def r(self) -> int:
        return self.A.shape[0]

    @property
    def s(self) -> int:
        return self.B.shape[0]

    @property
    def nu(self) -> int:
        return self.M.shape[0]

    @property
    def mu(self) -> int:
        return self.N.shape[0]

    @property
    def m_star(self) -> int:
        return mk.vech_length(self.m)

    @property
    def orders(self) -> tuple[int, int, int, int]:
        return self.r, self.s, self.nu, self.mu

    def replace(self, **changes) -> "DccSpec":
        kw = {k: getattr(self, k) for k in ("V0", "A", "B", "W0", "M", "N")}
        kw.update(changes)
        return DccSpec(**kw)

    def to_dict(self) -> dict:
        return {
            "kind": "general",
            "V0": self.V0.tolist(),
            "A": self.A.tolist(),
            "B": self.B.tolist(),
            "W0": self.W0.tolist(),
            "M": self.M.tolist(),
            "N": self.N.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "DccSpec":
        if d.get("kind", "general") == "scalar":
            return build_scalar(
                d["m"], d["a"], d["b"], d["m_coefs"], d["n_coefs"], d["v0"], d["W0"]
            )
        return cls(V0=d["V0"], A=d["A"], B=d["B"], W0=d["W0"], M=d["M"], N=d["N"])

    def __eq__(self, other) -> bool:
        if not isinstance(other, DccSpec):
            return NotImplemented
        return all(
            np.array_equal(getattr(self, k), getattr(other, k))
            for k in ("V0", "A", "B", "W0", "M", "N")
        )

    __hash__ = None


@dataclass(frozen=True)
class Violation:
    field: str
    message: str
    index: tuple = ()


@dataclass
class ValidationReport:
    violations: list[Violation] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def __bool__(self) -> bool:
        return self.ok

    def __str__(self) -> str:
        if self.ok:
            return "valid"
        return "\n".join(
            f"{v.field}{list(v.index) if v.index else ''}: {v.message}" for v in self.violations
        )


def validate(spec: DccSpec) -> ValidationReport:
    """Check V0 > 0, A_i >= 0, B_j >= 0 and W0 positive definite.

    M_k and N_l carry no admissibility constraint.  Never raises on a
    constructed spec; every offending entry is listed.
    """
    report = ValidationReport()
    for k in np.flatnonzero(~(spec.V0 > 0)):
        report.violations.append(
            Violation("V0", f"entry must be positive, got {spec.V0[k]!r}", (int(k),))
        )
    for name in ("A", "B"):
        arr = getattr(spec, name)
        for idx in zip(*np.nonzero(arr < 0)):
            idx = tuple(int(x) for x in idx)
            report.violations.append(
                Violation(name, f"entry must be nonnegative, got {arr[idx]!r}", idx)
            )
    W0 = spec.W0
    if not mk.is_symmetric(W0):
        report.violations.append(Violation("W0", "matrix is not symmetric"))
    else:
        w = np.linalg.eigvalsh(W0)
        scale = max(abs(w[0]), abs(w[-1]))
        if scale == 0 or w[0] <= PD_REL_FLOOR * scale:
            report.violations.append(
                Violation("W0", f"matrix is not positive definite (smallest eigenvalue {w[0]:.6g})")
            )
    return report


class StructureKind(enum.Enum):
    GENERAL = "general"
    DIAGONAL = "diagonal"
    SCALAR = "scalar"
    PARTIALLY_SCALAR_M = "partially_scalar_m"


@dataclass(frozen=True)
class ModelStructure:
    """Most specific structure of a spec.

    ``m_scalar`` is reported separately because a diagonal spec can also
    have scalar ``M_k`` (the partially scalar regime); the ``*_coefs``
    fields are filled when the corresponding family is scalar.
    """

    kind: StructureKind
    m_scalar: bool
    a_coefs: tuple | None = None
    b_coefs: tuple | None = None
    m_coefs: tuple | None = None
    n_coefs: tuple | None = None

    @property
    def partially_scalar(self) -> bool:
        return self.m_scalar


def _scalar_coefs(arr: np.ndarray) -> tuple | None:
    m = arr.shape[1]
    eye = np.eye(m)
    coefs = []
    for mat in arr:
        c = mat[0, 0]
        if not np.array_equal(mat, c * eye):
            return None
        coefs.append(float(c))
    return tuple(coefs)


def _is_diagonal(arr: np.ndarray) -> bool:
    off = ~np.eye(arr.shape[1], dtype=bool)
    return not np.any(arr[:, off])


def detect_structure(spec: DccSpec) -> ModelStructure:
    coefs = {name: _scalar_coefs(getattr(spec, name)) for name in ("A", "B", "M", "N")}
    m_scalar = coefs["M"] is not None
    if all(c is not None for c in coefs.values()):
        kind = StructureKind.SCALAR
    elif all(_is_diagonal(getattr(spec, n)) for n in ("A", "B", "M", "N")):
        kind = StructureKind.DIAGONAL
    elif m_scalar:
        kind = StructureKind.PARTIALLY_SCALAR_M
    else:
        kind = StructureKind.GENERAL
    return ModelStructure(
        kind=kind,
        m_scalar=m_scalar,
        a_coefs=coefs["A"],
        b_coefs=coefs["B"],
        m_coefs=coefs["M"],
        n_coefs=coefs["N"],
    )


def build_scalar(
    m: int,
    a: Sequence[float],
    b: Sequence[float],
    m_coefs: Sequence[float],
    n_coefs: Sequence[float],
    v0: float,
    W0,
) -> DccSpec:
    """Scalar DCC: every lag matrix is a coefficient times the identity."""
    if any(x < 0 for x in a) or any(x < 0 for x in b):
        raise DomainError("volatility coefficients a, b must be nonnegative")
    W0 = mk.as_spd(W0, "W0", rel_floor=PD_REL_FLOOR) if np.ndim(W0) == 2 else W0
    if np.shape(W0) != (m, m):
        raise DomainError(f"W0 must be {m}x{m}")
    eye = np.eye(m)
    return DccSpec(
        V0=np.full(m, float(v0)),
        A=[c * eye for c in a],
        B=[c * eye for c in b],
        W0=W0,
        M=[c * eye for c in m_coefs],
        N=[c * eye for c in n_coefs],
    )


BENCHMARK_W0 = np.eye(2) / 2 + np.ones((2, 2)) / 2


def benchmark_spec(m1_sq: float = 0.999, n1: float = np.sqrt(3.0)) -> DccSpec:
    """Bivariate scalar order-one model used in the simulation study.

    ``v0 = 1/4, a = 0.8, b = 0.1, W0 = I/2 + ee'/2``; `m1_sq` is the squared
    Q-autoregression coefficient.
    """
    return build_scalar(2, [0.8], [0.1], [np.sqrt(m1_sq)], [n1], 0.25, BENCHMARK_W0)
