"""
I.i.d. innovation laws and seed streams.

Every random draw in dcclab comes from a generator built by
:meth:`InnovationSpec.generator`, keyed on ``(seed, stream, run)``.  Runs of
an ensemble use distinct ``run`` keys, so results never depend on how the
runs are scheduled.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, replace

import numpy as np

from dcclab.errors import DomainError

__all__ = ["Family", "Standardization", "InnovationSpec", "make_generator"]


class Family(enum.Enum):
    GAUSSIAN = "gaussian"
    STUDENT_T = "student_t"


class Standardization(enum.Enum):
    UNIT_VARIANCE = "unit_variance"
    UNIT_SCALE = "unit_scale"


def make_generator(seed: int, *key: int) -> np.random.Generator:
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.PCG64(ss))


@dataclass(frozen=True)
class InnovationSpec:
    """Law of the innovation vectors ``eta_t``.

    Components are mutually independent.  Student-t draws with
    ``UNIT_VARIANCE`` are scaled by ``sqrt((dof - 2) / dof)`` and need
    ``dof > 2``; ``UNIT_SCALE`` returns the raw t variate, the only option
    when the variance is infinite.  ``standardization=None`` picks
    ``UNIT_VARIANCE`` when it exists and ``UNIT_SCALE`` otherwise.
    """

    family: Family = Family.GAUSSIAN
    dof: float | None = None
    standardization: Standardization | None = None
    seed: int = 0
    stream: int = 0

    def __post_init__(self):
        object.__setattr__(self, "family", Family(self.family))
        if self.standardization is not None:
            object.__setattr__(self, "standardization", Standardization(self.standardization))
        if not 0 <= int(self.seed) < 2**64:
            raise DomainError(f"seed must fit in 64 bits, got {self.seed}")
        if self.family is Family.STUDENT_T:
            if self.dof is None or not self.dof > 0:
                raise DomainError(f"Student-t innovations need dof > 0, got {self.dof}")
            if self.resolved_standardization is Standardization.UNIT_VARIANCE and self.dof <= 2:
                raise DomainError(f"unit-variance Student-t needs dof > 2, got {self.dof}")

    @classmethod
    def gaussian(cls, seed: int = 0, stream: int = 0) -> "InnovationSpec":
        return cls(Family.GAUSSIAN, seed=seed, stream=stream)

    @classmethod
    def student(cls, dof: float, seed: int = 0, stream: int = 0, standardization=None):
        return cls(Family.STUDENT_T, dof=dof, standardization=standardization, seed=seed, stream=stream)

    @property
    def resolved_standardization(self) -> Standardization:
        if self.standardization is not None:
            return self.standardization
        if self.family is Family.STUDENT_T and self.dof is not None and self.dof <= 2:
            return Standardization.UNIT_SCALE
        return Standardization.UNIT_VARIANCE

    @property
    def scale(self) -> float:
        if self.family is Family.STUDENT_T and self.resolved_standardization is Standardization.UNIT_VARIANCE:
            return float(np.sqrt((self.dof - 2.0) / self.dof))
        return 1.0

    def mean_norm_sq(self, m: int) -> float:
        """``E ||eta||^2``; infinite for unit-scale Student-t with dof <= 2."""
        if self.family is Family.GAUSSIAN:
            return float(m)
        if self.dof <= 2:
            return np.inf
        return m * self.scale**2 * self.dof / (self.dof - 2.0)

    def with_seed(self, seed: int) -> "InnovationSpec":
        return replace(self, seed=seed)

    def generator(self, run: int = 0, substream: int = 0) -> np.random.Generator:
        return make_generator(self.seed, self.stream, run, substream)

    def draw(self, rng: np.random.Generator, n: int, m: int) -> np.ndarray:
        if self.family is Family.GAUSSIAN:
            return rng.standard_normal((n, m))
        return rng.standard_t(self.dof, (n, m)) * self.scale

    def to_dict(self) -> dict:
        return {
            "family": self.family.value,
            "dof": self.dof,
            "standardization": None if self.standardization is None else self.standardization.value,
            "seed": int(self.seed),
            "stream": int(self.stream),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "InnovationSpec":
        return cls(
            family=Family(d.get("family", "gaussian")),
            dof=d.get("dof"),
            standardization=d.get("standardization"),
            seed=int(d.get("seed", 0)),
            stream=int(d.get("stream", 0)),
        )
