"""Reduced-model containers produced by regression or projection."""

from __future__ import annotations

from dataclasses import dataclass
from typing import TYPE_CHECKING

import numpy as np

from .errors import InvalidInputError
from .model import SecondOrderOperators

if TYPE_CHECKING:  # pragma: no cover
    from .pod import PodBasis

__all__ = ["MassNormalizedRom", "StructuredRom"]


def _square(name, A):
    A = np.asarray(A, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise InvalidInputError(f"{name} must be square, got shape {A.shape}")
    if not np.all(np.isfinite(A)):
        raise InvalidInputError(f"{name} contains non-finite entries")
    return A


@dataclass(frozen=True)
class MassNormalizedRom:
    """Reduced model with an identity acceleration coefficient.

    The governing equations are

        q'' + damping @ q' + stiffness @ q = input_map @ u(t).

    ``damping`` and ``stiffness`` are generally nonsymmetric because the
    mass normalization destroys symmetry. ``lam`` records the
    regularization weight of the regression that produced the model
    (zero for projection-based models).
    """

    damping: np.ndarray
    stiffness: np.ndarray
    input_map: np.ndarray
    basis: "PodBasis | None" = None
    lam: float = 0.0

    def __post_init__(self):
        C = _square("damping", self.damping)
        K = _square("stiffness", self.stiffness)
        r = C.shape[0]
        if K.shape[0] != r:
            raise InvalidInputError(
                f"damping is {r}x{r} but stiffness is {K.shape[0]}x{K.shape[0]}"
            )
        B = np.asarray(self.input_map, dtype=float)
        if B.ndim != 2 or B.shape[0] != r:
            raise InvalidInputError(
                f"input_map must have {r} rows, got shape {B.shape}"
            )
        if self.lam < 0.0:
            raise InvalidInputError(f"lam must be nonnegative, got {self.lam}")
        object.__setattr__(self, "damping", C)
        object.__setattr__(self, "stiffness", K)
        object.__setattr__(self, "input_map", B)

    @property
    def r(self) -> int:
        return self.damping.shape[0]

    @property
    def m(self) -> int:
        return self.input_map.shape[1]

    def operators(self) -> SecondOrderOperators:
        """Operator bundle with an explicit identity mass, ready for
        time integration."""
        return SecondOrderOperators(
            mass=np.eye(self.r),
            damping=self.damping,
            stiffness=self.stiffness,
            input_map=self.input_map,
        )


@dataclass(frozen=True)
class StructuredRom:
    """Reduced model with symmetric mass, damping, and stiffness.

    The governing equations are

        mass @ q'' + damping @ q' + stiffness @ q = fhat(t),

    driven by a reduced force signal. Models built by the constrained
    solver satisfy eigmin(mass) >= omega, eigmin(stiffness) >= omega,
    and eigmin(damping) >= 0 up to round-off; ``omega`` records the
    margin that was enforced.
    """

    mass: np.ndarray
    damping: np.ndarray
    stiffness: np.ndarray
    basis: "PodBasis | None" = None
    omega: float = 0.0

    def __post_init__(self):
        M = _square("mass", self.mass)
        C = _square("damping", self.damping)
        K = _square("stiffness", self.stiffness)
        r = M.shape[0]
        if C.shape[0] != r or K.shape[0] != r:
            raise InvalidInputError("operator dimensions disagree")
        object.__setattr__(self, "mass", 0.5 * (M + M.T))
        object.__setattr__(self, "damping", 0.5 * (C + C.T))
        object.__setattr__(self, "stiffness", 0.5 * (K + K.T))

    @property
    def r(self) -> int:
        return self.mass.shape[0]

    def operators(self, input_map=None) -> SecondOrderOperators:
        """Operator bundle for time integration.

        ``input_map`` may supply a reduced input matrix (for example the
        projected input map of the source model) when the reduced force
        is generated from an input signal.
        """
        return SecondOrderOperators(
            mass=self.mass,
            damping=self.damping,
            stiffness=self.stiffness,
            input_map=input_map,
        )
