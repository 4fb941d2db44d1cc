"""Per-example training objectives and their gradient boundary conditions.

Every objective exposes ``loss(rho_final)`` and ``engine_costate(rho_final)``
where the costate g satisfies the engine pairing dL = -2 tr(g drho_final).
For the squared-Frobenius target cost the costate is literally T - rho; the
measure cost carries a -1/2 scale relative to its raw boundary matrix so that
the assembled parameter gradient is the true gradient of the stated loss.

``weight`` multiplies both the loss and the costate, which is how the image
classifier injects its error discounts and how chained losses stay linear.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dynamics import final_costate_measure, final_costate_target
from .states import MeasureOperator


@dataclass(frozen=True)
class TargetState:
    """Squared Frobenius distance to a fixed target matrix."""

    target: np.ndarray
    weight: float = 1.0

    def loss(self, rho_f: np.ndarray) -> float:
        diff = self.target - rho_f
        return self.weight * float(np.sum(np.abs(diff) ** 2))

    def engine_costate(self, rho_f: np.ndarray) -> np.ndarray:
        return self.weight * final_costate_target(self.target, rho_f)


@dataclass(frozen=True)
class MeasureTarget:
    """(1/2)(tr(M rho)^2 - target)^2 on the final state."""

    measure: MeasureOperator
    target: float
    weight: float = 1.0

    def output(self, rho_f: np.ndarray) -> float:
        return float(np.real(np.trace(self.measure.mat @ rho_f))) ** 2

    def loss(self, rho_f: np.ndarray) -> float:
        return self.weight * 0.5 * (self.output(rho_f) - self.target) ** 2

    def engine_costate(self, rho_f: np.ndarray) -> np.ndarray:
        return -0.5 * self.weight * final_costate_measure(self.measure, rho_f, self.target)


@dataclass(frozen=True)
class ChainedCostate:
    """Loss and costate computed elsewhere (e.g. backpropagated through a
    downstream network); the costate is already in the engine convention."""

    loss_value: float
    costate: np.ndarray

    def loss(self, rho_f: np.ndarray) -> float:
        return self.loss_value

    def engine_costate(self, rho_f: np.ndarray) -> np.ndarray:
        return self.costate
