"""Binary classifier on encoded images: one Z...Z correlation hyperplane.

The squared correlation tr(M rho(t_f))^2 lands in [0, 1] and is compared to
a separator value; class A claims the low side.  Training drives outputs
toward per-class target lines with a three-tier error discount keyed to the
quarter-distance ("magenta") lines: clearly-correct examples contribute
1/100 of their error, correct-but-close ones 1/5, everything else full
weight.  The discount multiplies each example's loss and final-time costate,
so the assembled gradient scales exactly linearly with it.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .lm import LMConfig, LMState, run_epoch
from .network import QuantumNetwork
from .objectives import MeasureTarget
from .states import DensityMatrix, z_chain

CLASS_A = "A"  # below the separator
CLASS_B = "B"  # at or above the separator

DISCOUNT_CLEAR = 1.0 / 100.0
DISCOUNT_NEAR = 1.0 / 5.0
DISCOUNT_FULL = 1.0


@dataclass(frozen=True)
class SeparatorGeometry:
    """Separator plus per-class targets; magenta lines sit a quarter of the
    way from the separator toward each target."""

    separator: float = 0.25
    target_low: float = 0.05
    target_high: float = 0.6

    def __post_init__(self):
        if not self.target_low < self.separator < self.target_high:
            raise ValueError("need target_low < separator < target_high")

    @property
    def magenta_low(self) -> float:
        return self.separator - 0.25 * (self.separator - self.target_low)

    @property
    def magenta_high(self) -> float:
        return self.separator + 0.25 * (self.target_high - self.separator)

    def target_for(self, label: str) -> float:
        return self.target_low if label == CLASS_A else self.target_high


@dataclass(frozen=True)
class LabeledState:
    state: DensityMatrix
    label: str
    source_id: str

    def __post_init__(self):
        if self.label not in (CLASS_A, CLASS_B):
            raise ValueError(f"label must be {CLASS_A!r} or {CLASS_B!r}")


@dataclass(frozen=True)
class ExampleResult:
    source_id: str
    output: float
    tier: float
    verdict: str
    correct: bool


@dataclass(frozen=True)
class ClassifierReport:
    epoch: int
    entries: tuple
    percent_correct: float
    rms: float


def verdict_for(output: float, geo: SeparatorGeometry) -> str:
    return CLASS_A if output < geo.separator else CLASS_B


def discount_tier(output: float, label: str, geo: SeparatorGeometry) -> float:
    """Exactly one multiplier per (output, label): the tiers partition the axis."""
    if label == CLASS_A:
        if output <= geo.target_low:
            return DISCOUNT_CLEAR
        if output < geo.magenta_low:
            return DISCOUNT_NEAR
        return DISCOUNT_FULL
    if output >= geo.target_high:
        return DISCOUNT_CLEAR
    if output > geo.magenta_high:
        return DISCOUNT_NEAR
    return DISCOUNT_FULL


def discounted_error(output: float, label: str, geo: SeparatorGeometry) -> float:
    """Tier multiplier times the measure-cost residual (1/2)(output - target)^2."""
    return discount_tier(output, label, geo) * 0.5 * (output - geo.target_for(label)) ** 2


def classify(net: QuantumNetwork, geo: SeparatorGeometry, x: LabeledState):
    """Propagate one labeled state; returns (output, verdict)."""
    output = float(_outputs(net, x.state.mat[None])[0])
    return output, verdict_for(output, geo)


def _outputs(net: QuantumNetwork, rho0s: np.ndarray) -> np.ndarray:
    from .dynamics import PropagatorCache

    finals = PropagatorCache(net).forward(rho0s)[-1]
    m = z_chain(net.n_qubits).mat
    corr = np.real(np.einsum("ij,bji->b", m, finals))
    return corr**2


def evaluate(net: QuantumNetwork, geo: SeparatorGeometry, corpus, epoch: int = 0) -> ClassifierReport:
    """Classification pass with no parameter updates; deterministic."""
    rho0s = np.stack([x.state.mat for x in corpus])
    outputs = _outputs(net, rho0s)
    entries = []
    total_err = 0.0
    for x, out in zip(corpus, outputs):
        v = verdict_for(float(out), geo)
        tier = discount_tier(float(out), x.label, geo)
        entries.append(ExampleResult(x.source_id, float(out), tier, v, v == x.label))
        total_err += discounted_error(float(out), x.label, geo)
    pct = 100.0 * sum(e.correct for e in entries) / len(entries)
    return ClassifierReport(
        epoch=epoch,
        entries=tuple(entries),
        percent_correct=pct,
        rms=float(np.sqrt(total_err / len(entries))),
    )


def train_binary(
    net: QuantumNetwork,
    corpus,
    geo: SeparatorGeometry,
    epochs: int,
    cfg: LMConfig | None = None,
    state: LMState | None = None,
    stop_at_percent: float | None = None,
):
    """Full-batch curvature training with per-example discount weights.

    Discount tiers are recomputed from the outputs at the top of each epoch
    and frozen into the example weights for that epoch's step.  Returns
    (trained_net, [ClassifierReport per epoch]).
    """
    if not corpus:
        raise ValueError("corpus is empty")
    labels = {x.label for x in corpus}
    if labels != {CLASS_A, CLASS_B}:
        raise ValueError(f"need both classes present, got {sorted(labels)}")
    m = z_chain(net.n_qubits)
    state = state or LMState.fresh(net.n_params, cfg)
    reports = []
    rho0s = np.stack([x.state.mat for x in corpus])
    for epoch in range(1, epochs + 1):
        outputs = _outputs(net, rho0s)
        batch = [
            (
                x.state,
                MeasureTarget(
                    m,
                    target=geo.target_for(x.label),
                    weight=discount_tier(float(out), x.label, geo),
                ),
            )
            for x, out in zip(corpus, outputs)
        ]
        net, _ = run_epoch(net, batch, state, cfg)
        reports.append(evaluate(net, geo, corpus, epoch=epoch))
        if stop_at_percent is not None and reports[-1].percent_correct >= stop_at_percent:
            break
    return net, reports
