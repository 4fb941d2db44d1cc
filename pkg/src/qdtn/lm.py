"""Curvature-scaled trainer: damped quadratic model over batch gradients.

The local model uses the rank-structured Hessian (1/L_mean) * mean_i(g_i g_i^T)
built from per-example loss gradients, damped by lambda times a diagonal
scaling matrix whose entries track the largest Hessian diagonal seen so far
(never below 1e-6).  That scaling keeps ill-observed parameters from drifting
to infinity during long runs; plain lambda*I is available via ``use_dtd``.

One epoch: build the Jacobian stack, propose a step from the damped solve,
accept when the batch RMS decreased (or a bounded uphill step with shrinking
step norm), otherwise raise lambda tenfold and retry; acceptance lowers
lambda tenfold.  A plain gradient-descent driver with the same bookkeeping
serves as the built-in baseline.
"""

from __future__ import annotations

import io
from dataclasses import dataclass, field

import numpy as np

from .engine import batch_gradients, batch_losses
from .errors import DegenerateLoss, SingularSystem, StepUnstable
from .network import QuantumNetwork

DEGENERATE_LOSS_FLOOR = 1e-14
DTD_FLOOR = 1e-6
LAMBDA_MIN = 1e-12
LAMBDA_MAX = 1e12


@dataclass
class LMConfig:
    lambda_init: float = 1e-2
    eta: float = 1.0
    lambda_factor: float = 10.0
    max_retries: int = 8
    uphill_tol: float = 1e-3
    use_dtd: bool = True


@dataclass
class LMState:
    """Damping, scaling history and epoch bookkeeping; owned by one loop."""

    lam: float
    eta: float
    dtd_diag: np.ndarray
    epoch: int = 0
    last_rms: float = float("nan")
    last_step_norm: float = 0.0

    @classmethod
    def fresh(cls, n_params: int, cfg: LMConfig | None = None) -> "LMState":
        cfg = cfg or LMConfig()
        return cls(lam=cfg.lambda_init, eta=cfg.eta, dtd_diag=np.full(n_params, DTD_FLOOR))


@dataclass(frozen=True)
class JacobianStack:
    rows: np.ndarray  # (B, n_params) per-example loss gradients
    losses: np.ndarray  # (B,)

    def __post_init__(self):
        if self.rows.shape[0] != self.losses.shape[0]:
            raise ValueError("row count does not match loss count")

    @property
    def mean_loss(self) -> float:
        return float(np.mean(self.losses))

    @property
    def mean_gradient(self) -> np.ndarray:
        return self.rows.mean(axis=0)


@dataclass(frozen=True)
class EpochReport:
    epoch: int
    rms_before: float
    rms_after: float
    lam: float
    retries: int
    accepted: bool
    degenerate: bool = False


def assemble_hessian(stack: JacobianStack, mean_loss: float) -> np.ndarray:
    """Batch-mean outer product of gradient rows, scaled by 1/mean_loss."""
    if mean_loss <= DEGENERATE_LOSS_FLOOR:
        raise DegenerateLoss(f"mean loss {mean_loss:.3e} is already zero")
    return np.einsum("bi,bj->ij", stack.rows, stack.rows) / (stack.rows.shape[0] * mean_loss)


def lm_step(state: LMState, hess: np.ndarray, grad: np.ndarray, use_dtd: bool = True) -> np.ndarray:
    """Solve (H + lambda * D) delta = grad and return -eta * delta."""
    diag = state.dtd_diag if use_dtd else np.ones_like(state.dtd_diag)
    a = hess + state.lam * np.diag(diag)
    if not (np.all(np.isfinite(a)) and np.all(np.isfinite(grad))):
        raise SingularSystem("non-finite entries in the damped system")
    jitter = 0.0
    for _ in range(7):
        try:
            c = np.linalg.cholesky(a + jitter * np.eye(a.shape[0]))
            delta = np.linalg.solve(c.conj().T, np.linalg.solve(c, grad))
            return -state.eta * delta
        except np.linalg.LinAlgError:
            jitter = max(jitter * 100.0, 1e-12 * max(float(np.max(np.abs(np.diag(a)))), 1.0))
    raise SingularSystem(f"damped system singular after jitter retries (lambda={state.lam:.3e})")


def run_epoch_fn(state: LMState, vec: np.ndarray, eval_fn, jac_fn, cfg: LMConfig | None = None):
    """One training epoch over callables working in the trainable subspace.

    ``jac_fn(vec) -> (losses, rows)`` and ``eval_fn(vec) -> losses``.
    Returns (new_vec, EpochReport); a report with accepted=False means no
    usable step was found and the parameters are unchanged (lambda keeps its
    inflated value).
    """
    cfg = cfg or LMConfig()
    losses, rows = jac_fn(vec)
    stack = JacobianStack(rows=np.asarray(rows, dtype=float), losses=np.asarray(losses, dtype=float))
    rms_before = float(np.sqrt(stack.mean_loss))

    try:
        hess = assemble_hessian(stack, stack.mean_loss)
    except DegenerateLoss:
        state.epoch += 1
        state.last_rms = rms_before
        report = EpochReport(state.epoch, rms_before, rms_before, state.lam, 0, False, degenerate=True)
        return vec, report

    grad = stack.mean_gradient
    for retry in range(cfg.max_retries + 1):
        delta = lm_step(state, hess, grad, use_dtd=cfg.use_dtd)
        trial = vec + delta
        try:
            rms_new = float(np.sqrt(np.mean(eval_fn(trial))))
        except StepUnstable:
            rms_new = float("inf")  # divergent proposal: plain rejection
        if not np.isfinite(rms_new):
            rms_new = float("inf")
        step_norm = float(np.linalg.norm(delta))
        downhill = rms_new < rms_before
        uphill_ok = (
            rms_new <= rms_before * (1.0 + cfg.uphill_tol)
            and step_norm < state.last_step_norm
        )
        if downhill or uphill_ok:
            state.lam = max(state.lam / cfg.lambda_factor, LAMBDA_MIN)
            state.dtd_diag = np.maximum(state.dtd_diag, np.maximum(np.diag(hess), DTD_FLOOR))
            state.last_step_norm = step_norm
            state.epoch += 1
            state.last_rms = rms_new
            return trial, EpochReport(state.epoch, rms_before, rms_new, state.lam, retry, True)
        state.lam = min(state.lam * cfg.lambda_factor, LAMBDA_MAX)

    state.epoch += 1
    state.last_rms = rms_before
    return vec, EpochReport(state.epoch, rms_before, rms_before, state.lam, cfg.max_retries + 1, False)


# -- network-level wrappers ------------------------------------------------------------


def _problem_fns(net: QuantumNetwork, batch, trainable: np.ndarray):
    rho0s = np.stack([m.mat if hasattr(m, "mat") else np.asarray(m, dtype=complex) for m, _ in batch])
    objectives = [obj for _, obj in batch]
    base = net.parameter_vector()

    def full_vec(sub):
        v = base.copy()
        v[trainable] = sub
        return v

    def eval_fn(sub):
        return batch_losses(net.with_vector(full_vec(sub)), rho0s, objectives)

    def jac_fn(sub):
        losses, grads = batch_gradients(net.with_vector(full_vec(sub)), rho0s, objectives)
        return losses, grads[:, trainable]

    return eval_fn, jac_fn, full_vec


def batch_loss(net: QuantumNetwork, batch) -> float:
    """Mean per-example loss over (initial state, objective) pairs."""
    if not batch:
        raise ValueError("batch is empty")
    rho0s = np.stack([m.mat if hasattr(m, "mat") else np.asarray(m, dtype=complex) for m, _ in batch])
    return float(np.mean(batch_losses(net, rho0s, [obj for _, obj in batch])))


def run_epoch(
    net: QuantumNetwork,
    batch,
    state: LMState,
    cfg: LMConfig | None = None,
    trainable: np.ndarray | None = None,
):
    """One epoch on a network; returns (updated_net, EpochReport)."""
    if not batch:
        raise ValueError("batch is empty")
    trainable = np.arange(net.n_params) if trainable is None else np.asarray(trainable)
    eval_fn, jac_fn, full_vec = _problem_fns(net, batch, trainable)
    sub = net.parameter_vector()[trainable]
    new_sub, report = run_epoch_fn(state, sub, eval_fn, jac_fn, cfg)
    return net.with_vector(full_vec(new_sub)), report


def train_lm(
    net: QuantumNetwork,
    batch,
    n_epochs: int,
    cfg: LMConfig | None = None,
    trainable: np.ndarray | None = None,
    target_rms: float | None = None,
    state: LMState | None = None,
):
    """Run up to n_epochs; stop early once batch RMS reaches target_rms."""
    trainable = np.arange(net.n_params) if trainable is None else np.asarray(trainable)
    state = state or LMState.fresh(trainable.size, cfg)
    reports: list[EpochReport] = []
    for _ in range(n_epochs):
        net, report = run_epoch(net, batch, state, cfg, trainable)
        reports.append(report)
        if target_rms is not None and report.rms_after <= target_rms:
            break
        if report.degenerate:
            break
    return net, reports


def train_gradient_descent(
    net: QuantumNetwork,
    batch,
    n_epochs: int,
    rate: float = 0.5,
    trainable: np.ndarray | None = None,
    target_rms: float | None = None,
):
    """Fixed-rate descent baseline with the same reporting as the LM loop."""
    trainable = np.arange(net.n_params) if trainable is None else np.asarray(trainable)
    eval_fn, jac_fn, full_vec = _problem_fns(net, batch, trainable)
    sub = net.parameter_vector()[trainable]
    reports: list[EpochReport] = []
    for epoch in range(1, n_epochs + 1):
        losses, rows = jac_fn(sub)
        rms_before = float(np.sqrt(np.mean(losses)))
        sub = sub - rate * rows.mean(axis=0)
        rms_after = float(np.sqrt(np.mean(eval_fn(sub))))
        reports.append(EpochReport(epoch, rms_before, rms_after, 0.0, 0, True))
        if target_rms is not None and rms_after <= target_rms:
            break
    return net.with_vector(full_vec(sub)), reports


def reports_to_csv(reports, config_line: str | None = None) -> str:
    """CSV stream consumed by the plotting script: one row per epoch."""
    out = io.StringIO()
    if config_line is not None:
        out.write(f"# config: {config_line}\n")
    out.write("epoch,rms_before,rms_after,lambda,retries,accepted\n")
    for r in reports:
        out.write(
            f"{r.epoch},{r.rms_before!r},{r.rms_after!r},{r.lam!r},{r.retries},{int(r.accepted)}\n"
        )
    return out.getvalue()
