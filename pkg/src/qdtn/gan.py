"""Adversarial training on 2-qubit product states.

A generator network evolves the flat state into product-like outputs; a
separate discriminator network propagates candidate states and measures
three Pauli correlations (XX, YY, ZZ).  Each squared correlation against its
threshold is one decision hyperplane: a state counts as real only when all
three planes say so, while a single plane is enough to call a fake.

Training runs in stages: (1) common generator parameters against the whole
real set, (2) a small classical style network learns a one-to-one map from
pool vectors to per-sample parameter offsets, (3) the discriminator learns
the reals, then (4) the adversarial loop alternates discriminator epochs on
freshly generated fakes with style-network updates driven by the
discriminator's input-state gradient chained back through the generator.
Real-side verdicts are frozen after stage 3: the loop never trains on
reals, so their classification is reported as static (a live re-evaluation
is carried alongside for diagnostics).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .dynamics import PropagatorCache
from .engine import batch_gradients, batch_losses
from .lm import EpochReport, LMConfig, LMState, run_epoch_fn
from .network import QuantumNetwork
from .objectives import ChainedCostate, MeasureTarget, TargetState
from .states import DensityMatrix, flat_state, pauli_string

REAL = "real"
FAKE = "fake"
PLANE_LABELS = ("xx", "yy", "zz")


@dataclass(frozen=True)
class DiscriminatorHead:
    """Three correlation hyperplanes; real means strictly below every threshold."""

    measures: tuple
    thresholds: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "thresholds", np.asarray(self.thresholds, dtype=float))
        if len(self.measures) != 3 or self.thresholds.shape != (3,):
            raise ValueError("head needs exactly three measures and thresholds")

    @classmethod
    def default(cls, threshold: float = 0.25) -> "DiscriminatorHead":
        return cls(
            measures=(pauli_string("XX"), pauli_string("YY"), pauli_string("ZZ")),
            thresholds=np.full(3, threshold),
        )

    def verdicts(self, outputs: np.ndarray) -> np.ndarray:
        """(B, 3) squared correlations -> boolean array, True = real."""
        return np.all(outputs < self.thresholds[None, :], axis=1)


@dataclass(frozen=True)
class GanConfig:
    threshold: float = 0.25
    real_target: float = 0.05
    fake_target: float = 0.6
    style_lr: float = 1e-2
    style_momentum: float = 0.9
    disc_epochs_per_round: int = 1
    gen_steps_per_round: int = 4
    lm: LMConfig = field(default_factory=LMConfig)


class StyleNet:
    """6 -> 16 (tanh) -> n_out map from pool vectors to parameter offsets."""

    INPUT_DIM = 6
    HIDDEN = 16

    def __init__(self, n_out: int, rng: np.random.Generator | None = None):
        self.n_out = n_out
        if rng is None:
            self.w1 = np.zeros((self.HIDDEN, self.INPUT_DIM))
            self.b1 = np.zeros(self.HIDDEN)
            self.w2 = np.zeros((n_out, self.HIDDEN))
            self.b2 = np.zeros(n_out)
        else:
            self.w1 = rng.normal(scale=1.0 / np.sqrt(self.INPUT_DIM), size=(self.HIDDEN, self.INPUT_DIM))
            self.b1 = np.zeros(self.HIDDEN)
            self.w2 = rng.normal(scale=0.01 / np.sqrt(self.HIDDEN), size=(n_out, self.HIDDEN))
            self.b2 = np.zeros(n_out)
        self._velocity = {k: np.zeros_like(v) for k, v in self._params().items()}

    def _params(self):
        return {"w1": self.w1, "b1": self.b1, "w2": self.w2, "b2": self.b2}

    def forward(self, z: np.ndarray) -> np.ndarray:
        """(B, 6) pool vectors -> (B, n_out) offsets; deterministic."""
        z = np.atleast_2d(z)
        h = np.tanh(z @ self.w1.T + self.b1)
        return h @ self.w2.T + self.b2

    def gradients(self, z: np.ndarray, dout: np.ndarray) -> dict:
        """Backprop mean parameter gradients for upstream dL/doutput rows."""
        z = np.atleast_2d(z)
        dout = np.atleast_2d(dout)
        b = z.shape[0]
        h = np.tanh(z @ self.w1.T + self.b1)
        dw2 = dout.T @ h / b
        db2 = dout.mean(axis=0)
        dh = (dout @ self.w2) * (1.0 - h**2)
        dw1 = dh.T @ z / b
        db1 = dh.mean(axis=0)
        return {"w1": dw1, "b1": db1, "w2": dw2, "b2": db2}

    def step(self, grads: dict, lr: float, momentum: float) -> None:
        for key, param in self._params().items():
            vel = self._velocity[key]
            vel *= momentum
            vel -= lr * grads[key]
            param += vel


@dataclass(frozen=True)
class StyledGenerator:
    """Common network plus an additive offset on its Hamiltonian coefficients."""

    common: QuantumNetwork
    style_delta: np.ndarray

    def __post_init__(self):
        delta = np.asarray(self.style_delta, dtype=float)
        if delta.size != self.common.style_indices().size:
            raise ValueError("style delta length does not match the styled coefficients")
        object.__setattr__(self, "style_delta", delta)

    def network(self) -> QuantumNetwork:
        vec = self.common.parameter_vector()
        vec[self.common.style_indices()] += self.style_delta
        return self.common.with_vector(vec)


def generate(g: StyledGenerator) -> DensityMatrix:
    """Propagate the flat 2-qubit state through the style-shifted network."""
    net = g.network()
    final = PropagatorCache(net).forward(flat_state(net.n_qubits).mat[None])[-1, 0]
    return DensityMatrix(n_qubits=net.n_qubits, mat=final)


@dataclass(frozen=True)
class RandomPool:
    vectors: np.ndarray  # (pool_size, 6) iid uniform(-1, 1)

    @classmethod
    def draw(cls, rng: np.random.Generator, size: int) -> "RandomPool":
        return cls(vectors=rng.uniform(-1.0, 1.0, size=(size, StyleNet.INPUT_DIM)))

    @classmethod
    def draw_disjoint(cls, rng: np.random.Generator, size: int) -> tuple["RandomPool", "RandomPool"]:
        """Two pools from non-overlapping draws of one seeded stream."""
        return cls.draw(rng, size), cls.draw(rng, size)


def style_coeff_stack(common: QuantumNetwork, deltas: np.ndarray) -> np.ndarray:
    """Per-example coefficient arrays from additive style offsets."""
    deltas = np.atleast_2d(deltas)
    base = common.parameter_vector()
    stack = np.repeat(base[None, :], deltas.shape[0], axis=0)
    stack[:, common.style_indices()] += deltas
    return stack.reshape(deltas.shape[0], *common.coeffs.shape)


def disc_outputs(disc: QuantumNetwork, head: DiscriminatorHead, rho_ins: np.ndarray) -> np.ndarray:
    """Squared correlations tr(M rho(t_f))^2 for every input and plane: (B, 3)."""
    finals = PropagatorCache(disc).forward(rho_ins)[-1]
    corr = np.stack(
        [np.real(np.einsum("ij,bji->b", m.mat, finals)) for m in head.measures], axis=1
    )
    return corr**2


def discriminate(head: DiscriminatorHead, disc: QuantumNetwork, rho_in: np.ndarray | DensityMatrix):
    """One input -> (outputs over the three planes, verdict)."""
    mat = rho_in.mat if isinstance(rho_in, DensityMatrix) else np.asarray(rho_in, dtype=complex)
    outputs = disc_outputs(disc, head, mat[None])[0]
    return outputs, (REAL if bool(head.verdicts(outputs[None])[0]) else FAKE)


# -- stage 1: common generator parameters --------------------------------------------


def train_generator_common(
    net: QuantumNetwork,
    reals: np.ndarray,
    epochs: int,
    cfg: LMConfig | None = None,
    target_rms: float | None = None,
):
    """Fit the shared parameters to the real set as a whole (flat input,
    squared-Frobenius objective per real).  Returns (net, EpochReports).

    Acceptance is strictly downhill here (no uphill tolerance) so the
    accepted-epoch RMS trace is monotone decreasing.
    """
    if len(reals) == 0:
        raise ValueError("no real states supplied")
    cfg = cfg or LMConfig(uphill_tol=0.0)
    flat = flat_state(net.n_qubits).mat
    trainable = net.style_indices()
    state = LMState.fresh(trainable.size, cfg)
    rho0s = np.repeat(flat[None], len(reals), axis=0)
    objectives = [TargetState(t) for t in reals]
    base = net.parameter_vector()

    def with_sub(sub):
        v = base.copy()
        v[trainable] = sub
        return v

    def eval_fn(sub):
        return batch_losses(net.with_vector(with_sub(sub)), rho0s, objectives)

    def jac_fn(sub):
        losses, grads = batch_gradients(net.with_vector(with_sub(sub)), rho0s, objectives)
        return losses, grads[:, trainable]

    sub = base[trainable]
    reports: list[EpochReport] = []
    for _ in range(epochs):
        sub, report = run_epoch_fn(state, sub, eval_fn, jac_fn, cfg)
        reports.append(report)
        if report.degenerate or (target_rms is not None and report.rms_after <= target_rms):
            break
    return net.with_vector(with_sub(sub)), reports


# -- stage 2: style network, one real per pool vector --------------------------------


def style_losses_and_grads(common: QuantumNetwork, stylenet: StyleNet, pool: RandomPool, reals: np.ndarray):
    """Per-real squared-Frobenius losses and dLoss/dOffset rows."""
    deltas = stylenet.forward(pool.vectors)
    stack = style_coeff_stack(common, deltas)
    flat = flat_state(common.n_qubits).mat
    rho0s = np.repeat(flat[None], len(reals), axis=0)
    objectives = [TargetState(t) for t in reals]
    losses, grads = batch_gradients(common, rho0s, objectives, coeff_stack=stack)
    return losses, grads[:, common.style_indices()]


def train_styles(
    common: QuantumNetwork,
    stylenet: StyleNet,
    pool: RandomPool,
    reals: np.ndarray,
    epochs: int,
    cfg: GanConfig | None = None,
    target_rms: float | None = None,
) -> np.ndarray:
    """Momentum descent on the style network; returns per-real RMS traces
    with shape (epochs_run, n_reals)."""
    cfg = cfg or GanConfig()
    if pool.vectors.shape[0] != len(reals):
        raise ValueError("pool size must match the number of reals")
    traces = []
    for _ in range(epochs):
        losses, dlddelta = style_losses_and_grads(common, stylenet, pool, reals)
        traces.append(np.sqrt(losses))
        stylenet.step(stylenet.gradients(pool.vectors, dlddelta), cfg.style_lr, cfg.style_momentum)
        if target_rms is not None and float(np.max(traces[-1])) <= target_rms:
            break
    return np.array(traces)


# -- stage 3: discriminator on the reals ----------------------------------------------


@dataclass(frozen=True)
class DiscInitialReport:
    epoch: int
    plane_rms: np.ndarray  # (3,) rms of the active-plane errors, zeros included
    real_pct: float  # aggregate all-planes rule
    plane_pct: np.ndarray  # (3,)
    n_active: int


def _real_metrics(outputs: np.ndarray, head: DiscriminatorHead):
    plane_ok = outputs < head.thresholds[None, :]
    return 100.0 * plane_ok.all(axis=1).mean(), 100.0 * plane_ok.mean(axis=0)


def train_discriminator_initial(
    disc: QuantumNetwork,
    head: DiscriminatorHead,
    reals: np.ndarray,
    epochs: int,
    cfg: GanConfig | None = None,
    stop_at_pct: float | None = None,
):
    """Push every violating (real, plane) pair below threshold toward the
    real-side target; planes already classifying a state correctly carry no
    error.  Returns (disc, [DiscInitialReport])."""
    cfg = cfg or GanConfig()
    trainable = disc.style_indices()
    state = LMState.fresh(trainable.size, cfg.lm)
    reports: list[DiscInitialReport] = []
    reals = np.asarray(reals)

    for epoch in range(1, epochs + 1):
        outputs = disc_outputs(disc, head, reals)
        active = [(i, k) for i in range(len(reals)) for k in range(3) if outputs[i, k] >= head.thresholds[k]]
        real_pct, plane_pct = _real_metrics(outputs, head)
        plane_err = np.where(
            outputs >= head.thresholds[None, :], 0.5 * (outputs - cfg.real_target) ** 2, 0.0
        )
        reports.append(
            DiscInitialReport(
                epoch=epoch,
                plane_rms=np.sqrt(plane_err.mean(axis=0)),
                real_pct=real_pct,
                plane_pct=plane_pct,
                n_active=len(active),
            )
        )
        if not active or (stop_at_pct is not None and real_pct >= stop_at_pct):
            break
        rho0s = np.stack([reals[i] for i, _ in active])
        objectives = [MeasureTarget(head.measures[k], cfg.real_target) for _, k in active]
        base = disc.parameter_vector()

        def with_sub(sub):
            v = base.copy()
            v[trainable] = sub
            return v

        def eval_fn(sub):
            return batch_losses(disc.with_vector(with_sub(sub)), rho0s, objectives)

        def jac_fn(sub):
            losses, grads = batch_gradients(disc.with_vector(with_sub(sub)), rho0s, objectives)
            return losses, grads[:, trainable]

        sub, _ = run_epoch_fn(state, base[trainable], eval_fn, jac_fn, cfg.lm)
        disc = disc.with_vector(with_sub(sub))
    return disc, reports


# -- stage 4: the adversarial loop ----------------------------------------------------


@dataclass(frozen=True)
class GanEpochMetrics:
    epoch: int
    fake_pct: float  # aggregate: any plane at/above threshold
    fake_plane_pct: np.ndarray  # (3,)
    real_pct: float  # static post-stage-3 values (loop never trains reals)
    real_plane_pct: np.ndarray
    real_pct_live: float  # diagnostic re-evaluation through the current disc


def _fake_metrics(outputs: np.ndarray, head: DiscriminatorHead):
    detected = outputs >= head.thresholds[None, :]
    return 100.0 * detected.any(axis=1).mean(), 100.0 * detected.mean(axis=0)


def generate_fakes(common: QuantumNetwork, stylenet: StyleNet, pool: RandomPool) -> np.ndarray:
    deltas = stylenet.forward(pool.vectors)
    stack = style_coeff_stack(common, deltas)
    flat = flat_state(common.n_qubits).mat
    rho0s = np.repeat(flat[None], pool.vectors.shape[0], axis=0)
    return PropagatorCache(common, coeff_stack=stack).forward(rho0s)[-1]


def _disc_phase(disc, head, fakes, state, cfg):
    """Train the discriminator to detect currently-undetected fakes: the
    plane closest to firing is pushed to the fake-side target."""
    outputs = disc_outputs(disc, head, fakes)
    undetected = np.where(~(outputs >= head.thresholds[None, :]).any(axis=1))[0]
    if undetected.size == 0:
        return disc
    best_plane = np.argmax(outputs[undetected], axis=1)
    rho0s = fakes[undetected]
    objectives = [MeasureTarget(head.measures[k], cfg.fake_target) for k in best_plane]
    trainable = disc.style_indices()
    base = disc.parameter_vector()

    def with_sub(sub):
        v = base.copy()
        v[trainable] = sub
        return v

    def eval_fn(sub):
        return batch_losses(disc.with_vector(with_sub(sub)), rho0s, objectives)

    def jac_fn(sub):
        losses, grads = batch_gradients(disc.with_vector(with_sub(sub)), rho0s, objectives)
        return losses, grads[:, trainable]

    for _ in range(cfg.disc_epochs_per_round):
        sub, report = run_epoch_fn(state, base[trainable], eval_fn, jac_fn, cfg.lm)
        base = with_sub(sub)
        if report.degenerate:
            break
    return disc.with_vector(base)


def _gen_phase(common, stylenet, disc, head, pool, cfg):
    """Style-network updates against the discriminator: for each detected
    fake, the detecting planes' loss is backpropagated through the
    discriminator to its input state, then through the generator to the
    style offsets and finally into the network weights."""
    flat = flat_state(common.n_qubits).mat
    for _ in range(cfg.gen_steps_per_round):
        fakes = generate_fakes(common, stylenet, pool)
        outputs = disc_outputs(disc, head, fakes)
        detected = outputs >= head.thresholds[None, :]
        if not detected.any():
            break
        rows = [(j, k) for j in range(len(fakes)) for k in range(3) if detected[j, k]]
        rho0s = np.stack([fakes[j] for j, _ in rows])
        objectives = [MeasureTarget(head.measures[k], cfg.real_target) for _, k in rows]
        losses, _, gamma0 = batch_gradients(disc, rho0s, objectives, want_input_grad=True)

        chain_loss = np.zeros(len(fakes))
        chain_costate = np.zeros((len(fakes),) + flat.shape, dtype=complex)
        for (j, _), loss, g0 in zip(rows, losses, gamma0):
            chain_loss[j] += loss
            chain_costate[j] += g0

        deltas = stylenet.forward(pool.vectors)
        stack = style_coeff_stack(common, deltas)
        gen_rho0s = np.repeat(flat[None], len(fakes), axis=0)
        gen_objs = [ChainedCostate(chain_loss[j], chain_costate[j]) for j in range(len(fakes))]
        _, grads = batch_gradients(common, gen_rho0s, gen_objs, coeff_stack=stack)
        dlddelta = grads[:, common.style_indices()]
        stylenet.step(stylenet.gradients(pool.vectors, dlddelta), cfg.style_lr, cfg.style_momentum)
    return stylenet


def gan_loop(
    common: QuantumNetwork,
    stylenet: StyleNet,
    disc: QuantumNetwork,
    head: DiscriminatorHead,
    fake_pool: RandomPool,
    reals: np.ndarray,
    n_epochs: int,
    cfg: GanConfig | None = None,
):
    """Alternating minimax rounds; returns (disc, stylenet, [GanEpochMetrics]).

    The real-side percentages are computed once from the incoming
    discriminator and repeated per epoch (the loop trains only on fakes);
    real_pct_live re-evaluates them for diagnostics.
    """
    cfg = cfg or GanConfig()
    reals = np.asarray(reals)
    static_real_pct, static_plane_pct = _real_metrics(disc_outputs(disc, head, reals), head)
    disc_state = LMState.fresh(disc.style_indices().size, cfg.lm)
    metrics: list[GanEpochMetrics] = []
    for epoch in range(1, n_epochs + 1):
        fakes = generate_fakes(common, stylenet, fake_pool)
        disc = _disc_phase(disc, head, fakes, disc_state, cfg)
        stylenet = _gen_phase(common, stylenet, disc, head, fake_pool, cfg)

        fakes = generate_fakes(common, stylenet, fake_pool)
        fake_pct, fake_plane = _fake_metrics(disc_outputs(disc, head, fakes), head)
        live_real_pct, _ = _real_metrics(disc_outputs(disc, head, reals), head)
        metrics.append(
            GanEpochMetrics(
                epoch=epoch,
                fake_pct=fake_pct,
                fake_plane_pct=fake_plane,
                real_pct=static_real_pct,
                real_plane_pct=static_plane_pct,
                real_pct_live=live_real_pct,
            )
        )
    return disc, stylenet, metrics


def metrics_to_csv(metrics, config_line: str | None = None) -> str:
    import io

    out = io.StringIO()
    if config_line is not None:
        out.write(f"# config: {config_line}\n")
    out.write("epoch,plane,real_pct,fake_pct,real_pct_live\n")
    for m in metrics:
        for k, label in enumerate(PLANE_LABELS):
            out.write(
                f"{m.epoch},{label},{m.real_plane_pct[k]!r},{m.fake_plane_pct[k]!r},\n"
            )
        out.write(f"{m.epoch},aggregate,{m.real_pct!r},{m.fake_pct!r},{m.real_pct_live!r}\n")
    return out.getvalue()
