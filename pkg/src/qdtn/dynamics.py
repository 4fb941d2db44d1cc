"""Forward/backward integration of the controlled master equation.

Two stepping modes share one grid of ``n_steps`` uniform intervals:

* dissipation off -- each step applies U = exp(-i H(t_mid) dt) built from a
  Hermitian eigendecomposition, so trace, Hermiticity and the spectrum are
  preserved to round-off;
* dissipation on -- classical 4th-order Runge-Kutta on the full right-hand
  side, with the per-qubit lowering dissipator weighted by the clamped
  Gamma(t).

The backward pass is the exact algebraic adjoint of the forward
discretization (adjoint of each step, applied in reverse), and parameter
gradients are assembled from the same step adjoints.  The computed gradient
therefore differentiates the *discretized* loss exactly, which is what the
curvature-based trainer needs; finite differences agree to round-off.

Gradient bookkeeping convention: a loss L(rho_final) enters the engine as a
Hermitian matrix g with dL = -2 tr(g drho_final).  The target-state costate
(T - rho) satisfies this directly; other objectives scale their costate to
match (see objectives.py).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch, StepUnstable
from .network import QuantumNetwork, hamiltonian_directions
from .schedules import basis_matrix
from .states import (
    SIGMA_MINUS,
    DensityMatrix,
    MeasureOperator,
    embed_single_qubit,
    validate_density,
)

_DEGENERACY_EPS = 1e-6


@dataclass(frozen=True)
class LindbladOps:
    """Per-qubit lowering operators and the summed number operator diagonal.

    Each embedded sigma- is a pure index selector (it moves the qubit-is-1
    sub-block onto the qubit-is-0 sub-block), so the sandwich products are
    applied by fancy indexing instead of matrix multiplication.
    """

    lowering: np.ndarray  # (n_qubits, d, d)
    raising: np.ndarray  # (n_qubits, d, d)
    number_diag: np.ndarray  # (d,) real; sum_q sigma+ sigma- is diagonal 0/1 per qubit
    blocks: tuple  # per qubit: (indices with the bit clear, with the bit set)

    @classmethod
    def build(cls, n_qubits: int) -> "LindbladOps":
        lowering = np.array(
            [embed_single_qubit(SIGMA_MINUS, q, n_qubits) for q in range(n_qubits)]
        )
        raising = lowering.conj().transpose(0, 2, 1)
        number = np.einsum("qij,qjk->ik", raising, lowering)
        idx = np.arange(2**n_qubits)
        blocks = []
        for q in range(n_qubits):
            bit = 1 << (n_qubits - 1 - q)  # qubit 0 is the leftmost kron factor
            ones = idx[(idx & bit) != 0]
            blocks.append((ones - bit, ones))
        return cls(
            lowering=lowering,
            raising=raising,
            number_diag=np.diag(number).real.copy(),
            blocks=tuple(blocks),
        )

    def dissipator(self, rho: np.ndarray) -> np.ndarray:
        """sum_q L rho L^dag - (1/2){L^dag L, rho} (unit rate)."""
        nd = self.number_diag
        out = -0.5 * (nd[:, None] * rho + rho * nd[None, :])
        for zeros, ones in self.blocks:
            out[..., zeros[:, None], zeros[None, :]] += rho[..., ones[:, None], ones[None, :]]
        return out

    def dissipator_adjoint(self, g: np.ndarray) -> np.ndarray:
        """sum_q L^dag g L - (1/2){L^dag L, g}: the pairing adjoint of dissipator."""
        nd = self.number_diag
        out = -0.5 * (nd[:, None] * g + g * nd[None, :])
        for zeros, ones in self.blocks:
            out[..., ones[:, None], ones[None, :]] += g[..., zeros[:, None], zeros[None, :]]
        return out


@dataclass(frozen=True)
class StateTrajectory:
    """rho on the full grid; states[0] is the initial condition bit-for-bit."""

    times: np.ndarray  # (n_steps+1,)
    states: np.ndarray  # (n_steps+1, d, d)

    @property
    def final(self) -> np.ndarray:
        return self.states[-1]


@dataclass(frozen=True)
class CostateTrajectory:
    """Backward-propagated error matrices; costates[-1] is the supplied target."""

    times: np.ndarray
    costates: np.ndarray


class PropagatorCache:
    """Grid-sampled Hamiltonian data reused by forward, backward and gradient.

    ``coeff_stack`` (B, n_schedules, n_coeffs) gives every batch element its
    own coefficients (used by style-shifted generators); with the default
    ``None`` all examples share net.coeffs and the heavy per-step arrays drop
    the batch axis, broadcasting over examples instead.
    """

    def __init__(self, net: QuantumNetwork, coeff_stack: np.ndarray | None = None):
        self.net = net
        self.dt = net.t_f / net.n_steps
        self.times = net.time_grid()
        self.mids = net.midpoints()
        self.dirs = hamiltonian_directions(net.n_qubits)
        self.basis_grid = basis_matrix(self.times, net.n_harmonics, net.t_f)
        self.basis_mid = basis_matrix(self.mids, net.n_harmonics, net.t_f)

        if coeff_stack is None:
            coeffs = net.coeffs
            vals_mid = self.basis_mid @ coeffs.T  # (n_steps, n_sched)
            vals_grid = self.basis_grid @ coeffs.T
        else:
            coeff_stack = np.asarray(coeff_stack, dtype=float)
            vals_mid = np.einsum("tc,bsc->tbs", self.basis_mid, coeff_stack)
            vals_grid = np.einsum("tc,bsc->tbs", self.basis_grid, coeff_stack)
        self.coeff_stack = coeff_stack

        self.h_mid = np.einsum("...s,sij->...ij", vals_mid[..., :-1], self.dirs)
        self.lindblad = net.lindblad_enabled
        if self.lindblad:
            self.h_grid = np.einsum("...s,sij->...ij", vals_grid[..., :-1], self.dirs)
            self.ops = LindbladOps.build(net.n_qubits)
            self.gamma_mid = np.maximum(vals_mid[..., -1], 0.0)
            self.gamma_grid = np.maximum(vals_grid[..., -1], 0.0)
            self.mask_mid = (vals_mid[..., -1] > 0.0).astype(float)
            self.mask_grid = (vals_grid[..., -1] > 0.0).astype(float)
        else:
            eigvals, eigvecs = np.linalg.eigh(self.h_mid)
            self.eigvals = eigvals  # (n_steps, [B], d)
            self.eigvecs = eigvecs
            phases = np.exp(-1j * self.dt * eigvals)
            self.phases = phases
            self.unitaries = np.einsum(
                "...ab,...b,...cb->...ac", eigvecs, phases, eigvecs.conj()
            )

    # -- right-hand sides ---------------------------------------------------------

    def _rhs(self, h, gval, rho):
        out = -1j * (h @ rho - rho @ h)
        if self.lindblad:
            out += np.asarray(gval)[..., None, None] * self.ops.dissipator(rho)
        return out

    def _rhs_adjoint(self, h, gval, g):
        out = 1j * (h @ g - g @ h)
        if self.lindblad:
            out += np.asarray(gval)[..., None, None] * self.ops.dissipator_adjoint(g)
        return out

    def _stage_data(self, k):
        """(H, Gamma) at the RK4 stage times (t_k, t_mid, t_mid, t_{k+1})."""
        return (
            (self.h_grid[k], self.gamma_grid[k]),
            (self.h_mid[k], self.gamma_mid[k]),
            (self.h_mid[k], self.gamma_mid[k]),
            (self.h_grid[k + 1], self.gamma_grid[k + 1]),
        )

    # -- forward --------------------------------------------------------------------

    def forward(self, rho0s: np.ndarray, check: bool = True) -> np.ndarray:
        """Propagate a stacked batch (B, d, d); returns (n_steps+1, B, d, d)."""
        n = self.net.n_steps
        out = np.empty((n + 1,) + rho0s.shape, dtype=complex)
        out[0] = rho0s
        rho = rho0s
        dt = self.dt
        for k in range(n):
            if self.lindblad:
                (h1, g1), (hm, gm), _, (h2, g2) = self._stage_data(k)
                k1 = self._rhs(h1, g1, rho)
                k2 = self._rhs(hm, gm, rho + (dt / 2) * k1)
                k3 = self._rhs(hm, gm, rho + (dt / 2) * k2)
                k4 = self._rhs(h2, g2, rho + dt * k3)
                rho = rho + (dt / 6) * (k1 + 2 * k2 + 2 * k3 + k4)
            else:
                u = self.unitaries[k]
                rho = u @ rho @ u.conj().swapaxes(-1, -2)
            out[k + 1] = rho
            if check and not np.all(np.isfinite(rho.view(float))):
                raise StepUnstable(f"non-finite state at step {k + 1}")
        if check:
            tr = np.einsum("...ii", out[-1])
            drift = float(np.max(np.abs(tr - np.einsum("...ii", rho0s))))
            if drift > 1e-6:
                raise StepUnstable(f"trace drift {drift:.3e} at final time")
        return out

    # -- backward (exact step adjoints) ----------------------------------------------

    def _adjoint_unitary_step(self, k, g):
        u = self.unitaries[k]
        return u.conj().swapaxes(-1, -2) @ g @ u

    def _rk4_lambdas(self, k, g):
        dt = self.dt
        stages = self._stage_data(k)
        lam4 = (dt / 6) * g
        lam3 = (dt / 3) * g + dt * self._rhs_adjoint(*stages[3], lam4)
        lam2 = (dt / 3) * g + (dt / 2) * self._rhs_adjoint(*stages[2], lam3)
        lam1 = (dt / 6) * g + (dt / 2) * self._rhs_adjoint(*stages[1], lam2)
        return (lam1, lam2, lam3, lam4), stages

    def _adjoint_rk4_step(self, k, g, lambdas=None, stages=None):
        if lambdas is None:
            lambdas, stages = self._rk4_lambdas(k, g)
        out = g.copy()
        for lam, stage in zip(lambdas, stages):
            out += self._rhs_adjoint(*stage, lam)
        return out

    def backward(self, gamma_final: np.ndarray) -> np.ndarray:
        """Adjoint-propagate (B, d, d) from the final grid point back to t=0."""
        n = self.net.n_steps
        out = np.empty((n + 1,) + gamma_final.shape, dtype=complex)
        out[n] = gamma_final
        g = gamma_final
        for k in range(n - 1, -1, -1):
            g = self._adjoint_rk4_step(k, g) if self.lindblad else self._adjoint_unitary_step(k, g)
            out[k] = g
        return out

    def _stage_states(self, k, rho_k):
        dt = self.dt
        stages = self._stage_data(k)
        z1 = rho_k
        z2 = rho_k + (dt / 2) * self._rhs(*stages[0], z1)
        z3 = rho_k + (dt / 2) * self._rhs(*stages[1], z2)
        z4 = rho_k + dt * self._rhs(*stages[2], z3)
        return (z1, z2, z3, z4)

    # -- gradient assembly -------------------------------------------------------------

    def _phi_divided_difference(self, k):
        """D[a,b] = (exp(-i dt w_a) - exp(-i dt w_b)) / (w_a - w_b), stable at
        near-degenerate eigenvalues via the phi(x) = (e^x - 1)/x series."""
        w = self.eigvals[k]
        ph = self.phases[k]
        x = -1j * self.dt * (w[..., :, None] - w[..., None, :])
        small = np.abs(x) < _DEGENERACY_EPS
        safe = np.where(small, 1.0, x)
        phi = np.where(small, 1.0 + x / 2 + x * x / 6, (np.exp(safe) - 1.0) / safe)
        return (-1j * self.dt) * ph[..., None, :] * phi

    def gradient(
        self,
        fwd_states: np.ndarray,
        gamma_final: np.ndarray,
        store_costates: bool = False,
    ) -> tuple[np.ndarray, np.ndarray | None]:
        """Exact gradient of the discretized loss for a stacked batch.

        Returns (grads, costates): grads has shape (B, n_params) ordered by
        the parameter-vector contract; costates is the full backward
        trajectory when requested, else None.
        """
        net = self.net
        n = net.n_steps
        batch_shape = gamma_final.shape[:-2]
        n_dirs = net.n_schedules - 1
        contrib = np.zeros(batch_shape + (net.n_schedules, net.coeffs.shape[1]))
        costates = None
        if store_costates:
            costates = np.empty((n + 1,) + gamma_final.shape, dtype=complex)
            costates[n] = gamma_final

        g = gamma_final
        dirs = self.dirs
        dim = dirs.shape[-1]
        dirs_flat = dirs.transpose(0, 2, 1).reshape(n_dirs, dim * dim).T  # (d*d, n_dirs), E^T rows
        for k in range(n - 1, -1, -1):
            rho_k = fwd_states[k]
            if self.lindblad:
                lambdas, stages = self._rk4_lambdas(k, g)
                zs = self._stage_states(k, rho_k)
                rows = (self.basis_grid[k], self.basis_mid[k], self.basis_mid[k], self.basis_grid[k + 1])
                masks = (self.mask_grid[k], self.mask_mid[k], self.mask_mid[k], self.mask_grid[k + 1])
                for lam, z, row, mask in zip(lambdas, zs, rows, masks):
                    # d/dc of the Hamiltonian part: tr(lam (-i)[E, z]) = -i tr(E [z, lam])
                    p = z @ lam - lam @ z
                    s = np.real(-1j * (p.reshape(batch_shape + (dim * dim,)) @ dirs_flat))
                    contrib[..., :n_dirs, :] += s[..., :, None] * row[None, :]
                    sd = np.real(np.einsum("...pq,...qp->...", lam, self.ops.dissipator(z)))
                    contrib[..., -1, :] += (sd * mask)[..., None] * row[None, :]
                g = self._adjoint_rk4_step(k, g, lambdas, stages)
            else:
                q = self.eigvecs[k]
                qh = q.conj().swapaxes(-1, -2)
                g_t = qh @ g @ q
                rho_t = qh @ rho_k @ q
                r = rho_t * self.phases[k].conj()[..., None, :]
                t_mat = r @ g_t
                w = self._phi_divided_difference(k) * t_mat.swapaxes(-1, -2)
                v = q.conj() @ w @ q.swapaxes(-1, -2)
                # 2 Re tr(gamma dU rho U^dag) per unit direction; the generator
                # matrices are symmetric so the transposed flattening matches.
                s = 2.0 * np.real(v.reshape(batch_shape + (dim * dim,)) @ dirs_flat)
                contrib[..., :n_dirs, :] += s[..., :, None] * self.basis_mid[k][None, :]
                g = self._adjoint_unitary_step(k, g)
            if store_costates:
                costates[k] = g

        grads = -2.0 * contrib.reshape(batch_shape + (net.n_params,))
        return grads, costates


# -- public single-example operations ----------------------------------------------


def propagate_forward(net: QuantumNetwork, rho0: DensityMatrix | np.ndarray) -> StateTrajectory:
    """Integrate the master equation on the uniform grid from rho0 to t_f."""
    mat = rho0.mat if isinstance(rho0, DensityMatrix) else np.asarray(rho0, dtype=complex)
    if mat.shape != (net.dim, net.dim):
        raise DimensionMismatch(f"state shape {mat.shape} vs network dim {net.dim}")
    cache = PropagatorCache(net)
    states = cache.forward(mat[None])[:, 0]
    return StateTrajectory(times=cache.times, states=states)


def propagate_costate(
    net: QuantumNetwork, fwd: StateTrajectory, gamma_f: np.ndarray
) -> CostateTrajectory:
    """Apply the exact adjoint of each forward step in reverse order."""
    gamma_f = np.asarray(gamma_f, dtype=complex)
    if gamma_f.shape != (net.dim, net.dim):
        raise DimensionMismatch(f"costate shape {gamma_f.shape} vs network dim {net.dim}")
    if fwd.states.shape[0] != net.n_steps + 1:
        raise DimensionMismatch("trajectory grid does not match the network grid")
    cache = PropagatorCache(net)
    costates = cache.backward(gamma_f[None])[:, 0]
    return CostateTrajectory(times=cache.times, costates=costates)


def assemble_gradient(
    net: QuantumNetwork, fwd: StateTrajectory, bwd: CostateTrajectory
) -> np.ndarray:
    """Per-coefficient gradient from co-propagated state/costate trajectories.

    With ``bwd`` seeded by ``final_costate_target`` this is the exact
    gradient of the squared Frobenius distance to the target under the
    discretized dynamics.
    """
    if fwd.states.shape != bwd.costates.shape:
        raise DimensionMismatch("state and costate grids differ")
    cache = PropagatorCache(net)
    grads, _ = cache.gradient(fwd.states[:, None], bwd.costates[-1][None])
    return grads[0]


def final_costate_target(target: np.ndarray, rho_f: np.ndarray) -> np.ndarray:
    """Entrywise difference T - rho(t_f): the target-state boundary condition."""
    target = np.asarray(target, dtype=complex)
    rho_f = np.asarray(rho_f, dtype=complex)
    if target.shape != rho_f.shape:
        raise DimensionMismatch(f"target {target.shape} vs state {rho_f.shape}")
    return target - rho_f


def final_costate_measure(
    m: MeasureOperator, rho_f: np.ndarray, target: float
) -> np.ndarray:
    """2 (tr(M rho)^2 - target) tr(M rho) M: the measure-cost boundary condition.

    Entrywise this is the derivative of (1/2)(tr(M rho)^2 - target)^2 with
    respect to the entries of rho.
    """
    rho_f = np.asarray(rho_f, dtype=complex)
    if m.mat.shape != rho_f.shape:
        raise DimensionMismatch(f"measure {m.mat.shape} vs state {rho_f.shape}")
    corr = float(np.real(np.trace(m.mat @ rho_f)))
    return 2.0 * (corr**2 - target) * corr * m.mat


def validate_state_trajectory(traj: StateTrajectory, psd_tol: float = -1e-8) -> None:
    """Validate every stored grid point with the relaxed PSD tolerance."""
    for k in range(traj.states.shape[0]):
        try:
            validate_density(traj.states[k], hermitian_tol=1e-8, trace_tol=1e-8, psd_tol=psd_tol)
        except Exception as exc:  # annotate with the grid index
            raise StepUnstable(f"state at grid index {k} invalid: {exc}") from exc
