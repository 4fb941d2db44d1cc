"""The trainable network: n qubits plus Fourier schedules for every control.

Schedule order (also the parameter-vector contract used everywhere,
including CSV/JSON artifacts):

    [K_1 .. K_n | eps_1 .. eps_n | zeta_(i,j) pairs lexicographic i<j | Gamma]

with each schedule contributing ``[a0, a1..a_nF, b1..b_nF]``.  Gamma is the
dissipation strength; it is part of the vector whether or not dissipation
is enabled, so round-trips are exact.  At evaluation Gamma(t) is clamped to
max(value, 0); the clamp passes zero gradient when active.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .schedules import FourierSchedule, basis_matrix, n_coeffs
from .states import SIGMA_X, SIGMA_Z, embed_single_qubit


def zeta_pairs(n_qubits: int) -> list[tuple[int, int]]:
    return [(i, j) for i in range(n_qubits) for j in range(i + 1, n_qubits)]


def hamiltonian_directions(n_qubits: int) -> np.ndarray:
    """Constant generator matrices, one per non-Gamma schedule.

    Order matches the schedule order: sigma_x per qubit, sigma_z per qubit,
    then sigma_z sigma_z per pair.  The pair term carries no extra 1/2: the
    Hamiltonian's half-weighted double sum over i != j collapses to a plain
    sum over i < j.
    """
    dirs = [embed_single_qubit(SIGMA_X, q, n_qubits) for q in range(n_qubits)]
    dirs += [embed_single_qubit(SIGMA_Z, q, n_qubits) for q in range(n_qubits)]
    for i, j in zeta_pairs(n_qubits):
        dirs.append(
            embed_single_qubit(SIGMA_Z, i, n_qubits) @ embed_single_qubit(SIGMA_Z, j, n_qubits)
        )
    return np.array(dirs)


@dataclass(frozen=True)
class QuantumNetwork:
    """Coefficients for all schedules plus the time grid they evolve on.

    ``coeffs`` has shape (n_schedules, 1 + 2*n_harmonics); the last row is
    Gamma.  Instances are immutable; ``with_vector`` returns a modified copy.
    """

    n_qubits: int
    coeffs: np.ndarray
    t_f: float = 1.0
    n_steps: int = 200
    n_harmonics: int = 3
    lindblad_enabled: bool = False

    def __post_init__(self):
        coeffs = np.asarray(self.coeffs, dtype=float)
        expected = (self.n_schedules, n_coeffs(self.n_harmonics))
        if coeffs.shape != expected:
            raise ValueError(f"coeffs shape {coeffs.shape}, expected {expected}")
        object.__setattr__(self, "coeffs", coeffs)

    @property
    def n_schedules(self) -> int:
        n = self.n_qubits
        return 2 * n + n * (n - 1) // 2 + 1

    @property
    def dim(self) -> int:
        return 2**self.n_qubits

    @property
    def n_params(self) -> int:
        return self.n_schedules * n_coeffs(self.n_harmonics)

    @classmethod
    def zeros(
        cls,
        n_qubits: int,
        t_f: float = 1.0,
        n_steps: int = 200,
        n_harmonics: int = 3,
        lindblad_enabled: bool = False,
    ) -> "QuantumNetwork":
        n_sched = 2 * n_qubits + n_qubits * (n_qubits - 1) // 2 + 1
        return cls(
            n_qubits=n_qubits,
            coeffs=np.zeros((n_sched, n_coeffs(n_harmonics))),
            t_f=t_f,
            n_steps=n_steps,
            n_harmonics=n_harmonics,
            lindblad_enabled=lindblad_enabled,
        )

    @classmethod
    def random(
        cls,
        n_qubits: int,
        rng: np.random.Generator,
        scale: float = 0.5,
        t_f: float = 1.0,
        n_steps: int = 200,
        n_harmonics: int = 3,
        lindblad_enabled: bool = False,
        gamma_floor: float = 0.0,
    ) -> "QuantumNetwork":
        """Seeded random coefficients; Gamma's a0 is lifted by gamma_floor so a
        positive floor keeps the clamp inactive during gradient checks."""
        net = cls.zeros(n_qubits, t_f, n_steps, n_harmonics, lindblad_enabled)
        coeffs = rng.uniform(-scale, scale, size=net.coeffs.shape)
        if gamma_floor > 0.0:
            coeffs[-1, 0] = gamma_floor + abs(coeffs[-1, 0])
            coeffs[-1, 1:] *= 0.2
        return replace(net, coeffs=coeffs)

    # -- parameter vector contract -------------------------------------------------

    def parameter_vector(self) -> np.ndarray:
        return self.coeffs.reshape(-1).copy()

    def with_vector(self, vec: np.ndarray) -> "QuantumNetwork":
        vec = np.asarray(vec, dtype=float)
        if vec.size != self.n_params:
            raise ValueError(f"vector length {vec.size}, expected {self.n_params}")
        return replace(self, coeffs=vec.reshape(self.coeffs.shape))

    @classmethod
    def from_vector(
        cls,
        n_qubits: int,
        vec: np.ndarray,
        t_f: float = 1.0,
        n_steps: int = 200,
        n_harmonics: int = 3,
        lindblad_enabled: bool = False,
    ) -> "QuantumNetwork":
        return cls.zeros(n_qubits, t_f, n_steps, n_harmonics, lindblad_enabled).with_vector(vec)

    def style_indices(self) -> np.ndarray:
        """Flat indices of every K/eps/zeta coefficient (everything but Gamma)."""
        return np.arange((self.n_schedules - 1) * n_coeffs(self.n_harmonics))

    def hamiltonian_indices(self) -> np.ndarray:
        return self.style_indices()

    def gamma_indices(self) -> np.ndarray:
        return np.arange((self.n_schedules - 1) * n_coeffs(self.n_harmonics), self.n_params)

    # -- schedule accessors ----------------------------------------------------------

    def schedule(self, row: int) -> FourierSchedule:
        return FourierSchedule.from_coeff_vector(self.coeffs[row], period=self.t_f)

    def k_schedule(self, qubit: int) -> FourierSchedule:
        return self.schedule(qubit)

    def eps_schedule(self, qubit: int) -> FourierSchedule:
        return self.schedule(self.n_qubits + qubit)

    def zeta_schedule(self, i: int, j: int) -> FourierSchedule:
        pair = (i, j) if i < j else (j, i)
        return self.schedule(2 * self.n_qubits + zeta_pairs(self.n_qubits).index(pair))

    def gamma_schedule(self) -> FourierSchedule:
        return self.schedule(self.n_schedules - 1)

    # -- evaluation ------------------------------------------------------------------

    def schedule_values(self, times: np.ndarray) -> np.ndarray:
        """All schedule values on a time grid, shape (len(times), n_schedules)."""
        basis = basis_matrix(np.atleast_1d(times), self.n_harmonics, self.t_f)
        return basis @ self.coeffs.T

    def gamma_values(self, times: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Clamped Gamma(t) and the clamp-open mask (1 where the raw value > 0)."""
        raw = self.schedule_values(times)[..., -1]
        mask = (raw > 0.0).astype(float)
        return raw * mask, mask

    def time_grid(self) -> np.ndarray:
        return np.linspace(0.0, self.t_f, self.n_steps + 1)

    def midpoints(self) -> np.ndarray:
        grid = self.time_grid()
        return 0.5 * (grid[:-1] + grid[1:])


def build_hamiltonian(net: QuantumNetwork, t: float) -> np.ndarray:
    """Hermitian 2^n x 2^n control Hamiltonian at time t."""
    values = net.schedule_values(np.array([t]))[0, :-1]
    dirs = hamiltonian_directions(net.n_qubits)
    return np.einsum("s,sij->ij", values, dirs)
