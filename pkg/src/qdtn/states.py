"""Dense complex linear algebra for few-qubit states.

Provides the Pauli operators, density-matrix construction and validation,
correlation measures, and seeded generation of random product / entangled
pure states with a concurrence oracle for ground-truth separability labels.

All matrices are dense ``complex128`` numpy arrays.  Values are treated as
immutable after construction; nothing in this module mutates its inputs.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch, NotHermitian, NotPSD, TraceNotOne, ZeroMatrix

SIGMA_X = np.array([[0.0, 1.0], [1.0, 0.0]], dtype=complex)
SIGMA_Y = np.array([[0.0, -1.0j], [1.0j, 0.0]], dtype=complex)
SIGMA_Z = np.array([[1.0, 0.0], [0.0, -1.0]], dtype=complex)
SIGMA_MINUS = np.array([[0.0, 1.0], [0.0, 0.0]], dtype=complex)
IDENTITY_2 = np.eye(2, dtype=complex)

HERMITIAN_TOL = 1e-10
TRACE_TOL = 1e-10
PSD_TOL = -1e-9


def kron(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Kronecker product of two square complex matrices."""
    return np.kron(np.asarray(a, dtype=complex), np.asarray(b, dtype=complex))


def kron_all(mats) -> np.ndarray:
    out = np.array([[1.0 + 0.0j]])
    for m in mats:
        out = np.kron(out, m)
    return out


def embed_single_qubit(op: np.ndarray, qubit: int, n_qubits: int) -> np.ndarray:
    """Lift a 2x2 operator acting on ``qubit`` into the full 2^n space."""
    return kron_all(op if q == qubit else IDENTITY_2 for q in range(n_qubits))


def make_rng(seed: int | None) -> np.random.Generator:
    """Single entry point for randomness; every caller threads one of these."""
    return np.random.default_rng(seed)


@dataclass(frozen=True)
class MeasureOperator:
    """A Pauli-string observable with eigenvalues +-1 (so mat @ mat = I)."""

    label: str
    mat: np.ndarray

    @property
    def dim(self) -> int:
        return self.mat.shape[0]


def pauli_string(label: str) -> MeasureOperator:
    """Build a tensor product of single-qubit Paulis from e.g. ``"XX"``, ``"ZZZ"``."""
    table = {"X": SIGMA_X, "Y": SIGMA_Y, "Z": SIGMA_Z, "I": IDENTITY_2}
    if not label or any(c not in table for c in label):
        raise ValueError(f"unknown Pauli string {label!r}")
    return MeasureOperator(label=label, mat=kron_all(table[c] for c in label))


def z_chain(n_qubits: int) -> MeasureOperator:
    """The Z x Z x ... x Z observable on ``n_qubits`` qubits."""
    return pauli_string("Z" * n_qubits)


@dataclass(frozen=True)
class PureState:
    """Unit-norm amplitude vector over the computational basis."""

    n_qubits: int
    amplitudes: np.ndarray

    def __post_init__(self):
        amps = np.asarray(self.amplitudes, dtype=complex)
        if amps.shape != (2**self.n_qubits,):
            raise DimensionMismatch(
                f"expected {2**self.n_qubits} amplitudes, got {amps.shape}"
            )
        norm = np.linalg.norm(amps)
        if abs(norm - 1.0) > 1e-12:
            raise ValueError(f"amplitudes not normalized: |psi| = {norm}")
        object.__setattr__(self, "amplitudes", amps)

    def density(self) -> "DensityMatrix":
        """Rank-one projector |psi><psi| as a DensityMatrix."""
        mat = np.outer(self.amplitudes, self.amplitudes.conj())
        return DensityMatrix(n_qubits=self.n_qubits, mat=mat)


@dataclass(frozen=True)
class DensityMatrix:
    """Hermitian, PSD, trace-one matrix on n qubits.  Validated on build."""

    n_qubits: int
    mat: np.ndarray

    def __post_init__(self):
        mat = np.asarray(self.mat, dtype=complex)
        if mat.shape != (2**self.n_qubits, 2**self.n_qubits):
            raise DimensionMismatch(
                f"expected {2**self.n_qubits}x{2**self.n_qubits} matrix, got {mat.shape}"
            )
        object.__setattr__(self, "mat", mat)

    @property
    def dim(self) -> int:
        return self.mat.shape[0]

    def to_json_dict(self) -> dict:
        return {
            "n_qubits": self.n_qubits,
            "re": self.mat.real.tolist(),
            "im": self.mat.imag.tolist(),
        }

    @classmethod
    def from_json_dict(cls, obj: dict) -> "DensityMatrix":
        mat = np.asarray(obj["re"], dtype=float) + 1j * np.asarray(obj["im"], dtype=float)
        return validate_density(mat)


def validate_density(
    mat: np.ndarray,
    hermitian_tol: float = HERMITIAN_TOL,
    trace_tol: float = TRACE_TOL,
    psd_tol: float = PSD_TOL,
) -> DensityMatrix:
    """Check the three density-matrix invariants and return a typed value.

    Raises NotHermitian / TraceNotOne / NotPSD naming the violated invariant
    together with the measured magnitude.
    """
    mat = np.asarray(mat, dtype=complex)
    if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
        raise DimensionMismatch(f"not a square matrix: {mat.shape}")
    dim = mat.shape[0]
    n_qubits = int(round(np.log2(dim)))
    if 2**n_qubits != dim or dim < 2:
        raise DimensionMismatch(f"dimension {dim} is not a power of 2")

    herm_dev = float(np.max(np.abs(mat - mat.conj().T)))
    if herm_dev > hermitian_tol:
        raise NotHermitian(f"max |m - m^dag| = {herm_dev:.3e} > {hermitian_tol:.1e}")
    trace_dev = abs(complex(np.trace(mat)) - 1.0)
    if trace_dev > trace_tol:
        raise TraceNotOne(f"|trace - 1| = {trace_dev:.3e} > {trace_tol:.1e}")
    min_eig = float(np.linalg.eigvalsh(0.5 * (mat + mat.conj().T)).min())
    if min_eig < psd_tol:
        raise NotPSD(f"min eigenvalue = {min_eig:.3e} < {psd_tol:.1e}")
    return DensityMatrix(n_qubits=n_qubits, mat=mat)


def flat_state(n_qubits: int) -> DensityMatrix:
    """Equal superposition of all basis states: every entry equals 1/2^n."""
    if n_qubits < 1:
        raise ValueError("need at least one qubit")
    dim = 2**n_qubits
    return DensityMatrix(n_qubits=n_qubits, mat=np.full((dim, dim), 1.0 / dim, dtype=complex))


def pauli_correlation(m: MeasureOperator, rho: DensityMatrix) -> float:
    """trace(M rho), checked to be real to 1e-10 before the imaginary part is dropped."""
    if m.dim != rho.dim:
        raise DimensionMismatch(f"measure dim {m.dim} vs state dim {rho.dim}")
    val = complex(np.trace(m.mat @ rho.mat))
    if abs(val.imag) > 1e-10:
        raise NotHermitian(f"correlation has imaginary part {val.imag:.3e}")
    return float(val.real)


def concurrence_pure(psi: PureState) -> float:
    """Two-qubit pure-state concurrence 2|a00*a11 - a01*a10|; 0 iff product state."""
    if psi.n_qubits != 2:
        raise DimensionMismatch(f"concurrence defined for 2 qubits, got {psi.n_qubits}")
    a = psi.amplitudes
    return float(2.0 * abs(a[0] * a[3] - a[1] * a[2]))


def _haar_qubit(rng: np.random.Generator) -> np.ndarray:
    v = rng.normal(size=2) + 1j * rng.normal(size=2)
    return v / np.linalg.norm(v)


def random_product_state(rng: np.random.Generator) -> PureState:
    """|a> tensor |b> with both factors Haar-uniform single-qubit states."""
    a = _haar_qubit(rng)
    b = _haar_qubit(rng)
    return PureState(n_qubits=2, amplitudes=np.kron(a, b))


def random_entangled_state(rng: np.random.Generator, c_min: float) -> PureState:
    """Haar-uniform 2-qubit state, resampled until concurrence >= c_min."""
    if not 0.0 < c_min <= 1.0:
        raise ValueError(f"c_min must lie in (0, 1], got {c_min}")
    while True:
        v = rng.normal(size=4) + 1j * rng.normal(size=4)
        psi = PureState(n_qubits=2, amplitudes=v / np.linalg.norm(v))
        if concurrence_pure(psi) >= c_min:
            return psi


def to_density_or_raise(mat: np.ndarray) -> DensityMatrix:
    """Normalize a PSD matrix by its trace and validate (used by image encoding)."""
    tr = abs(complex(np.trace(mat)))
    if tr <= 1e-300:
        raise ZeroMatrix("trace is zero; cannot normalize")
    return validate_density(mat / tr)
