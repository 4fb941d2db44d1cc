"""Truncated Fourier series used as time-dependent control coefficients.

Each Hamiltonian coefficient is one schedule; the per-schedule weights are
laid out as ``[a0, a1..a_nF, b1..b_nF]`` so that

    value(t) = a0 + sum_k a_k cos(2 pi k t / period) + b_k sin(2 pi k t / period).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


def n_coeffs(n_harmonics: int) -> int:
    return 1 + 2 * n_harmonics


def basis_row(t: float, n_harmonics: int, period: float) -> np.ndarray:
    """Basis values [1, cos(2pi k t/T).., sin(2pi k t/T)..] at a single time."""
    return basis_matrix(np.array([t]), n_harmonics, period)[0]


def basis_matrix(times: np.ndarray, n_harmonics: int, period: float) -> np.ndarray:
    """Stacked basis rows, shape (len(times), 1 + 2*n_harmonics)."""
    times = np.asarray(times, dtype=float)
    k = np.arange(1, n_harmonics + 1)
    ang = 2.0 * np.pi * np.outer(times, k) / period
    return np.concatenate(
        [np.ones((times.size, 1)), np.cos(ang), np.sin(ang)], axis=1
    )


@dataclass(frozen=True)
class FourierSchedule:
    """One control coefficient as a function of time."""

    a0: float
    cos_coeffs: np.ndarray
    sin_coeffs: np.ndarray
    period: float

    def __post_init__(self):
        object.__setattr__(self, "cos_coeffs", np.asarray(self.cos_coeffs, dtype=float))
        object.__setattr__(self, "sin_coeffs", np.asarray(self.sin_coeffs, dtype=float))
        if self.cos_coeffs.shape != self.sin_coeffs.shape:
            raise ValueError("cos/sin coefficient counts differ")

    @property
    def n_harmonics(self) -> int:
        return self.cos_coeffs.size

    def coeff_vector(self) -> np.ndarray:
        return np.concatenate([[self.a0], self.cos_coeffs, self.sin_coeffs])

    @classmethod
    def from_coeff_vector(cls, vec: np.ndarray, period: float) -> "FourierSchedule":
        vec = np.asarray(vec, dtype=float)
        n_f = (vec.size - 1) // 2
        if vec.size != 1 + 2 * n_f:
            raise ValueError(f"coefficient vector length {vec.size} is not 1 + 2k")
        return cls(a0=float(vec[0]), cos_coeffs=vec[1 : 1 + n_f], sin_coeffs=vec[1 + n_f :], period=period)

    def value(self, t: float) -> float:
        return float(self.coeff_vector() @ basis_row(t, self.n_harmonics, self.period))


def schedule_value(s: FourierSchedule, t: float) -> float:
    """Evaluate the truncated Fourier sum at time t."""
    return s.value(t)
