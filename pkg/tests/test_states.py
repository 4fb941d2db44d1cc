import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qdtn.errors import DimensionMismatch, NotPSD, TraceNotOne
from qdtn.states import (
    SIGMA_X,
    SIGMA_Y,
    SIGMA_Z,
    DensityMatrix,
    PureState,
    concurrence_pure,
    flat_state,
    kron,
    make_rng,
    pauli_correlation,
    pauli_string,
    random_entangled_state,
    random_product_state,
    validate_density,
    z_chain,
)

I2 = np.eye(2, dtype=complex)


class TestKron:
    def test_identity_case(self):
        assert np.array_equal(kron(I2, I2), np.eye(4, dtype=complex))

    def test_zz_diagonal_signs(self):
        assert np.allclose(np.diag(kron(SIGMA_Z, SIGMA_Z)), [1, -1, -1, 1])

    def test_xy_corner_entry(self):
        # Hand oracle: entry ((0,0),(1,1)) = sigma_x[0,1] * sigma_y[0,1] = 1 * (-i).
        assert kron(SIGMA_X, SIGMA_Y)[0, 3] == pytest.approx(-1j)

    @given(st.integers(0, 2**32 - 1))
    @settings(max_examples=30, deadline=None)
    def test_associativity(self, seed):
        rng = make_rng(seed)
        a, b, c = (rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2)) for _ in range(3))
        left = kron(kron(a, b), c)
        right = kron(a, kron(b, c))
        assert np.max(np.abs(left - right)) <= 1e-13


class TestPauliCorrelation:
    def test_zz_on_ground_state(self):
        rho = PureState(2, np.array([1, 0, 0, 0], dtype=complex)).density()
        assert pauli_correlation(pauli_string("ZZ"), rho) == pytest.approx(1.0)

    def test_xx_on_maximally_mixed(self):
        rho = DensityMatrix(2, np.eye(4, dtype=complex) / 4)
        assert pauli_correlation(pauli_string("XX"), rho) == pytest.approx(0.0, abs=1e-12)

    def test_xx_on_bell_state(self):
        # Independent 4x4 oracle: XX assembled entrywise, trace computed by loops.
        xx = np.zeros((4, 4), dtype=complex)
        for i, j, v in [(0, 3, 1), (1, 2, 1), (2, 1, 1), (3, 0, 1)]:
            xx[i, j] = v
        bell = np.array([1, 0, 0, 1], dtype=complex) / np.sqrt(2)
        rho = np.outer(bell, bell.conj())
        oracle = sum(xx[i, j] * rho[j, i] for i in range(4) for j in range(4))
        assert oracle == pytest.approx(1.0)
        assert pauli_correlation(
            pauli_string("XX"), PureState(2, bell).density()
        ) == pytest.approx(oracle.real)

    def test_dim_mismatch_raises(self):
        with pytest.raises(DimensionMismatch):
            pauli_correlation(pauli_string("Z"), flat_state(2))

    @given(st.integers(0, 2**32 - 1), st.sampled_from(["XX", "YY", "ZZ"]))
    @settings(max_examples=40, deadline=None)
    def test_bounded_by_one(self, seed, label):
        rng = make_rng(seed)
        v = rng.normal(size=4) + 1j * rng.normal(size=4)
        rho = PureState(2, v / np.linalg.norm(v)).density()
        assert abs(pauli_correlation(pauli_string(label), rho)) <= 1.0 + 1e-12


class TestFlatState:
    def test_one_qubit_entries(self):
        assert np.allclose(flat_state(1).mat, 0.5 * np.ones((2, 2)))

    def test_two_qubit_entries(self):
        assert np.allclose(flat_state(2).mat, 0.25 * np.ones((4, 4)))

    def test_trace_three_qubits(self):
        assert np.trace(flat_state(3).mat) == pytest.approx(1.0)


class TestConcurrence:
    def test_basis_product_state(self):
        psi = PureState(2, np.array([1, 0, 0, 0], dtype=complex))
        assert concurrence_pure(psi) == 0.0

    def test_bell_state_is_maximal(self):
        psi = PureState(2, np.array([1, 0, 0, 1], dtype=complex) / np.sqrt(2))
        assert concurrence_pure(psi) == pytest.approx(1.0)

    def test_plus_plus_product(self):
        psi = PureState(2, np.full(4, 0.5, dtype=complex))
        assert concurrence_pure(psi) == pytest.approx(0.0, abs=1e-15)

    def test_wrong_qubit_count(self):
        with pytest.raises(DimensionMismatch):
            concurrence_pure(PureState(1, np.array([1, 0], dtype=complex)))


class TestRandomStates:
    def test_product_states_have_zero_concurrence(self):
        rng = make_rng(7)
        for _ in range(10_000):
            assert concurrence_pure(random_product_state(rng)) < 1e-12

    def test_product_state_seed_determinism(self):
        a = random_product_state(make_rng(42)).amplitudes
        b = random_product_state(make_rng(42)).amplitudes
        assert np.array_equal(a, b)

    def test_eighty_draws_distinct(self):
        rng = make_rng(3)
        states = [tuple(np.round(random_product_state(rng).amplitudes, 12)) for _ in range(80)]
        assert len(set(states)) == 80

    def test_entangled_pool_respects_floor(self):
        rng = make_rng(11)
        for _ in range(80):
            psi = random_entangled_state(rng, 0.3)
            assert concurrence_pure(psi) >= 0.3

    def test_entangled_high_floor(self):
        psi = random_entangled_state(make_rng(5), 0.99)
        assert concurrence_pure(psi) >= 0.99

    def test_entangled_seed_determinism(self):
        a = random_entangled_state(make_rng(9), 0.3).amplitudes
        b = random_entangled_state(make_rng(9), 0.3).amplitudes
        assert np.array_equal(a, b)

    @given(st.integers(0, 2**32 - 1))
    @settings(max_examples=50, deadline=None)
    def test_outer_product_is_valid_density(self, seed):
        rng = make_rng(seed)
        v = rng.normal(size=4) + 1j * rng.normal(size=4)
        psi = PureState(2, v / np.linalg.norm(v))
        validate_density(psi.density().mat)


class TestValidateDensity:
    def test_maximally_mixed_single_qubit(self):
        dm = validate_density(np.eye(2, dtype=complex) / 2)
        assert dm.n_qubits == 1

    def test_trace_not_one(self):
        with pytest.raises(TraceNotOne):
            validate_density(np.diag([1.0, 0.5]).astype(complex))

    def test_not_psd(self):
        with pytest.raises(NotPSD):
            validate_density(np.diag([1.5, -0.5]).astype(complex))

    def test_non_power_of_two_rejected(self):
        with pytest.raises(DimensionMismatch):
            validate_density(np.eye(3, dtype=complex) / 3)


class TestMeasureOperators:
    @pytest.mark.parametrize("label", ["XX", "YY", "ZZ", "ZZZ", "ZZZZ"])
    def test_squares_to_identity(self, label):
        m = pauli_string(label).mat
        assert np.allclose(m @ m, np.eye(m.shape[0]))

    def test_z_chain_matches_pauli_string(self):
        assert np.array_equal(z_chain(3).mat, pauli_string("ZZZ").mat)


class TestSerialization:
    def test_json_round_trip(self):
        rho = random_product_state(make_rng(1)).density()
        again = DensityMatrix.from_json_dict(rho.to_json_dict())
        assert np.allclose(again.mat, rho.mat, atol=1e-15)
        assert again.n_qubits == 2
