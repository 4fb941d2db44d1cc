import numpy as np
import pytest

from qdtn.errors import SourceTooSmall, UnpairableEntry, ZeroMatrix
from qdtn.imaging import (
    GrayImage,
    downsample,
    dft2,
    hermitize,
    idft2,
    image_to_state,
    invert_swaps,
    to_density,
)
from qdtn.states import make_rng, validate_density


def random_image(rng, size):
    return GrayImage(rng.uniform(0.0, 1.0, size=(size, size)))


def naive_dft2(pixels):
    """O(M^4) direct double sum: the independent transform oracle."""
    m = pixels.shape[0]
    out = np.zeros((m, m), dtype=complex)
    for u in range(m):
        for v in range(m):
            acc = 0.0 + 0.0j
            for x in range(m):
                for y in range(m):
                    acc += pixels[x, y] * np.exp(-2j * np.pi * (u * x + v * y) / m)
            out[u, v] = acc
    return out


def sorted_entries(mat):
    flat = mat.reshape(-1)
    order = np.lexsort((flat.imag, flat.real))
    return flat[order]


class TestDownsample:
    def test_constant_image_any_level(self):
        img = GrayImage(np.full((32, 32), 0.5))
        for n in range(0, 6):
            out = downsample(img, n)
            assert out.pixels.shape == (2**n, 2**n)
            assert np.allclose(out.pixels, 0.5)

    def test_checkerboard_mean(self):
        img = GrayImage(np.array([[0.0, 1.0], [1.0, 0.0]]))
        assert downsample(img, 0).pixels[0, 0] == pytest.approx(0.5)

    def test_same_size_is_identity(self):
        rng = make_rng(0)
        img = random_image(rng, 1024)
        out = downsample(img, 10)
        assert out.pixels is img.pixels  # bitwise no-op

    def test_fractional_blocks_against_hand_area(self):
        # 3x3 -> 2x2: each output covers 1.5 source cells per axis.
        pix = np.arange(9, dtype=float).reshape(3, 3) / 10.0
        out = downsample(GrayImage(pix), 1).pixels
        # top-left block = rows [0,1.5) x cols [0,1.5), area 2.25
        oracle = (pix[0, 0] + 0.5 * pix[0, 1] + 0.5 * pix[1, 0] + 0.25 * pix[1, 1]) / 2.25
        assert out[0, 0] == pytest.approx(oracle)

    def test_source_too_small(self):
        with pytest.raises(SourceTooSmall):
            downsample(GrayImage(np.zeros((4, 4))), 3)


class TestDft:
    def test_constant_image_dc_only(self):
        m, c = 8, 0.3
        spec = dft2(GrayImage(np.full((m, m), c)))
        assert spec[0, 0] == pytest.approx(m * m * c)
        rest = spec.copy()
        rest[0, 0] = 0.0
        assert np.max(np.abs(rest)) < 1e-10

    def test_delta_image_flat_magnitude(self):
        pix = np.zeros((8, 8))
        pix[0, 0] = 1.0
        spec = dft2(GrayImage(pix))
        assert np.allclose(np.abs(spec), 1.0)

    def test_matches_naive_oracle_and_roundtrip(self):
        img = random_image(make_rng(1), 8)
        spec = dft2(img)
        assert np.max(np.abs(spec - naive_dft2(img.pixels))) <= 1e-9
        assert np.max(np.abs(idft2(spec).real - img.pixels)) <= 1e-10


class TestHermitize:
    def test_already_hermitian_zero_swaps(self):
        rng = make_rng(2)
        raw = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
        herm = raw + raw.conj().T
        out = hermitize(herm)
        assert out.swap_log == ()
        assert np.array_equal(out.matrix, herm)

    def test_constant_image_spectrum_zero_swaps(self):
        spec = dft2(GrayImage(np.full((8, 8), 0.7)))
        out = hermitize(spec)
        assert out.swap_log == ()

    def test_m4_real_image_exactly_hermitian(self):
        # At M=4 the spectrum of a generic real image holds exactly the four
        # real values an order-4 Hermitian diagonal needs, so the permutation
        # can reach exact conjugate symmetry.
        img = random_image(make_rng(3), 4)
        out = hermitize(dft2(img))
        scale = np.max(np.abs(out.matrix))
        assert np.max(np.abs(out.matrix - out.matrix.conj().T)) <= 1e-9 * scale

    def test_m8_off_diagonal_symmetry_and_conservation(self):
        img = random_image(make_rng(4), 8)
        spec = dft2(img)
        out = hermitize(spec)
        dev = out.matrix - out.matrix.conj().T
        np.fill_diagonal(dev, 0.0)
        assert np.max(np.abs(dev)) <= 1e-8  # off-diagonal mirror pairs agree
        a = sorted_entries(spec)
        b = sorted_entries(out.matrix)
        assert np.array_equal(a, b)  # permutation: multiset conserved exactly

    def test_swap_log_inverts_bit_for_bit(self):
        img = random_image(make_rng(5), 8)
        spec = dft2(img)
        out = hermitize(spec)
        assert len(out.swap_log) > 0
        assert np.array_equal(invert_swaps(out), spec)

    def test_pipeline_preserves_pixels_through_rearrangement(self):
        img = random_image(make_rng(6), 16)
        out = hermitize(dft2(img))
        recovered = idft2(invert_swaps(out)).real
        assert np.max(np.abs(recovered - img.pixels)) <= 1e-9

    def test_unpairable_for_non_real_source(self):
        rng = make_rng(7)
        with pytest.raises(UnpairableEntry):
            hermitize(rng.normal(size=(8, 8)) + 1j * rng.normal(size=(8, 8)))


class TestToDensity:
    def test_identity_input(self):
        dm = to_density(np.eye(4, dtype=complex))
        assert np.allclose(dm.mat, np.eye(4) / 4)

    def test_gram_structure_nonnegative_trace_one(self):
        rng = make_rng(8)
        c = rng.normal(size=(8, 8)) + 1j * rng.normal(size=(8, 8))
        dm = to_density(c)
        assert np.linalg.eigvalsh(dm.mat).min() >= -1e-12
        assert np.trace(dm.mat).real == pytest.approx(1.0, abs=1e-12)

    def test_zero_matrix_raises(self):
        with pytest.raises(ZeroMatrix):
            to_density(np.zeros((4, 4), dtype=complex))


class TestImageToState:
    def test_sixteen_by_sixteen_gives_four_qubits(self):
        dm = image_to_state(random_image(make_rng(9), 64), 4)
        assert dm.n_qubits == 4 and dm.mat.shape == (16, 16)

    def test_eight_by_eight_gives_three_qubits(self):
        dm = image_to_state(random_image(make_rng(10), 8), 3)
        assert dm.n_qubits == 3

    def test_brightness_scale_invariance(self):
        img = random_image(make_rng(11), 8)
        dim = GrayImage(0.5 * img.pixels)
        a = image_to_state(img, 3)
        b = image_to_state(dim, 3)
        assert np.max(np.abs(a.mat - b.mat)) <= 1e-12

    def test_deterministic_across_runs(self):
        img = random_image(make_rng(12), 16)
        a = image_to_state(img, 4)
        b = image_to_state(GrayImage(img.pixels.copy()), 4)
        assert np.array_equal(a.mat, b.mat)

    def test_outputs_validate(self):
        for seed in range(5):
            dm = image_to_state(random_image(make_rng(seed), 16), 4)
            validate_density(dm.mat)
