"""Grayscale image -> n-qubit density matrix encoding.

Pipeline: box-filter downsampling to 2^n x 2^n, unnormalized 2D DFT,
rearrangement of the spectrum toward conjugate symmetry by swapping entries
(a pure permutation: no value is created or destroyed), then the Gram
construction C^dag C normalized by its trace, which is Hermitian and PSD by
construction regardless of any leftover asymmetry.

The rearrangement runs in three passes over a working copy:
(i) real off-diagonal entries trade places with complex diagonal entries;
(ii) leftover complex diagonal entries trade with the off-diagonal entries
of smallest |real part| (deterministic lexicographic tie-break);
(iii) a row-major brute-force search mirror-pairs off-diagonal conjugate
pairs.  The spectrum of a real image carries its complex diagonal values in
conjugate pairs (slots k and M-k), so passes (i) and (ii) process diagonal
slots in partner pairs: evicting or pulling one value of a conjugate pair
without the other would strand the partner and break pass (iii).  Every
swap is logged, so the permutation inverts exactly; tests use the inverse
together with the inverse DFT to confirm the encoder loses no pixel
information before the final (squaring) step.

Note the diagonal cannot always end up real: the spectrum of a generic real
image holds exactly four real values, while an M x M Hermitian matrix needs
M of them.  Pass (ii) therefore parks the least-real leftovers on the
diagonal, and exact Hermiticity of the intermediate matrix is only reachable
for M <= 4 or specially symmetric images.  The final density matrix is valid
either way.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import SourceTooSmall, UnpairableEntry, ZeroMatrix
from .states import DensityMatrix, validate_density

PAIR_TOL = 1e-9


@dataclass(frozen=True)
class GrayImage:
    """Pixel grid with values in [0, 1]."""

    pixels: np.ndarray

    def __post_init__(self):
        pix = np.asarray(self.pixels, dtype=float)
        if pix.ndim != 2:
            raise ValueError(f"expected a 2-d pixel grid, got shape {pix.shape}")
        if pix.size and (pix.min() < -1e-9 or pix.max() > 1.0 + 1e-9):
            raise ValueError("pixel values must lie in [0, 1]")
        object.__setattr__(self, "pixels", pix)

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def width(self) -> int:
        return self.pixels.shape[1]


@dataclass(frozen=True)
class HermitizedMatrix:
    """Rearranged spectrum plus the swap log that inverts the rearrangement."""

    matrix: np.ndarray
    swap_log: tuple  # ((kind, (r1, c1), (r2, c2)), ...) in execution order


def load_image(path: str | Path) -> GrayImage:
    """Decode PNG/JPEG and convert to grayscale with 0.299/0.587/0.114 luma."""
    from PIL import Image

    with Image.open(path) as img:
        gray = img.convert("L")  # ITU-R 601-2: exactly the luma weights above
        return GrayImage(np.asarray(gray, dtype=float) / 255.0)


def _overlap_weights(src: int, dst: int) -> np.ndarray:
    """Exact fractional-area box-filter weights, rows sum to 1."""
    w = np.zeros((dst, src))
    block = src / dst
    for o in range(dst):
        lo, hi = o * block, (o + 1) * block
        for i in range(int(np.floor(lo)), min(src, int(np.ceil(hi)))):
            w[o, i] = max(0.0, min(hi, i + 1) - max(lo, i))
    return w / block


def downsample(img: GrayImage, n: int) -> GrayImage:
    """Box-filter average down to 2^n x 2^n; identity when already that size."""
    size = 2**n
    if img.height < size or img.width < size:
        raise SourceTooSmall(f"{img.height}x{img.width} image cannot give {size}x{size}")
    if img.height == size and img.width == size:
        return img
    wr = _overlap_weights(img.height, size)
    wc = _overlap_weights(img.width, size)
    return GrayImage(np.clip(wr @ img.pixels @ wc.T, 0.0, 1.0))


def dft2(img: GrayImage) -> np.ndarray:
    """Unnormalized 2D DFT of the pixel grid."""
    return np.fft.fft2(img.pixels.astype(complex))


def idft2(spectrum: np.ndarray) -> np.ndarray:
    return np.fft.ifft2(spectrum)


def _is_real(z: complex) -> bool:
    return abs(z.imag) <= PAIR_TOL


def hermitize(spectrum: np.ndarray) -> HermitizedMatrix:
    """Permute spectrum entries toward conjugate symmetry (see module docs).

    Raises UnpairableEntry when an off-diagonal value has no conjugate
    partner within tolerance, which signals a non-real source image.
    """
    a = np.array(spectrum, dtype=complex)
    m = a.shape[0]
    if a.shape != (m, m):
        raise ValueError(f"spectrum must be square, got {a.shape}")
    log: list[tuple] = []

    def swap(kind, p, q):
        a[p], a[q] = a[q], a[p]
        log.append((kind, p, q))

    def offdiag_positions():
        return ((r, c) for r in range(m) for c in range(m) if r != c)

    # Group complex diagonal slots into conjugate-partner pairs (k, k') so
    # evictions keep the off-diagonal multiset closed under conjugation.
    complex_slots = [k for k in range(m) if not _is_real(a[k, k])]
    slot_pairs: list[tuple[int, int]] = []
    singles: list[int] = []
    taken = set()
    for k in complex_slots:
        if k in taken:
            continue
        partner = next(
            (
                k2
                for k2 in complex_slots
                if k2 > k and k2 not in taken and abs(a[k2, k2] - a[k, k].conjugate()) <= PAIR_TOL
            ),
            None,
        )
        taken.add(k)
        if partner is None:
            singles.append(k)
        else:
            taken.add(partner)
            slot_pairs.append((k, partner))

    # Real off-diagonal donors, parity-aware: a real value left off-diagonal
    # can only mirror-pair with an equal value, so after donating to the
    # diagonal every value class must keep an even count.  Odd-count classes
    # donate one entry first (fixing their parity), then classes donate in
    # aligned pairs.  For real-image spectra both the donor queue prefix and
    # the complex-slot count are even, so two-at-a-time consumption never
    # splits a class.
    real_positions = sorted(
        (p for p in offdiag_positions() if _is_real(a[p])),
        key=lambda p: (a[p].real, p),
    )
    classes: list[list[tuple[int, int]]] = []
    for p in real_positions:
        if classes and abs(a[p].real - a[classes[-1][-1]].real) <= PAIR_TOL:
            classes[-1].append(p)
        else:
            classes.append([p])
    donor_queue: list[tuple[int, int]] = []
    leftovers: list[list[tuple[int, int]]] = []
    for cls in classes:
        if len(cls) % 2 == 1:
            donor_queue.append(cls.pop(0))
        leftovers.append(cls)
    for cls in leftovers:
        while len(cls) >= 2:
            donor_queue.append(cls.pop(0))
            donor_queue.append(cls.pop(0))

    # Pass (i): real donors onto complex diagonal slots, two per partner pair.
    unresolved_pairs = []
    for k, k2 in slot_pairs:
        if len(donor_queue) >= 2:
            swap("real-to-diagonal", (k, k), donor_queue.pop(0))
            swap("real-to-diagonal", (k2, k2), donor_queue.pop(0))
        else:
            unresolved_pairs.append((k, k2))
    for k in list(singles):
        # A lone complex diagonal value whose partner is already off-diagonal
        # can take a single real donor without stranding anything.
        if donor_queue:
            swap("real-to-diagonal", (k, k), donor_queue.pop(0))
            singles.remove(k)

    # Pass (ii): remaining slot pairs pull the off-diagonal conjugate pair of
    # smallest |real part| (lexicographic tie-break).
    for k, k2 in unresolved_pairs:
        ranked = sorted(offdiag_positions(), key=lambda p: (abs(a[p].real), p))
        chosen = None
        for p in ranked:
            q = next(
                (q for q in ranked if q != p and abs(a[q] - a[p].conjugate()) <= PAIR_TOL),
                None,
            )
            if q is not None:
                chosen = (p, q)
                break
        if chosen is None:
            raise UnpairableEntry(
                f"no off-diagonal conjugate pair available for diagonal slots {k},{k2}"
            )
        swap("smallest-real-to-diagonal", (k, k), chosen[0])
        swap("smallest-real-to-diagonal", (k2, k2), chosen[1])
    for k in singles:
        # No pair-coherent donor exists; fall back to the literal single swap
        # (pass (iii) will flag the orphan if the multiset cannot support it).
        best = min(offdiag_positions(), key=lambda p: (abs(a[p].real), p))
        swap("smallest-real-to-diagonal", (k, k), best)

    # Pass (iii): mirror-pair off-diagonal conjugate pairs, row-major scan.
    resolved = np.zeros((m, m), dtype=bool)
    for i in range(m):
        for j in range(i + 1, m):
            if resolved[i, j]:
                continue
            want = a[i, j].conjugate()
            if abs(a[j, i] - want) <= PAIR_TOL:
                resolved[i, j] = resolved[j, i] = True
                continue
            found = None
            for r in range(m):
                for c in range(m):
                    if r == c or resolved[r, c] or (r, c) == (i, j):
                        continue
                    if abs(a[r, c] - want) <= PAIR_TOL:
                        found = (r, c)
                        break
                if found:
                    break
            if found is None:
                raise UnpairableEntry(
                    f"no conjugate partner for entry at ({i},{j}) = {a[i, j]!r}"
                )
            swap("mirror-pair", (j, i), found)
            resolved[i, j] = resolved[j, i] = True

    return HermitizedMatrix(matrix=a, swap_log=tuple(log))


def invert_swaps(h: HermitizedMatrix) -> np.ndarray:
    """Undo the recorded permutation, restoring the input spectrum bit-for-bit."""
    a = np.array(h.matrix, dtype=complex)
    for _, p, q in reversed(h.swap_log):
        a[p], a[q] = a[q], a[p]
    return a


def to_density(h: HermitizedMatrix | np.ndarray) -> DensityMatrix:
    """Gram construction C^dag C normalized by |trace|; Hermitian PSD exactly."""
    c = h.matrix if isinstance(h, HermitizedMatrix) else np.asarray(h, dtype=complex)
    gram = c.conj().T @ c
    tr = abs(complex(np.trace(gram)))
    if tr <= 1e-300:
        raise ZeroMatrix("all-zero matrix cannot be normalized into a state")
    return validate_density(gram / tr)


def image_to_state(img: GrayImage, n: int) -> DensityMatrix:
    """Full encoder: downsample -> DFT -> rearrange -> Gram-normalize."""
    if n < 1:
        raise ValueError("need at least one qubit")
    return to_density(hermitize(dft2(downsample(img, n))))


# -- content-addressed cache ---------------------------------------------------------


def transform_file(path: str | Path, n: int, cache_dir: str | Path | None = None) -> DensityMatrix:
    """Encode an image file, caching by content hash + qubit count."""
    path = Path(path)
    if cache_dir is None:
        return image_to_state(load_image(path), n)
    cache_dir = Path(cache_dir)
    cache_dir.mkdir(parents=True, exist_ok=True)
    digest = hashlib.sha256(path.read_bytes() + f":{n}".encode()).hexdigest()
    cached = cache_dir / f"{digest}.json"
    if cached.exists():
        return DensityMatrix.from_json_dict(json.loads(cached.read_text()))
    state = image_to_state(load_image(path), n)
    cached.write_text(json.dumps(state.to_json_dict()))
    return state
