"""Letter bitmap corpus: rendered glyphs plus their upside-down twins.

Glyphs come from an embedded public-domain 8x8 bitmap font (LSB = leftmost
column), upscaled by pixel replication to the requested render size, so the
corpus bytes are identical on every platform.  Each letter yields two files:
the upright bitmap and its vertical inversion.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .imaging import GrayImage

# Classic 8x8 console font rows for A-Z, one byte per row, bit i = column i.
_FONT8X8 = {
    "A": (0x0C, 0x1E, 0x33, 0x33, 0x3F, 0x33, 0x33, 0x00),
    "B": (0x3F, 0x66, 0x66, 0x3E, 0x66, 0x66, 0x3F, 0x00),
    "C": (0x3C, 0x66, 0x03, 0x03, 0x03, 0x66, 0x3C, 0x00),
    "D": (0x1F, 0x36, 0x66, 0x66, 0x66, 0x36, 0x1F, 0x00),
    "E": (0x7F, 0x46, 0x16, 0x1E, 0x16, 0x46, 0x7F, 0x00),
    "F": (0x7F, 0x46, 0x16, 0x1E, 0x16, 0x06, 0x0F, 0x00),
    "G": (0x3C, 0x66, 0x03, 0x03, 0x73, 0x66, 0x7C, 0x00),
    "H": (0x33, 0x33, 0x33, 0x3F, 0x33, 0x33, 0x33, 0x00),
    "I": (0x1E, 0x0C, 0x0C, 0x0C, 0x0C, 0x0C, 0x1E, 0x00),
    "J": (0x78, 0x30, 0x30, 0x30, 0x33, 0x33, 0x1E, 0x00),
    "K": (0x67, 0x66, 0x36, 0x1E, 0x36, 0x66, 0x67, 0x00),
    "L": (0x0F, 0x06, 0x06, 0x06, 0x46, 0x66, 0x7F, 0x00),
    "M": (0x63, 0x77, 0x7F, 0x7F, 0x6B, 0x63, 0x63, 0x00),
    "N": (0x63, 0x67, 0x6F, 0x7B, 0x73, 0x63, 0x63, 0x00),
    "O": (0x1C, 0x36, 0x63, 0x63, 0x63, 0x36, 0x1C, 0x00),
    "P": (0x3F, 0x66, 0x66, 0x3E, 0x06, 0x06, 0x0F, 0x00),
    "Q": (0x1E, 0x33, 0x33, 0x33, 0x3B, 0x1E, 0x38, 0x00),
    "R": (0x3F, 0x66, 0x66, 0x3E, 0x36, 0x66, 0x67, 0x00),
    "S": (0x1E, 0x33, 0x07, 0x0E, 0x38, 0x33, 0x1E, 0x00),
    "T": (0x3F, 0x2D, 0x0C, 0x0C, 0x0C, 0x0C, 0x1E, 0x00),
    "U": (0x33, 0x33, 0x33, 0x33, 0x33, 0x33, 0x3F, 0x00),
    "V": (0x33, 0x33, 0x33, 0x33, 0x33, 0x1E, 0x0C, 0x00),
    "W": (0x63, 0x63, 0x63, 0x6B, 0x7F, 0x77, 0x63, 0x00),
    "X": (0x63, 0x63, 0x36, 0x1C, 0x1C, 0x36, 0x63, 0x00),
    "Y": (0x33, 0x33, 0x33, 0x1E, 0x0C, 0x0C, 0x1E, 0x00),
    "Z": (0x7F, 0x63, 0x31, 0x18, 0x4C, 0x66, 0x7F, 0x00),
}

ALPHABET = "".join(sorted(_FONT8X8))


@dataclass(frozen=True)
class LetterCorpusSpec:
    letters: tuple = tuple("ABCDEFGHIJKLMNO")  # alphabetical 15-letter prefix
    render_size: int = 64
    inverted_pairs: bool = True

    def __post_init__(self):
        object.__setattr__(self, "letters", tuple(self.letters))
        unknown = [c for c in self.letters if c not in _FONT8X8]
        if unknown:
            raise ValueError(f"no glyphs for {unknown}")
        if self.render_size % 8 != 0:
            raise ValueError("render_size must be a multiple of the 8-pixel glyph grid")


def glyph_bitmap(letter: str) -> np.ndarray:
    rows = _FONT8X8[letter]
    return np.array([[(row >> c) & 1 for c in range(8)] for row in rows], dtype=float)


def render_letter(letter: str, size: int = 64, inverted: bool = False) -> GrayImage:
    """Binary bitmap: ink = 1.0 on 0.0 background; inversion flips upside down."""
    scale = size // 8
    pixels = np.kron(glyph_bitmap(letter), np.ones((scale, scale)))
    if inverted:
        pixels = np.flipud(pixels)
    return GrayImage(pixels)


def gen_letter_corpus(spec: LetterCorpusSpec, out_dir: str | Path) -> list[dict]:
    """Render the corpus to PNG files and write a manifest; returns the manifest.

    Inverted bitmaps are labeled "A" (the low side of the separator) and
    upright ones "B", matching the classifier's class assignment.
    """
    from PIL import Image

    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    manifest = []
    variants = [True, False] if spec.inverted_pairs else [False]
    for inverted in variants:
        for letter in spec.letters:
            img = render_letter(letter, spec.render_size, inverted)
            name = f"{letter}_{'inv' if inverted else 'up'}.png"
            Image.fromarray((img.pixels * 255).astype(np.uint8), mode="L").save(out_dir / name)
            manifest.append(
                {
                    "path": name,
                    "label": "A" if inverted else "B",
                    "letter": letter,
                    "inverted": inverted,
                }
            )
    (out_dir / "manifest.json").write_text(json.dumps(manifest, indent=1))
    return manifest
