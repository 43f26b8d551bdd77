"""Built-in fixed-width 5x7 bitmap font.

Keeps the raster path free of codec and font dependencies: glyphs are 5-bit
row masks, scaled by integer factors. Lowercase letters render as uppercase;
characters without a glyph fall back to a filled block so unknown input stays
visible rather than silently vanishing.
"""

from __future__ import annotations

GLYPH_W = 5
GLYPH_H = 7
ADVANCE = 6  # glyph cell plus one column of spacing

_RAW = {
    "A": ("01110", "10001", "10001", "11111", "10001", "10001", "10001"),
    "B": ("11110", "10001", "10001", "11110", "10001", "10001", "11110"),
    "C": ("01110", "10001", "10000", "10000", "10000", "10001", "01110"),
    "D": ("11110", "10001", "10001", "10001", "10001", "10001", "11110"),
    "E": ("11111", "10000", "10000", "11110", "10000", "10000", "11111"),
    "F": ("11111", "10000", "10000", "11110", "10000", "10000", "10000"),
    "G": ("01110", "10001", "10000", "10111", "10001", "10001", "01111"),
    "H": ("10001", "10001", "10001", "11111", "10001", "10001", "10001"),
    "I": ("01110", "00100", "00100", "00100", "00100", "00100", "01110"),
    "J": ("00111", "00010", "00010", "00010", "00010", "10010", "01100"),
    "K": ("10001", "10010", "10100", "11000", "10100", "10010", "10001"),
    "L": ("10000", "10000", "10000", "10000", "10000", "10000", "11111"),
    "M": ("10001", "11011", "10101", "10101", "10001", "10001", "10001"),
    "N": ("10001", "11001", "10101", "10011", "10001", "10001", "10001"),
    "O": ("01110", "10001", "10001", "10001", "10001", "10001", "01110"),
    "P": ("11110", "10001", "10001", "11110", "10000", "10000", "10000"),
    "Q": ("01110", "10001", "10001", "10001", "10101", "10010", "01101"),
    "R": ("11110", "10001", "10001", "11110", "10100", "10010", "10001"),
    "S": ("01111", "10000", "10000", "01110", "00001", "00001", "11110"),
    "T": ("11111", "00100", "00100", "00100", "00100", "00100", "00100"),
    "U": ("10001", "10001", "10001", "10001", "10001", "10001", "01110"),
    "V": ("10001", "10001", "10001", "10001", "10001", "01010", "00100"),
    "W": ("10001", "10001", "10001", "10101", "10101", "11011", "10001"),
    "X": ("10001", "01010", "00100", "00100", "00100", "01010", "10001"),
    "Y": ("10001", "01010", "00100", "00100", "00100", "00100", "00100"),
    "Z": ("11111", "00001", "00010", "00100", "01000", "10000", "11111"),
    "0": ("01110", "10001", "10011", "10101", "11001", "10001", "01110"),
    "1": ("00100", "01100", "00100", "00100", "00100", "00100", "01110"),
    "2": ("01110", "10001", "00001", "00110", "01000", "10000", "11111"),
    "3": ("11111", "00010", "00100", "00010", "00001", "10001", "01110"),
    "4": ("00010", "00110", "01010", "10010", "11111", "00010", "00010"),
    "5": ("11111", "10000", "11110", "00001", "00001", "10001", "01110"),
    "6": ("00110", "01000", "10000", "11110", "10001", "10001", "01110"),
    "7": ("11111", "00001", "00010", "00100", "01000", "01000", "01000"),
    "8": ("01110", "10001", "10001", "01110", "10001", "10001", "01110"),
    "9": ("01110", "10001", "10001", "01111", "00001", "00010", "01100"),
    " ": ("00000", "00000", "00000", "00000", "00000", "00000", "00000"),
    ":": ("00000", "00100", "00100", "00000", "00100", "00100", "00000"),
    "-": ("00000", "00000", "00000", "01110", "00000", "00000", "00000"),
    ",": ("00000", "00000", "00000", "00000", "00110", "00100", "01000"),
    ".": ("00000", "00000", "00000", "00000", "00000", "00110", "00110"),
    "@": ("01110", "10001", "10111", "10101", "10110", "10000", "01110"),
    "/": ("00001", "00010", "00010", "00100", "01000", "01000", "10000"),
    "(": ("00010", "00100", "01000", "01000", "01000", "00100", "00010"),
    ")": ("01000", "00100", "00010", "00010", "00010", "00100", "01000"),
    "#": ("01010", "01010", "11111", "01010", "11111", "01010", "01010"),
}

_FALLBACK = ("11111", "10001", "10001", "10001", "10001", "10001", "11111")

GLYPHS: dict[str, tuple[int, ...]] = {
    ch: tuple(int(row, 2) for row in rows) for ch, rows in _RAW.items()
}
FALLBACK_GLYPH: tuple[int, ...] = tuple(int(row, 2) for row in _FALLBACK)


def glyph_for(ch: str) -> tuple[int, ...]:
    return GLYPHS.get(ch) or GLYPHS.get(ch.upper(), FALLBACK_GLYPH)


def scale_for_height(font_height: int) -> int:
    """Largest integer scale whose glyph height fits the nominal font height."""
    return max(1, font_height // GLYPH_H)


def text_extent(text: str, font_height: int) -> tuple[int, int]:
    """Rendered (width, height) of a line of text, in pixels."""
    s = scale_for_height(font_height)
    if not text:
        return 0, GLYPH_H * s
    width = (len(text) * ADVANCE - (ADVANCE - GLYPH_W)) * s
    return width, GLYPH_H * s


def draw_text(
    buffer: bytearray,
    buf_width: int,
    text: str,
    x0: int,
    y0: int,
    font_height: int,
    level: int,
) -> None:
    """Blit ``text`` into a row-major 8-bit grayscale buffer at (x0, y0).

    The caller is responsible for bounds; pixels outside the buffer raise.
    """
    s = scale_for_height(font_height)
    for idx, ch in enumerate(text):
        glyph = glyph_for(ch)
        gx = x0 + idx * ADVANCE * s
        for row, mask in enumerate(glyph):
            if not mask:
                continue
            for col in range(GLYPH_W):
                if mask & (1 << (GLYPH_W - 1 - col)):
                    for dy in range(s):
                        base = (y0 + row * s + dy) * buf_width + gx + col * s
                        for dx in range(s):
                            buffer[base + dx] = level
