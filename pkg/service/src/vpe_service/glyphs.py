"""Fixed 5x7 dot-matrix font: rendering and template matching.

The builtin OCR engine recognizes text rendered in this font at any integer
scale. Rows read top to bottom, '#' marks ink.
"""

from __future__ import annotations

import numpy as np

GLYPH_ROWS = 7
GLYPH_COLS = 5

_FONT = {
    "A": (".###.", "#...#", "#...#", "#####", "#...#", "#...#", "#...#"),
    "B": ("####.", "#...#", "#...#", "####.", "#...#", "#...#", "####."),
    "C": (".###.", "#...#", "#....", "#....", "#....", "#...#", ".###."),
    "D": ("####.", "#...#", "#...#", "#...#", "#...#", "#...#", "####."),
    "E": ("#####", "#....", "#....", "####.", "#....", "#....", "#####"),
    "F": ("#####", "#....", "#....", "####.", "#....", "#....", "#...."),
    "G": (".###.", "#...#", "#....", "#.###", "#...#", "#...#", ".###."),
    "H": ("#...#", "#...#", "#...#", "#####", "#...#", "#...#", "#...#"),
    "I": (".###.", "..#..", "..#..", "..#..", "..#..", "..#..", ".###."),
    "J": ("..###", "...#.", "...#.", "...#.", "...#.", "#..#.", ".##.."),
    "K": ("#...#", "#..#.", "#.#..", "##...", "#.#..", "#..#.", "#...#"),
    "L": ("#....", "#....", "#....", "#....", "#....", "#....", "#####"),
    "M": ("#...#", "##.##", "#.#.#", "#.#.#", "#...#", "#...#", "#...#"),
    "N": ("#...#", "##..#", "#.#.#", "#..##", "#...#", "#...#", "#...#"),
    "O": (".###.", "#...#", "#...#", "#...#", "#...#", "#...#", ".###."),
    "P": ("####.", "#...#", "#...#", "####.", "#....", "#....", "#...."),
    "Q": (".###.", "#...#", "#...#", "#...#", "#.#.#", "#..#.", ".##.#"),
    "R": ("####.", "#...#", "#...#", "####.", "#.#..", "#..#.", "#...#"),
    "S": (".####", "#....", "#....", ".###.", "....#", "....#", "####."),
    "T": ("#####", "..#..", "..#..", "..#..", "..#..", "..#..", "..#.."),
    "U": ("#...#", "#...#", "#...#", "#...#", "#...#", "#...#", ".###."),
    "V": ("#...#", "#...#", "#...#", "#...#", "#...#", ".#.#.", "..#.."),
    "W": ("#...#", "#...#", "#...#", "#.#.#", "#.#.#", "##.##", "#...#"),
    "X": ("#...#", "#...#", ".#.#.", "..#..", ".#.#.", "#...#", "#...#"),
    "Y": ("#...#", "#...#", ".#.#.", "..#..", "..#..", "..#..", "..#.."),
    "Z": ("#####", "....#", "...#.", "..#..", ".#...", "#....", "#####"),
    "0": (".###.", "#...#", "#..##", "#.#.#", "##..#", "#...#", ".###."),
    "1": ("..#..", ".##..", "..#..", "..#..", "..#..", "..#..", ".###."),
    "2": (".###.", "#...#", "....#", "...#.", "..#..", ".#...", "#####"),
    "3": (".###.", "#...#", "....#", "..##.", "....#", "#...#", ".###."),
    "4": ("...#.", "..##.", ".#.#.", "#..#.", "#####", "...#.", "...#."),
    "5": ("#####", "#....", "####.", "....#", "....#", "#...#", ".###."),
    "6": (".###.", "#....", "#....", "####.", "#...#", "#...#", ".###."),
    "7": ("#####", "....#", "...#.", "..#..", ".#...", ".#...", ".#..."),
    "8": (".###.", "#...#", "#...#", ".###.", "#...#", "#...#", ".###."),
    "9": (".###.", "#...#", "#...#", ".####", "....#", "....#", ".###."),
}

# Matching happens on a fixed grid so crops and templates of different
# trimmed widths stay comparable.
_MATCH_SHAPE = (21, 15)


def glyph_mask(ch: str) -> np.ndarray:
    rows = _FONT[ch.upper()]
    return np.array([[c == "#" for c in row] for row in rows], dtype=bool)


def supported_chars() -> str:
    return "".join(sorted(_FONT))


def _trim_columns(mask: np.ndarray) -> np.ndarray:
    cols = np.flatnonzero(mask.any(axis=0))
    return mask[:, cols[0] : cols[-1] + 1]


def _resample(mask: np.ndarray, shape: tuple[int, int]) -> np.ndarray:
    """Nearest-neighbor resample of a boolean mask."""
    h, w = mask.shape
    out_h, out_w = shape
    rows = (np.arange(out_h) * h) // out_h
    cols = (np.arange(out_w) * w) // out_w
    return mask[np.ix_(rows, cols)]


_TEMPLATES = {
    ch: _resample(_trim_columns(glyph_mask(ch)), _MATCH_SHAPE) for ch in _FONT
}


def match_glyph(crop: np.ndarray) -> tuple[str, float]:
    """Best-matching character for an ink mask; returns (char, confidence)."""
    if not crop.any():
        return "", 0.0
    sample = _resample(_trim_columns(crop), _MATCH_SHAPE)
    best_ch = ""
    best_dist = 1.0
    for ch, template in _TEMPLATES.items():
        dist = float(np.mean(sample != template))
        if dist < best_dist:
            best_ch, best_dist = ch, dist
    return best_ch, 1.0 - best_dist


def render_text(text: str, scale: int = 4) -> np.ndarray:
    """Ink mask for a single line of text.

    Each glyph occupies a 5-column cell followed by one blank column; a space
    inserts five extra blank columns so word gaps are unambiguous.
    """
    if scale < 1:
        raise ValueError("scale must be >= 1")
    cells: list[np.ndarray] = []
    blank = np.zeros((GLYPH_ROWS, 1), dtype=bool)
    for ch in text:
        if ch == " ":
            cells.append(np.zeros((GLYPH_ROWS, 5), dtype=bool))
            cells.append(blank)
            continue
        cells.append(glyph_mask(ch))
        cells.append(blank)
    if not cells:
        return np.zeros((GLYPH_ROWS * scale, 0), dtype=bool)
    line = np.concatenate(cells[:-1], axis=1)
    return np.kron(line, np.ones((scale, scale), dtype=bool))
