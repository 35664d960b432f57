"""Deterministic reference models.

These run real image processing on real pixels but need no weights, so the
service is fully exercisable offline: a palette-legend color detector, a
ground-plane inverse-depth heuristic, template-matching OCR for the bundled
5x7 font, and a rule engine that answers presence/relation questions from
detections. They are the default model suite and the one the test images are
built for; swap in the neural adapters for natural images.
"""

from __future__ import annotations

import json
import re
from importlib import resources

import numpy as np

from . import glyphs

Box = tuple[float, float, float, float]  # pixel xyxy

MIN_REGION_PIXELS = 16


def load_palette() -> dict[str, tuple[int, int, int]]:
    doc = json.loads(
        resources.files("vpe_service").joinpath("data/palette.json").read_text()
    )
    return {label: tuple(rgb) for label, rgb in doc.items()}


def _label_runs(mask: np.ndarray) -> list[list[tuple[int, int, int]]]:
    """Group ink runs into 4-connected components.

    Returns one list of (row, col_start, col_end) runs per component.
    """
    parent: dict[int, int] = {}

    def find(a: int) -> int:
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    def union(a: int, b: int) -> None:
        ra, rb = find(a), find(b)
        if ra != rb:
            parent[rb] = ra

    runs: list[tuple[int, int, int]] = []  # (row, start, end) end exclusive
    run_ids: list[int] = []
    prev_row_runs: list[int] = []
    for row in range(mask.shape[0]):
        cols = np.flatnonzero(mask[row])
        row_runs: list[int] = []
        if cols.size:
            breaks = np.flatnonzero(np.diff(cols) > 1)
            starts = np.concatenate(([0], breaks + 1))
            ends = np.concatenate((breaks, [cols.size - 1]))
            for s, e in zip(starts, ends):
                rid = len(runs)
                runs.append((row, int(cols[s]), int(cols[e]) + 1))
                parent[rid] = rid
                run_ids.append(rid)
                row_runs.append(rid)
                for prev in prev_row_runs:
                    _pr, ps, pe = runs[prev]
                    if ps < runs[rid][2] and pe > runs[rid][1]:
                        union(prev, rid)
        prev_row_runs = row_runs

    components: dict[int, list[tuple[int, int, int]]] = {}
    for rid in run_ids:
        components.setdefault(find(rid), []).append(runs[rid])
    return list(components.values())


class PaletteDetector:
    """Finds solid-color regions whose color is the legend entry for a label.

    Confidence is the region's fill fraction of its bounding box, so clean
    rectangles score 1.0 and ellipses about 0.79.
    """

    def __init__(self, palette: dict[str, tuple[int, int, int]] | None = None,
                 tolerance: int = 8):
        self._palette = palette if palette is not None else load_palette()
        self._tolerance = tolerance

    def known_labels(self) -> list[str]:
        return sorted(self._palette)

    def detect(self, image: np.ndarray, query: str) -> list[dict]:
        color = self._palette.get(_normalize_label(query))
        if color is None:
            return []
        diff = np.abs(image.astype(np.int16) - np.array(color, dtype=np.int16))
        mask = (diff <= self._tolerance).all(axis=2)
        out = []
        for component in _label_runs(mask):
            area = sum(end - start for _row, start, end in component)
            if area < MIN_REGION_PIXELS:
                continue
            rows = [r for r, _s, _e in component]
            y1, y2 = min(rows), max(rows) + 1
            x1 = min(s for _r, s, _e in component)
            x2 = max(e for _r, _s, e in component)
            fill = area / ((y2 - y1) * (x2 - x1))
            out.append({
                "box": (float(x1), float(y1), float(x2), float(y2)),
                "confidence": round(float(fill), 4),
            })
        out.sort(key=lambda d: (-d["confidence"], d["box"]))
        return out


class GroundPlaneDepth:
    """Inverse depth from the ground-plane assumption: lower rows are nearer.

    The returned map is already in [0, 1], 1 at the bottom row.
    """

    def inverse_depth(self, image: np.ndarray) -> np.ndarray:
        h, w = image.shape[:2]
        if h == 1:
            return np.ones((1, w), dtype=np.float64)
        column = np.arange(h, dtype=np.float64) / (h - 1)
        return np.repeat(column[:, None], w, axis=1)


class GlyphOcr:
    """Reads text rendered in the bundled 5x7 font at any integer scale.

    Lines are row bands of ink; glyphs are column groups within a band;
    word breaks are gaps wider than four glyph columns.
    """

    def __init__(self, ink_threshold: int = 128, min_band_px: int = 3):
        self._ink_threshold = ink_threshold
        self._min_band_px = min_band_px

    def read(self, image: np.ndarray) -> list[dict]:
        gray = image.astype(np.float32).mean(axis=2)
        ink = gray < self._ink_threshold
        tokens: list[dict] = []
        for top, bottom in self._bands(ink.any(axis=1)):
            if bottom - top < self._min_band_px:
                continue
            tokens.extend(self._read_band(ink, top, bottom))
        return tokens

    @staticmethod
    def _bands(flags: np.ndarray) -> list[tuple[int, int]]:
        rows = np.flatnonzero(flags)
        if rows.size == 0:
            return []
        breaks = np.flatnonzero(np.diff(rows) > 1)
        starts = np.concatenate(([0], breaks + 1))
        ends = np.concatenate((breaks, [rows.size - 1]))
        return [(int(rows[s]), int(rows[e]) + 1) for s, e in zip(starts, ends)]

    def _read_band(self, ink: np.ndarray, top: int, bottom: int) -> list[dict]:
        band = ink[top:bottom]
        scale = max((bottom - top) / glyphs.GLYPH_ROWS, 1.0)
        col_groups = self._bands(band.any(axis=0))
        if not col_groups:
            return []

        words: list[list[tuple[int, int]]] = [[col_groups[0]]]
        for prev, cur in zip(col_groups, col_groups[1:]):
            gap = cur[0] - prev[1]
            if gap > 4.0 * scale:
                words.append([cur])
            else:
                words[-1].append(cur)

        tokens = []
        for word in words:
            chars = []
            scores = []
            for left, right in word:
                ch, score = glyphs.match_glyph(band[:, left:right])
                if ch:
                    chars.append(ch)
                    scores.append(score)
            if not chars:
                continue
            x1, x2 = word[0][0], word[-1][1]
            tokens.append({
                "text": "".join(chars),
                "box": (float(x1), float(top), float(x2), float(bottom)),
                "confidence": round(float(np.mean(scores)), 4),
            })
        return tokens


_ARTICLE_RE = re.compile(r"^(a|an|the)\s+")

_REL_PHRASES = (
    ("to the left of", "left"),
    ("to the right of", "right"),
    ("in front of", "front"),
    ("above", "above"),
    ("below", "below"),
    ("behind", "behind"),
)


def _normalize_label(text: str) -> str:
    text = " ".join(text.lower().split())
    return _ARTICLE_RE.sub("", text)


def _normalize_question(text: str) -> str:
    text = "".join(ch if ch.isalnum() or ch.isspace() else " " for ch in text.lower())
    return " ".join(text.split())


class RuleVqa:
    """Answers presence and geometric-relation questions from detections.

    Anything outside those patterns returns empty text, which the endpoint
    reports as a projection failure rather than a guess.
    """

    def __init__(self, detector, depth, box_threshold: float = 0.35):
        self._detector = detector
        self._depth = depth
        self._threshold = box_threshold

    def _best(self, image: np.ndarray, label: str) -> dict | None:
        dets = [d for d in self._detector.detect(image, label)
                if d["confidence"] >= self._threshold]
        return dets[0] if dets else None

    def answer(self, image: np.ndarray, question: str, choices: list[str]) -> str:
        q = _normalize_question(question)

        m = re.fullmatch(
            r"is there (?:a|an|the)?\s*(.+?)"
            r"(?:\s+(?:in|on)\s+(?:the|this)\s+(?:image|picture|photo|scene))?",
            q,
        )
        if m:
            present = self._try_presence(image, m.group(1))
            if present is not None:
                return "yes" if present else "no"

        for phrase, rel in _REL_PHRASES:
            m = re.fullmatch(rf"is the (.+?) {phrase} the (.+)", q)
            if m:
                return self._relation(image, m.group(1), m.group(2), rel)
        return ""

    def _try_presence(self, image: np.ndarray, label: str) -> bool | None:
        label = _normalize_label(label)
        if label not in self._detector.known_labels():
            return None
        return self._best(image, label) is not None

    def _relation(self, image: np.ndarray, subject: str, reference: str, rel: str) -> str:
        s = self._best(image, _normalize_label(subject))
        r = self._best(image, _normalize_label(reference))
        if s is None or r is None:
            return "no"
        sx = (s["box"][0] + s["box"][2]) / 2
        sy = (s["box"][1] + s["box"][3]) / 2
        rx = (r["box"][0] + r["box"][2]) / 2
        ry = (r["box"][1] + r["box"][3]) / 2
        if rel in ("front", "behind"):
            inv = self._depth.inverse_depth(image)
            s_close = median_in_box(inv, s["box"])
            r_close = median_in_box(inv, r["box"])
            ok = s_close > r_close if rel == "front" else s_close < r_close
        else:
            ok = {
                "left": sx < rx,
                "right": sx > rx,
                "above": sy < ry,
                "below": sy > ry,
            }[rel]
        return "yes" if ok else "no"


def median_in_box(depth_map: np.ndarray, box: Box) -> float:
    h, w = depth_map.shape
    x1 = int(np.clip(box[0], 0, w - 1))
    x2 = int(np.clip(box[2], x1 + 1, w))
    y1 = int(np.clip(box[1], 0, h - 1))
    y2 = int(np.clip(box[3], y1 + 1, h))
    return float(np.median(depth_map[y1:y2, x1:x2]))
