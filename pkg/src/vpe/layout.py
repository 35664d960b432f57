"""Two-step scene layout text format.

Step 1 enumerates objects with counts: ``dog (2) frisbee (1)``.
Step 2 places each instance with a quantized box: ``dog (10,40,45,90)``.
Coordinates are normalized xyxy values quantized into 100 integer bins.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Iterable, Sequence

from .errors import VpeError
from .perception import BBox

BINS = 100
DEFAULT_MAX_COUNT = 7


class LayoutError(VpeError):
    """Layout text cannot be parsed or the two steps are inconsistent."""


class LayoutWarning(UserWarning):
    """Non-fatal oddity: degenerate box or out-of-range count in lenient mode."""


def quantize(v: float) -> int:
    """Map a normalized coordinate to its bin: min(floor(v * 100), 99)."""
    if not (0.0 <= v <= 1.0):
        raise LayoutError(f"coordinate {v!r} outside [0, 1]")
    return min(int(v * BINS), BINS - 1)


def dequantize(b: int) -> float:
    """Map a bin back to the center of its cell: (b + 0.5) / 100."""
    if not (isinstance(b, int) and 0 <= b < BINS):
        raise LayoutError(f"bin {b!r} outside 0..{BINS - 1}")
    return (b + 0.5) / BINS


@dataclass(frozen=True)
class ObjectCount:
    description: str
    count: int

    def __post_init__(self) -> None:
        if not self.description.strip():
            raise LayoutError("object description must be non-empty")
        if "(" in self.description or ")" in self.description:
            raise LayoutError(f"object description may not contain parentheses: {self.description!r}")
        if not (isinstance(self.count, int) and self.count >= 1):
            raise LayoutError(f"count must be an integer >= 1, got {self.count!r}")


@dataclass(frozen=True)
class QuantizedBox:
    x1: int
    y1: int
    x2: int
    y2: int

    def __post_init__(self) -> None:
        for name, v in (("x1", self.x1), ("y1", self.y1), ("x2", self.x2), ("y2", self.y2)):
            if not (isinstance(v, int) and 0 <= v < BINS):
                raise LayoutError(f"{name} must be an integer bin in 0..{BINS - 1}, got {v!r}")
        if self.x2 < self.x1:
            raise LayoutError(f"x2 < x1 in box ({self.x1},{self.y1},{self.x2},{self.y2})")
        if self.y2 < self.y1:
            raise LayoutError(f"y2 < y1 in box ({self.x1},{self.y1},{self.x2},{self.y2})")


@dataclass(frozen=True)
class LayoutSpec:
    objects: tuple[ObjectCount, ...]
    placements: tuple[tuple[str, QuantizedBox], ...]


def _scan_entries(s: str) -> list[tuple[str, str, int]]:
    """Split ``DESC ( INNER )`` entries; returns (desc, inner, position) triples."""
    entries = []
    pos = 0
    while True:
        open_idx = s.find("(", pos)
        if open_idx == -1:
            trailing = s[pos:].strip()
            if trailing:
                raise LayoutError(f"dangling description without parentheses: {trailing!r}")
            break
        desc = s[pos:open_idx].strip()
        if ")" in desc:
            raise LayoutError(f"unexpected ')' before '(' near position {pos}")
        if not desc:
            raise LayoutError(f"missing description before '(' at position {open_idx}")
        close_idx = s.find(")", open_idx + 1)
        if close_idx == -1:
            raise LayoutError(f"unterminated '(' at position {open_idx}")
        inner = s[open_idx + 1 : close_idx]
        if "(" in inner:
            raise LayoutError(f"nested '(' at position {s.find('(', open_idx + 1)}")
        entries.append((desc, inner, pos))
        pos = close_idx + 1
    return entries


def parse_object_counts(
    s: str, *, max_count: int = DEFAULT_MAX_COUNT, strict: bool = False
) -> list[ObjectCount]:
    """Parse a step-1 object/count string like ``dog (2) frisbee (1)``."""
    out = []
    for desc, inner, _pos in _scan_entries(s):
        raw = inner.strip()
        try:
            count = int(raw)
        except ValueError:
            raise LayoutError(f"expected an integer count for {desc!r}, got {raw!r}") from None
        if count < 1:
            raise LayoutError(f"count for {desc!r} must be >= 1, got {count}")
        if count > max_count:
            msg = f"count {count} for {desc!r} exceeds max_count {max_count}"
            if strict:
                raise LayoutError(msg)
            warnings.warn(msg, LayoutWarning, stacklevel=2)
        out.append(ObjectCount(description=desc, count=count))
    return out


def parse_placements(s: str) -> list[tuple[str, QuantizedBox]]:
    """Parse a step-2 placement string like ``dog (10,40,45,90) dog (55,42,88,88)``."""
    out = []
    for desc, inner, _pos in _scan_entries(s):
        parts = [p.strip() for p in inner.split(",")]
        if len(parts) != 4:
            raise LayoutError(f"box for {desc!r} must have 4 coordinates, got {len(parts)}")
        coords = []
        for p in parts:
            try:
                coords.append(int(p))
            except ValueError:
                raise LayoutError(f"non-integer coordinate {p!r} in box for {desc!r}") from None
        box = QuantizedBox(*coords)
        if box.x1 == box.x2 or box.y1 == box.y2:
            # Quantization can legally collapse thin boxes; keep them but flag.
            warnings.warn(
                f"degenerate box for {desc!r}: ({box.x1},{box.y1},{box.x2},{box.y2})",
                LayoutWarning,
                stacklevel=2,
            )
        out.append((desc, box))
    return out


def print_object_counts(objects: Iterable[ObjectCount]) -> str:
    return " ".join(f"{o.description} ({o.count})" for o in objects)


def print_placements(placements: Iterable[tuple[str, QuantizedBox]]) -> str:
    return " ".join(f"{d} ({b.x1},{b.y1},{b.x2},{b.y2})" for d, b in placements)


def _norm_desc(desc: str) -> str:
    return " ".join(desc.casefold().split())


def validate_layout(
    objects: Sequence[ObjectCount], placements: Sequence[tuple[str, QuantizedBox]]
) -> LayoutSpec:
    """Check step-1 counts against step-2 placement multiplicities.

    Descriptions are matched case-insensitively with collapsed whitespace.
    Placement order may interleave descriptions freely.
    """
    expected: dict[str, ObjectCount] = {}
    for obj in objects:
        key = _norm_desc(obj.description)
        if key in expected:
            raise LayoutError(f"duplicate description {obj.description!r} in object list")
        expected[key] = obj

    actual: dict[str, int] = {}
    for desc, _box in placements:
        key = _norm_desc(desc)
        if key not in expected:
            raise LayoutError(f"placement references unknown description {desc!r}")
        actual[key] = actual.get(key, 0) + 1

    for key, obj in expected.items():
        n = actual.get(key, 0)
        if n != obj.count:
            raise LayoutError(
                f"count mismatch for {obj.description!r}: expected {obj.count}, found {n}"
            )

    return LayoutSpec(objects=tuple(objects), placements=tuple(placements))


def to_normalized(spec: LayoutSpec) -> list[tuple[str, BBox]]:
    """Dequantize every placement box to normalized coordinates."""
    return [
        (desc, BBox(dequantize(b.x1), dequantize(b.y1), dequantize(b.x2), dequantize(b.y2)))
        for desc, b in spec.placements
    ]


def layout_to_dict(spec: LayoutSpec) -> dict:
    """JSON-friendly view of a layout, normalized boxes included."""
    normalized = to_normalized(spec)
    return {
        "objects": [{"description": o.description, "count": o.count} for o in spec.objects],
        "placements": [
            {
                "description": desc,
                "box": [b.x1, b.y1, b.x2, b.y2],
                "normalized_box": nbox.as_list(),
            }
            for (desc, b), (_d, nbox) in zip(spec.placements, normalized)
        ],
    }


def layout_from_dict(doc: dict) -> LayoutSpec:
    """Inverse of layout_to_dict (normalized boxes are ignored on input)."""
    try:
        objects = [ObjectCount(o["description"], int(o["count"])) for o in doc["objects"]]
        placements = [
            (p["description"], QuantizedBox(*[int(v) for v in p["box"]]))
            for p in doc["placements"]
        ]
    except (KeyError, TypeError) as e:
        raise LayoutError(f"malformed layout document: {e}") from e
    return validate_layout(objects, placements)
