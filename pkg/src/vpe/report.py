"""Human-readable report rendering: text transcripts, SVG box overlays,
and aggregate score tables."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence
from xml.sax.saxutils import escape

from .dsl import print_call
from .errors import VpeError
from .perception import BBox
from .runner import EvalReport

ROLE_COLORS = {
    "subject": "#e41a1c",
    "reference": "#377eb8",
    "detected": "#4daf4a",
    "ocr": "#ff7f00",
}


class ReportError(VpeError):
    """Report collection cannot be rendered as requested."""


def render_text_report(report: EvalReport) -> str:
    """One line per statement, then the mean score.

    Line format: ``[score] call — explanation``, with ``[0!]`` marking
    errored statements and a trailing box count when a statement carries
    annotations. Byte-stable for a fixed configuration.
    """
    lines = []
    for r in report.results:
        prefix = "[0!]" if r.errored else f"[{r.score}]"
        line = f"{prefix} {print_call(r.call)} — {r.explanation}"
        if r.annotations:
            n = len(r.annotations)
            line += f" ({n} box{'es' if n != 1 else ''})"
        lines.append(line)
    lines.append(f"score: {report.score:.2f}")
    return "\n".join(lines)


@dataclass(frozen=True)
class Overlay:
    width: int
    height: int
    boxes: tuple[tuple[BBox, str, str, str], ...]  # box, label, role, color
    caption: str


def build_overlay(report: EvalReport, image_dims: tuple[int, int]) -> Overlay:
    w, h = image_dims
    if w <= 0 or h <= 0:
        raise ReportError(f"image dimensions must be positive, got {image_dims}")
    boxes = []
    for r in report.results:
        for a in r.annotations:
            boxes.append((a.box, a.label, a.role, ROLE_COLORS[a.role]))
    caption = f"{report.image}: score {report.score:.2f}"
    return Overlay(width=w, height=h, boxes=tuple(boxes), caption=caption)


def _px(v: float) -> str:
    s = f"{v:.1f}"
    return s[:-2] if s.endswith(".0") else s


def overlay_to_svg(overlay: Overlay) -> str:
    """Deterministic SVG: one rect plus one label per annotation, in report
    order, then the caption."""
    w, h = overlay.width, overlay.height
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" '
        f'viewBox="0 0 {w} {h}">'
    ]
    for box, label, role, color in overlay.boxes:
        x = box.x1 * w
        y = box.y1 * h
        bw = (box.x2 - box.x1) * w
        bh = (box.y2 - box.y1) * h
        parts.append(
            f'<rect x="{_px(x)}" y="{_px(y)}" width="{_px(bw)}" height="{_px(bh)}" '
            f'fill="none" stroke="{color}" stroke-width="2"/>'
        )
        label_y = y - 4 if y >= 14 else y + bh + 14
        parts.append(
            f'<text x="{_px(x)}" y="{_px(label_y)}" fill="{color}" '
            f'font-family="monospace" font-size="13">{escape(f"{label} [{role}]")}</text>'
        )
    parts.append(
        f'<text x="4" y="{h - 6}" fill="#222222" font-family="monospace" '
        f'font-size="13">{escape(overlay.caption)}</text>'
    )
    parts.append("</svg>")
    return "\n".join(parts)


def render_overlay(report: EvalReport, image_dims: tuple[int, int]) -> str:
    return overlay_to_svg(build_overlay(report, image_dims))


@dataclass(frozen=True)
class SummaryTable:
    group_by: str
    rows: tuple[tuple[str, int, float], ...]  # group, report count, mean score x100
    average: float  # unweighted mean of the group means

    def to_text(self) -> str:
        width = max([len(g) for g, _n, _s in self.rows] + [len("Average"), len(self.group_by)])
        lines = [f"{self.group_by:<{width}}  count  score"]
        for group, n, score in self.rows:
            lines.append(f"{group:<{width}}  {n:>5}  {score:5.1f}")
        lines.append(f"{'Average':<{width}}  {'':>5}  {self.average:5.1f}")
        return "\n".join(lines)

    def to_csv(self) -> str:
        lines = [f"{self.group_by},count,score"]
        for group, n, score in self.rows:
            lines.append(f"{group},{n},{score:.1f}")
        lines.append(f"Average,,{self.average:.1f}")
        return "\n".join(lines)


def group_average(per_group_means: Sequence[float]) -> float:
    """The Average column: unweighted mean of per-group mean scores."""
    if not per_group_means:
        raise ReportError("no groups to average")
    return sum(per_group_means) / len(per_group_means)


def summarize(reports: Sequence[EvalReport], group_by: str = "skill") -> SummaryTable:
    """Per-group mean scores x100 plus their unweighted average.

    Groups come from the report's skill or model tag; a report without the
    requested tag is an error.
    """
    if group_by not in ("skill", "model"):
        raise ReportError(f"group_by must be 'skill' or 'model', got {group_by!r}")
    if not reports:
        raise ReportError("no reports to summarize")
    groups: dict[str, list[float]] = {}
    for r in reports:
        key = getattr(r, group_by)
        if key is None:
            raise ReportError(f"report for image {r.image!r} carries no {group_by} tag")
        groups.setdefault(key, []).append(r.score)
    rows = tuple(
        (g, len(scores), 100.0 * sum(scores) / len(scores))
        for g, scores in sorted(groups.items())
    )
    return SummaryTable(
        group_by=group_by,
        rows=rows,
        average=group_average([score for _g, _n, score in rows]),
    )


def summarize_dicts(rows: Sequence[Mapping], group_by: str = "skill") -> SummaryTable:
    """summarize() over already-serialized report dicts (JSONL input)."""
    groups: dict[str, list[float]] = {}
    if group_by not in ("skill", "model"):
        raise ReportError(f"group_by must be 'skill' or 'model', got {group_by!r}")
    for row in rows:
        if row.get("summary"):
            continue
        key = row.get(group_by)
        if key is None:
            raise ReportError(f"report for image {row.get('image')!r} carries no {group_by} tag")
        groups.setdefault(key, []).append(float(row["score"]))
    if not groups:
        raise ReportError("no reports to summarize")
    table_rows = tuple(
        (g, len(scores), 100.0 * sum(scores) / len(scores))
        for g, scores in sorted(groups.items())
    )
    return SummaryTable(
        group_by=group_by,
        rows=table_rows,
        average=group_average([score for _g, _n, score in table_rows]),
    )
