"""Executable semantics for the six program modules.

Every module returns a binary score plus a textual explanation and the boxes
it used as evidence. Perception failures never raise out of a module: they
produce an errored result with score 0 so a program run always completes.
"""

from __future__ import annotations

import operator
import re
import statistics
from dataclasses import dataclass

from .dsl import IMG, ModuleCall, StringLit
from .errors import VpeError
from .perception import (
    BackendUnavailableError,
    BBox,
    Detection,
    OcrToken,
    PerceptionBackend,
    PerceptionError,
    VqaQuery,
    normalize_text,
)

SPATIAL_RELATIONS = frozenset({"left", "right", "above", "below", "front", "behind"})
SCALE_RELATIONS = frozenset({"smaller", "bigger", "same"})

DEFAULT_SCALE_TOLERANCE = 1.25


class CountExprError(VpeError):
    """A count expression could not be parsed."""


_COUNT_OPS = {
    "==": operator.eq,
    "!=": operator.ne,
    "<": operator.lt,
    "<=": operator.le,
    ">": operator.gt,
    ">=": operator.ge,
}

_COUNT_RE = re.compile(r"^(==|!=|<=|>=|<|>)?\s*(\d+)$")


@dataclass(frozen=True)
class CountExpr:
    """Comparison against a detection count, e.g. ``==3`` or ``<5``.

    A bare integer means equality.
    """

    op: str
    operand: int

    @classmethod
    def parse(cls, text: str) -> "CountExpr":
        m = _COUNT_RE.match(text.strip())
        if m is None:
            raise CountExprError(f"invalid count expression {text!r}")
        return cls(op=m.group(1) or "==", operand=int(m.group(2)))

    def evaluate(self, n: int) -> bool:
        return _COUNT_OPS[self.op](n, self.operand)

    def __str__(self) -> str:
        return f"{self.op}{self.operand}"


@dataclass(frozen=True)
class Annotation:
    box: BBox
    label: str
    role: str  # subject | reference | detected | ocr


@dataclass(frozen=True)
class ModuleResult:
    call: ModuleCall
    score: int
    errored: bool
    explanation: str
    annotations: tuple[Annotation, ...] = ()


@dataclass(frozen=True)
class EvalConfig:
    """Knobs echoed into every report for reproducibility."""

    box_threshold: float = 0.35
    scale_tolerance: float = DEFAULT_SCALE_TOLERANCE
    error_policy: str = "zero"  # "zero" scores errored statements 0; "exclude" drops them

    def __post_init__(self) -> None:
        if not (0.0 <= self.box_threshold <= 1.0):
            raise ValueError(f"box_threshold must be in [0, 1], got {self.box_threshold!r}")
        if self.scale_tolerance <= 1.0:
            raise ValueError(f"scale_tolerance must be > 1, got {self.scale_tolerance!r}")
        if self.error_policy not in ("zero", "exclude"):
            raise ValueError(f"error_policy must be 'zero' or 'exclude', got {self.error_policy!r}")

    def echo(self) -> dict:
        return {
            "box_threshold": self.box_threshold,
            "scale_tolerance": self.scale_tolerance,
            "error_policy": self.error_policy,
        }


DEFAULT_CONFIG = EvalConfig()


def _detected_annotations(dets: list[Detection]) -> tuple[Annotation, ...]:
    return tuple(Annotation(box=d.box, label=d.label, role="detected") for d in dets)


def _pair_annotations(subject: Detection, reference: Detection) -> tuple[Annotation, ...]:
    return (
        Annotation(box=subject.box, label=subject.label, role="subject"),
        Annotation(box=reference.box, label=reference.label, role="reference"),
    )


def _select_pair(
    backend: PerceptionBackend, image: str, subject: str, reference: str, threshold: float
) -> tuple[Detection | None, Detection | None]:
    """Best detection per query; for equal queries, top two by confidence."""
    if subject == reference:
        dets = backend.obj_det(image, subject, threshold)
        s = dets[0] if len(dets) >= 1 else None
        r = dets[1] if len(dets) >= 2 else None
        return s, r
    s_dets = backend.obj_det(image, subject, threshold)
    r_dets = backend.obj_det(image, reference, threshold)
    return (s_dets[0] if s_dets else None), (r_dets[0] if r_dets else None)


def _missing_result(
    call: ModuleCall,
    subject: str,
    reference: str,
    s: Detection | None,
    r: Detection | None,
) -> ModuleResult:
    missing = [name for name, det in ((subject, s), (reference, r)) if det is None]
    annotations: tuple[Annotation, ...] = ()
    if s is not None:
        annotations += (Annotation(box=s.box, label=s.label, role="subject"),)
    if r is not None:
        annotations += (Annotation(box=r.box, label=r.label, role="reference"),)
    return ModuleResult(
        call=call,
        score=0,
        errored=False,
        explanation=f"object not found: {', '.join(missing)}",
        annotations=annotations,
    )


def _vqa_fallback(
    backend: PerceptionBackend,
    image: str,
    call: ModuleCall,
    subject: str,
    reference: str,
    rel: str,
    annotations: tuple[Annotation, ...],
) -> ModuleResult:
    question = f"Is the {subject} {rel} the {reference}?"
    answer = backend.vqa(image, VqaQuery(question=question, choices=("yes", "no")))
    if not answer.projected:
        return ModuleResult(
            call=call,
            score=0,
            errored=True,
            explanation=f'choice projection failed for "{question}": raw answer {answer.raw!r}',
            annotations=annotations,
        )
    ok = answer.answer == "yes"
    return ModuleResult(
        call=call,
        score=int(ok),
        errored=False,
        explanation=f'asked "{question}"; answer "{answer.answer}"; expected "yes"',
        annotations=annotations,
    )


def _object(backend: PerceptionBackend, image: str, call: ModuleCall, cfg: EvalConfig) -> ModuleResult:
    (obj,) = call.arg_strings()
    dets = backend.obj_det(image, obj, cfg.box_threshold)
    if dets:
        return ModuleResult(call, 1, False, f"found {obj}", _detected_annotations(dets))
    return ModuleResult(call, 0, False, f"did not find {obj}")


def _count(backend: PerceptionBackend, image: str, call: ModuleCall, cfg: EvalConfig) -> ModuleResult:
    obj, expr_text = call.arg_strings()
    expr = CountExpr.parse(expr_text)
    dets = backend.obj_det(image, obj, cfg.box_threshold)
    n = len(dets)
    return ModuleResult(
        call,
        int(expr.evaluate(n)),
        False,
        f"counted {n} {obj}; expected {expr}",
        _detected_annotations(dets),
    )


def _spatial(backend: PerceptionBackend, image: str, call: ModuleCall, cfg: EvalConfig) -> ModuleResult:
    subject, reference, rel = call.arg_strings()
    s, r = _select_pair(backend, image, subject, reference, cfg.box_threshold)
    if s is None or r is None:
        return _missing_result(call, subject, reference, s, r)
    annotations = _pair_annotations(s, r)

    if rel not in SPATIAL_RELATIONS:
        return _vqa_fallback(backend, image, call, subject, reference, rel, annotations)

    scx, scy = s.box.center
    rcx, rcy = r.box.center
    if rel in ("front", "behind"):
        ok = s.closeness > r.closeness if rel == "front" else s.closeness < r.closeness
        explanation = (
            f"{subject} closeness {s.closeness:.3f}, {reference} closeness {r.closeness:.3f}; "
            f"{rel}: {'yes' if ok else 'no'}"
        )
    else:
        # Image coordinates: y grows downward, so "above" means smaller y-center.
        ok = {
            "left": scx < rcx,
            "right": scx > rcx,
            "above": scy < rcy,
            "below": scy > rcy,
        }[rel]
        explanation = (
            f"{subject} center ({scx:.3f}, {scy:.3f}), {reference} center ({rcx:.3f}, {rcy:.3f}); "
            f"{rel}: {'yes' if ok else 'no'}"
        )
    return ModuleResult(call, int(ok), False, explanation, annotations)


def _scale(backend: PerceptionBackend, image: str, call: ModuleCall, cfg: EvalConfig) -> ModuleResult:
    subject, reference, rel = call.arg_strings()
    s, r = _select_pair(backend, image, subject, reference, cfg.box_threshold)
    if s is None or r is None:
        return _missing_result(call, subject, reference, s, r)
    annotations = _pair_annotations(s, r)

    if rel not in SCALE_RELATIONS:
        return _vqa_fallback(backend, image, call, subject, reference, rel, annotations)

    s_area = s.box.area
    r_area = r.box.area
    if r_area == 0.0 or s_area == 0.0:
        degenerate = subject if s_area == 0.0 else reference
        return ModuleResult(
            call, 0, False, f"degenerate box area for {degenerate}", annotations
        )
    ratio = s_area / r_area
    tau = cfg.scale_tolerance
    ok = {
        "bigger": ratio > tau,
        "smaller": ratio < 1.0 / tau,
        "same": 1.0 / tau <= ratio <= tau,
    }[rel]
    explanation = (
        f"area({subject}) {s_area:.4f}, area({reference}) {r_area:.4f}, ratio {ratio:.3f}; "
        f"{rel}: {'yes' if ok else 'no'}"
    )
    return ModuleResult(call, int(ok), False, explanation, annotations)


def _reading_order(tokens: list[OcrToken]) -> list[OcrToken]:
    """Sort tokens into line bands (by y-center, tolerance half the median
    token height), then left to right within a band."""
    if not tokens:
        return []
    med_height = statistics.median(t.box.y2 - t.box.y1 for t in tokens)
    tol = med_height / 2.0
    by_y = sorted(tokens, key=lambda t: (t.box.center[1], t.box.x1, t.box.y1, t.box.x2, t.box.y2, t.text))
    bands: list[list[OcrToken]] = []
    anchors: list[float] = []
    for tok in by_y:
        cy = tok.box.center[1]
        if bands and abs(cy - anchors[-1]) <= tol:
            bands[-1].append(tok)
        else:
            bands.append([tok])
            anchors.append(cy)
    ordered: list[OcrToken] = []
    for band in bands:
        ordered.extend(sorted(band, key=lambda t: (t.box.x1, t.box.y1, t.box.x2, t.box.y2, t.text)))
    return ordered


def _text(backend: PerceptionBackend, image: str, call: ModuleCall, cfg: EvalConfig) -> ModuleResult:
    (target,) = call.arg_strings()
    target_norm = normalize_text(target)
    if not target_norm:
        return ModuleResult(call, 0, False, f"target {target!r} is empty after normalization")

    ordered = _reading_order(backend.ocr(image))
    norms = [(tok, normalize_text(tok.text)) for tok in ordered]
    norms = [(tok, n) for tok, n in norms if n]

    joined = " ".join(n for _tok, n in norms)
    idx = joined.find(target_norm)
    if idx < 0:
        return ModuleResult(call, 0, False, f"did not find '{target}' in image text")

    # Map the matched character span back onto the contributing tokens.
    end = idx + len(target_norm)
    matched = []
    offset = 0
    for tok, n in norms:
        tok_start, tok_end = offset, offset + len(n)
        if tok_start < end and tok_end > idx:
            matched.append(tok)
        offset = tok_end + 1  # joining space
    annotations = tuple(Annotation(box=t.box, label=t.text, role="ocr") for t in matched)
    return ModuleResult(call, 1, False, f"found '{target}' in image text", annotations)


def _vqa(backend: PerceptionBackend, image: str, call: ModuleCall, cfg: EvalConfig) -> ModuleResult:
    question, choices_text, expected = call.arg_strings()
    choices = tuple(c.strip() for c in choices_text.split("|"))
    answer = backend.vqa(image, VqaQuery(question=question, choices=choices))
    if not answer.projected:
        return ModuleResult(
            call, 0, True,
            f'choice projection failed for "{question}": raw answer {answer.raw!r}',
        )
    ok = normalize_text(answer.answer) == normalize_text(expected)
    return ModuleResult(
        call, int(ok), False,
        f'asked "{question}"; answer "{answer.answer}"; expected "{expected}"',
    )


_EXECUTORS = {
    "objectEval": _object,
    "countEval": _count,
    "spatialEval": _spatial,
    "scaleEval": _scale,
    "textEval": _text,
    "vqa": _vqa,
}


def execute_call(
    backend: PerceptionBackend, image: str, call: ModuleCall, cfg: EvalConfig = DEFAULT_CONFIG
) -> ModuleResult:
    """Run one statement; per-call backend failures become errored results,
    score 0. An unreachable backend is not a per-call condition and is left
    to propagate so the whole run can abort."""
    fn = _EXECUTORS[call.module]
    try:
        return fn(backend, image, call, cfg)
    except BackendUnavailableError:
        raise
    except PerceptionError as e:
        return ModuleResult(
            call=call, score=0, errored=True,
            explanation=f"{type(e).__name__}: {e}",
        )


def _call(module: str, *strings: str) -> ModuleCall:
    return ModuleCall(module=module, args=(IMG, *(StringLit(s) for s in strings)))


def object_eval(backend, image: str, obj: str, cfg: EvalConfig = DEFAULT_CONFIG) -> ModuleResult:
    """Score 1 iff the object is detected anywhere in the image."""
    return execute_call(backend, image, _call("objectEval", obj), cfg)


def count_eval(backend, image: str, obj: str, expr: str | CountExpr,
               cfg: EvalConfig = DEFAULT_CONFIG) -> ModuleResult:
    """Score 1 iff the detection count satisfies the count expression."""
    return execute_call(backend, image, _call("countEval", obj, str(expr)), cfg)


def spatial_eval(backend, image: str, subject: str, reference: str, rel: str,
                 cfg: EvalConfig = DEFAULT_CONFIG) -> ModuleResult:
    """Score 1 iff subject stands in the given relation to reference.

    left/right/above/below compare box centers, front/behind compare
    closeness; ties score 0. Other relations are answered via VQA.
    """
    return execute_call(backend, image, _call("spatialEval", subject, reference, rel), cfg)


def scale_eval(backend, image: str, subject: str, reference: str, rel: str,
               cfg: EvalConfig = DEFAULT_CONFIG) -> ModuleResult:
    """Score 1 iff the area ratio subject/reference matches the relation.

    With tolerance t: bigger means ratio > t, smaller means ratio < 1/t,
    same covers the closed band in between. Other relations go to VQA.
    """
    return execute_call(backend, image, _call("scaleEval", subject, reference, rel), cfg)


def text_eval(backend, image: str, target: str, cfg: EvalConfig = DEFAULT_CONFIG) -> ModuleResult:
    """Score 1 iff the target string appears in the OCR'd text, compared
    after normalization and reading-order assembly."""
    return execute_call(backend, image, _call("textEval", target), cfg)


def vqa_eval(backend, image: str, question: str, choices: str, expected: str,
             cfg: EvalConfig = DEFAULT_CONFIG) -> ModuleResult:
    """Score 1 iff the backend's answer equals the expected choice."""
    return execute_call(backend, image, _call("vqa", question, choices, expected), cfg)
