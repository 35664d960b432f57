"""Program execution and batch evaluation.

A report records everything needed to reproduce its score: the prompt, the
canonical program text, per-statement results, and the configuration echo.
"""

from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Any, Iterable, Sequence

from .dsl import EvalProgram, print_call, print_program, semantic_errors
from .errors import VpeError
from .modules import DEFAULT_CONFIG, EvalConfig, ModuleResult, execute_call
from .perception import PerceptionBackend


class ProgramValidationError(VpeError):
    """A program with error-level diagnostics was handed to the runner."""


@dataclass(frozen=True)
class EvalReport:
    image: str
    prompt: str
    program: str
    results: tuple[ModuleResult, ...]
    score: float
    config: dict[str, Any]
    flags: tuple[str, ...] = ()
    skill: str | None = None
    model: str | None = None


@dataclass(frozen=True)
class BatchItem:
    image: str
    program: EvalProgram
    prompt: str = ""
    skill: str | None = None
    model: str | None = None


def _aggregate(results: Sequence[ModuleResult], policy: str) -> tuple[float, tuple[str, ...]]:
    if policy == "exclude":
        scores = [r.score for r in results if not r.errored]
        if not scores:
            return 0.0, ("no-scorable-statements",)
        return sum(scores) / len(scores), ()
    # "zero": errored statements already carry score 0.
    return sum(r.score for r in results) / len(results), ()


def run_program(
    backend: PerceptionBackend,
    image: str,
    program: EvalProgram,
    prompt: str = "",
    cfg: EvalConfig = DEFAULT_CONFIG,
    *,
    skill: str | None = None,
    model: str | None = None,
) -> EvalReport:
    """Execute every statement in order and aggregate the mean score.

    Per-statement perception failures are recorded, never raised.
    """
    errors = semantic_errors(program)
    if errors:
        raise ProgramValidationError(
            "; ".join(f"statement {d.call_index}: {d.message}" for d in errors)
        )
    results = tuple(execute_call(backend, image, call, cfg) for call in program.calls)
    score, flags = _aggregate(results, cfg.error_policy)
    return EvalReport(
        image=image,
        prompt=prompt,
        program=print_program(program),
        results=results,
        score=score,
        config=cfg.echo(),
        flags=flags,
        skill=skill,
        model=model,
    )


def run_batch(
    backend: PerceptionBackend,
    items: Sequence[BatchItem],
    parallelism: int = 1,
    cfg: EvalConfig = DEFAULT_CONFIG,
) -> list[EvalReport]:
    """Evaluate a batch; output order always equals input order."""
    if parallelism < 1:
        raise ValueError(f"parallelism must be >= 1, got {parallelism}")

    def one(item: BatchItem) -> EvalReport:
        return run_program(
            backend, item.image, item.program, item.prompt, cfg,
            skill=item.skill, model=item.model,
        )

    if parallelism == 1 or len(items) <= 1:
        return [one(item) for item in items]
    with ThreadPoolExecutor(max_workers=parallelism) as pool:
        return list(pool.map(one, items))


def batch_summary(reports: Sequence[EvalReport]) -> dict[str, Any]:
    """Aggregate line appended after a batch: overall and per-skill means."""
    if not reports:
        return {"summary": True, "count": 0, "mean_score": None, "flags": ["empty-batch"]}
    out: dict[str, Any] = {
        "summary": True,
        "count": len(reports),
        "mean_score": sum(r.score for r in reports) / len(reports),
    }
    skills = sorted({r.skill for r in reports if r.skill is not None})
    if skills:
        out["per_skill"] = {
            s: _mean([r.score for r in reports if r.skill == s]) for s in skills
        }
    return out


def _mean(xs: list[float]) -> float:
    return sum(xs) / len(xs)


def report_to_dict(report: EvalReport) -> dict[str, Any]:
    d: dict[str, Any] = {
        "image": report.image,
        "prompt": report.prompt,
        "program": report.program,
        "score": report.score,
        "results": [
            {
                "call": print_call(r.call),
                "score": r.score,
                "errored": r.errored,
                "explanation": r.explanation,
                "annotations": [
                    {"box": a.box.as_list(), "label": a.label, "role": a.role}
                    for a in r.annotations
                ],
            }
            for r in report.results
        ],
        "config": report.config,
    }
    if report.flags:
        d["flags"] = list(report.flags)
    if report.skill is not None:
        d["skill"] = report.skill
    if report.model is not None:
        d["model"] = report.model
    return d


def report_to_json(report: EvalReport) -> str:
    return json.dumps(report_to_dict(report), ensure_ascii=False)


def write_reports_jsonl(reports: Iterable[EvalReport], fp) -> None:
    """One report per line followed by one summary object."""
    reports = list(reports)
    for r in reports:
        fp.write(report_to_json(r) + "\n")
    fp.write(json.dumps(batch_summary(reports), ensure_ascii=False) + "\n")
