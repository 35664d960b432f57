"""Evaluation-program generation for open-ended prompts.

A chat-completion endpoint is shown module documentation plus a dozen
prompt/program exemplars and asked to emit a program for a new prompt. The
raw completion is cleaned (code fences, labels, prose), split into candidate
statements, and repaired by dropping whatever does not parse or validate.
Repair never invents statements. An offline fixture mode maps prompts
directly to canned completions so tests and reproductions run without any
network access.
"""

from __future__ import annotations

import json
import re
import threading
import time
import warnings
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import httpx

from .dsl import (
    DslParseError,
    EvalProgram,
    parse_program,
    program_from_calls,
    semantic_errors,
)
from .errors import VpeError

LLM_URL_ENV = "VPE_LLM_URL"
LLM_KEY_ENV = "VPE_LLM_KEY"

_STOPWORDS = frozenset(
    """a an the of in on at is are was were be been being and or with to that this
    these those there it its as by for from into over under than then when while
    each very some any all both
    """.split()
)


class ProgramGenError(VpeError):
    """Program generation failed."""


class EndpointError(ProgramGenError):
    """The chat endpoint could not be reached or returned garbage."""


class AllStatementsInvalidError(ProgramGenError):
    """Nothing in the completion survived repair."""


class FixtureMissError(ProgramGenError):
    """Offline fixture has no completion for the prompt."""


@dataclass(frozen=True)
class ExemplarSet:
    docs: str
    exemplars: tuple[tuple[str, str], ...]

    def __post_init__(self) -> None:
        for prompt, program in self.exemplars:
            parsed = parse_program(program)
            errors = semantic_errors(parsed)
            if errors:
                raise ProgramGenError(
                    f"exemplar for {prompt!r} does not validate: {errors[0].message}"
                )


def default_exemplars() -> ExemplarSet:
    doc = json.loads(
        resources.files("vpe.data").joinpath("exemplars.json").read_text(encoding="utf-8")
    )
    return ExemplarSet(
        docs=doc["docs"],
        exemplars=tuple((e["prompt"], e["program"]) for e in doc["exemplars"]),
    )


@dataclass(frozen=True)
class GenConfig:
    endpoint_url: str = ""
    model: str = "gpt-3.5-turbo"
    temperature: float = 0.0
    max_retries: int = 2
    timeout: float = 60.0
    api_key: str | None = None
    offline_fixture: str | Path | None = None
    min_request_interval: float = 0.0  # seconds between live requests

    def __post_init__(self) -> None:
        if self.temperature < 0:
            raise ProgramGenError(f"temperature must be >= 0, got {self.temperature}")
        if self.max_retries < 0:
            raise ProgramGenError(f"max_retries must be >= 0, got {self.max_retries}")


@dataclass(frozen=True)
class GenDiagnostic:
    kind: str  # "dropped-statement" | "empty-exemplars" | "cleaned"
    detail: str


def build_icl_request(prompt: str, exemplars: ExemplarSet) -> str:
    """Deterministic request text: docs, exemplar blocks, then the target."""
    if not exemplars.exemplars:
        warnings.warn("building a request with no exemplars", stacklevel=2)
    blocks = [exemplars.docs.rstrip()]
    for ex_prompt, ex_program in exemplars.exemplars:
        blocks.append(f"Prompt: {ex_prompt}\nProgram:\n{ex_program}")
    blocks.append(f"Prompt: {prompt}\nProgram:\n")
    return "\n\n".join(blocks)


_FENCE_RE = re.compile(r"^\s*```[\w-]*\s*$")
_LABEL_RE = re.compile(r"^\s*(program|answer|output)\s*:\s*", re.IGNORECASE)


def clean_completion(text: str) -> str:
    """Strip code fences and leading labels from a raw completion."""
    lines = []
    for line in text.splitlines():
        if _FENCE_RE.match(line):
            continue
        lines.append(_LABEL_RE.sub("", line, count=1))
    return "\n".join(lines).strip()


def split_statements(text: str) -> list[str]:
    """Split cleaned text into candidate statements.

    Boundaries are newlines and semicolons outside of string literals and
    parentheses, so arguments containing either are kept intact.
    """
    parts = []
    buf = []
    depth = 0
    in_string = False
    i = 0
    n = len(text)
    while i < n:
        ch = text[i]
        if in_string:
            buf.append(ch)
            if ch == "'":
                if i + 1 < n and text[i + 1] == "'":
                    buf.append("'")
                    i += 1
                else:
                    in_string = False
        elif ch == "'":
            in_string = True
            buf.append(ch)
        elif ch == "(":
            depth += 1
            buf.append(ch)
        elif ch == ")":
            depth = max(0, depth - 1)
            buf.append(ch)
        elif ch in ";\n" and depth == 0:
            parts.append("".join(buf))
            buf = []
        else:
            buf.append(ch)
        i += 1
    parts.append("".join(buf))
    return [p.strip() for p in parts if p.strip()]


def repair_completion(text: str) -> tuple[EvalProgram, list[GenDiagnostic]]:
    """Parse what parses, drop what does not; requires one surviving statement."""
    cleaned = clean_completion(text)
    diagnostics: list[GenDiagnostic] = []
    calls = []
    for candidate in split_statements(cleaned):
        try:
            parsed = parse_program(candidate)
        except DslParseError as e:
            diagnostics.append(GenDiagnostic("dropped-statement", f"{candidate!r}: {e}"))
            continue
        errors = semantic_errors(parsed)
        if errors:
            diagnostics.append(
                GenDiagnostic("dropped-statement", f"{candidate!r}: {errors[0].message}")
            )
            continue
        calls.extend(parsed.calls)
    if not calls:
        raise AllStatementsInvalidError(
            f"no valid statements in completion: {text[:200]!r}"
        )
    return program_from_calls(calls, source=cleaned), diagnostics


class _RateLimiter:
    def __init__(self, min_interval: float):
        self._min_interval = min_interval
        self._lock = threading.Lock()
        self._last = 0.0

    def wait(self) -> None:
        if self._min_interval <= 0:
            return
        with self._lock:
            now = time.monotonic()
            delay = self._last + self._min_interval - now
            if delay > 0:
                time.sleep(delay)
                now = time.monotonic()
            self._last = now


# Rate limits hold across calls (and threads) for the same endpoint.
_limiters: dict[tuple[str, float], _RateLimiter] = {}
_limiters_lock = threading.Lock()


def _limiter_for(cfg: GenConfig) -> _RateLimiter:
    key = (cfg.endpoint_url, cfg.min_request_interval)
    with _limiters_lock:
        if key not in _limiters:
            _limiters[key] = _RateLimiter(cfg.min_request_interval)
        return _limiters[key]


def _load_offline_fixture(path: str | Path) -> dict[str, str]:
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except FileNotFoundError as e:
        raise ProgramGenError(f"offline fixture not found: {path}") from e
    except json.JSONDecodeError as e:
        raise ProgramGenError(f"offline fixture {path}: invalid JSON: {e.msg}") from e
    if not isinstance(doc, dict) or not all(isinstance(v, str) for v in doc.values()):
        raise ProgramGenError(f"offline fixture {path}: expected a prompt-to-text map")
    return doc


def _complete_via_endpoint(prompt_text: str, cfg: GenConfig, limiter: _RateLimiter) -> str:
    if not cfg.endpoint_url:
        raise EndpointError(f"no endpoint configured (set {LLM_URL_ENV} or pass endpoint_url)")
    headers = {}
    if cfg.api_key:
        headers["Authorization"] = f"Bearer {cfg.api_key}"
    payload = {
        "model": cfg.model,
        "messages": [{"role": "user", "content": prompt_text}],
        "temperature": cfg.temperature,
    }
    url = cfg.endpoint_url.rstrip("/") + "/chat/completions"
    last: Exception | None = None
    for attempt in range(cfg.max_retries + 1):
        limiter.wait()
        try:
            resp = httpx.post(url, json=payload, headers=headers, timeout=cfg.timeout)
            resp.raise_for_status()
            body = resp.json()
            return body["choices"][0]["message"]["content"]
        except (httpx.HTTPError, KeyError, IndexError, TypeError, ValueError) as e:
            last = e
            if attempt < cfg.max_retries:
                time.sleep(0.5 * (attempt + 1))
    raise EndpointError(f"chat endpoint failed after {cfg.max_retries + 1} attempts: {last}")


def generate_program(
    prompt: str,
    cfg: GenConfig,
    exemplars: ExemplarSet | None = None,
) -> tuple[EvalProgram, list[GenDiagnostic]]:
    """Turn a free-form prompt into a validated evaluation program.

    With ``cfg.offline_fixture`` set, completions come from the fixture map
    and no network is touched.
    """
    if exemplars is None:
        exemplars = default_exemplars()
    if cfg.offline_fixture is not None:
        fixture = _load_offline_fixture(cfg.offline_fixture)
        if prompt not in fixture:
            raise FixtureMissError(f"offline fixture has no completion for {prompt!r}")
        completion = fixture[prompt]
    else:
        request_text = build_icl_request(prompt, exemplars)
        completion = _complete_via_endpoint(request_text, cfg, _limiter_for(cfg))
    return repair_completion(completion)


@dataclass(frozen=True)
class CoverageReport:
    covered: tuple[str, ...]
    missed: tuple[str, ...]

    @property
    def fraction(self) -> float:
        total = len(self.covered) + len(self.missed)
        return len(self.covered) / total if total else 1.0


def content_words(text: str) -> list[str]:
    """Lowercased alphanumeric tokens minus stopwords, deduplicated in order."""
    seen = []
    for token in re.findall(r"[a-z0-9]+", text.lower()):
        if token not in _STOPWORDS and token not in seen:
            seen.append(token)
    return seen


def coverage_stats(prompt: str, program: EvalProgram) -> CoverageReport:
    """Which prompt content words appear in the program's string arguments."""
    arg_tokens: set[str] = set()
    for call in program.calls:
        for s in call.arg_strings():
            arg_tokens.update(content_words(s))
    covered = []
    missed = []
    for word in content_words(prompt):
        (covered if word in arg_tokens else missed).append(word)
    return CoverageReport(covered=tuple(covered), missed=tuple(missed))
