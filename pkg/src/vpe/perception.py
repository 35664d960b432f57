"""Perception data model and backends.

The evaluation core never touches pixels. It talks to a ``PerceptionBackend``
that answers three queries about an opaque image reference: grounded object
detection, OCR, and multiple-choice visual question answering. Two backends
are provided: a deterministic JSON fixture backend for tests and offline runs,
and an HTTP client for a live perception service.
"""

from __future__ import annotations

import base64
import json
import math
import time
import unicodedata
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Protocol, Sequence, runtime_checkable

import httpx

from .errors import VpeError

DEFAULT_BOX_THRESHOLD = 0.35


class PerceptionError(VpeError):
    """Base class for backend failures."""


class ImageNotFoundError(PerceptionError):
    """The image reference cannot be resolved."""


class BackendUnavailableError(PerceptionError):
    """The remote perception service could not be reached."""


class FixtureError(PerceptionError):
    """The fixture document is unreadable or violates the fixture schema."""


class UnknownFixtureKeyError(PerceptionError):
    """Strict-mode lookup of an (image, query) pair absent from the fixture."""


def normalize_text(s: str) -> str:
    """Fold to a canonical comparison form.

    Unicode compatibility normalization, casefold, punctuation and symbols
    mapped to spaces, whitespace collapsed.
    """
    folded = unicodedata.normalize("NFKC", s).casefold()
    cleaned = "".join(ch if ch.isalnum() else " " for ch in folded)
    return " ".join(cleaned.split())


@dataclass(frozen=True)
class BBox:
    """Axis-aligned box in normalized image coordinates, xyxy order.

    y grows downward, as in image space.
    """

    x1: float
    y1: float
    x2: float
    y2: float

    def __post_init__(self) -> None:
        for name, v in (("x1", self.x1), ("y1", self.y1), ("x2", self.x2), ("y2", self.y2)):
            if not (isinstance(v, (int, float)) and math.isfinite(v)):
                raise ValueError(f"{name} must be a finite number, got {v!r}")
        if not (0.0 <= self.x1 <= self.x2 <= 1.0):
            raise ValueError(f"expected 0 <= x1 <= x2 <= 1, got x1={self.x1}, x2={self.x2}")
        if not (0.0 <= self.y1 <= self.y2 <= 1.0):
            raise ValueError(f"expected 0 <= y1 <= y2 <= 1, got y1={self.y1}, y2={self.y2}")

    @property
    def area(self) -> float:
        return (self.x2 - self.x1) * (self.y2 - self.y1)

    @property
    def center(self) -> tuple[float, float]:
        return ((self.x1 + self.x2) / 2.0, (self.y1 + self.y2) / 2.0)

    def as_list(self) -> list[float]:
        return [self.x1, self.y1, self.x2, self.y2]


@dataclass(frozen=True)
class Detection:
    """One grounded object instance.

    ``closeness`` is a per-image depth proxy: larger values mean nearer to
    the camera.
    """

    label: str
    box: BBox
    confidence: float
    closeness: float = 0.0

    def __post_init__(self) -> None:
        if not (0.0 <= self.confidence <= 1.0):
            raise ValueError(f"confidence must be in [0, 1], got {self.confidence!r}")
        if not (math.isfinite(self.closeness) and self.closeness >= 0.0):
            raise ValueError(f"closeness must be finite and >= 0, got {self.closeness!r}")


@dataclass(frozen=True)
class OcrToken:
    text: str
    box: BBox
    confidence: float

    def __post_init__(self) -> None:
        if not self.text.strip():
            raise ValueError("OCR token text must be non-empty")
        if not (0.0 <= self.confidence <= 1.0):
            raise ValueError(f"confidence must be in [0, 1], got {self.confidence!r}")


@dataclass(frozen=True)
class VqaQuery:
    question: str
    choices: tuple[str, ...]

    def __post_init__(self) -> None:
        if len(self.choices) < 2:
            raise ValueError("a VQA query needs at least two choices")
        normed = [normalize_text(c) for c in self.choices]
        if len(set(normed)) != len(normed):
            raise ValueError(f"choices must be pairwise distinct after normalization: {self.choices!r}")


@dataclass(frozen=True)
class VqaAnswer:
    """Answer projected onto one of the query choices.

    ``projected`` is False when the raw backend output matched no choice; the
    answer is then the first choice and callers should treat the result as an
    error, not a real answer.
    """

    answer: str
    raw: str
    projected: bool = True


def project_answer(raw: str, choices: Sequence[str]) -> VqaAnswer:
    """Map free-text model output onto the nearest choice by normalized match."""
    raw_norm = normalize_text(raw)
    for choice in choices:
        if normalize_text(choice) == raw_norm:
            return VqaAnswer(answer=choice, raw=raw, projected=True)
    return VqaAnswer(answer=choices[0], raw=raw, projected=False)


@runtime_checkable
class PerceptionBackend(Protocol):
    """Interface shared by the fixture backend and the remote client.

    Implementations must be safe to share across threads and must return
    identical results for identical arguments within one process run.
    """

    def obj_det(self, image: str, query: str, box_threshold: float) -> list[Detection]:
        """Detections for a referring expression, confidence >= box_threshold,
        sorted by descending confidence with (x1, y1, x2, y2) tiebreak."""
        ...

    def ocr(self, image: str) -> list[OcrToken]:
        """All text tokens in the image, in backend-native order."""
        ...

    def vqa(self, image: str, query: VqaQuery) -> VqaAnswer:
        """Answer a multiple-choice question about the image."""
        ...


def _sort_detections(dets: list[Detection]) -> list[Detection]:
    return sorted(
        dets,
        key=lambda d: (-d.confidence, (d.box.x1, d.box.y1, d.box.x2, d.box.y2)),
    )


def _check_threshold(box_threshold: float) -> None:
    if not (0.0 <= box_threshold <= 1.0):
        raise ValueError(f"box_threshold must be in [0, 1], got {box_threshold!r}")


# ---------------------------------------------------------------------------
# Fixture backend
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class _ImageFixture:
    objdet: Mapping[str, tuple[Detection, ...]]
    ocr: tuple[OcrToken, ...]
    vqa: Mapping[str, str]


def _parse_box(value: object, where: str) -> BBox:
    if not (isinstance(value, list) and len(value) == 4):
        raise FixtureError(f"{where}: box must be a list of 4 numbers, got {value!r}")
    if not all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in value):
        raise FixtureError(f"{where}: box must contain only numbers, got {value!r}")
    try:
        return BBox(*[float(v) for v in value])
    except ValueError as e:
        raise FixtureError(f"{where}: {e}") from e


def _parse_number(value: object, where: str, lo: float, hi: float) -> float:
    if not isinstance(value, (int, float)) or isinstance(value, bool):
        raise FixtureError(f"{where}: expected a number, got {value!r}")
    v = float(value)
    if not (lo <= v <= hi):
        raise FixtureError(f"{where}: expected a value in [{lo}, {hi}], got {v!r}")
    return v


class FixtureBackend:
    """Perception oracle answering purely from a JSON document.

    Immutable after construction. In lenient mode (the default), unknown
    image or query keys yield empty detections / empty OCR, and unknown VQA
    questions yield an unprojected answer; strict mode raises instead.
    """

    def __init__(self, images: Mapping[str, _ImageFixture], strict: bool = False):
        self._images = dict(images)
        self._strict = strict

    @classmethod
    def from_dict(cls, doc: object, strict: bool = False) -> "FixtureBackend":
        if not isinstance(doc, dict):
            raise FixtureError(f"fixture root must be an object, got {type(doc).__name__}")
        unknown = set(doc) - {"images"}
        if unknown:
            raise FixtureError(f"unknown top-level field {sorted(unknown)[0]!r}")
        images_doc = doc.get("images")
        if not isinstance(images_doc, dict):
            raise FixtureError("images: expected an object mapping image refs to entries")
        images: dict[str, _ImageFixture] = {}
        for ref, entry in images_doc.items():
            images[ref] = cls._parse_image(ref, entry)
        return cls(images, strict=strict)

    @staticmethod
    def _parse_image(ref: str, entry: object) -> _ImageFixture:
        where = f"images.{ref}"
        if not isinstance(entry, dict):
            raise FixtureError(f"{where}: expected an object")
        unknown = set(entry) - {"objdet", "ocr", "vqa"}
        if unknown:
            raise FixtureError(f"{where}.{sorted(unknown)[0]}: unknown field")

        objdet: dict[str, tuple[Detection, ...]] = {}
        for query, dets in (entry.get("objdet") or {}).items():
            if not isinstance(dets, list):
                raise FixtureError(f"{where}.objdet.{query}: expected a list of detections")
            parsed = []
            for i, det in enumerate(dets):
                dwhere = f"{where}.objdet.{query}[{i}]"
                if not isinstance(det, dict):
                    raise FixtureError(f"{dwhere}: expected an object")
                box = _parse_box(det.get("box"), f"{dwhere}.box")
                conf = _parse_number(det.get("confidence"), f"{dwhere}.confidence", 0.0, 1.0)
                closeness = 0.0
                if "closeness" in det:
                    closeness = _parse_number(det["closeness"], f"{dwhere}.closeness", 0.0, math.inf)
                parsed.append(Detection(label=query, box=box, confidence=conf, closeness=closeness))
            objdet[query] = tuple(parsed)

        tokens = []
        ocr_doc = entry.get("ocr") or []
        if not isinstance(ocr_doc, list):
            raise FixtureError(f"{where}.ocr: expected a list of tokens")
        for i, tok in enumerate(ocr_doc):
            twhere = f"{where}.ocr[{i}]"
            if not isinstance(tok, dict):
                raise FixtureError(f"{twhere}: expected an object")
            text = tok.get("text")
            if not isinstance(text, str) or not text.strip():
                raise FixtureError(f"{twhere}.text: expected non-empty text, got {text!r}")
            box = _parse_box(tok.get("box"), f"{twhere}.box")
            conf = _parse_number(tok.get("confidence"), f"{twhere}.confidence", 0.0, 1.0)
            tokens.append(OcrToken(text=text, box=box, confidence=conf))

        vqa_doc = entry.get("vqa") or {}
        if not isinstance(vqa_doc, dict):
            raise FixtureError(f"{where}.vqa: expected an object mapping questions to answers")
        for q, a in vqa_doc.items():
            if not isinstance(a, str):
                raise FixtureError(f"{where}.vqa.{q}: expected a text answer, got {a!r}")

        return _ImageFixture(objdet=objdet, ocr=tuple(tokens), vqa=dict(vqa_doc))

    def _entry(self, image: str) -> _ImageFixture | None:
        entry = self._images.get(image)
        if entry is None and self._strict:
            raise ImageNotFoundError(f"image {image!r} not in fixture")
        return entry

    def obj_det(self, image: str, query: str, box_threshold: float = DEFAULT_BOX_THRESHOLD) -> list[Detection]:
        _check_threshold(box_threshold)
        entry = self._entry(image)
        if entry is None:
            return []
        dets = entry.objdet.get(query)
        if dets is None:
            if self._strict:
                raise UnknownFixtureKeyError(f"no objdet fixture for ({image!r}, {query!r})")
            return []
        return _sort_detections([d for d in dets if d.confidence >= box_threshold])

    def ocr(self, image: str) -> list[OcrToken]:
        entry = self._entry(image)
        if entry is None:
            return []
        return list(entry.ocr)

    def vqa(self, image: str, query: VqaQuery) -> VqaAnswer:
        entry = self._entry(image)
        raw = entry.vqa.get(query.question) if entry is not None else None
        if raw is None:
            if self._strict:
                raise UnknownFixtureKeyError(f"no vqa fixture for ({image!r}, {query.question!r})")
            return VqaAnswer(answer=query.choices[0], raw="", projected=False)
        return project_answer(raw, query.choices)


def load_fixture(path: str | Path, strict: bool = False) -> FixtureBackend:
    """Load a fixture backend from a JSON file.

    Raises FixtureError with line/column on malformed JSON and with the
    offending field path on schema violations.
    """
    p = Path(path)
    try:
        text = p.read_text(encoding="utf-8")
    except FileNotFoundError as e:
        raise FixtureError(f"fixture file not found: {p}") from e
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as e:
        raise FixtureError(f"{p}: invalid JSON at line {e.lineno}, column {e.colno}: {e.msg}") from e
    return FixtureBackend.from_dict(doc, strict=strict)


# ---------------------------------------------------------------------------
# Remote backend
# ---------------------------------------------------------------------------

class RemoteBackend:
    """Client for the perception HTTP service.

    Image references are file paths; the client ships raw bytes base64-encoded
    and never decodes pixels itself. Transport failures and 5xx responses are
    retried, then surface as BackendUnavailableError.
    """

    def __init__(
        self,
        base_url: str,
        *,
        timeout: float = 30.0,
        retries: int = 2,
        client: httpx.Client | None = None,
    ):
        self._base_url = base_url.rstrip("/")
        self._retries = retries
        self._client = client if client is not None else httpx.Client(timeout=timeout)
        self._sleep = time.sleep

    def close(self) -> None:
        self._client.close()

    def _image_b64(self, image: str) -> str:
        try:
            data = Path(image).read_bytes()
        except (FileNotFoundError, IsADirectoryError) as e:
            raise ImageNotFoundError(f"cannot read image {image!r}: {e}") from e
        return base64.b64encode(data).decode("ascii")

    def _post(self, path: str, payload: dict) -> dict:
        url = f"{self._base_url}{path}"
        last: Exception | None = None
        for attempt in range(self._retries + 1):
            try:
                resp = self._client.post(url, json=payload)
            except httpx.HTTPError as e:
                last = e
                if attempt < self._retries:
                    self._sleep(0.1 * (attempt + 1))
                continue
            if resp.status_code >= 500:
                last = PerceptionError(f"{url} returned {resp.status_code}: {resp.text[:200]}")
                if attempt < self._retries:
                    self._sleep(0.1 * (attempt + 1))
                continue
            if resp.status_code != 200:
                raise PerceptionError(f"{url} returned {resp.status_code}: {resp.text[:200]}")
            try:
                body = resp.json()
            except ValueError as e:
                raise PerceptionError(f"{url}: response is not valid JSON") from e
            if not isinstance(body, dict):
                raise PerceptionError(f"{url}: expected a JSON object response")
            return body
        raise BackendUnavailableError(f"perception service unreachable at {url}: {last}")

    def obj_det(self, image: str, query: str, box_threshold: float = DEFAULT_BOX_THRESHOLD) -> list[Detection]:
        _check_threshold(box_threshold)
        if not query.strip():
            raise PerceptionError("query must be non-empty")
        body = self._post(
            "/v1/objdet",
            {"image": self._image_b64(image), "query": query, "box_threshold": box_threshold},
        )
        dets = []
        try:
            for d in body["detections"]:
                dets.append(
                    Detection(
                        label=str(d.get("label", query)),
                        box=BBox(*[float(v) for v in d["box"]]),
                        confidence=float(d["confidence"]),
                        closeness=float(d.get("closeness", 0.0)),
                    )
                )
        except (KeyError, TypeError, ValueError) as e:
            raise PerceptionError(f"malformed objdet response: {e}") from e
        return _sort_detections([d for d in dets if d.confidence >= box_threshold])

    def ocr(self, image: str) -> list[OcrToken]:
        body = self._post("/v1/ocr", {"image": self._image_b64(image)})
        tokens = []
        try:
            for t in body["tokens"]:
                tokens.append(
                    OcrToken(
                        text=str(t["text"]),
                        box=BBox(*[float(v) for v in t["box"]]),
                        confidence=float(t["confidence"]),
                    )
                )
        except (KeyError, TypeError, ValueError) as e:
            raise PerceptionError(f"malformed ocr response: {e}") from e
        return tokens

    def vqa(self, image: str, query: VqaQuery) -> VqaAnswer:
        body = self._post(
            "/v1/vqa",
            {
                "image": self._image_b64(image),
                "question": query.question,
                "choices": list(query.choices),
            },
        )
        try:
            answer = str(body["answer"])
            raw = str(body.get("raw", answer))
            projected = bool(body.get("projected", True))
        except (KeyError, TypeError) as e:
            raise PerceptionError(f"malformed vqa response: {e}") from e
        if answer not in query.choices:
            raise PerceptionError(f"vqa answer {answer!r} is not among the requested choices")
        return VqaAnswer(answer=answer, raw=raw, projected=projected)
