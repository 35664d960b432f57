"""Skill-specific benchmark corpora with paired evaluation programs.

Five skills. Object and text prompts enumerate their template/vocabulary
grids exhaustively; count, spatial, and scale draw 1000 seed-deterministic
samples each from much larger grids. The sampler stratifies by template and
relation and walks a shuffled object cycle, so marginal coverage of objects,
counts, and relations stays near-uniform without duplicate samples.
"""

from __future__ import annotations

import hashlib
import json
import random
from dataclasses import dataclass, field
from importlib import resources
from typing import Iterable, Mapping, TextIO

from .dsl import EvalProgram, parse_program, print_program
from .errors import VpeError

SKILLS = ("object", "count", "spatial", "scale", "text")

OBJECT_TEMPLATES = (
    "<objA>",
    "<a> <objA>",
    "a photo of <a> <objA>",
    "an image of <a> <objA>",
    "a picture of <a> <objA>",
)

COUNT_TEMPLATES = (
    "<N> <objA><s>",
    "a photo of <N> <objA><s>",
    "a picture of <N> <objA><s>",
    "an image of <N> <objA><s>",
    "<N EN> <objA><s>",
    "a photo of <N EN> <objA><s>",
    "a picture of <N EN> <objA><s>",
    "an image of <N EN> <objA><s>",
)

SPATIAL_TEMPLATE = "<a2> <objB> is <rel> <a1> <objA>"

SCALE_TEMPLATE = "<a2> <objB> that is <scale> <a1> <objA>"

TEXT_TEMPLATES = (
    "a sign that reads '<text>'",
    "a book cover that reads '<text>'",
    "a poster that reads '<text>'",
    "a sign that says '<text>'",
    "a book cover that says '<text>'",
    "a poster that says '<text>'",
    "a storefront with '<text>' written on it",
    "a storefront with '<text>' written",
    "a storefront with '<text>' displayed",
    "a piece of paper that says '<text>'",
    "a piece of paper that reads '<text>'",
    "a piece of paper that says '<text>' on it",
    "a piece of paper that reads '<text>' on it",
)

SPATIAL_PHRASES = {
    "left": "to the left of",
    "right": "to the right of",
    "above": "above",
    "below": "below",
    "front": "in front of",
    "behind": "behind",
}

SCALE_PHRASES = {
    "smaller": "smaller than",
    "bigger": "bigger than",
    "same": "the same size as",
}

NUMBER_WORDS = {1: "one", 2: "two", 3: "three", 4: "four"}

SAMPLED_SKILL_SIZES = {"count": 1000, "spatial": 1000, "scale": 1000}


class VocabError(VpeError):
    """Vocabulary does not have the required shape."""


class CorpusError(VpeError):
    """A corpus JSONL document is malformed."""


class TemplateError(VpeError):
    """A template variable is missing or unknown."""


@dataclass(frozen=True)
class Vocab:
    objects: tuple[str, ...]
    words: tuple[str, ...]
    counts: tuple[int, ...] = (1, 2, 3, 4)
    spatial_relations: tuple[str, ...] = ("above", "below", "left", "right", "front", "behind")
    scale_relations: tuple[str, ...] = ("smaller", "bigger", "same")
    plurals: Mapping[str, str] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if len(self.objects) != 80:
            raise VocabError(f"expected 80 object names, got {len(self.objects)}")
        if len(self.words) != 31:
            raise VocabError(f"expected 31 render-text words, got {len(self.words)}")
        for name in (*self.objects, *self.words):
            if name != name.lower():
                raise VocabError(f"vocabulary entries must be lowercase: {name!r}")
        if len(set(self.objects)) != len(self.objects):
            raise VocabError("object names must be unique")
        if len(set(self.words)) != len(self.words):
            raise VocabError("render-text words must be unique")


def _read_lines(name: str) -> tuple[str, ...]:
    text = resources.files("vpe.data").joinpath(name).read_text(encoding="utf-8")
    return tuple(line.strip() for line in text.splitlines() if line.strip())


def default_vocab() -> Vocab:
    plurals = json.loads(resources.files("vpe.data").joinpath("plurals.json").read_text(encoding="utf-8"))
    return Vocab(objects=_read_lines("objects.txt"), words=_read_lines("words.txt"), plurals=plurals)


def article(word: str) -> str:
    return "an" if word[:1] in "aeiou" else "a"


def plural(obj: str, vocab: Vocab) -> str:
    return vocab.plurals.get(obj, obj + "s")


def fill_template(template: str, slots: Mapping[str, object], vocab: Vocab) -> str:
    """Expand a prompt template.

    ``<a>``/``<a1>`` take the article of objA, ``<a2>`` of objB; ``<objA><s>``
    becomes a plural form when N > 1; ``<N EN>`` spells the count out;
    ``<rel>`` and ``<scale>`` expand to full connector phrases.
    """
    out = template
    obj_a = slots.get("objA")
    obj_b = slots.get("objB")

    if "<objA><s>" in out:
        if "N" not in slots:
            raise TemplateError("missing slot 'N'")
        if obj_a is None:
            raise TemplateError("missing slot 'objA'")
        n = int(slots["N"])
        out = out.replace("<objA><s>", plural(str(obj_a), vocab) if n > 1 else str(obj_a))

    replacements: dict[str, str] = {}
    if obj_a is not None:
        replacements["<objA>"] = str(obj_a)
        replacements["<a>"] = article(str(obj_a))
        replacements["<a1>"] = article(str(obj_a))
    if obj_b is not None:
        replacements["<objB>"] = str(obj_b)
        replacements["<a2>"] = article(str(obj_b))
    if "N" in slots:
        n = int(slots["N"])
        replacements["<N>"] = str(n)
        if n in NUMBER_WORDS:
            replacements["<N EN>"] = NUMBER_WORDS[n]
    if "rel" in slots:
        rel = str(slots["rel"])
        if rel not in SPATIAL_PHRASES:
            raise TemplateError(f"unknown spatial relation {rel!r}")
        replacements["<rel>"] = SPATIAL_PHRASES[rel]
    if "scale" in slots:
        scale = str(slots["scale"])
        if scale not in SCALE_PHRASES:
            raise TemplateError(f"unknown scale relation {scale!r}")
        replacements["<scale>"] = SCALE_PHRASES[scale]
    if "text" in slots:
        replacements["<text>"] = str(slots["text"])

    for token, value in replacements.items():
        out = out.replace(token, value)

    if "<" in out or ">" in out:
        start = out.find("<")
        end = out.find(">", start)
        token = out[start : end + 1] if start != -1 and end != -1 else out
        raise TemplateError(f"unfilled template variable {token!r}")
    return out


def _quote(s: str) -> str:
    return "'" + s.replace("'", "''") + "'"


def pair_program(skill: str, slots: Mapping[str, object]) -> EvalProgram:
    """The single-statement evaluation program paired with a skill prompt.

    Spatial and scale programs put the sentence subject (objB) first.
    """
    if skill == "object":
        text = f"objectEval(img, {_quote(str(slots['objA']))})"
    elif skill == "count":
        text = f"countEval(img, {_quote(str(slots['objA']))}, '=={int(slots['N'])}')"
    elif skill == "spatial":
        text = (
            f"spatialEval(img, {_quote(str(slots['objB']))}, "
            f"{_quote(str(slots['objA']))}, {_quote(str(slots['rel']))})"
        )
    elif skill == "scale":
        text = (
            f"scaleEval(img, {_quote(str(slots['objB']))}, "
            f"{_quote(str(slots['objA']))}, {_quote(str(slots['scale']))})"
        )
    elif skill == "text":
        text = f"textEval(img, {_quote(str(slots['text']))})"
    else:
        raise VocabError(f"unknown skill {skill!r}")
    return parse_program(text)


@dataclass(frozen=True)
class SkillPrompt:
    id: str
    skill: str
    prompt: str
    slots: dict
    template_index: int
    program: EvalProgram


def _prompt_id(skill: str, template_index: int, slots: Mapping[str, object]) -> str:
    payload = json.dumps([skill, template_index, dict(sorted(slots.items()))], sort_keys=True)
    return hashlib.sha1(payload.encode("utf-8")).hexdigest()[:12]


def _make(skill: str, template: str, template_index: int, slots: dict, vocab: Vocab) -> SkillPrompt:
    return SkillPrompt(
        id=_prompt_id(skill, template_index, slots),
        skill=skill,
        prompt=fill_template(template, slots, vocab),
        slots=slots,
        template_index=template_index,
        program=pair_program(skill, slots),
    )


class _ObjectCycle:
    """Endless walk over a seed-shuffled object list.

    Consecutive windows of up to 80 draws never repeat an object, and over k
    draws every object appears either floor(k/80) or ceil(k/80) times, which
    keeps object marginals near-uniform by construction.
    """

    def __init__(self, objects: tuple[str, ...], rng: random.Random):
        self._objects = list(objects)
        rng.shuffle(self._objects)
        self._i = 0

    def take(self, k: int) -> list[str]:
        out = []
        for _ in range(k):
            out.append(self._objects[self._i % len(self._objects)])
            self._i += 1
        return out


def _cell_sizes(total: int, cells: int) -> list[int]:
    base, remainder = divmod(total, cells)
    return [base + 1 if i < remainder else base for i in range(cells)]


def _generate_object(vocab: Vocab) -> list[SkillPrompt]:
    return [
        _make("object", tpl, ti, {"objA": obj}, vocab)
        for ti, tpl in enumerate(OBJECT_TEMPLATES)
        for obj in vocab.objects
    ]


def _generate_text(vocab: Vocab) -> list[SkillPrompt]:
    return [
        _make("text", tpl, ti, {"text": word}, vocab)
        for ti, tpl in enumerate(TEXT_TEMPLATES)
        for word in vocab.words
    ]


def _generate_count(vocab: Vocab, rng: random.Random, total: int) -> list[SkillPrompt]:
    cycle = _ObjectCycle(vocab.objects, rng)
    cells = [(ti, n) for ti in range(len(COUNT_TEMPLATES)) for n in vocab.counts]
    out = []
    for (ti, n), size in zip(cells, _cell_sizes(total, len(cells))):
        for obj in cycle.take(size):
            out.append(_make("count", COUNT_TEMPLATES[ti], ti, {"objA": obj, "N": n}, vocab))
    return out


def _generate_pairs(
    skill: str,
    template: str,
    relations: tuple[str, ...],
    rel_slot: str,
    vocab: Vocab,
    rng: random.Random,
    total: int,
) -> list[SkillPrompt]:
    cycle = _ObjectCycle(vocab.objects, rng)
    out = []
    for rel, size in zip(relations, _cell_sizes(total, len(relations))):
        seen: set[tuple[str, str]] = set()
        for subject in cycle.take(size):
            others = [o for o in vocab.objects if o != subject]
            reference = rng.choice(others)
            while (subject, reference) in seen:
                reference = rng.choice(others)
            seen.add((subject, reference))
            slots = {"objA": reference, "objB": subject, rel_slot: rel}
            out.append(_make(skill, template, 0, slots, vocab))
    return out


def generate_corpus(vocab: Vocab | None = None, seed: int = 0) -> dict[str, list[SkillPrompt]]:
    """All five corpora; 400/1000/1000/1000/403 prompts with the bundled
    vocabulary. Identical seeds yield identical corpora."""
    if vocab is None:
        vocab = default_vocab()
    rng = random.Random(seed)
    return {
        "object": _generate_object(vocab),
        "count": _generate_count(vocab, rng, SAMPLED_SKILL_SIZES["count"]),
        "spatial": _generate_pairs(
            "spatial", SPATIAL_TEMPLATE, vocab.spatial_relations, "rel", vocab, rng,
            SAMPLED_SKILL_SIZES["spatial"],
        ),
        "scale": _generate_pairs(
            "scale", SCALE_TEMPLATE, vocab.scale_relations, "scale", vocab, rng,
            SAMPLED_SKILL_SIZES["scale"],
        ),
        "text": _generate_text(vocab),
    }


def prompt_to_dict(p: SkillPrompt) -> dict:
    return {
        "id": p.id,
        "skill": p.skill,
        "prompt": p.prompt,
        "slots": dict(sorted(p.slots.items(), key=lambda kv: kv[0])),
        "program": print_program(p.program),
    }


def write_corpus_jsonl(corpus: Mapping[str, list[SkillPrompt]], fp: TextIO) -> None:
    for skill in SKILLS:
        for p in corpus.get(skill, []):
            fp.write(json.dumps(prompt_to_dict(p), ensure_ascii=False) + "\n")


def read_corpus_jsonl(lines: Iterable[str]) -> list[dict]:
    """Parse corpus lines back into dicts with a parsed ``program`` field."""
    out = []
    for i, line in enumerate(lines, start=1):
        line = line.strip()
        if not line:
            continue
        try:
            entry = json.loads(line)
        except json.JSONDecodeError as e:
            raise CorpusError(f"corpus line {i}: invalid JSON: {e.msg}") from e
        for key in ("id", "skill", "prompt", "program"):
            if key not in entry:
                raise CorpusError(f"corpus line {i}: missing field {key!r}")
        entry["program"] = parse_program(entry["program"])
        out.append(entry)
    return out
