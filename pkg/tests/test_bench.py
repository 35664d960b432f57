from __future__ import annotations

import io
import json
import re
from collections import Counter

import pytest

from vpe.bench import (
    SKILLS,
    TemplateError,
    Vocab,
    VocabError,
    article,
    default_vocab,
    fill_template,
    generate_corpus,
    pair_program,
    plural,
    read_corpus_jsonl,
    write_corpus_jsonl,
    COUNT_TEMPLATES,
    OBJECT_TEMPLATES,
    SCALE_TEMPLATE,
    SPATIAL_TEMPLATE,
    TEXT_TEMPLATES,
)
from vpe.dsl import print_program, validate_semantics

EXPECTED_SIZES = {"object": 400, "count": 1000, "spatial": 1000, "scale": 1000, "text": 403}


@pytest.fixture(scope="module")
def corpus():
    return generate_corpus(default_vocab(), seed=0)


class TestVocab:
    def test_default_shape(self):
        v = default_vocab()
        assert len(v.objects) == 80
        assert len(v.words) == 31
        assert v.counts == (1, 2, 3, 4)
        assert len(v.spatial_relations) == 6
        assert len(v.scale_relations) == 3

    def test_size_mismatch_rejected(self):
        v = default_vocab()
        with pytest.raises(VocabError):
            Vocab(objects=v.objects[:10], words=v.words)
        with pytest.raises(VocabError):
            Vocab(objects=v.objects, words=v.words + ("extra",))

    def test_lowercase_enforced(self):
        v = default_vocab()
        with pytest.raises(VocabError):
            Vocab(objects=("Dog",) + v.objects[1:], words=v.words)


class TestFillTemplate:
    def test_vowel_article(self):
        v = default_vocab()
        assert fill_template(OBJECT_TEMPLATES[1], {"objA": "apple"}, v) == "an apple"
        assert fill_template(OBJECT_TEMPLATES[1], {"objA": "dog"}, v) == "a dog"

    def test_count_digit_and_english_variants(self):
        v = default_vocab()
        assert fill_template("a photo of <N> <objA><s>", {"objA": "dog", "N": 3}, v) == "a photo of 3 dogs"
        assert fill_template("a photo of <N EN> <objA><s>", {"objA": "dog", "N": 3}, v) == "a photo of three dogs"

    def test_singular_keeps_bare_form(self):
        v = default_vocab()
        assert fill_template("<N> <objA><s>", {"objA": "dog", "N": 1}, v) == "1 dog"

    def test_irregular_plurals(self):
        v = default_vocab()
        assert plural("person", v) == "people"
        assert plural("scissors", v) == "scissors"
        assert plural("bus", v) == "buses"
        assert plural("sports ball", v) == "sports balls"

    def test_spatial_connectors(self):
        v = default_vocab()
        cases = {
            "left": "a spoon is to the left of a potted plant",
            "right": "a spoon is to the right of a potted plant",
            "above": "a spoon is above a potted plant",
            "below": "a spoon is below a potted plant",
            "front": "a spoon is in front of a potted plant",
            "behind": "a spoon is behind a potted plant",
        }
        for rel, expected in cases.items():
            slots = {"objA": "potted plant", "objB": "spoon", "rel": rel}
            assert fill_template(SPATIAL_TEMPLATE, slots, v) == expected

    def test_scale_connectors(self):
        v = default_vocab()
        slots = {"objA": "sports ball", "objB": "laptop", "scale": "bigger"}
        assert fill_template(SCALE_TEMPLATE, slots, v) == "a laptop that is bigger than a sports ball"
        slots["scale"] = "same"
        assert fill_template(SCALE_TEMPLATE, slots, v) == "a laptop that is the same size as a sports ball"

    def test_missing_slot(self):
        with pytest.raises(TemplateError):
            fill_template("<N> <objA><s>", {"objA": "dog"}, default_vocab())

    def test_unknown_variable(self):
        with pytest.raises(TemplateError, match="unfilled"):
            fill_template("a <mystery> photo", {}, default_vocab())


class TestPairProgram:
    def test_count(self):
        p = pair_program("count", {"objA": "dog", "N": 3})
        assert print_program(p) == "countEval(img, 'dog', '==3')"

    def test_text(self):
        p = pair_program("text", {"text": "shop"})
        assert print_program(p) == "textEval(img, 'shop')"

    def test_spatial_subject_first(self):
        p = pair_program("spatial", {"objA": "potted plant", "objB": "spoon", "rel": "front"})
        assert print_program(p) == "spatialEval(img, 'spoon', 'potted plant', 'front')"

    def test_scale_subject_first(self):
        p = pair_program("scale", {"objA": "sports ball", "objB": "laptop", "scale": "bigger"})
        assert print_program(p) == "scaleEval(img, 'laptop', 'sports ball', 'bigger')"


class TestCorpus:
    def test_sizes(self, corpus):
        assert {skill: len(prompts) for skill, prompts in corpus.items()} == EXPECTED_SIZES

    def test_template_counts(self):
        assert len(OBJECT_TEMPLATES) == 5
        assert len(COUNT_TEMPLATES) == 8
        assert len(TEXT_TEMPLATES) == 13

    def test_every_program_validates(self, corpus):
        for prompts in corpus.values():
            for p in prompts:
                assert validate_semantics(p.program) == []

    def test_no_unexpanded_tokens(self, corpus):
        for prompts in corpus.values():
            for p in prompts:
                assert "<" not in p.prompt and ">" not in p.prompt

    def test_same_seed_identical(self, corpus):
        again = generate_corpus(default_vocab(), seed=0)
        buf1, buf2 = io.StringIO(), io.StringIO()
        write_corpus_jsonl(corpus, buf1)
        write_corpus_jsonl(again, buf2)
        assert buf1.getvalue() == buf2.getvalue()

    def test_different_seed_differs(self, corpus):
        other = generate_corpus(default_vocab(), seed=1)
        buf1, buf2 = io.StringIO(), io.StringIO()
        write_corpus_jsonl(corpus, buf1)
        write_corpus_jsonl(other, buf2)
        assert buf1.getvalue() != buf2.getvalue()

    def test_exhaustive_skills_unique(self, corpus):
        for skill in ("object", "text"):
            keys = [json.dumps([p.template_index, p.slots], sort_keys=True) for p in corpus[skill]]
            assert len(set(keys)) == len(keys)

    def test_sampled_skills_unique(self, corpus):
        for skill in ("count", "spatial", "scale"):
            keys = [json.dumps([p.template_index, p.slots], sort_keys=True) for p in corpus[skill]]
            assert len(set(keys)) == len(keys)

    def test_spatial_no_self_pairs(self, corpus):
        for p in corpus["spatial"]:
            assert p.slots["objA"] != p.slots["objB"]
        for p in corpus["scale"]:
            assert p.slots["objA"] != p.slots["objB"]

    def test_relation_marginals_near_uniform(self, corpus):
        rels = Counter(p.slots["rel"] for p in corpus["spatial"])
        assert max(rels.values()) - min(rels.values()) <= 1
        scales = Counter(p.slots["scale"] for p in corpus["scale"])
        assert max(scales.values()) - min(scales.values()) <= 1

    def test_object_marginals_near_uniform(self, corpus):
        for skill in ("count", "spatial", "scale"):
            subjects = Counter(
                p.slots["objA" if skill == "count" else "objB"] for p in corpus[skill]
            )
            assert len(subjects) == 80
            assert max(subjects.values()) - min(subjects.values()) <= 1

    def test_count_marginals(self, corpus):
        counts = Counter(p.slots["N"] for p in corpus["count"])
        assert set(counts) == {1, 2, 3, 4}
        assert max(counts.values()) - min(counts.values()) <= len(COUNT_TEMPLATES)

    def test_article_grammar_over_all_prompts(self, corpus):
        bad_a = re.compile(r"\ba [aeiou]")
        bad_an = re.compile(r"\ban [^aeiou]")
        for prompts in corpus.values():
            for p in prompts:
                assert not bad_a.search(p.prompt), p.prompt
                assert not bad_an.search(p.prompt), p.prompt

    def test_article_rule_over_vocabulary(self):
        for obj in default_vocab().objects:
            a = article(obj)
            assert a == ("an" if obj[0] in "aeiou" else "a")

    def test_programs_reference_exactly_their_slots(self, corpus):
        for prompts in corpus.values():
            for p in prompts:
                args = set(p.program.calls[0].arg_strings())
                for key, value in p.slots.items():
                    if key == "N":
                        assert f"=={value}" in args
                    else:
                        assert str(value) in args
                assert len(args) == len(p.slots)

    def test_ids_stable_and_distinct(self, corpus):
        ids = [p.id for prompts in corpus.values() for p in prompts]
        assert len(set(ids)) == len(ids)
        again = generate_corpus(default_vocab(), seed=0)
        assert [p.id for p in corpus["count"]] == [p.id for p in again["count"]]

    def test_jsonl_round_trip(self, corpus):
        buf = io.StringIO()
        write_corpus_jsonl(corpus, buf)
        entries = read_corpus_jsonl(buf.getvalue().splitlines())
        assert len(entries) == sum(EXPECTED_SIZES.values())
        assert {e["skill"] for e in entries} == set(SKILLS)
        first = entries[0]
        assert set(first) >= {"id", "skill", "prompt", "slots", "program"}
