from __future__ import annotations

import json

import pytest

from vpe.dsl import parse_program, print_program
from vpe.progen import (
    AllStatementsInvalidError,
    EndpointError,
    FixtureMissError,
    GenConfig,
    ProgramGenError,
    build_icl_request,
    clean_completion,
    content_words,
    coverage_stats,
    default_exemplars,
    generate_program,
    repair_completion,
    split_statements,
)


class TestExemplars:
    def test_default_set_has_twelve(self):
        ex = default_exemplars()
        assert len(ex.exemplars) == 12

    def test_every_exemplar_parses(self):
        for _prompt, program in default_exemplars().exemplars:
            parse_program(program)

    def test_docs_mention_every_module(self):
        docs = default_exemplars().docs
        for module in ("objectEval", "countEval", "spatialEval", "scaleEval", "textEval", "vqa"):
            assert module in docs


class TestBuildRequest:
    def test_blocks_in_order(self):
        ex = default_exemplars()
        req = build_icl_request("a blue bicycle", ex)
        positions = [req.index(f"Prompt: {p}") for p, _ in ex.exemplars]
        assert positions == sorted(positions)
        assert req.rstrip().endswith("Prompt: a blue bicycle\nProgram:")

    def test_deterministic(self):
        ex = default_exemplars()
        assert build_icl_request("x", ex) == build_icl_request("x", ex)

    def test_empty_exemplars_warns(self):
        from vpe.progen import ExemplarSet

        empty = ExemplarSet(docs="docs", exemplars=())
        with pytest.warns(UserWarning):
            req = build_icl_request("a dog", empty)
        assert req.startswith("docs")


class TestCleaning:
    def test_strip_code_fences(self):
        raw = "```\nobjectEval(img, 'dog')\n```"
        assert clean_completion(raw) == "objectEval(img, 'dog')"

    def test_strip_program_label(self):
        raw = "Program: objectEval(img, 'dog')"
        assert clean_completion(raw) == "objectEval(img, 'dog')"

    def test_split_respects_strings_and_parens(self):
        text = "vqa(img, 'a; b?', 'yes|no', 'yes'); objectEval(img, 'dog')"
        parts = split_statements(text)
        assert len(parts) == 2
        assert parts[0].startswith("vqa")


class TestRepair:
    def test_valid_two_statement_completion(self):
        program, diags = repair_completion(
            "objectEval(img, 'dog')\ncountEval(img, 'dog', '==2')"
        )
        assert len(program.calls) == 2
        assert diags == []

    def test_code_fenced_completion(self):
        program, diags = repair_completion(
            "```python\nobjectEval(img, 'dog')\ncountEval(img, 'dog', '==2')\n```"
        )
        assert len(program.calls) == 2

    def test_drops_bogus_statement(self):
        program, diags = repair_completion(
            "objectEval(img, 'dog')\nfooEval(img, 'x')\ntextEval(img, 'shop')"
        )
        assert [c.module for c in program.calls] == ["objectEval", "textEval"]
        assert len(diags) == 1
        assert diags[0].kind == "dropped-statement"

    def test_drops_trailing_prose(self):
        program, diags = repair_completion(
            "objectEval(img, 'dog')\nThis program checks for a dog."
        )
        assert len(program.calls) == 1
        assert len(diags) == 1

    def test_drops_semantically_invalid(self):
        program, diags = repair_completion(
            "countEval(img, 'dog', 'lots')\nobjectEval(img, 'dog')"
        )
        assert [c.module for c in program.calls] == ["objectEval"]

    def test_all_invalid_raises(self):
        with pytest.raises(AllStatementsInvalidError):
            repair_completion("total nonsense\nmore nonsense")

    def test_output_is_subsequence_of_input_statements(self):
        raw = "objectEval(img, 'a')\nbroken(\ntextEval(img, 'b')\nvqa(img, 'q?', 'yes|no', 'maybe')"
        program, _ = repair_completion(raw)
        kept = [print_program(parse_program(s)) for s in split_statements(clean_completion(raw))
                if _parses_clean(s)]
        assert [print_program(parse_program(print_program(program).splitlines()[i]))
                for i in range(len(program.calls))] == kept


def _parses_clean(s: str) -> bool:
    from vpe.dsl import DslParseError, semantic_errors

    try:
        p = parse_program(s)
    except DslParseError:
        return False
    return not semantic_errors(p)


class TestOffline:
    def fixture_path(self, tmp_path, mapping):
        path = tmp_path / "completions.json"
        path.write_text(json.dumps(mapping))
        return path

    def test_fixture_round_trip(self, tmp_path, no_network):
        path = self.fixture_path(tmp_path, {
            "two dogs": "countEval(img, 'dog', '==2')\nobjectEval(img, 'dog')"
        })
        cfg = GenConfig(offline_fixture=path)
        program, diags = generate_program("two dogs", cfg)
        assert len(program.calls) == 2
        assert diags == []
        again, _ = generate_program("two dogs", cfg)
        assert again == program

    def test_fixture_miss(self, tmp_path, no_network):
        path = self.fixture_path(tmp_path, {})
        with pytest.raises(FixtureMissError):
            generate_program("unknown prompt", GenConfig(offline_fixture=path))

    def test_no_endpoint_configured(self, no_network):
        with pytest.raises(EndpointError):
            generate_program("a dog", GenConfig())

    def test_generated_program_round_trips(self, tmp_path, no_network):
        path = self.fixture_path(tmp_path, {
            "p": "```\nProgram: objectEval(img, 'dog')\nscaleEval(img, 'a', 'b', 'bigger')\n```"
        })
        program, _ = generate_program("p", GenConfig(offline_fixture=path))
        assert parse_program(print_program(program)) == program


class TestGenConfig:
    def test_negative_temperature_rejected(self):
        with pytest.raises(ProgramGenError):
            GenConfig(temperature=-0.1)

    def test_negative_retries_rejected(self):
        with pytest.raises(ProgramGenError):
            GenConfig(max_retries=-1)

    def test_rate_limiter_shared_across_calls(self):
        from vpe.progen import _limiter_for

        cfg = GenConfig(endpoint_url="http://x", min_request_interval=0.5)
        assert _limiter_for(cfg) is _limiter_for(cfg)
        other = GenConfig(endpoint_url="http://y", min_request_interval=0.5)
        assert _limiter_for(cfg) is not _limiter_for(other)

    def test_rate_limiter_spaces_requests(self):
        import time

        from vpe.progen import _RateLimiter

        limiter = _RateLimiter(0.05)
        start = time.monotonic()
        limiter.wait()
        limiter.wait()
        assert time.monotonic() - start >= 0.05


class TestCoverage:
    def test_full_coverage(self):
        program = parse_program("objectEval(img, 'dog')")
        report = coverage_stats("a dog", program)
        assert report.fraction == 1.0
        assert report.covered == ("dog",)

    def test_half_coverage(self):
        program = parse_program("objectEval(img, 'dog')")
        report = coverage_stats("a red dog", program)
        assert report.fraction == 0.5
        assert report.missed == ("red",)

    def test_matches_stopword_filtered_oracle(self):
        stop = {"a", "an", "the", "of", "is", "on", "in", "that", "with", "and", "to"}
        cases = [
            ("a dog riding a wave", "objectEval(img, 'dog')\nvqa(img, 'is the dog riding a wave?', 'yes|no', 'yes')"),
            ("three red apples on a table", "countEval(img, 'apple', '==3')\nobjectEval(img, 'table')"),
            ("a sign that reads 'open'", "textEval(img, 'open')"),
        ]
        for prompt, prog_text in cases:
            program = parse_program(prog_text)
            report = coverage_stats(prompt, program)
            import re as _re

            prompt_words = []
            for w in _re.findall(r"[a-z0-9]+", prompt.lower()):
                if w not in stop and w not in prompt_words:
                    prompt_words.append(w)
            arg_words = set()
            for call in program.calls:
                for s in call.arg_strings():
                    arg_words.update(_re.findall(r"[a-z0-9]+", s.lower()))
            expected = sum(1 for w in prompt_words if w in arg_words) / len(prompt_words)
            assert report.fraction == pytest.approx(expected)

    def test_content_words_dedupe(self):
        assert content_words("a dog and a dog") == ["dog"]
