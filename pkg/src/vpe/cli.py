"""Command-line entry point.

Exit codes: 0 success, 1 evaluation completed but some statements errored,
2 usage or configuration error, 3 perception backend unreachable.
"""

from __future__ import annotations

import csv as csv_mod
import json
import sys
from pathlib import Path

import click

from . import bench, dsl, layout, progen, report, runner, stats
from .errors import VpeError
from .modules import EvalConfig
from .perception import BackendUnavailableError, load_fixture, RemoteBackend

EXIT_OK = 0
EXIT_ERRORED_STATEMENTS = 1
EXIT_USAGE = 2
EXIT_BACKEND_UNREACHABLE = 3


def _fail(message: str, code: int) -> None:
    click.echo(f"error: {message}", err=True)
    sys.exit(code)


def _read_text(path: str) -> str:
    if path == "-":
        return sys.stdin.read()
    return Path(path).read_text(encoding="utf-8")


def _open_out(path: str):
    if path == "-":
        return sys.stdout
    return open(path, "w", encoding="utf-8")


@click.group()
def main() -> None:
    """Interpretable text-to-image evaluation toolkit."""


# ---------------------------------------------------------------------------
# bench
# ---------------------------------------------------------------------------

@main.group("bench")
def bench_group() -> None:
    """Benchmark prompt corpora."""


@bench_group.command("generate")
@click.option("--skill", type=click.Choice(("all",) + bench.SKILLS), default="all")
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out", default="-", show_default=True, help="Output JSONL path ('-' for stdout).")
@click.option("--objects-file", type=click.Path(exists=True), default=None,
              help="Override the bundled 80 object names (one per line).")
@click.option("--words-file", type=click.Path(exists=True), default=None,
              help="Override the bundled 31 render-text words (one per line).")
def bench_generate(skill: str, seed: int, out: str, objects_file: str | None,
                   words_file: str | None) -> None:
    """Generate skill prompts with paired evaluation programs."""
    try:
        vocab = bench.default_vocab()
        if objects_file or words_file:
            objects = vocab.objects
            words = vocab.words
            if objects_file:
                objects = tuple(
                    line.strip() for line in Path(objects_file).read_text().splitlines() if line.strip()
                )
            if words_file:
                words = tuple(
                    line.strip() for line in Path(words_file).read_text().splitlines() if line.strip()
                )
            vocab = bench.Vocab(objects=objects, words=words, plurals=vocab.plurals)
        corpus = bench.generate_corpus(vocab, seed)
        if skill != "all":
            corpus = {skill: corpus[skill]}
        fp = _open_out(out)
        try:
            bench.write_corpus_jsonl(corpus, fp)
        finally:
            if fp is not sys.stdout:
                fp.close()
    except VpeError as e:
        _fail(str(e), EXIT_USAGE)


# ---------------------------------------------------------------------------
# program
# ---------------------------------------------------------------------------

@main.group("program")
def program_group() -> None:
    """Parse, format, validate, and generate evaluation programs."""


@program_group.command("parse")
@click.option("--ast-json", is_flag=True, help="Dump the AST with spans as JSON.")
@click.argument("path", default="-")
def program_parse(ast_json: bool, path: str) -> None:
    """Parse program text and report success or a positioned error."""
    try:
        program = dsl.parse_program(_read_text(path))
    except dsl.DslParseError as e:
        _fail(f"parse: {e}", EXIT_USAGE)
        return
    if ast_json:
        doc = [
            {
                "module": c.module,
                "args": [
                    {"img": True} if isinstance(a, dsl.ImgRef) else {"string": a.value}
                    for a in c.args
                ],
                "span": list(c.span),
            }
            for c in program.calls
        ]
        click.echo(json.dumps(doc, ensure_ascii=False, indent=2))
    else:
        click.echo(f"ok: {len(program.calls)} statement(s)")


@program_group.command("fmt")
@click.argument("path", default="-")
def program_fmt(path: str) -> None:
    """Reprint a program in canonical form."""
    try:
        click.echo(dsl.print_program(dsl.parse_program(_read_text(path))))
    except dsl.DslParseError as e:
        _fail(f"parse: {e}", EXIT_USAGE)


@program_group.command("validate")
@click.argument("path", default="-")
def program_validate(path: str) -> None:
    """Parse plus semantic checks; info diagnostics do not fail the command."""
    try:
        program = dsl.parse_program(_read_text(path))
    except dsl.DslParseError as e:
        _fail(f"parse: {e}", EXIT_USAGE)
        return
    diags = dsl.validate_semantics(program)
    for d in diags:
        click.echo(f"{d.level}: statement {d.call_index}: [{d.code}] {d.message}",
                   err=(d.level == "error"))
    if any(d.level == "error" for d in diags):
        sys.exit(EXIT_USAGE)
    click.echo("ok")


@program_group.command("gen")
@click.option("--prompt", required=True)
@click.option("--endpoint", envvar=progen.LLM_URL_ENV, default="",
              help=f"Chat endpoint base URL (env {progen.LLM_URL_ENV}).")
@click.option("--api-key", envvar=progen.LLM_KEY_ENV, default=None,
              help=f"Bearer token (env {progen.LLM_KEY_ENV}).")
@click.option("--model", default="gpt-3.5-turbo", show_default=True)
@click.option("--offline-fixture", type=click.Path(exists=True), default=None,
              help="JSON map of prompt to canned completion; no network used.")
def program_gen(prompt: str, endpoint: str, api_key: str | None, model: str,
                offline_fixture: str | None) -> None:
    """Generate an evaluation program for an open-ended prompt."""
    cfg = progen.GenConfig(
        endpoint_url=endpoint, model=model, api_key=api_key,
        offline_fixture=offline_fixture,
    )
    try:
        program, diagnostics = progen.generate_program(prompt, cfg)
    except progen.EndpointError as e:
        _fail(str(e), EXIT_BACKEND_UNREACHABLE)
        return
    except VpeError as e:
        _fail(str(e), EXIT_USAGE)
        return
    for d in diagnostics:
        click.echo(f"info: [{d.kind}] {d.detail}", err=True)
    click.echo(dsl.print_program(program))


# ---------------------------------------------------------------------------
# layout
# ---------------------------------------------------------------------------

@main.group("layout")
def layout_group() -> None:
    """Encode and decode the two-step layout text format."""


def _split_layout_text(text: str) -> tuple[str, str]:
    lines = [line for line in text.splitlines() if line.strip()]
    if len(lines) < 2:
        raise layout.LayoutError(
            "expected two lines: object counts, then placements"
        )
    return lines[0], " ".join(lines[1:])


@layout_group.command("decode")
@click.option("--json", "as_json", is_flag=True,
              help="Emit the layout as JSON with normalized boxes.")
@click.argument("path", default="-")
def layout_decode(as_json: bool, path: str) -> None:
    """Parse and validate layout text (line 1 objects, line 2 placements)."""
    try:
        objects_line, placements_line = _split_layout_text(_read_text(path))
        objects = layout.parse_object_counts(objects_line)
        placements = layout.parse_placements(placements_line)
        spec = layout.validate_layout(objects, placements)
    except VpeError as e:
        _fail(str(e), EXIT_USAGE)
        return
    if as_json:
        click.echo(json.dumps(layout.layout_to_dict(spec), ensure_ascii=False, indent=2))
    else:
        click.echo(layout.print_object_counts(spec.objects))
        click.echo(layout.print_placements(spec.placements))


@layout_group.command("encode")
@click.argument("path", default="-")
def layout_encode(path: str) -> None:
    """Turn a layout JSON document back into the two-line text format."""
    try:
        spec = layout.layout_from_dict(json.loads(_read_text(path)))
    except json.JSONDecodeError as e:
        _fail(f"invalid JSON: {e.msg} at line {e.lineno}", EXIT_USAGE)
        return
    except VpeError as e:
        _fail(str(e), EXIT_USAGE)
        return
    click.echo(layout.print_object_counts(spec.objects))
    click.echo(layout.print_placements(spec.placements))


# ---------------------------------------------------------------------------
# eval
# ---------------------------------------------------------------------------

@main.group("eval")
def eval_group() -> None:
    """Run evaluation programs against images."""


@eval_group.command("run")
@click.option("--fixture", type=click.Path(), default=None,
              help="Fixture backend JSON file.")
@click.option("--backend-url", envvar="VPE_BACKEND_URL", default=None,
              help="Perception service base URL (env VPE_BACKEND_URL).")
@click.option("--corpus", required=True, type=click.Path(),
              help="Corpus JSONL with id/prompt/program per line.")
@click.option("--images", "images_map", required=True, type=click.Path(),
              help="JSON map of prompt id to image reference.")
@click.option("--parallel", type=int, default=1, show_default=True)
@click.option("--box-threshold", type=float, default=0.35, show_default=True)
@click.option("--scale-tolerance", type=float, default=1.25, show_default=True)
@click.option("--error-policy", type=click.Choice(("zero", "exclude")), default="zero",
              show_default=True)
@click.option("--out", default="-", show_default=True)
def eval_run(fixture: str | None, backend_url: str | None, corpus: str,
             images_map: str, parallel: int, box_threshold: float,
             scale_tolerance: float, error_policy: str, out: str) -> None:
    """Evaluate a corpus; writes one report per line plus a summary line."""
    if (fixture is None) == (backend_url is None):
        _fail("select exactly one backend: --fixture or --backend-url", EXIT_USAGE)
    try:
        cfg = EvalConfig(box_threshold=box_threshold, scale_tolerance=scale_tolerance,
                         error_policy=error_policy)
    except ValueError as e:
        _fail(str(e), EXIT_USAGE)
        return
    try:
        entries = bench.read_corpus_jsonl(_read_text(corpus).splitlines())
        mapping = json.loads(Path(images_map).read_text(encoding="utf-8"))
        if not isinstance(mapping, dict):
            raise VpeError("images map must be a JSON object of id to image ref")
        items = []
        for entry in entries:
            if entry["id"] not in mapping:
                raise VpeError(f"images map has no entry for prompt id {entry['id']!r}")
            items.append(runner.BatchItem(
                image=mapping[entry["id"]],
                program=entry["program"],
                prompt=entry["prompt"],
                skill=entry.get("skill"),
            ))
        backend = load_fixture(fixture) if fixture else RemoteBackend(backend_url)
    except (VpeError, OSError, json.JSONDecodeError) as e:
        _fail(str(e), EXIT_USAGE)
        return

    try:
        reports = runner.run_batch(backend, items, parallelism=parallel, cfg=cfg)
    except BackendUnavailableError as e:
        _fail(str(e), EXIT_BACKEND_UNREACHABLE)
        return

    fp = _open_out(out)
    try:
        runner.write_reports_jsonl(reports, fp)
    finally:
        if fp is not sys.stdout:
            fp.close()
    if any(r.errored for rep in reports for r in rep.results):
        sys.exit(EXIT_ERRORED_STATEMENTS)


# ---------------------------------------------------------------------------
# correlate
# ---------------------------------------------------------------------------

@main.command("correlate")
@click.option("--metric", type=click.Choice(("spearman", "kappa", "alpha")), required=True)
@click.option("--alpha-scale", type=click.Choice(("nominal", "interval")), default="nominal",
              show_default=True, help="Value domain for the alpha metric.")
@click.argument("csv_path", default="-")
def correlate(metric: str, alpha_scale: str, csv_path: str) -> None:
    """Agreement statistics over CSV columns (header row required).

    spearman and kappa need exactly two columns; alpha treats each column as
    one rater and empty cells as missing.
    """
    text = _read_text(csv_path)
    rows = list(csv_mod.reader(text.splitlines()))
    if len(rows) < 2:
        _fail("CSV needs a header row and at least one data row", EXIT_USAGE)
    header, data = rows[0], rows[1:]
    try:
        if metric == "spearman":
            if len(header) != 2:
                raise stats.StatsError("spearman expects exactly two columns")
            x = [float(r[0]) for r in data]
            y = [float(r[1]) for r in data]
            value = stats.spearman_rho(x, y)
            click.echo("undefined" if value is None else f"{value:.6f}")
        elif metric == "kappa":
            if len(header) != 2:
                raise stats.StatsError("kappa expects exactly two columns")
            value = stats.cohen_kappa([r[0] for r in data], [r[1] for r in data])
            click.echo(f"{value:.6f}")
        else:
            raters = []
            for col in range(len(header)):
                column = []
                for r in data:
                    cell = r[col].strip() if col < len(r) else ""
                    if cell == "":
                        column.append(None)
                    else:
                        column.append(float(cell) if alpha_scale == "interval" else cell)
                raters.append(column)
            value = stats.krippendorff_alpha(raters, metric=alpha_scale)
            click.echo(f"{value:.6f}")
    except (stats.StatsError, ValueError) as e:
        _fail(str(e), EXIT_USAGE)


# ---------------------------------------------------------------------------
# report
# ---------------------------------------------------------------------------

@main.group("report")
def report_group() -> None:
    """Render and summarize evaluation reports."""


def _load_report_dicts(path: str) -> list[dict]:
    rows = []
    for i, line in enumerate(_read_text(path).splitlines(), start=1):
        if not line.strip():
            continue
        try:
            rows.append(json.loads(line))
        except json.JSONDecodeError as e:
            raise VpeError(f"report line {i}: invalid JSON: {e.msg}") from e
    return rows


def _report_from_dict(row: dict) -> runner.EvalReport:
    from .modules import Annotation, ModuleResult
    from .perception import BBox

    results = []
    for r in row.get("results", []):
        call = dsl.parse_program(r["call"]).calls[0]
        results.append(ModuleResult(
            call=call,
            score=int(r["score"]),
            errored=bool(r["errored"]),
            explanation=r["explanation"],
            annotations=tuple(
                Annotation(box=BBox(*a["box"]), label=a["label"], role=a["role"])
                for a in r.get("annotations", [])
            ),
        ))
    return runner.EvalReport(
        image=row["image"],
        prompt=row.get("prompt", ""),
        program=row.get("program", ""),
        results=tuple(results),
        score=float(row["score"]),
        config=row.get("config", {}),
        flags=tuple(row.get("flags", ())),
        skill=row.get("skill"),
        model=row.get("model"),
    )


@report_group.command("render")
@click.option("--format", "fmt", type=click.Choice(("text", "csv", "jsonl")), default="text",
              show_default=True)
@click.option("--overlay-dir", type=click.Path(), default=None,
              help="Write one SVG overlay per report into this directory.")
@click.option("--overlay-width", type=int, default=1000, show_default=True)
@click.option("--overlay-height", type=int, default=800, show_default=True)
@click.argument("path", default="-")
def report_render(fmt: str, overlay_dir: str | None, overlay_width: int,
                  overlay_height: int, path: str) -> None:
    """Render report JSONL as text, CSV rows, or normalized JSONL."""
    try:
        rows = [r for r in _load_report_dicts(path) if not r.get("summary")]
        reports = [_report_from_dict(r) for r in rows]
    except (VpeError, KeyError, ValueError) as e:
        _fail(f"malformed report input: {e}", EXIT_USAGE)
        return

    if overlay_dir is not None:
        out_dir = Path(overlay_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        for i, rep in enumerate(reports):
            svg = report.render_overlay(rep, (overlay_width, overlay_height))
            safe = "".join(c if c.isalnum() or c in "-_." else "_" for c in rep.image)
            (out_dir / f"{i:04d}_{safe}.svg").write_text(svg, encoding="utf-8")

    if fmt == "text":
        blocks = [report.render_text_report(rep) for rep in reports]
        click.echo("\n\n".join(blocks))
    elif fmt == "csv":
        import io as io_mod

        buf = io_mod.StringIO()
        writer = csv_mod.writer(buf, lineterminator="\n")
        writer.writerow(["image", "prompt", "score"])
        for rep in reports:
            writer.writerow([rep.image, rep.prompt, f"{rep.score:.4f}"])
        click.echo(buf.getvalue().rstrip("\n"))
    else:
        for rep in reports:
            click.echo(runner.report_to_json(rep))


@report_group.command("summarize")
@click.option("--group-by", type=click.Choice(("skill", "model")), default="skill",
              show_default=True)
@click.option("--format", "fmt", type=click.Choice(("text", "csv")), default="text",
              show_default=True)
@click.argument("path", default="-")
def report_summarize(group_by: str, fmt: str, path: str) -> None:
    """Aggregate mean scores (x100) per group with an Average row."""
    try:
        rows = _load_report_dicts(path)
        table = report.summarize_dicts(rows, group_by=group_by)
    except VpeError as e:
        _fail(str(e), EXIT_USAGE)
        return
    click.echo(table.to_text() if fmt == "text" else table.to_csv())


if __name__ == "__main__":
    main()
