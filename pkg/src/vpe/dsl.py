"""Evaluation-program language: parser, canonical printer, semantic checks.

Grammar:

    program := stmt ((';' | NEWLINE)+ stmt)* (';' | NEWLINE)*
    stmt    := NAME '(' arg (',' arg)* ')'
    arg     := 'img' | STRING

Strings are single-quoted; a quote inside a string is doubled (``'it''s'``).
Spaces and tabs are insignificant. Statements are separated by semicolons or
newlines. ``img`` is a keyword naming the single image under evaluation, not
a variable. Programs are straight-line call lists: no loops, no bindings.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .errors import VpeError

MODULE_ARITY = {
    "objectEval": 2,
    "countEval": 3,
    "spatialEval": 4,
    "scaleEval": 4,
    "textEval": 2,
    "vqa": 4,
}


class DslParseError(VpeError):
    """Positioned syntax or arity error in program text."""

    def __init__(self, message: str, line: int, column: int):
        super().__init__(f"{line}:{column}: {message}")
        self.message = message
        self.line = line
        self.column = column


@dataclass(frozen=True)
class ImgRef:
    """The single bound image; compares equal to every other ImgRef."""


IMG = ImgRef()


@dataclass(frozen=True)
class StringLit:
    value: str


Arg = ImgRef | StringLit


@dataclass(frozen=True)
class ModuleCall:
    module: str
    args: tuple[Arg, ...]
    span: tuple[int, int] = field(default=(0, 0), compare=False, repr=False)

    def arg_strings(self) -> tuple[str, ...]:
        """The string arguments, i.e. everything after the image reference."""
        return tuple(a.value for a in self.args if isinstance(a, StringLit))


@dataclass(frozen=True)
class EvalProgram:
    calls: tuple[ModuleCall, ...]
    source: str = field(default="", compare=False, repr=False)


@dataclass(frozen=True)
class Diagnostic:
    level: str  # "error" | "info"
    code: str
    call_index: int
    message: str


# ---------------------------------------------------------------------------
# Lexer
# ---------------------------------------------------------------------------

_NAME_START = set("abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ_")
_NAME_REST = _NAME_START | set("0123456789")


@dataclass(frozen=True)
class _Token:
    kind: str  # NAME LPAREN RPAREN COMMA STRING SEP EOF
    value: str
    offset: int
    line: int
    column: int


class _Lexer:
    def __init__(self, text: str):
        self.text = text
        self.pos = 0
        self.line = 1
        self.column = 1

    def _error(self, message: str, line: int | None = None, column: int | None = None) -> DslParseError:
        return DslParseError(message, line if line is not None else self.line,
                             column if column is not None else self.column)

    def _advance(self, ch: str) -> None:
        self.pos += 1
        if ch == "\n":
            self.line += 1
            self.column = 1
        else:
            self.column += 1

    def tokens(self) -> list[_Token]:
        out = []
        text = self.text
        n = len(text)
        while self.pos < n:
            ch = text[self.pos]
            start = (self.pos, self.line, self.column)
            if ch in " \t\r":
                self._advance(ch)
                continue
            if ch in ";\n":
                # Collapse a run of separators into a single SEP token.
                while self.pos < n and text[self.pos] in " \t\r;\n":
                    self._advance(text[self.pos])
                out.append(_Token("SEP", "", *start))
                continue
            if ch == "(":
                self._advance(ch)
                out.append(_Token("LPAREN", ch, *start))
                continue
            if ch == ")":
                self._advance(ch)
                out.append(_Token("RPAREN", ch, *start))
                continue
            if ch == ",":
                self._advance(ch)
                out.append(_Token("COMMA", ch, *start))
                continue
            if ch == "'":
                out.append(self._string(*start))
                continue
            if ch in _NAME_START:
                while self.pos < n and text[self.pos] in _NAME_REST:
                    self._advance(text[self.pos])
                out.append(_Token("NAME", text[start[0] : self.pos], *start))
                continue
            raise self._error(f"unexpected character {ch!r}")
        out.append(_Token("EOF", "", self.pos, self.line, self.column))
        return out

    def _string(self, offset: int, line: int, column: int) -> _Token:
        text = self.text
        n = len(text)
        self._advance("'")
        chars = []
        while True:
            if self.pos >= n:
                raise self._error("unterminated string", line, column)
            ch = text[self.pos]
            if ch == "'":
                self._advance(ch)
                if self.pos < n and text[self.pos] == "'":
                    chars.append("'")
                    self._advance("'")
                    continue
                return _Token("STRING", "".join(chars), offset, line, column)
            chars.append(ch)
            self._advance(ch)


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------

class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.toks = _Lexer(text).tokens()
        self.i = 0

    def _peek(self) -> _Token:
        return self.toks[self.i]

    def _next(self) -> _Token:
        tok = self.toks[self.i]
        self.i += 1
        return tok

    @staticmethod
    def _error(message: str, tok: _Token) -> DslParseError:
        return DslParseError(message, tok.line, tok.column)

    def parse(self) -> EvalProgram:
        calls = []
        while self._peek().kind == "SEP":
            self._next()
        if self._peek().kind == "EOF":
            raise self._error("empty program", self._peek())
        while True:
            calls.append(self._statement())
            tok = self._peek()
            if tok.kind == "EOF":
                break
            if tok.kind != "SEP":
                raise self._error(f"expected ';' or newline after statement, got {tok.value!r}", tok)
            while self._peek().kind == "SEP":
                self._next()
            if self._peek().kind == "EOF":
                break
        return EvalProgram(calls=tuple(calls), source=self.text)

    def _statement(self) -> ModuleCall:
        name_tok = self._next()
        if name_tok.kind != "NAME":
            raise self._error("expected a module name", name_tok)
        name = name_tok.value
        if name not in MODULE_ARITY:
            raise self._error(f"unknown module {name!r}", name_tok)
        lp = self._next()
        if lp.kind != "LPAREN":
            raise self._error(f"expected '(' after {name}", lp)
        args: list[Arg] = [self._arg(first=True)]
        while True:
            tok = self._peek()
            if tok.kind == "COMMA":
                self._next()
                args.append(self._arg(first=False))
                continue
            break
        rp = self._next()
        if rp.kind != "RPAREN":
            raise self._error("expected ',' or ')' in argument list", rp)
        arity = MODULE_ARITY[name]
        if len(args) != arity:
            raise self._error(
                f"{name} expects {arity} arguments, got {len(args)}", name_tok
            )
        end = rp.offset + 1
        return ModuleCall(module=name, args=tuple(args), span=(name_tok.offset, end))

    def _arg(self, first: bool) -> Arg:
        tok = self._next()
        if tok.kind == "NAME":
            if tok.value != "img":
                raise self._error(f"expected 'img' or a string, got {tok.value!r}", tok)
            if not first:
                raise self._error("only the first argument may be img", tok)
            return IMG
        if tok.kind == "STRING":
            if first:
                raise self._error("first argument must be img", tok)
            return StringLit(tok.value)
        raise self._error(f"expected an argument, got {tok.value!r}", tok)


def parse_program(text: str) -> EvalProgram:
    """Parse program text, raising DslParseError with line:column on failure."""
    if not isinstance(text, str):
        raise DslParseError("program text must be a string", 1, 1)
    return _Parser(text).parse()


# ---------------------------------------------------------------------------
# Printer
# ---------------------------------------------------------------------------

def _print_arg(arg: Arg) -> str:
    if isinstance(arg, ImgRef):
        return "img"
    return "'" + arg.value.replace("'", "''") + "'"


def print_call(call: ModuleCall) -> str:
    return f"{call.module}({', '.join(_print_arg(a) for a in call.args)})"


def print_program(program: EvalProgram) -> str:
    """Canonical text: one statement per line, single space after commas."""
    return "\n".join(print_call(c) for c in program.calls)


def program_from_calls(calls: list[ModuleCall] | tuple[ModuleCall, ...], source: str = "") -> EvalProgram:
    if not calls:
        raise DslParseError("empty program", 1, 1)
    return EvalProgram(calls=tuple(calls), source=source)


# ---------------------------------------------------------------------------
# Semantic validation
# ---------------------------------------------------------------------------

def validate_semantics(program: EvalProgram) -> list[Diagnostic]:
    """Check argument payloads; returns an empty list only for clean programs.

    Unrecognized spatial/scale relations are reported at info level: they are
    legal and route through the VQA fallback at run time.
    """
    from . import modules  # deferred: modules imports this module for the AST types
    from .perception import normalize_text

    diags: list[Diagnostic] = []
    for i, call in enumerate(program.calls):
        strings = call.arg_strings()
        if call.module == "countEval":
            try:
                modules.CountExpr.parse(strings[1])
            except VpeError as e:
                diags.append(Diagnostic("error", "count-expr-invalid", i, str(e)))
        elif call.module == "spatialEval":
            rel = strings[2]
            if rel not in modules.SPATIAL_RELATIONS:
                diags.append(
                    Diagnostic("info", "vqa-fallback", i,
                               f"relation {rel!r} is not geometric; will be answered via vqa")
                )
        elif call.module == "scaleEval":
            rel = strings[2]
            if rel not in modules.SCALE_RELATIONS:
                diags.append(
                    Diagnostic("info", "vqa-fallback", i,
                               f"relation {rel!r} is not geometric; will be answered via vqa")
                )
        elif call.module == "vqa":
            _question, choices_text, expected = strings
            choices = [c.strip() for c in choices_text.split("|")]
            if len(choices) < 2:
                diags.append(
                    Diagnostic("error", "vqa-too-few-choices", i,
                               f"need at least two choices, got {choices_text!r}")
                )
                continue
            normed = [normalize_text(c) for c in choices]
            if len(set(normed)) != len(normed):
                diags.append(
                    Diagnostic("error", "vqa-duplicate-choices", i,
                               f"choices are not distinct after normalization: {choices_text!r}")
                )
            if normalize_text(expected) not in normed:
                diags.append(
                    Diagnostic("error", "vqa-expected-not-in-choices", i,
                               f"expected answer {expected!r} is not among choices {choices_text!r}")
                )
    return diags


def semantic_errors(program: EvalProgram) -> list[Diagnostic]:
    return [d for d in validate_semantics(program) if d.level == "error"]
