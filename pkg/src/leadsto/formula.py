"""Temporal-logic hypothesis formulas: AST, text grammar, parser, printer.

Grammar (ASCII rendering of the operators)::

    formula  := until ( '~>' '[' lo ',' hi ']' bound? formula )?
    until    := 'F' '[' hi ']' bound? until
              | or ( 'U' '[' lo ',' hi ']' bound? until )?
    or       := and ( '|' and )*
    and      := not ( '&' not )*
    not      := '!' not | primary
    primary  := IDENT | '(' formula ')'
    bound    := '{' ('>=' | '>' | '<=' | '<') NUMBER '}'

Atoms are identifiers ``[A-Za-z_][A-Za-z0-9_.]*`` (dots allowed so that
discretized proposition names like ``IBM.up`` are atoms); ``U``, ``F`` and
``inf`` are reserved words. ``!`` binds tightest, then ``&``, then ``|``;
temporal operators are loosest, with ``~>`` looser than ``U`` so that
``a U[0,inf] b ~>[1,2] c`` reads ``(a U[0,inf] b) ~>[1,2] c``. Temporal
operators associate to the right. ``inf`` denotes an unbounded window end.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field

INF = math.inf

_COMPARATORS = (">=", ">", "<=", "<")


class FormulaSyntaxError(ValueError):
    """Lexical, grammatical, or bound error in formula text, with position."""

    def __init__(self, message: str, line: int, column: int, token: str = ""):
        self.line = line
        self.column = column
        self.token = token
        at = f" at line {line}, column {column}"
        tok = f" (near {token!r})" if token else ""
        super().__init__(message + at + tok)


@dataclass(frozen=True)
class WindowBound:
    """Discrete time window [lo, hi]; hi may be math.inf for unbounded."""

    lo: int
    hi: float

    def __post_init__(self):
        if self.lo < 0:
            raise ValueError(f"window lo must be >= 0, got {self.lo}")
        if self.hi < self.lo:
            raise ValueError(f"window requires lo <= hi, got [{self.lo}, {self.hi}]")

    @property
    def unbounded(self) -> bool:
        return math.isinf(self.hi)

    def end(self, t: int, last: int) -> int:
        """Last in-range index for a window anchored at t, truncated at last."""
        if self.unbounded:
            return last
        return min(t + int(self.hi), last)


@dataclass(frozen=True)
class ProbBound:
    """Probability annotation on a temporal operator, e.g. {>=0.7}."""

    comparator: str
    p: float

    def __post_init__(self):
        if self.comparator not in _COMPARATORS:
            raise ValueError(f"unknown comparator {self.comparator!r}")
        if not 0.0 <= self.p <= 1.0:
            raise ValueError(f"probability bound must lie in [0,1], got {self.p}")


class Formula:
    """Base class of all formula nodes."""

    __slots__ = ()


@dataclass(frozen=True)
class Atom(Formula):
    name: str


@dataclass(frozen=True)
class Not(Formula):
    child: Formula


@dataclass(frozen=True)
class And(Formula):
    left: Formula
    right: Formula


@dataclass(frozen=True)
class Or(Formula):
    left: Formula
    right: Formula


@dataclass(frozen=True)
class Until(Formula):
    window: WindowBound
    left: Formula
    right: Formula
    bound: ProbBound | None = None


@dataclass(frozen=True)
class Finally(Formula):
    hi: float
    child: Formula
    bound: ProbBound | None = None

    def __post_init__(self):
        if self.hi < 0:
            raise ValueError(f"F window must be >= 0, got {self.hi}")

    @property
    def window(self) -> WindowBound:
        return WindowBound(0, self.hi)


@dataclass(frozen=True)
class LeadsTo(Formula):
    window: WindowBound
    cause: Formula
    effect: Formula
    bound: ProbBound | None = None

    def __post_init__(self):
        if self.window.lo < 1:
            raise ValueError("a leads-to window must start at lo >= 1")


def atoms(f: Formula) -> set[str]:
    """Collect the atom names appearing in f."""
    if isinstance(f, Atom):
        return {f.name}
    if isinstance(f, Not):
        return atoms(f.child)
    if isinstance(f, (And, Or)):
        return atoms(f.left) | atoms(f.right)
    if isinstance(f, Until):
        return atoms(f.left) | atoms(f.right)
    if isinstance(f, Finally):
        return atoms(f.child)
    if isinstance(f, LeadsTo):
        return atoms(f.cause) | atoms(f.effect)
    raise TypeError(f"not a formula node: {f!r}")


def contains_leadsto(f: Formula) -> bool:
    if isinstance(f, LeadsTo):
        return True
    if isinstance(f, (And, Or, Until)):
        return contains_leadsto(f.left) or contains_leadsto(f.right)
    if isinstance(f, Not):
        return contains_leadsto(f.child)
    if isinstance(f, Finally):
        return contains_leadsto(f.child)
    return False


def contains_prob_bound(f: Formula) -> bool:
    if isinstance(f, (Until, Finally, LeadsTo)) and f.bound is not None:
        return True
    if isinstance(f, (And, Or)):
        return contains_prob_bound(f.left) or contains_prob_bound(f.right)
    if isinstance(f, Until):
        return contains_prob_bound(f.left) or contains_prob_bound(f.right)
    if isinstance(f, Not):
        return contains_prob_bound(f.child)
    if isinstance(f, Finally):
        return contains_prob_bound(f.child)
    if isinstance(f, LeadsTo):
        return contains_prob_bound(f.cause) or contains_prob_bound(f.effect)
    return False


# ---------------------------------------------------------------------------
# Lexer
# ---------------------------------------------------------------------------

_TOKEN_RE = re.compile(
    r"""
      (?P<ws>\s+)
    | (?P<ident>[A-Za-z_][A-Za-z0-9_.]*)
    | (?P<number>\d+\.\d*|\.\d+|\d+)
    | (?P<leadsto>~>)
    | (?P<cmp>>=|<=|>|<)
    | (?P<punct>[!&|()\[\]{},])
    """,
    re.VERBOSE,
)

_RESERVED = {"U", "F", "inf"}


@dataclass(frozen=True)
class _Token:
    kind: str  # ident | number | U | F | inf | ~> | cmp | single punct | eof
    text: str
    line: int
    column: int


def _tokenize(text: str) -> list[_Token]:
    tokens: list[_Token] = []
    line, col = 1, 1
    pos = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            raise FormulaSyntaxError("unexpected character", line, col, text[pos])
        lexeme = m.group(0)
        if m.lastgroup == "ws":
            pass
        elif m.lastgroup == "ident":
            kind = lexeme if lexeme in _RESERVED else "ident"
            tokens.append(_Token(kind, lexeme, line, col))
        elif m.lastgroup == "number":
            tokens.append(_Token("number", lexeme, line, col))
        elif m.lastgroup == "leadsto":
            tokens.append(_Token("~>", lexeme, line, col))
        elif m.lastgroup == "cmp":
            tokens.append(_Token("cmp", lexeme, line, col))
        else:
            tokens.append(_Token(lexeme, lexeme, line, col))
        for ch in lexeme:
            if ch == "\n":
                line += 1
                col = 1
            else:
                col += 1
        pos = m.end()
    tokens.append(_Token("eof", "", line, col))
    return tokens


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------


class _Parser:
    def __init__(self, text: str):
        self.tokens = _tokenize(text)
        self.i = 0

    def peek(self) -> _Token:
        return self.tokens[self.i]

    def next(self) -> _Token:
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect(self, kind: str) -> _Token:
        tok = self.peek()
        if tok.kind != kind:
            raise FormulaSyntaxError(
                f"expected {kind!r}", tok.line, tok.column, tok.text or "end of input"
            )
        return self.next()

    def fail(self, message: str) -> FormulaSyntaxError:
        tok = self.peek()
        return FormulaSyntaxError(message, tok.line, tok.column, tok.text or "end of input")

    # window helpers ------------------------------------------------------

    def _nat(self) -> int:
        tok = self.expect("number")
        if "." in tok.text:
            raise FormulaSyntaxError(
                "window bounds must be integers", tok.line, tok.column, tok.text
            )
        return int(tok.text)

    def _hi(self) -> float:
        tok = self.peek()
        if tok.kind == "inf":
            self.next()
            return INF
        return float(self._nat())

    def _window(self) -> WindowBound:
        opener = self.expect("[")
        lo = self._nat()
        self.expect(",")
        hi = self._hi()
        self.expect("]")
        if hi < lo:
            raise FormulaSyntaxError(
                f"window requires lo <= hi, got [{lo},{_fmt_hi(hi)}]",
                opener.line,
                opener.column,
            )
        return WindowBound(lo, hi)

    def _f_window(self) -> float:
        self.expect("[")
        hi = self._hi()
        self.expect("]")
        return hi

    def _opt_bound(self) -> ProbBound | None:
        if self.peek().kind != "{":
            return None
        self.next()
        cmp_tok = self.peek()
        if cmp_tok.kind != "cmp":
            raise self.fail("expected a comparator (>=, >, <= or <)")
        self.next()
        num = self.expect("number")
        p = float(num.text)
        if not 0.0 <= p <= 1.0:
            raise FormulaSyntaxError(
                "probability bound must lie in [0,1]", num.line, num.column, num.text
            )
        self.expect("}")
        return ProbBound(cmp_tok.text, p)

    # grammar levels ------------------------------------------------------

    def formula(self) -> Formula:
        left = self.until()
        if self.peek().kind == "~>":
            op = self.next()
            window = self._window()
            if window.lo < 1:
                raise FormulaSyntaxError(
                    "a leads-to window must start at lo >= 1", op.line, op.column
                )
            bound = self._opt_bound()
            right = self.formula()
            return LeadsTo(window, left, right, bound)
        return left

    def until(self) -> Formula:
        if self.peek().kind == "F":
            self.next()
            hi = self._f_window()
            bound = self._opt_bound()
            child = self.until()
            return Finally(hi, child, bound)
        left = self.or_()
        if self.peek().kind == "U":
            self.next()
            window = self._window()
            bound = self._opt_bound()
            right = self.until()
            return Until(window, left, right, bound)
        return left

    def or_(self) -> Formula:
        node = self.and_()
        while self.peek().kind == "|":
            self.next()
            node = Or(node, self.and_())
        return node

    def and_(self) -> Formula:
        node = self.not_()
        while self.peek().kind == "&":
            self.next()
            node = And(node, self.not_())
        return node

    def not_(self) -> Formula:
        if self.peek().kind == "!":
            self.next()
            return Not(self.not_())
        return self.primary()

    def primary(self) -> Formula:
        tok = self.peek()
        if tok.kind == "ident":
            self.next()
            return Atom(tok.text)
        if tok.kind == "(":
            self.next()
            inner = self.formula()
            self.expect(")")
            return inner
        raise self.fail("expected an atom or '('")


def parse(text: str) -> Formula:
    """Parse formula text into an AST; raises FormulaSyntaxError on bad input."""
    parser = _Parser(text)
    f = parser.formula()
    tok = parser.peek()
    if tok.kind != "eof":
        raise FormulaSyntaxError("trailing input after formula", tok.line, tok.column, tok.text)
    return f


# ---------------------------------------------------------------------------
# Printer
# ---------------------------------------------------------------------------

_PREC_LEADSTO = 0
_PREC_UNTIL = 1
_PREC_OR = 2
_PREC_AND = 3
_PREC_NOT = 4
_PREC_ATOM = 5


def _prec(f: Formula) -> int:
    if isinstance(f, Atom):
        return _PREC_ATOM
    if isinstance(f, Not):
        return _PREC_NOT
    if isinstance(f, And):
        return _PREC_AND
    if isinstance(f, Or):
        return _PREC_OR
    if isinstance(f, (Until, Finally)):
        return _PREC_UNTIL
    if isinstance(f, LeadsTo):
        return _PREC_LEADSTO
    raise TypeError(f"not a formula node: {f!r}")


def _fmt_hi(hi: float) -> str:
    return "inf" if math.isinf(hi) else str(int(hi))


def _fmt_bound(bound: ProbBound | None) -> str:
    if bound is None:
        return ""
    return "{%s%r}" % (bound.comparator, bound.p)


def _wrap(f: Formula, min_prec: int) -> str:
    s = print_formula(f)
    if _prec(f) < min_prec:
        return f"({s})"
    return s


def print_formula(f: Formula) -> str:
    """Canonical text for f with minimal parentheses; parse(print_formula(f)) == f."""
    if isinstance(f, Atom):
        return f.name
    if isinstance(f, Not):
        return "!" + _wrap(f.child, _PREC_NOT)
    if isinstance(f, And):
        # left-fold: a nested And on the right must keep its parentheses
        return f"{_wrap(f.left, _PREC_AND)} & {_wrap(f.right, _PREC_AND + 1)}"
    if isinstance(f, Or):
        return f"{_wrap(f.left, _PREC_OR)} | {_wrap(f.right, _PREC_OR + 1)}"
    if isinstance(f, Until):
        op = f"U[{f.window.lo},{_fmt_hi(f.window.hi)}]{_fmt_bound(f.bound)}"
        return f"{_wrap(f.left, _PREC_UNTIL + 1)} {op} {_wrap(f.right, _PREC_UNTIL)}"
    if isinstance(f, Finally):
        op = f"F[{_fmt_hi(f.hi)}]{_fmt_bound(f.bound)}"
        return f"{op} {_wrap(f.child, _PREC_UNTIL)}"
    if isinstance(f, LeadsTo):
        op = f"~>[{f.window.lo},{_fmt_hi(f.window.hi)}]{_fmt_bound(f.bound)}"
        return f"{_wrap(f.cause, _PREC_LEADSTO + 1)} {op} {_wrap(f.effect, _PREC_LEADSTO)}"
    raise TypeError(f"not a formula node: {f!r}")


def load_formulas(path) -> list[Formula]:
    """Read a hypothesis file: UTF-8, one formula per line, '#' comments."""
    out: list[Formula] = []
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            stripped = raw.split("#", 1)[0].strip()
            if not stripped:
                continue
            try:
                out.append(parse(stripped))
            except FormulaSyntaxError as exc:
                raise FormulaSyntaxError(
                    f"{path}:{lineno}: {exc.args[0]}", lineno, exc.column, exc.token
                ) from exc
    return out
