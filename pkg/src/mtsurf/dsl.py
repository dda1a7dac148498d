"""Parser and printer for the surface definition language.

A surface file is a list of constant bindings followed by a 4-tuple of
expressions in u and v and a parameter rectangle:

    let a = 2;
    (a*cos(u), a*sin(u), v, 0) on [0,6.28]x[-1,1]

Supported operators are + - * / ^ and unary minus; functions are sin, cos,
sinh, cosh, exp, log, sqrt.  `let` binds scalar constants only (no u or v),
evaluated at parse time.  Parsing validates every identifier and the domain,
and reports failures with 1-based line/column positions.
"""

from __future__ import annotations

import hashlib
import math
import re
from dataclasses import dataclass
from typing import Union

from .errors import BadDomainError, ParseError, UnboundIdentifierError

FUNCTIONS = ("sin", "cos", "sinh", "cosh", "exp", "log", "sqrt")

_KEYWORDS = ("let", "on")


# -- AST ---------------------------------------------------------------------


@dataclass(frozen=True)
class Num:
    value: float


@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class Neg:
    arg: "Expr"


@dataclass(frozen=True)
class Bin:
    op: str
    lhs: "Expr"
    rhs: "Expr"


@dataclass(frozen=True)
class Call:
    fn: str
    arg: "Expr"


Expr = Union[Num, Var, Neg, Bin, Call]


@dataclass(frozen=True)
class SurfaceDef:
    """Validated surface parametrization: four component ASTs, a closed
    parameter rectangle with positive area, and the bound constants."""

    components: tuple
    domain: tuple  # ((u0, u1), (v0, v1))
    params: tuple  # ((name, value), ...) in binding order

    @property
    def param_map(self) -> dict:
        return dict(self.params)

    @property
    def u_span(self) -> float:
        return self.domain[0][1] - self.domain[0][0]

    @property
    def v_span(self) -> float:
        return self.domain[1][1] - self.domain[1][0]

    def contains(self, u, v, slack: float = 0.0) -> bool:
        (u0, u1), (v0, v1) = self.domain
        du = slack * self.u_span
        dv = slack * self.v_span
        import numpy as np

        u = np.asarray(u)
        v = np.asarray(v)
        return bool(
            np.all((u >= u0 - du) & (u <= u1 + du) & (v >= v0 - dv) & (v <= v1 + dv))
        )

    def text(self) -> str:
        return surface_text(self)

    def content_hash(self) -> str:
        return hashlib.sha256(self.text().encode()).hexdigest()


# -- tokenizer ----------------------------------------------------------------


_TOKEN_RE = re.compile(
    r"""
    (?P<NUMBER>\d+(\.\d*)?([eE][+-]?\d+)?)
  | (?P<IDENT>[A-Za-z_][A-Za-z_0-9]*)
  | (?P<OP>[-+*/^()\[\],;=])
  | (?P<WS>[ \t\r]+)
  | (?P<NL>\n)
    """,
    re.VERBOSE,
)


@dataclass(frozen=True)
class _Token:
    kind: str
    text: str
    line: int
    col: int


def _tokenize(source: str):
    tokens = []
    line, col, pos = 1, 1, 0
    while pos < len(source):
        m = _TOKEN_RE.match(source, pos)
        if m is None:
            raise ParseError(f"unexpected character {source[pos]!r}", line, col)
        kind = m.lastgroup
        text = m.group()
        if kind == "NL":
            line += 1
            col = 1
        elif kind == "WS":
            col += len(text)
        else:
            tokens.append(_Token(kind, text, line, col))
            col += len(text)
        pos = m.end()
    tokens.append(_Token("EOF", "", line, col))
    return tokens


# -- parser -------------------------------------------------------------------


class _Parser:
    def __init__(self, tokens, allowed_vars):
        self.tokens = tokens
        self.pos = 0
        self.allowed_vars = allowed_vars

    def peek(self) -> _Token:
        return self.tokens[self.pos]

    def advance(self) -> _Token:
        tok = self.tokens[self.pos]
        self.pos += 1
        return tok

    def expect(self, text: str) -> _Token:
        tok = self.peek()
        if tok.text != text:
            shown = tok.text or "end of input"
            raise ParseError(f"expected {text!r}, found {shown!r}", tok.line, tok.col)
        return self.advance()

    def expr(self) -> Expr:
        node = self.term()
        while self.peek().text in ("+", "-"):
            op = self.advance().text
            node = Bin(op, node, self.term())
        return node

    def term(self) -> Expr:
        node = self.unary()
        while self.peek().text in ("*", "/"):
            op = self.advance().text
            node = Bin(op, node, self.unary())
        return node

    def unary(self) -> Expr:
        tok = self.peek()
        if tok.text == "-":
            self.advance()
            return Neg(self.unary())
        if tok.text == "+":
            self.advance()
            return self.unary()
        return self.power()

    def power(self) -> Expr:
        base = self.primary()
        if self.peek().text == "^":
            self.advance()
            return Bin("^", base, self.unary())
        return base

    def primary(self) -> Expr:
        tok = self.advance()
        if tok.kind == "NUMBER":
            return Num(float(tok.text))
        if tok.kind == "IDENT":
            if tok.text in _KEYWORDS:
                raise ParseError(f"keyword {tok.text!r} not allowed here", tok.line, tok.col)
            if self.peek().text == "(":
                if tok.text not in FUNCTIONS:
                    raise ParseError(f"unknown function {tok.text!r}", tok.line, tok.col)
                self.advance()
                arg = self.expr()
                self.expect(")")
                return Call(tok.text, arg)
            if tok.text not in self.allowed_vars:
                raise UnboundIdentifierError(
                    f"unbound identifier {tok.text!r}", tok.line, tok.col
                )
            return Var(tok.text)
        if tok.text == "(":
            node = self.expr()
            self.expect(")")
            return node
        shown = tok.text or "end of input"
        raise ParseError(f"unexpected {shown!r}", tok.line, tok.col)


def eval_const(node: Expr, params: dict) -> float:
    """Evaluate a parameter-only expression to a float."""
    if isinstance(node, Num):
        return node.value
    if isinstance(node, Var):
        return params[node.name]
    if isinstance(node, Neg):
        return -eval_const(node.arg, params)
    if isinstance(node, Call):
        fn = getattr(math, node.fn)
        return fn(eval_const(node.arg, params))
    if node.op == "+":
        return eval_const(node.lhs, params) + eval_const(node.rhs, params)
    if node.op == "-":
        return eval_const(node.lhs, params) - eval_const(node.rhs, params)
    if node.op == "*":
        return eval_const(node.lhs, params) * eval_const(node.rhs, params)
    if node.op == "/":
        return eval_const(node.lhs, params) / eval_const(node.rhs, params)
    return eval_const(node.lhs, params) ** eval_const(node.rhs, params)


def try_eval_const(node: Expr, params: dict):
    """Constant-fold if possible, else None (used for integer exponents)."""
    try:
        val = eval_const(node, params)
    except (KeyError, ValueError, OverflowError, ZeroDivisionError):
        return None
    return val if math.isfinite(val) else None


def free_vars(node: Expr, acc=None):
    if acc is None:
        acc = set()
    if isinstance(node, Var):
        acc.add(node.name)
    elif isinstance(node, Neg):
        free_vars(node.arg, acc)
    elif isinstance(node, Call):
        free_vars(node.arg, acc)
    elif isinstance(node, Bin):
        free_vars(node.lhs, acc)
        free_vars(node.rhs, acc)
    return acc


def parse_surface(source: str) -> SurfaceDef:
    """Parse and validate surface source text."""
    tokens = _tokenize(source)
    parser = _Parser(tokens, allowed_vars=set())
    params: dict = {}

    while parser.peek().text == "let":
        kw = parser.advance()
        name_tok = parser.advance()
        if name_tok.kind != "IDENT" or name_tok.text in _KEYWORDS:
            raise ParseError("expected parameter name after 'let'", name_tok.line, name_tok.col)
        name = name_tok.text
        if name in ("u", "v") or name in FUNCTIONS or name in params:
            raise ParseError(f"cannot bind {name!r}", name_tok.line, name_tok.col)
        parser.expect("=")
        parser.allowed_vars = set(params)
        rhs = parser.expr()
        parser.expect(";")
        try:
            value = eval_const(rhs, params)
        except (ValueError, OverflowError, ZeroDivisionError) as exc:
            raise ParseError(f"cannot evaluate binding {name!r}: {exc}", kw.line, kw.col)
        if not math.isfinite(value):
            raise ParseError(f"binding {name!r} is not finite", kw.line, kw.col)
        params[name] = value

    parser.allowed_vars = {"u", "v"} | set(params)
    parser.expect("(")
    components = [parser.expr()]
    for _ in range(3):
        parser.expect(",")
        components.append(parser.expr())
    parser.expect(")")

    on_tok = parser.peek()
    if on_tok.text != "on":
        raise ParseError("expected 'on' after component tuple", on_tok.line, on_tok.col)
    parser.advance()

    parser.allowed_vars = set(params)

    def interval():
        open_tok = parser.expect("[")
        lo = parser.expr()
        parser.expect(",")
        hi = parser.expr()
        parser.expect("]")
        try:
            lo_v, hi_v = eval_const(lo, params), eval_const(hi, params)
        except (ValueError, OverflowError, ZeroDivisionError) as exc:
            raise BadDomainError(f"cannot evaluate interval: {exc}", open_tok.line, open_tok.col)
        if not (math.isfinite(lo_v) and math.isfinite(hi_v)):
            raise BadDomainError("interval endpoint is not finite", open_tok.line, open_tok.col)
        if not lo_v < hi_v:
            raise BadDomainError("empty or inverted interval", open_tok.line, open_tok.col)
        return (lo_v, hi_v)

    u_dom = interval()
    x_tok = parser.peek()
    if not (x_tok.kind == "IDENT" and x_tok.text == "x"):
        raise ParseError("expected 'x' between intervals", x_tok.line, x_tok.col)
    parser.advance()
    v_dom = interval()

    eof = parser.peek()
    if eof.kind != "EOF":
        raise ParseError(f"unexpected trailing input {eof.text!r}", eof.line, eof.col)

    return SurfaceDef(
        components=tuple(components),
        domain=(u_dom, v_dom),
        params=tuple(params.items()),
    )


# -- printer -------------------------------------------------------------------


def _prec(node: Expr) -> int:
    if isinstance(node, (Num, Var, Call)):
        return 9
    if isinstance(node, Neg):
        return 2
    return {"+": 1, "-": 1, "*": 2, "/": 2, "^": 3}[node.op]


def expr_text(node: Expr) -> str:
    """Render an expression; parenthesization is strict enough that
    reparsing reproduces the identical AST."""
    if isinstance(node, Num):
        return repr(node.value)
    if isinstance(node, Var):
        return node.name
    if isinstance(node, Call):
        return f"{node.fn}({expr_text(node.arg)})"
    if isinstance(node, Neg):
        inner = expr_text(node.arg)
        if _prec(node.arg) <= 2:
            inner = f"({inner})"
        return f"-{inner}"
    p = _prec(node)
    lhs = expr_text(node.lhs)
    rhs = expr_text(node.rhs)
    if node.op == "^":
        if _prec(node.lhs) <= 3:
            lhs = f"({lhs})"
        if isinstance(node.rhs, Bin) and node.rhs.op != "^":
            rhs = f"({rhs})"
        return f"{lhs}^{rhs}"
    if _prec(node.lhs) < p:
        lhs = f"({lhs})"
    if _prec(node.rhs) <= p:
        rhs = f"({rhs})"
    if node.op in ("+", "-"):
        return f"{lhs} {node.op} {rhs}"
    return f"{lhs}{node.op}{rhs}"


def surface_text(surface: SurfaceDef) -> str:
    """Canonical printable form; parsing it reproduces the SurfaceDef."""
    lines = [f"let {name} = {repr(value)};" for name, value in surface.params]
    comps = ", ".join(expr_text(c) for c in surface.components)
    (u0, u1), (v0, v1) = surface.domain
    lines.append(f"({comps}) on [{u0!r},{u1!r}]x[{v0!r},{v1!r}]")
    return "\n".join(lines) + "\n"
