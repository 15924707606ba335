"""Lexer and recursive-descent parser for preference functions.

The concrete syntax is a closed call-expression language::

    expr  := call | NUMBER | '-' NUMBER | STRING | list | NAME
    call  := NAME '(' [arg (',' arg)* [',']] ')'
    arg   := [NAME '='] expr
    list  := '[' [expr (',' expr)* [',']] ']'

Names are the building blocks (``getPose``, ``threshold``, ...), the state
references ``state``/``next_state``/``action`` and the booleans
``true``/``false``. Every call is checked against its signature while
parsing, so a returned tree is structurally well typed with a
probability-valued root.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Callable, NamedTuple

from prefplan.dsl import nodes as n


class DslError(Exception):
    """Base class for preference-language errors, carrying a source location."""

    category = "error"

    def __init__(self, message: str, line: int = 0, col: int = 0):
        self.message = message
        self.line = line
        self.col = col
        super().__init__(f"{line}:{col}: {self.category}: {message}")


class DslSyntaxError(DslError):
    category = "syntax error"


class DslLexError(DslSyntaxError):
    category = "lexical error"


class DslNameError(DslError):
    category = "unknown identifier"


class DslArityError(DslError):
    category = "arity error"


class DslTypeError(DslError):
    category = "type error"


class Token(NamedTuple):
    type: str
    text: str
    line: int
    col: int


_TOKEN_RE = re.compile(
    r"""
    (?P<ws>[ \t\r]+)
  | (?P<nl>\n)
  | (?P<comment>\#[^\n]*)
  | (?P<number>(?:\d+\.\d*|\.\d+|\d+)(?:[eE][+-]?\d+)?)
  | (?P<string>'[^'\\\n]*'|"[^"\\\n]*")
  | (?P<name>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<op>[()\[\],=\-])
    """,
    re.VERBOSE,
)


def tokenize(source: str) -> list[Token]:
    tokens = []
    pos, line, line_start = 0, 1, 0
    while pos < len(source):
        m = _TOKEN_RE.match(source, pos)
        col = pos - line_start + 1
        if m is None:
            raise DslLexError(f"unexpected character {source[pos]!r}", line, col)
        kind = m.lastgroup
        text = m.group()
        if kind == "nl":
            line += 1
            line_start = m.end()
        elif kind == "string":
            tokens.append(Token("string", text[1:-1], line, col))
        elif kind not in ("ws", "comment"):
            tokens.append(Token(kind, text, line, col))
        pos = m.end()
    tokens.append(Token("eof", "", line, pos - line_start + 1))
    return tokens


# -- signatures ---------------------------------------------------------------


@dataclass(frozen=True)
class Param:
    name: str
    accepts: tuple[str, ...]
    default: Callable[[], n.Node] | None = None


@dataclass(frozen=True)
class Signature:
    name: str
    node: type
    params: tuple[Param, ...]

    @property
    def required(self) -> int:
        return sum(1 for p in self.params if p.default is None)


_POSE = (n.POSE,)
_METRIC = (n.METRIC, n.NUM)
_PROB = (n.PROB, n.NUM)
_REAL = (n.NUM,)
_DIRECTION = Param("direction", (n.BOOL,), lambda: n.Bool(True))

SIGNATURES: dict[str, Signature] = {
    s.name: s
    for s in (
        Signature(
            "getPose",
            n.GetPose,
            (
                Param("state", (n.STATE,)),
                Param("obj", (n.STR,)),
                Param("frame", (n.STR,), lambda: n.Str("world")),
            ),
        ),
        Signature(
            "positionNorm",
            n.PositionNorm,
            (
                Param("pose_1", _POSE),
                Param("pose_2", _POSE),
                Param("norm", (n.STR,), lambda: n.Str("L2")),
                Param("axis", (n.AXES,), lambda: n.AxisNames(("x", "y", "z"))),
            ),
        ),
        Signature(
            "greatCircleDistance",
            n.GreatCircleDistance,
            (Param("pose_1", _POSE), Param("pose_2", _POSE)),
        ),
        Signature(
            "pointingInDirectionMetric",
            n.PointingInDirection,
            (
                Param("pose_1", _POSE),
                Param("pose_2", _POSE),
                Param("main_axis", (n.VEC3,), lambda: n.Vector((1.0, 0.0, 0.0))),
            ),
        ),
        Signature(
            "rotationAngle",
            n.RotationAngle,
            (Param("pose_1", _POSE), Param("pose_2", _POSE), Param("axis", (n.VEC3,))),
        ),
        Signature(
            "threshold",
            n.Threshold,
            (Param("metric", _METRIC), Param("t", _REAL), _DIRECTION),
        ),
        Signature(
            "linear",
            n.Linear,
            (Param("metric", _METRIC), Param("t_1", _REAL), Param("t_2", _REAL), _DIRECTION),
        ),
        Signature(
            "normal",
            n.Normal,
            (
                Param("metric", _METRIC),
                Param("mean", _REAL),
                Param("std_dev", _REAL),
                _DIRECTION,
            ),
        ),
        Signature("AND", n.And, (Param("prob_1", _PROB), Param("prob_2", _PROB))),
        Signature("OR", n.Or, (Param("prob_1", _PROB), Param("prob_2", _PROB))),
    )
}

SIGNATURE_BY_NODE = {s.node: s for s in SIGNATURES.values()}

_NAMES = {
    "state": n.StateRef,
    "next_state": n.PredictNext,
    "action": n.ActionRef,
}
_BOOLS = {"true": True, "false": False, "True": True, "False": False}


class _Parser:
    def __init__(self, source: str):
        self.tokens = tokenize(source)
        self.i = 0

    @property
    def tok(self) -> Token:
        return self.tokens[self.i]

    def advance(self) -> Token:
        t = self.tokens[self.i]
        self.i += 1
        return t

    def expect(self, text: str) -> Token:
        t = self.tok
        if t.text != text or t.type not in ("op",):
            found = "end of input" if t.type == "eof" else repr(t.text)
            raise DslSyntaxError(f"expected {text!r}, found {found}", t.line, t.col)
        return self.advance()

    def parse_root(self) -> n.Node:
        node = self.expr()
        if self.tok.type != "eof":
            t = self.tok
            raise DslSyntaxError(f"unexpected {t.text!r} after expression", t.line, t.col)
        if node.kind not in (n.PROB, n.NUM):
            raise DslTypeError(
                f"root must be Prob, got {node.kind}", node.loc[0], node.loc[1]
            )
        return node

    def expr(self) -> n.Node:
        t = self.tok
        loc = (t.line, t.col)
        if t.type == "number":
            self.advance()
            return n.Num(float(t.text), loc=loc)
        if t.type == "op" and t.text == "-":
            self.advance()
            num = self.tok
            if num.type != "number":
                raise DslSyntaxError("expected a number after '-'", num.line, num.col)
            self.advance()
            return n.Num(-float(num.text), loc=loc)
        if t.type == "string":
            self.advance()
            return n.Str(t.text, loc=loc)
        if t.type == "op" and t.text == "[":
            return self.list_literal()
        if t.type == "name":
            self.advance()
            if self.tok.type == "op" and self.tok.text == "(":
                return self.call(t)
            if t.text in _BOOLS:
                return n.Bool(_BOOLS[t.text], loc=loc)
            if t.text in _NAMES:
                return _NAMES[t.text](loc=loc)
            raise DslNameError(t.text, t.line, t.col)
        found = "end of input" if t.type == "eof" else repr(t.text)
        raise DslSyntaxError(f"expected an expression, found {found}", t.line, t.col)

    def list_literal(self) -> n.Node:
        start = self.expect("[")
        loc = (start.line, start.col)
        items = []
        while not (self.tok.type == "op" and self.tok.text == "]"):
            items.append(self.expr())
            if self.tok.type == "op" and self.tok.text == ",":
                self.advance()
            elif not (self.tok.type == "op" and self.tok.text == "]"):
                t = self.tok
                raise DslSyntaxError(f"expected ',' or ']', found {t.text!r}", t.line, t.col)
        self.expect("]")
        if items and all(isinstance(x, n.Num) for x in items):
            if len(items) != 3:
                raise DslTypeError(
                    f"axis vectors need 3 components, got {len(items)}", *loc
                )
            return n.Vector(tuple(x.value for x in items), loc=loc)
        if all(isinstance(x, n.Str) for x in items):
            return n.AxisNames(tuple(x.value for x in items), loc=loc)
        raise DslTypeError("lists hold either 3 numbers or axis names", *loc)

    def call(self, name_tok: Token) -> n.Node:
        loc = (name_tok.line, name_tok.col)
        sig = SIGNATURES.get(name_tok.text)
        if sig is None:
            raise DslNameError(name_tok.text, *loc)
        self.expect("(")
        positional: list[n.Node] = []
        keyword: dict[str, n.Node] = {}
        while not (self.tok.type == "op" and self.tok.text == ")"):
            if (
                self.tok.type == "name"
                and self.tokens[self.i + 1].type == "op"
                and self.tokens[self.i + 1].text == "="
            ):
                key = self.advance()
                self.advance()
                if key.text in keyword:
                    raise DslArityError(
                        f"{sig.name}() got keyword {key.text!r} twice", key.line, key.col
                    )
                keyword[key.text] = self.expr()
            else:
                if keyword:
                    t = self.tok
                    raise DslSyntaxError(
                        "positional argument follows keyword argument", t.line, t.col
                    )
                positional.append(self.expr())
            if self.tok.type == "op" and self.tok.text == ",":
                self.advance()
            elif not (self.tok.type == "op" and self.tok.text == ")"):
                t = self.tok
                raise DslSyntaxError(f"expected ',' or ')', found {t.text!r}", t.line, t.col)
        self.expect(")")
        return _bind(sig, positional, keyword, loc)


def _bind(sig: Signature, positional, keyword, loc) -> n.Node:
    if len(positional) > len(sig.params):
        raise DslArityError(
            f"{sig.name}() takes at most {len(sig.params)} arguments, "
            f"got {len(positional)}",
            *loc,
        )
    names = [p.name for p in sig.params]
    for key in keyword:
        if key not in names:
            raise DslArityError(f"{sig.name}() got unexpected keyword {key!r}", *loc)
    args = {}
    for p, value in zip(sig.params, positional):
        args[p.name] = value
    for key, value in keyword.items():
        if key in args:
            raise DslArityError(f"{sig.name}() got multiple values for {key!r}", *loc)
        args[key] = value
    for p in sig.params:
        if p.name not in args:
            if p.default is None:
                raise DslArityError(
                    f"{sig.name}() missing required argument {p.name!r} "
                    f"(takes {sig.required} required)",
                    *loc,
                )
            args[p.name] = p.default()
        arg = args[p.name]
        if arg.kind not in p.accepts:
            raise DslTypeError(
                f"{sig.name}() argument {p.name!r} expects "
                f"{'/'.join(k for k in p.accepts if k != n.NUM) or n.NUM}, got {arg.kind}",
                *(arg.loc if arg.loc != (0, 0) else loc),
            )
    return sig.node(**args, loc=loc)


def parse(source: str) -> n.Node:
    """Parse one preference function into a probability-typed AST."""
    return _Parser(source).parse_root()
