"""Tiny algebraic expression language for metric coefficients.

Grammar (standard precedence, left-associative binaries, power binds
tightest, then unary minus, then * /, then + -):

    expression := term { ("+" | "-") term }
    term       := factor { ("*" | "/") factor }
    factor     := "-" factor | power
    power      := primary [ "^" integer ]
    primary    := NUMBER | x<i> | y<i> | sqrt(expression)
                | dot(x,y) | norm2(x) | norm2(y) | "(" expression ")"

The language is deliberately small: every quantity in this package is
algebraic in the metric and its derivatives, so literals, rational
operations, integer powers and sqrt are enough.  Expressions evaluate
over any scalar type supporting those operations, in particular floats
and :class:`finslerlab.jets.Jet`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .jets import Jet, JetDomainError

__all__ = [
    "Expression",
    "Num",
    "Var",
    "Add",
    "Sub",
    "Mul",
    "Div",
    "Neg",
    "Pow",
    "Sqrt",
    "Dot",
    "Norm2",
    "ParseError",
    "EvalDomainError",
    "parse_expression",
    "to_text",
    "evaluate",
    "variables_used",
    "max_var_index",
]


class ParseError(ValueError):
    """Syntax or identifier error, with the byte offset of the problem."""

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (at offset {offset})")
        self.offset = offset


class EvalDomainError(ArithmeticError):
    """Non-smooth evaluation, reporting the offending sub-expression."""

    def __init__(self, reason: str, subexpression: str):
        super().__init__(f"{reason} in sub-expression '{subexpression}'")
        self.subexpression = subexpression


@dataclass(frozen=True)
class Num:
    value: float


@dataclass(frozen=True)
class Var:
    vec: str  # "x" or "y"
    index: int  # 1-based


@dataclass(frozen=True)
class Add:
    left: "Expression"
    right: "Expression"


@dataclass(frozen=True)
class Sub:
    left: "Expression"
    right: "Expression"


@dataclass(frozen=True)
class Mul:
    left: "Expression"
    right: "Expression"


@dataclass(frozen=True)
class Div:
    left: "Expression"
    right: "Expression"


@dataclass(frozen=True)
class Neg:
    operand: "Expression"


@dataclass(frozen=True)
class Pow:
    base: "Expression"
    exponent: int


@dataclass(frozen=True)
class Sqrt:
    operand: "Expression"


@dataclass(frozen=True)
class Dot:
    """Reducer dot(x,y) = sum_i x_i y_i."""


@dataclass(frozen=True)
class Norm2:
    """Reducer norm2(x) or norm2(y) = sum_i v_i^2."""

    vec: str


Expression = (
    Num | Var | Add | Sub | Mul | Div | Neg | Pow | Sqrt | Dot | Norm2
)


# -- tokenizer ----------------------------------------------------------------

_SYMBOLS = set("+-*/^(),")


def _tokenize(text: str):
    """Yield (kind, value, offset); kinds: num, ident, sym, end."""
    tokens = []
    i, n = 0, len(text)
    while i < n:
        c = text[i]
        if c.isspace():
            i += 1
            continue
        if c in _SYMBOLS:
            tokens.append(("sym", c, i))
            i += 1
            continue
        if c.isdigit() or (c == "." and i + 1 < n and text[i + 1].isdigit()):
            j = i
            while j < n and (text[j].isdigit() or text[j] == "."):
                j += 1
            if j < n and text[j] in "eE":
                k = j + 1
                if k < n and text[k] in "+-":
                    k += 1
                if k < n and text[k].isdigit():
                    j = k
                    while j < n and text[j].isdigit():
                        j += 1
            lexeme = text[i:j]
            try:
                value = float(lexeme)
            except ValueError:
                raise ParseError(f"malformed number '{lexeme}'", i) from None
            tokens.append(("num", value, i))
            i = j
            continue
        if c.isalpha() or c == "_":
            j = i
            while j < n and (text[j].isalnum() or text[j] == "_"):
                j += 1
            tokens.append(("ident", text[i:j], i))
            i = j
            continue
        raise ParseError(f"unexpected character '{c}'", i)
    tokens.append(("end", "", n))
    return tokens


# -- parser -------------------------------------------------------------------


class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.tokens = _tokenize(text)
        self.pos = 0

    def peek(self):
        return self.tokens[self.pos]

    def advance(self):
        tok = self.tokens[self.pos]
        self.pos += 1
        return tok

    def expect_sym(self, sym):
        kind, value, offset = self.peek()
        if kind != "sym" or value != sym:
            raise ParseError(f"expected '{sym}'", offset)
        return self.advance()

    def parse(self):
        expr = self.expression()
        kind, value, offset = self.peek()
        if kind != "end":
            raise ParseError(f"unexpected trailing input '{value}'", offset)
        return expr

    def expression(self):
        node = self.term()
        while True:
            kind, value, _ = self.peek()
            if kind == "sym" and value in "+-":
                self.advance()
                rhs = self.term()
                node = Add(node, rhs) if value == "+" else Sub(node, rhs)
            else:
                return node

    def term(self):
        node = self.factor()
        while True:
            kind, value, _ = self.peek()
            if kind == "sym" and value in "*/":
                self.advance()
                rhs = self.factor()
                node = Mul(node, rhs) if value == "*" else Div(node, rhs)
            else:
                return node

    def factor(self):
        kind, value, _ = self.peek()
        if kind == "sym" and value == "-":
            self.advance()
            return Neg(self.factor())
        return self.power()

    def power(self):
        base = self.primary()
        kind, value, _ = self.peek()
        if kind == "sym" and value == "^":
            self.advance()
            sign = 1
            kind, value, offset = self.peek()
            if kind == "sym" and value == "-":
                self.advance()
                sign = -1
                kind, value, offset = self.peek()
            if kind != "num" or not float(value).is_integer():
                raise ParseError("exponent must be an integer literal", offset)
            self.advance()
            return Pow(base, sign * int(value))
        return base

    def primary(self):
        kind, value, offset = self.advance()
        if kind == "num":
            return Num(float(value))
        if kind == "sym" and value == "(":
            inner = self.expression()
            self.expect_sym(")")
            return inner
        if kind == "ident":
            if value == "sqrt":
                self.expect_sym("(")
                inner = self.expression()
                self.expect_sym(")")
                return Sqrt(inner)
            if value == "dot":
                self.expect_sym("(")
                args = self._vector_args()
                if sorted(args) != ["x", "y"]:
                    raise ParseError("dot expects arguments (x,y)", offset)
                return Dot()
            if value == "norm2":
                self.expect_sym("(")
                args = self._vector_args()
                if len(args) != 1:
                    raise ParseError("norm2 expects a single argument x or y", offset)
                return Norm2(args[0])
            var = _parse_var_name(value)
            if var is None:
                raise ParseError(f"unknown identifier '{value}'", offset)
            return Var(*var)
        raise ParseError(f"expected a value, found '{value or 'end of input'}'", offset)

    def _vector_args(self):
        args = []
        while True:
            kind, value, offset = self.advance()
            if kind != "ident" or value not in ("x", "y"):
                raise ParseError("expected vector symbol x or y", offset)
            args.append(value)
            kind, value, offset = self.peek()
            if kind == "sym" and value == ",":
                self.advance()
                continue
            self.expect_sym(")")
            return args


def _parse_var_name(name):
    if len(name) >= 2 and name[0] in "xy" and name[1:].isdigit():
        index = int(name[1:])
        if index >= 1:
            return name[0], index
    return None


def parse_expression(text: str) -> Expression:
    """Parse expression text; raises ParseError with a byte offset on failure."""
    return _Parser(text).parse()


# -- printer ------------------------------------------------------------------

_PREC_ADD, _PREC_MUL, _PREC_NEG, _PREC_POW, _PREC_ATOM = 1, 2, 3, 4, 5


def _precedence(e) -> int:
    if isinstance(e, (Add, Sub)):
        return _PREC_ADD
    if isinstance(e, (Mul, Div)):
        return _PREC_MUL
    if isinstance(e, Neg):
        return _PREC_NEG
    if isinstance(e, Pow):
        return _PREC_POW
    return _PREC_ATOM


def _fmt_number(v: float) -> str:
    if v == int(v) and abs(v) < 1e16:
        return str(int(v))
    return repr(v)


def to_text(e: Expression) -> str:
    """Canonical text form; parse_expression(to_text(e)) == e structurally."""

    def wrap(child, minimum):
        s = to_text(child)
        return f"({s})" if _precedence(child) < minimum else s

    if isinstance(e, Num):
        return _fmt_number(e.value)
    if isinstance(e, Var):
        return f"{e.vec}{e.index}"
    if isinstance(e, Add):
        return f"{wrap(e.left, _PREC_ADD)} + {wrap(e.right, _PREC_ADD + 1)}"
    if isinstance(e, Sub):
        return f"{wrap(e.left, _PREC_ADD)} - {wrap(e.right, _PREC_ADD + 1)}"
    if isinstance(e, Mul):
        return f"{wrap(e.left, _PREC_MUL)}*{wrap(e.right, _PREC_MUL + 1)}"
    if isinstance(e, Div):
        return f"{wrap(e.left, _PREC_MUL)}/{wrap(e.right, _PREC_MUL + 1)}"
    if isinstance(e, Neg):
        return f"-{wrap(e.operand, _PREC_NEG)}"
    if isinstance(e, Pow):
        return f"{wrap(e.base, _PREC_ATOM)}^{e.exponent}"
    if isinstance(e, Sqrt):
        return f"sqrt({to_text(e.operand)})"
    if isinstance(e, Dot):
        return "dot(x,y)"
    if isinstance(e, Norm2):
        return f"norm2({e.vec})"
    raise TypeError(f"not an expression node: {e!r}")


# -- evaluation ---------------------------------------------------------------


def _sqrt_scalar(v):
    if isinstance(v, Jet):
        return v.sqrt()
    if v <= 0.0:
        raise JetDomainError("sqrt of a non-positive value")
    return math.sqrt(v)


def evaluate(e: Expression, xs, ys):
    """Evaluate over floats or jets; xs, ys are the coordinate sequences."""
    if isinstance(e, Num):
        return e.value
    if isinstance(e, Var):
        seq = xs if e.vec == "x" else ys
        if e.index > len(seq):
            raise EvalDomainError(
                f"variable index exceeds dimension {len(seq)}", to_text(e)
            )
        return seq[e.index - 1]
    if isinstance(e, Add):
        return evaluate(e.left, xs, ys) + evaluate(e.right, xs, ys)
    if isinstance(e, Sub):
        return evaluate(e.left, xs, ys) - evaluate(e.right, xs, ys)
    if isinstance(e, Mul):
        return evaluate(e.left, xs, ys) * evaluate(e.right, xs, ys)
    if isinstance(e, Div):
        num = evaluate(e.left, xs, ys)
        den = evaluate(e.right, xs, ys)
        try:
            return num / den
        except (JetDomainError, ZeroDivisionError) as err:
            raise EvalDomainError(str(err), to_text(e)) from err
    if isinstance(e, Neg):
        return -evaluate(e.operand, xs, ys)
    if isinstance(e, Pow):
        base = evaluate(e.base, xs, ys)
        try:
            return base**e.exponent
        except (JetDomainError, ZeroDivisionError) as err:
            raise EvalDomainError(str(err), to_text(e)) from err
    if isinstance(e, Sqrt):
        arg = evaluate(e.operand, xs, ys)
        try:
            return _sqrt_scalar(arg)
        except JetDomainError as err:
            raise EvalDomainError(str(err), to_text(e)) from err
    if isinstance(e, Dot):
        return sum(a * b for a, b in zip(xs, ys))
    if isinstance(e, Norm2):
        seq = xs if e.vec == "x" else ys
        return sum(v * v for v in seq)
    raise TypeError(f"not an expression node: {e!r}")


def variables_used(e: Expression) -> set[str]:
    """Vector symbols ('x', 'y') the expression depends on."""
    if isinstance(e, Var):
        return {e.vec}
    if isinstance(e, (Add, Sub, Mul, Div)):
        return variables_used(e.left) | variables_used(e.right)
    if isinstance(e, Neg):
        return variables_used(e.operand)
    if isinstance(e, Pow):
        return variables_used(e.base)
    if isinstance(e, Sqrt):
        return variables_used(e.operand)
    if isinstance(e, Dot):
        return {"x", "y"}
    if isinstance(e, Norm2):
        return {e.vec}
    return set()


def max_var_index(e: Expression) -> int:
    """Largest coordinate index referenced (0 if none)."""
    if isinstance(e, Var):
        return e.index
    if isinstance(e, (Add, Sub, Mul, Div)):
        return max(max_var_index(e.left), max_var_index(e.right))
    if isinstance(e, Neg):
        return max_var_index(e.operand)
    if isinstance(e, Pow):
        return max_var_index(e.base)
    if isinstance(e, Sqrt):
        return max_var_index(e.operand)
    return 0
