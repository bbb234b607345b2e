"""A small arithmetic language for writing profile functions.

Grammar (``^`` is right-associative, unary minus binds looser than ``^``)::

    expr    := term (('+' | '-') term)*
    term    := factor (('*' | '/') factor)*
    factor  := '-' factor | primary ('^' factor)?
    primary := number | variable | func '(' expr (',' expr)* ')' | '(' expr ')'

Radial profiles use the single variable ``s``; general profiles use ``x`` and
``y``. Evaluation follows IEEE double arithmetic except that invalid
operations (negative radicand, nonpositive logarithm, division by zero,
overflow) raise :class:`EvalError` instead of producing NaN or inf.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping, Union

__all__ = [
    "DSLError",
    "LexError",
    "ParseError",
    "EvalError",
    "Token",
    "Num",
    "Var",
    "Neg",
    "BinOp",
    "Call",
    "Expr",
    "DualValue",
    "VARIABLES",
    "FUNCTIONS",
    "tokenize",
    "parse",
    "parse_expr",
    "unparse",
    "evaluate",
    "eval_dual",
    "variables_of",
    "Program",
    "compile_expr",
]

VARIABLES = {"radial": ("s",), "general": ("x", "y")}
FUNCTIONS = {
    "sqrt": 1,
    "abs": 1,
    "exp": 1,
    "ln": 1,
    "sin": 1,
    "cos": 1,
    "min": 2,
    "max": 2,
    "pow": 2,
}


class DSLError(ValueError):
    pass


class LexError(DSLError):
    def __init__(self, message: str, position: int):
        super().__init__(f"{message} at position {position}")
        self.position = position


class ParseError(DSLError):
    pass


class EvalError(DSLError):
    def __init__(self, message: str, expr: "Expr | None" = None):
        where = f" in {unparse(expr)}" if expr is not None else ""
        super().__init__(message + where)
        self.expr = expr


# -- tokens ------------------------------------------------------------------


@dataclass(frozen=True)
class Token:
    kind: str  # number, ident, op, lparen, rparen, comma, func
    text: str
    position: int


def _scan_number(src: str, i: int) -> int:
    n = len(src)
    j = i
    while j < n and src[j].isdigit():
        j += 1
    if j < n and src[j] == ".":
        j += 1
        while j < n and src[j].isdigit():
            j += 1
    if j == i or src[i:j] == ".":
        raise LexError("malformed number", i)
    if j < n and src[j] in "eE":
        k = j + 1
        if k < n and src[k] in "+-":
            k += 1
        if k < n and src[k].isdigit():
            while k < n and src[k].isdigit():
                k += 1
            j = k
    return j


def tokenize(src: str) -> list[Token]:
    if not src.isascii():
        raise LexError("non-ASCII input", next(i for i, c in enumerate(src) if not c.isascii()))
    tokens: list[Token] = []
    i, n = 0, len(src)
    while i < n:
        c = src[i]
        if c.isspace():
            i += 1
        elif c.isdigit() or (c == "." and i + 1 < n and src[i + 1].isdigit()):
            j = _scan_number(src, i)
            tokens.append(Token("number", src[i:j], i))
            i = j
        elif c.isalpha() or c == "_":
            j = i
            while j < n and (src[j].isalnum() or src[j] == "_"):
                j += 1
            word = src[i:j]
            tokens.append(Token("func" if word in FUNCTIONS else "ident", word, i))
            i = j
        elif c in "+-*/^":
            tokens.append(Token("op", c, i))
            i += 1
        elif c == "(":
            tokens.append(Token("lparen", c, i))
            i += 1
        elif c == ")":
            tokens.append(Token("rparen", c, i))
            i += 1
        elif c == ",":
            tokens.append(Token("comma", c, i))
            i += 1
        else:
            raise LexError(f"unexpected character {c!r}", i)
    return tokens


# -- syntax tree -------------------------------------------------------------


@dataclass(frozen=True)
class Num:
    value: float


@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class Neg:
    operand: "Expr"


@dataclass(frozen=True)
class BinOp:
    op: str
    left: "Expr"
    right: "Expr"


@dataclass(frozen=True)
class Call:
    func: str
    args: tuple["Expr", ...]


Expr = Union[Num, Var, Neg, BinOp, Call]


class _Parser:
    def __init__(self, tokens: list[Token], kind: str):
        if kind not in VARIABLES:
            raise ParseError(f"unknown profile kind {kind!r}")
        self.tokens = tokens
        self.i = 0
        self.allowed = VARIABLES[kind]

    def peek(self) -> Token | None:
        return self.tokens[self.i] if self.i < len(self.tokens) else None

    def take(self) -> Token:
        tok = self.peek()
        if tok is None:
            raise ParseError("unexpected end of input")
        self.i += 1
        return tok

    def expect(self, kind: str) -> Token:
        tok = self.take()
        if tok.kind != kind:
            raise ParseError(f"expected {kind}, got {tok.text!r} at position {tok.position}")
        return tok

    def at_op(self, ops: str) -> bool:
        tok = self.peek()
        return tok is not None and tok.kind == "op" and tok.text in ops

    def expr(self) -> Expr:
        node = self.term()
        while self.at_op("+-"):
            op = self.take().text
            node = BinOp(op, node, self.term())
        return node

    def term(self) -> Expr:
        node = self.factor()
        while self.at_op("*/"):
            op = self.take().text
            node = BinOp(op, node, self.factor())
        return node

    def factor(self) -> Expr:
        # unary minus binds looser than '^', so -s^2 is -(s^2)
        if self.at_op("-"):
            self.take()
            return Neg(self.factor())
        base = self.primary()
        if self.at_op("^"):
            self.take()
            return BinOp("^", base, self.factor())
        return base

    def primary(self) -> Expr:
        tok = self.take()
        if tok.kind == "number":
            return Num(float(tok.text))
        if tok.kind == "ident":
            if tok.text not in self.allowed:
                if tok.text in ("s", "x", "y"):
                    raise ParseError(f"variable {tok.text} not allowed")
                raise ParseError(f"unknown identifier {tok.text!r} at position {tok.position}")
            return Var(tok.text)
        if tok.kind == "func":
            self.expect("lparen")
            args = [self.expr()]
            while self.peek() is not None and self.peek().kind == "comma":
                self.take()
                args.append(self.expr())
            self.expect("rparen")
            if len(args) != FUNCTIONS[tok.text]:
                raise ParseError(
                    f"{tok.text} takes {FUNCTIONS[tok.text]} argument(s), got {len(args)}"
                )
            return Call(tok.text, tuple(args))
        if tok.kind == "lparen":
            node = self.expr()
            self.expect("rparen")
            return node
        raise ParseError(f"unexpected token {tok.text!r} at position {tok.position}")


def parse(tokens: list[Token], kind: str) -> Expr:
    parser = _Parser(tokens, kind)
    node = parser.expr()
    rest = parser.peek()
    if rest is not None:
        raise ParseError(f"trailing input {rest.text!r} at position {rest.position}")
    return node


def parse_expr(src: str, kind: str) -> Expr:
    return parse(tokenize(src), kind)


def unparse(e: Expr) -> str:
    """Fully parenthesized source text; ``parse`` of the result gives back ``e``."""
    if isinstance(e, Num):
        return repr(e.value)
    if isinstance(e, Var):
        return e.name
    if isinstance(e, Neg):
        return f"(-{unparse(e.operand)})"
    if isinstance(e, BinOp):
        return f"({unparse(e.left)} {e.op} {unparse(e.right)})"
    return f"{e.func}({', '.join(unparse(a) for a in e.args)})"


def variables_of(e: Expr) -> set[str]:
    if isinstance(e, Var):
        return {e.name}
    if isinstance(e, Num):
        return set()
    if isinstance(e, Neg):
        return variables_of(e.operand)
    if isinstance(e, BinOp):
        return variables_of(e.left) | variables_of(e.right)
    out: set[str] = set()
    for a in e.args:
        out |= variables_of(a)
    return out


# -- evaluation --------------------------------------------------------------


def _checked(value: float, e: Expr) -> float:
    if not math.isfinite(value):
        raise EvalError("non-finite result", e)
    return value


def _div(a: float, b: float, e: Expr) -> float:
    if b == 0.0:
        raise EvalError("division by zero", e)
    return _checked(a / b, e)


def _pow(a: float, b: float, e: Expr) -> float:
    if a == 0.0 and b < 0.0:
        raise EvalError("division by zero", e)
    if a < 0.0 and b != math.floor(b):
        raise EvalError("negative base with non-integer exponent", e)
    try:
        return _checked(math.pow(a, b), e)
    except OverflowError:
        raise EvalError("overflow", e) from None


def _apply(func: str, args: list[float], e: Expr) -> float:
    a = args[0]
    if func == "sqrt":
        if a < 0.0:
            raise EvalError("square root of a negative number", e)
        return math.sqrt(a)
    if func == "abs":
        return abs(a)
    if func == "ln":
        if a <= 0.0:
            raise EvalError("logarithm of a nonpositive number", e)
        return math.log(a)
    if func == "exp":
        try:
            return _checked(math.exp(a), e)
        except OverflowError:
            raise EvalError("overflow", e) from None
    if func == "sin":
        return math.sin(a)
    if func == "cos":
        return math.cos(a)
    if func == "min":
        return a if a <= args[1] else args[1]
    if func == "max":
        return a if a >= args[1] else args[1]
    return _pow(a, args[1], e)


def evaluate(e: Expr, bindings: Mapping[str, float]) -> float:
    if isinstance(e, Num):
        return e.value
    if isinstance(e, Var):
        try:
            return float(bindings[e.name])
        except KeyError:
            raise EvalError(f"unbound variable {e.name}") from None
    if isinstance(e, Neg):
        return -evaluate(e.operand, bindings)
    if isinstance(e, BinOp):
        a = evaluate(e.left, bindings)
        b = evaluate(e.right, bindings)
        if e.op == "+":
            return _checked(a + b, e)
        if e.op == "-":
            return _checked(a - b, e)
        if e.op == "*":
            return _checked(a * b, e)
        if e.op == "/":
            return _div(a, b, e)
        return _pow(a, b, e)
    return _apply(e.func, [evaluate(a, bindings) for a in e.args], e)


@dataclass(frozen=True)
class DualValue:
    value: float
    partials: tuple[float, ...]


def eval_dual(e: Expr, bindings: Mapping[str, float], variables: tuple[str, ...]) -> DualValue:
    """Value and exact forward-mode partials with respect to ``variables``.

    ``abs`` has derivative 0 at 0; ``min``/``max`` follow the first argument on ties.
    """
    value, partials = _dual(e, bindings, variables)
    return DualValue(value, tuple(partials))


def _scaled(c: float, d: list[float], e: Expr) -> list[float]:
    return [_checked(c * di, e) if di != 0.0 else 0.0 for di in d]


def _dual(e: Expr, bindings, variables) -> tuple[float, list[float]]:
    n = len(variables)
    if isinstance(e, Num):
        return e.value, [0.0] * n
    if isinstance(e, Var):
        d = [0.0] * n
        if e.name in variables:
            d[variables.index(e.name)] = 1.0
        return evaluate(e, bindings), d
    if isinstance(e, Neg):
        a, da = _dual(e.operand, bindings, variables)
        return -a, [-x for x in da]
    if isinstance(e, BinOp):
        a, da = _dual(e.left, bindings, variables)
        b, db = _dual(e.right, bindings, variables)
        if e.op == "+":
            return _checked(a + b, e), [x + y for x, y in zip(da, db)]
        if e.op == "-":
            return _checked(a - b, e), [x - y for x, y in zip(da, db)]
        if e.op == "*":
            return _checked(a * b, e), [_checked(x * b + a * y, e) for x, y in zip(da, db)]
        if e.op == "/":
            q = _div(a, b, e)
            return q, [_checked((x - q * y) / b, e) for x, y in zip(da, db)]
        return _dual_pow(a, da, b, db, e)
    args = [_dual(a, bindings, variables) for a in e.args]
    value = _apply(e.func, [v for v, _ in args], e)
    a, da = args[0]
    f = e.func
    if f == "sqrt":
        if value == 0.0:
            raise EvalError("square root not differentiable at 0", e)
        return value, _scaled(0.5 / value, da, e)
    if f == "abs":
        return value, _scaled(0.0 if a == 0.0 else math.copysign(1.0, a), da, e)
    if f == "ln":
        return value, _scaled(1.0 / a, da, e)
    if f == "exp":
        return value, _scaled(value, da, e)
    if f == "sin":
        return value, _scaled(math.cos(a), da, e)
    if f == "cos":
        return value, _scaled(-math.sin(a), da, e)
    b, db = args[1]
    if f == "min":
        return value, list(da if a <= b else db)
    if f == "max":
        return value, list(da if a >= b else db)
    return _dual_pow(a, da, b, db, e)


def _dual_pow(a, da, b, db, e):
    value = _pow(a, b, e)
    if any(db):
        if a <= 0.0:
            raise EvalError("variable exponent requires a positive base", e)
        la = math.log(a)
    else:
        la = 0.0
    if any(da):
        if b == 0.0:
            ca = 0.0
        elif b == 1.0:
            ca = 1.0
        else:
            ca = _checked(b * _pow(a, b - 1.0, e), e)
    else:
        ca = 0.0
    return value, [_checked(ca * x + value * la * y, e) for x, y in zip(da, db)]


# -- bytecode ----------------------------------------------------------------

# Opcodes shared with the compiled and pure-Python kernels.
OP_CONST, OP_VAR, OP_NEG, OP_ADD, OP_SUB, OP_MUL, OP_DIV, OP_POW = range(8)
OP_SQRT, OP_ABS, OP_EXP, OP_LN, OP_SIN, OP_COS, OP_MIN, OP_MAX = range(8, 16)

_BINARY = {"+": OP_ADD, "-": OP_SUB, "*": OP_MUL, "/": OP_DIV, "^": OP_POW}
_CALLS = {
    "sqrt": OP_SQRT,
    "abs": OP_ABS,
    "exp": OP_EXP,
    "ln": OP_LN,
    "sin": OP_SIN,
    "cos": OP_COS,
    "min": OP_MIN,
    "max": OP_MAX,
    "pow": OP_POW,
}


@dataclass(frozen=True)
class Program:
    """Postfix form of an expression: parallel opcode/argument lists."""

    ops: tuple[int, ...]
    args: tuple[float, ...]
    variables: tuple[str, ...]
    stack_size: int


def compile_expr(e: Expr, variables: tuple[str, ...]) -> Program:
    ops: list[int] = []
    args: list[float] = []

    def emit(node: Expr) -> int:
        # returns the stack depth needed by ``node``
        if isinstance(node, Num):
            ops.append(OP_CONST)
            args.append(node.value)
            return 1
        if isinstance(node, Var):
            if node.name not in variables:
                raise DSLError(f"variable {node.name} not in {variables}")
            ops.append(OP_VAR)
            args.append(float(variables.index(node.name)))
            return 1
        if isinstance(node, Neg):
            depth = emit(node.operand)
            ops.append(OP_NEG)
            args.append(0.0)
            return depth
        if isinstance(node, BinOp):
            depth = max(emit(node.left), 1 + emit(node.right))
            ops.append(_BINARY[node.op])
            args.append(0.0)
            return depth
        depth = 0
        for k, a in enumerate(node.args):
            depth = max(depth, k + emit(a))
        ops.append(_CALLS[node.func])
        args.append(0.0)
        return depth

    stack = emit(e)
    return Program(tuple(ops), tuple(args), tuple(variables), stack)
