"""Text expressions defining scalar objectives over variables x0..x{d-1}.

Grammar (highest precedence first):

    ^            exponentiation, right-associative
    unary -      negation
    * /          left-associative
    + -          left-associative

so ``-x0^2`` is ``-(x0^2)`` and ``2*-x0`` is ``2*(-x0)``.  Atoms are numeric
literals, variables ``x<k>``, parenthesized expressions, and the functions
exp, log, sin, cos, sqrt, abs.  Anything else is rejected at its offset.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Union

import numpy as np

FUNCTIONS = ("exp", "log", "sin", "cos", "sqrt", "abs")

_ADD = frozenset("+-")
_MUL = frozenset("*/")


class ExpressionSyntaxError(ValueError):
    """Malformed expression; ``offset`` locates the problem in the source."""

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (offset {offset})")
        self.offset = offset


class EvaluationDomainError(ArithmeticError):
    """Evaluation left the real domain (log of nonpositive, division by zero, overflow)."""


@dataclass(frozen=True)
class Num:
    value: float


@dataclass(frozen=True)
class Var:
    index: int


@dataclass(frozen=True)
class Neg:
    operand: "Node"


@dataclass(frozen=True)
class BinOp:
    op: str
    left: "Node"
    right: "Node"


@dataclass(frozen=True)
class Func:
    name: str
    arg: "Node"


Node = Union[Num, Var, Neg, BinOp, Func]


@dataclass(frozen=True)
class ExpressionObjective:
    """A parsed scalar objective; ``dim`` is the smallest usable input length."""

    source: str
    ast: Node
    dim: int

    def __call__(self, u) -> float:
        return evaluate(self.ast, np.asarray(u, dtype=np.float64))

    def canonical_source(self) -> str:
        return unparse(self.ast)


# ---------------------------------------------------------------------------
# lexer / parser

_TOKEN_OPS = "+-*/^()"


def _tokenize(source: str) -> list[tuple[str, str, int]]:
    tokens = []
    i, n = 0, len(source)
    while i < n:
        c = source[i]
        if c.isspace():
            i += 1
            continue
        if c in _TOKEN_OPS:
            tokens.append(("op", c, i))
            i += 1
            continue
        if c.isdigit() or c == ".":
            j = i
            while j < n and (source[j].isdigit() or source[j] == "."):
                j += 1
            if j < n and source[j] in "eE":
                k = j + 1
                if k < n and source[k] in "+-":
                    k += 1
                if k < n and source[k].isdigit():
                    j = k
                    while j < n and source[j].isdigit():
                        j += 1
            text = source[i:j]
            try:
                float(text)
            except ValueError:
                raise ExpressionSyntaxError(f"bad numeric literal '{text}'", i) from None
            tokens.append(("num", text, i))
            i = j
            continue
        if c.isalpha() or c == "_":
            j = i
            while j < n and (source[j].isalnum() or source[j] == "_"):
                j += 1
            tokens.append(("ident", source[i:j], i))
            i = j
            continue
        raise ExpressionSyntaxError(f"unexpected character {c!r}", i)
    tokens.append(("end", "", n))
    return tokens


class _Parser:
    def __init__(self, source: str):
        self.source = source
        self.tokens = _tokenize(source)
        self.pos = 0

    def peek(self) -> tuple[str, str, int]:
        return self.tokens[self.pos]

    def advance(self) -> tuple[str, str, int]:
        tok = self.tokens[self.pos]
        self.pos += 1
        return tok

    def expect_op(self, op: str) -> None:
        kind, text, offset = self.peek()
        if kind != "op" or text != op:
            raise ExpressionSyntaxError(f"expected '{op}'", offset)
        self.advance()

    def parse(self) -> Node:
        node = self.sum_expr()
        kind, text, offset = self.peek()
        if kind != "end":
            raise ExpressionSyntaxError(f"unexpected trailing input {text!r}", offset)
        return node

    def sum_expr(self) -> Node:
        node = self.product_expr()
        while True:
            kind, text, _ = self.peek()
            if kind == "op" and text in _ADD:
                self.advance()
                node = BinOp(text, node, self.product_expr())
            else:
                return node

    def product_expr(self) -> Node:
        node = self.unary_expr()
        while True:
            kind, text, _ = self.peek()
            if kind == "op" and text in _MUL:
                self.advance()
                node = BinOp(text, node, self.unary_expr())
            else:
                return node

    def unary_expr(self) -> Node:
        kind, text, _ = self.peek()
        if kind == "op" and text == "-":
            self.advance()
            return Neg(self.unary_expr())
        return self.power_expr()

    def power_expr(self) -> Node:
        base = self.atom()
        kind, text, _ = self.peek()
        if kind == "op" and text == "^":
            self.advance()
            # right-associative; the exponent may carry its own leading minus
            return BinOp("^", base, self.unary_expr())
        return base

    def atom(self) -> Node:
        kind, text, offset = self.advance()
        if kind == "num":
            return Num(float(text))
        if kind == "ident":
            if text in FUNCTIONS:
                self.expect_op("(")
                arg = self.sum_expr()
                self.expect_op(")")
                return Func(text, arg)
            if text[0] == "x" and text[1:].isdigit():
                return Var(int(text[1:]))
            raise ExpressionSyntaxError(f"unknown identifier {text!r}", offset)
        if kind == "op" and text == "(":
            node = self.sum_expr()
            self.expect_op(")")
            return node
        shown = text if text else "end of input"
        raise ExpressionSyntaxError(f"expected a value, got {shown!r}", offset)


def parse_expression(source: str) -> ExpressionObjective:
    """Parse ``source`` into an ExpressionObjective.

    Raises ExpressionSyntaxError (carrying the offset) on malformed input or
    unknown identifiers.
    """
    if not source or not source.strip():
        raise ExpressionSyntaxError("empty expression", 0)
    ast = _Parser(source).parse()
    return ExpressionObjective(source=source, ast=ast, dim=_min_dim(ast))


def _min_dim(node: Node) -> int:
    if isinstance(node, Var):
        return node.index + 1
    if isinstance(node, Num):
        return 0
    if isinstance(node, Neg):
        return _min_dim(node.operand)
    if isinstance(node, Func):
        return _min_dim(node.arg)
    return max(_min_dim(node.left), _min_dim(node.right))


# ---------------------------------------------------------------------------
# printing

_PREC = {"+": 1, "-": 1, "*": 2, "/": 2, "neg": 3, "^": 4}


def _prec(node: Node) -> int:
    if isinstance(node, BinOp):
        return _PREC[node.op]
    if isinstance(node, Neg):
        return _PREC["neg"]
    return 5


def unparse(node: Node) -> str:
    """Render an AST back to source text; reparsing yields an equal AST."""
    if isinstance(node, Num):
        return repr(node.value)
    if isinstance(node, Var):
        return f"x{node.index}"
    if isinstance(node, Func):
        return f"{node.name}({unparse(node.arg)})"
    if isinstance(node, Neg):
        inner = unparse(node.operand)
        if _prec(node.operand) < _PREC["neg"]:
            inner = f"({inner})"
        return f"-{inner}"
    prec = _PREC[node.op]
    left = unparse(node.left)
    right = unparse(node.right)
    # '^' groups to the right, the others to the left
    if _prec(node.left) < prec or (node.op == "^" and _prec(node.left) <= prec):
        left = f"({left})"
    if _prec(node.right) < prec or (node.op != "^" and _prec(node.right) <= prec):
        right = f"({right})"
    return f"{left} {node.op} {right}" if node.op in "+-" else f"{left}{node.op}{right}"


# ---------------------------------------------------------------------------
# evaluation

def evaluate(node: Node, u: np.ndarray) -> float:
    """Evaluate at a finite point; raises EvaluationDomainError instead of
    returning a non-finite value."""
    value = _eval(node, u)
    if not math.isfinite(value):
        raise EvaluationDomainError(f"expression evaluated to {value!r}")
    return value


def _eval(node: Node, u: np.ndarray) -> float:
    if isinstance(node, Num):
        return node.value
    if isinstance(node, Var):
        if node.index >= u.shape[0]:
            raise EvaluationDomainError(
                f"variable x{node.index} out of range for a {u.shape[0]}-dimensional point"
            )
        return float(u[node.index])
    if isinstance(node, Neg):
        return -_eval(node.operand, u)
    if isinstance(node, Func):
        return _apply(node.name, _eval(node.arg, u))
    left = _eval(node.left, u)
    right = _eval(node.right, u)
    if node.op == "+":
        return _finite(left + right)
    if node.op == "-":
        return _finite(left - right)
    if node.op == "*":
        return _finite(left * right)
    if node.op == "/":
        if right == 0.0:
            raise EvaluationDomainError("division by zero")
        return _finite(left / right)
    try:
        return _finite(math.pow(left, right))
    except (ValueError, OverflowError) as exc:
        raise EvaluationDomainError(f"{left!r} ^ {right!r}: {exc}") from None


def _apply(name: str, x: float) -> float:
    if name == "exp":
        try:
            return _finite(math.exp(x))
        except OverflowError:
            raise EvaluationDomainError(f"exp({x!r}) overflows") from None
    if name == "log":
        if x <= 0.0:
            raise EvaluationDomainError(f"log of nonpositive value {x!r}")
        return math.log(x)
    if name == "sin":
        return math.sin(x)
    if name == "cos":
        return math.cos(x)
    if name == "sqrt":
        if x < 0.0:
            raise EvaluationDomainError(f"sqrt of negative value {x!r}")
        return math.sqrt(x)
    return abs(x)


def _finite(value: float) -> float:
    if not math.isfinite(value):
        raise EvaluationDomainError("intermediate result is not finite")
    return value


def finite_diff_gradient(expr: ExpressionObjective, u, step: float | None = None) -> np.ndarray:
    """Central-difference gradient of an expression objective.

    The default step is 1e-6 * max(1, ||u||).  Domain errors from the
    underlying evaluations propagate.
    """
    point = np.asarray(u, dtype=np.float64)
    if step is None:
        step = 1e-6 * max(1.0, float(np.linalg.norm(point)))
    if step <= 0.0:
        raise ValueError("step must be positive")
    grad = np.empty(point.shape[0])
    for k in range(point.shape[0]):
        bumped = point.copy()
        bumped[k] = point[k] + step
        above = evaluate(expr.ast, bumped)
        bumped[k] = point[k] - step
        below = evaluate(expr.ast, bumped)
        grad[k] = (above - below) / (2.0 * step)
    return grad
