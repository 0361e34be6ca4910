"""Parser and evaluator for a small closed algebraic expression language.

The language covers arithmetic ``+ - * /``, nonnegative integer powers,
``sqrt``, ``abs``, ``min``, ``max``, integer-degree ``root``, and guarded
``piecewise`` definitions whose guards are polynomial comparisons.
Transcendental functions are deliberately excluded, so every expressible
function is piecewise algebraic.

Grammar::

    expr      := ['-'] term (('+'|'-') term)*
    term      := factor (('*'|'/') factor)*
    factor    := atom ('^' nonneg-int)?
    atom      := number | 'x'index | '(' expr ')'
               | 'sqrt(' expr ')' | 'abs(' expr ')'
               | 'root(' expr ',' pos-int ')'
               | 'min(' expr ',' expr ')' | 'max(' expr ',' expr ')'
               | piecewise
    piecewise := 'piecewise{' (poly cmp poly ':' expr ';')+ '}'
    cmp       := '<' | '<=' | '=' | '>=' | '>'
    poly      := ['-'] pterm (('+'|'-') pterm)*      # guards: +, -, *, ^ only

Variables are written ``x1 .. xN`` (1-based in source text, 0-based in the
tree).  Piecewise guards are tried in listed order and the first satisfied
guard wins.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Union

import numpy as np

__all__ = [
    "Constant",
    "Variable",
    "Unary",
    "Binary",
    "IntPow",
    "Root",
    "Comparison",
    "Piecewise",
    "ExpressionTree",
    "ExpressionError",
    "ExpressionSyntaxError",
    "ExpressionDomainError",
    "parse_expression",
    "format_expression",
    "evaluate",
    "evaluate_many",
    "is_polynomial",
]


class ExpressionError(Exception):
    """Base class for expression-language failures."""


class ExpressionSyntaxError(ExpressionError):
    """Raised on malformed source text; carries a 1-based character position."""

    def __init__(self, message: str, position: int):
        super().__init__(f"{message} (at position {position})")
        self.position = position


class ExpressionDomainError(ExpressionError):
    """Raised when evaluation leaves the domain of a subexpression."""


@dataclass(frozen=True)
class Constant:
    value: float


@dataclass(frozen=True)
class Variable:
    index: int  # zero-based


@dataclass(frozen=True)
class Unary:
    op: str  # 'neg' | 'sqrt' | 'abs'
    arg: "Node"


@dataclass(frozen=True)
class Binary:
    op: str  # 'add' | 'sub' | 'mul' | 'div' | 'min' | 'max'
    left: "Node"
    right: "Node"


@dataclass(frozen=True)
class IntPow:
    base: "Node"
    exponent: int  # >= 0


@dataclass(frozen=True)
class Root:
    arg: "Node"
    degree: int  # >= 1; argument must be nonnegative


@dataclass(frozen=True)
class Comparison:
    left: "Node"
    op: str  # '<' | '<=' | '=' | '>=' | '>'
    right: "Node"


@dataclass(frozen=True)
class Piecewise:
    branches: tuple  # of (Comparison, Node)


Node = Union[Constant, Variable, Unary, Binary, IntPow, Root, Piecewise]


@dataclass(frozen=True)
class ExpressionTree:
    root: Node
    dimension: int


# ---------------------------------------------------------------------------
# tokenizer


_TOKEN_RE = re.compile(
    r"""(?P<ws>\s+)
      | (?P<number>(\d+\.?\d*|\.\d+)([eE][+-]?\d+)?)
      | (?P<var>x\d+)
      | (?P<name>[A-Za-z_][A-Za-z_0-9]*)
      | (?P<cmp><=|>=|<|>|=)
      | (?P<sym>[-+*/^(){},;:])
    """,
    re.VERBOSE,
)

_KEYWORDS = {"sqrt", "abs", "min", "max", "root", "piecewise"}


def _tokenize(text: str):
    tokens = []
    pos = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            raise ExpressionSyntaxError(f"unexpected character {text[pos]!r}", pos + 1)
        pos = m.end()
        kind = m.lastgroup
        if kind == "ws":
            continue
        tokens.append((kind, m.group(), m.start() + 1))
    tokens.append(("eof", "", len(text) + 1))
    return tokens


# ---------------------------------------------------------------------------
# recursive-descent parser


class _Parser:
    def __init__(self, text: str, dimension: int):
        if dimension < 1:
            raise ValueError("dimension must be a positive integer")
        self.tokens = _tokenize(text)
        self.i = 0
        self.dimension = dimension

    def peek(self):
        return self.tokens[self.i]

    def advance(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect(self, text: str):
        kind, val, pos = self.peek()
        if val != text:
            raise ExpressionSyntaxError(f"expected {text!r}, found {val or 'end of input'!r}", pos)
        return self.advance()

    def fail(self, message: str):
        _, val, pos = self.peek()
        raise ExpressionSyntaxError(message, pos)

    # expr := ['-'] term (('+'|'-') term)*
    def expr(self) -> Node:
        if self.peek()[1] == "-":
            self.advance()
            node: Node = Unary("neg", self.term())
        else:
            node = self.term()
        while self.peek()[1] in ("+", "-"):
            op = self.advance()[1]
            rhs = self.term()
            node = Binary("add" if op == "+" else "sub", node, rhs)
        return node

    def term(self) -> Node:
        node = self.factor()
        while self.peek()[1] in ("*", "/"):
            op = self.advance()[1]
            rhs = self.factor()
            node = Binary("mul" if op == "*" else "div", node, rhs)
        return node

    def factor(self) -> Node:
        node = self.atom()
        if self.peek()[1] == "^":
            self.advance()
            node = IntPow(node, self.nonneg_int("power exponents must be nonnegative integers"))
        return node

    def nonneg_int(self, message: str) -> int:
        kind, val, pos = self.peek()
        if val == "-":
            raise ExpressionSyntaxError(message, pos)
        if kind != "number" or not re.fullmatch(r"\d+", val):
            raise ExpressionSyntaxError(message, pos)
        self.advance()
        return int(val)

    def atom(self) -> Node:
        kind, val, pos = self.peek()
        if kind == "number":
            self.advance()
            return Constant(float(val))
        if kind == "var":
            self.advance()
            index = int(val[1:]) - 1
            if index < 0 or index >= self.dimension:
                raise ExpressionSyntaxError(
                    f"variable {val} out of range for dimension {self.dimension}", pos
                )
            return Variable(index)
        if val == "(":
            self.advance()
            node = self.expr()
            self.expect(")")
            return node
        if kind == "name":
            if val not in _KEYWORDS:
                raise ExpressionSyntaxError(f"unknown function {val!r}", pos)
            self.advance()
            if val == "piecewise":
                return self.piecewise()
            self.expect("(")
            first = self.expr()
            if val in ("sqrt", "abs"):
                self.expect(")")
                return Unary(val, first)
            if val == "root":
                self.expect(",")
                kind2, val2, pos2 = self.peek()
                if kind2 != "number" or not re.fullmatch(r"\d+", val2) or int(val2) < 1:
                    raise ExpressionSyntaxError("root degree must be a positive integer", pos2)
                self.advance()
                self.expect(")")
                return Root(first, int(val2))
            self.expect(",")
            second = self.expr()
            self.expect(")")
            return Binary(val, first, second)
        self.fail(f"expected an expression, found {val or 'end of input'!r}")

    def piecewise(self) -> Node:
        self.expect("{")
        branches = []
        while True:
            guard = self.comparison()
            self.expect(":")
            branch = self.expr()
            self.expect(";")
            branches.append((guard, branch))
            if self.peek()[1] == "}":
                self.advance()
                break
            if self.peek()[0] == "eof":
                self.fail("unterminated piecewise block")
        return Piecewise(tuple(branches))

    def comparison(self) -> Comparison:
        left = self.poly()
        kind, val, pos = self.peek()
        if kind != "cmp":
            raise ExpressionSyntaxError("expected a comparison operator in guard", pos)
        self.advance()
        right = self.poly()
        return Comparison(left, val, right)

    # guards: polynomial subtrees only (+, -, *, ^)
    def poly(self) -> Node:
        if self.peek()[1] == "-":
            self.advance()
            node: Node = Unary("neg", self.pterm())
        else:
            node = self.pterm()
        while self.peek()[1] in ("+", "-"):
            op = self.advance()[1]
            node = Binary("add" if op == "+" else "sub", node, self.pterm())
        return node

    def pterm(self) -> Node:
        node = self.pfactor()
        while self.peek()[1] == "*":
            self.advance()
            node = Binary("mul", node, self.pfactor())
        return node

    def pfactor(self) -> Node:
        node = self.patom()
        if self.peek()[1] == "^":
            self.advance()
            node = IntPow(node, self.nonneg_int("power exponents must be nonnegative integers"))
        return node

    def patom(self) -> Node:
        kind, val, pos = self.peek()
        if kind == "number":
            self.advance()
            return Constant(float(val))
        if kind == "var":
            self.advance()
            index = int(val[1:]) - 1
            if index < 0 or index >= self.dimension:
                raise ExpressionSyntaxError(
                    f"variable {val} out of range for dimension {self.dimension}", pos
                )
            return Variable(index)
        if val == "(":
            self.advance()
            node = self.poly()
            self.expect(")")
            return node
        self.fail("guards admit only numbers, variables, +, -, *, ^")


def parse_expression(text: str, dimension: int) -> ExpressionTree:
    """Parse ``text`` into an :class:`ExpressionTree` over ``dimension`` variables."""
    parser = _Parser(text, dimension)
    root = parser.expr()
    kind, val, pos = parser.peek()
    if kind != "eof":
        raise ExpressionSyntaxError(f"unexpected trailing input {val!r}", pos)
    tree = ExpressionTree(root, dimension)
    validate_tree(tree)
    return tree


# ---------------------------------------------------------------------------
# validation


def is_polynomial(node: Node) -> bool:
    if isinstance(node, (Constant, Variable)):
        return True
    if isinstance(node, Unary):
        return node.op == "neg" and is_polynomial(node.arg)
    if isinstance(node, Binary):
        return node.op in ("add", "sub", "mul") and is_polynomial(node.left) and is_polynomial(node.right)
    if isinstance(node, IntPow):
        return is_polynomial(node.base)
    return False


def validate_tree(tree: ExpressionTree) -> None:
    """Check structural invariants; raises :class:`ExpressionError` on violation."""

    def walk(node: Node) -> None:
        if isinstance(node, Constant):
            if not np.isfinite(node.value):
                raise ExpressionError("constants must be finite")
        elif isinstance(node, Variable):
            if not 0 <= node.index < tree.dimension:
                raise ExpressionError(
                    f"variable index {node.index} out of range for dimension {tree.dimension}"
                )
        elif isinstance(node, Unary):
            if node.op not in ("neg", "sqrt", "abs"):
                raise ExpressionError(f"unknown unary op {node.op!r}")
            walk(node.arg)
        elif isinstance(node, Binary):
            if node.op not in ("add", "sub", "mul", "div", "min", "max"):
                raise ExpressionError(f"unknown binary op {node.op!r}")
            walk(node.left)
            walk(node.right)
        elif isinstance(node, IntPow):
            if not isinstance(node.exponent, int) or node.exponent < 0:
                raise ExpressionError("power exponents must be nonnegative integers")
            walk(node.base)
        elif isinstance(node, Root):
            if not isinstance(node.degree, int) or node.degree < 1:
                raise ExpressionError("root degree must be a positive integer")
            walk(node.arg)
        elif isinstance(node, Piecewise):
            if not node.branches:
                raise ExpressionError("piecewise needs at least one branch")
            for guard, branch in node.branches:
                if not (is_polynomial(guard.left) and is_polynomial(guard.right)):
                    raise ExpressionError("piecewise guards must compare polynomials")
                if guard.op not in ("<", "<=", "=", ">=", ">"):
                    raise ExpressionError(f"unknown comparison {guard.op!r}")
                walk(guard.left)
                walk(guard.right)
                walk(branch)
        else:
            raise ExpressionError(f"unknown node {node!r}")

    walk(tree.root)


# ---------------------------------------------------------------------------
# evaluation


def _eval(node: Node, pts: np.ndarray) -> np.ndarray:
    if isinstance(node, Constant):
        return np.full(pts.shape[0], node.value)
    if isinstance(node, Variable):
        return pts[:, node.index].copy()
    if isinstance(node, Unary):
        a = _eval(node.arg, pts)
        if node.op == "neg":
            return -a
        if node.op == "abs":
            return np.abs(a)
        if np.any(a < 0.0):
            raise ExpressionDomainError("sqrt of a negative value")
        return np.sqrt(a)
    if isinstance(node, Binary):
        left = _eval(node.left, pts)
        right = _eval(node.right, pts)
        if node.op == "add":
            return left + right
        if node.op == "sub":
            return left - right
        if node.op == "mul":
            return left * right
        if node.op == "min":
            return np.minimum(left, right)
        if node.op == "max":
            return np.maximum(left, right)
        if np.any(right == 0.0):
            raise ExpressionDomainError("division by zero")
        return left / right
    if isinstance(node, IntPow):
        return _eval(node.base, pts) ** node.exponent
    if isinstance(node, Root):
        a = _eval(node.arg, pts)
        if np.any(a < 0.0):
            raise ExpressionDomainError("root of a negative value")
        if node.degree == 1:
            return a
        if node.degree == 2:
            return np.sqrt(a)
        return np.power(a, 1.0 / node.degree)
    if isinstance(node, Piecewise):
        out = np.empty(pts.shape[0])
        remaining = np.ones(pts.shape[0], dtype=bool)
        for guard, branch in node.branches:
            if not remaining.any():
                break
            sub = pts[remaining]
            left = _eval(guard.left, sub)
            right = _eval(guard.right, sub)
            if guard.op == "<":
                hit = left < right
            elif guard.op == "<=":
                hit = left <= right
            elif guard.op == "=":
                hit = left == right
            elif guard.op == ">=":
                hit = left >= right
            else:
                hit = left > right
            if hit.any():
                idx = np.flatnonzero(remaining)[hit]
                out[idx] = _eval(branch, pts[idx])
                remaining[idx] = False
        if remaining.any():
            raise ExpressionDomainError("no piecewise guard satisfied")
        return out
    raise ExpressionError(f"unknown node {node!r}")


def evaluate_many(tree: ExpressionTree, points: np.ndarray) -> np.ndarray:
    """Evaluate on a batch of points with shape (m, dimension)."""
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != tree.dimension:
        raise ValueError(f"expected points of shape (m, {tree.dimension}), got {pts.shape}")
    return _eval(tree.root, pts)


def evaluate(tree: ExpressionTree, point) -> float:
    """Evaluate at a single point (a length-``dimension`` vector)."""
    p = np.asarray(point, dtype=float).reshape(-1)
    if p.shape[0] != tree.dimension:
        raise ValueError(f"expected a point of length {tree.dimension}, got {p.shape[0]}")
    return float(evaluate_many(tree, p[None, :])[0])


# ---------------------------------------------------------------------------
# pretty-printer

# precedence: add/sub 1, mul/div 2, pow base 3, atom 4
_BIN_TOKEN = {"add": "+", "sub": "-", "mul": "*", "div": "/"}
_BIN_PREC = {"add": 1, "sub": 1, "mul": 2, "div": 2}


def _fmt(node: Node, context: int) -> str:
    if isinstance(node, Constant):
        if node.value < 0 or (node.value == 0 and np.signbit(node.value)):
            return f"(-{_repr_float(-node.value)})"
        return _repr_float(node.value)
    if isinstance(node, Variable):
        return f"x{node.index + 1}"
    if isinstance(node, Unary):
        if node.op == "neg":
            return f"(-{_fmt(node.arg, 1)})"
        return f"{node.op}({_fmt(node.arg, 0)})"
    if isinstance(node, Binary):
        if node.op in ("min", "max"):
            return f"{node.op}({_fmt(node.left, 0)}, {_fmt(node.right, 0)})"
        prec = _BIN_PREC[node.op]
        left = _fmt(node.left, prec)
        # right operand of - and / needs the next tighter level
        right = _fmt(node.right, prec + (1 if node.op in ("sub", "div") else 0))
        text = f"{left} {_BIN_TOKEN[node.op]} {right}"
        return f"({text})" if prec < context else text
    if isinstance(node, IntPow):
        text = f"{_fmt(node.base, 4)}^{node.exponent}"
        # the grammar allows one '^' per factor, so nested powers need parens
        return f"({text})" if context > 3 else text
    if isinstance(node, Root):
        return f"root({_fmt(node.arg, 0)}, {node.degree})"
    if isinstance(node, Piecewise):
        parts = [
            f"{_fmt(g.left, 0)} {g.op} {_fmt(g.right, 0)} : {_fmt(b, 0)}"
            for g, b in node.branches
        ]
        return "piecewise{ " + " ; ".join(parts) + " ; }"
    raise ExpressionError(f"unknown node {node!r}")


def _repr_float(v: float) -> str:
    return repr(v)


def format_expression(tree: ExpressionTree) -> str:
    """Render source text that reparses to a structurally identical tree."""
    return _fmt(tree.root, 0)
