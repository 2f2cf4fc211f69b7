"""Energy profiles given as small closed-form expressions in ``t``.

Accepted syntax: the variable ``t``, numeric literals, the constants ``pi``
and ``e``, the operators ``+ - * /``, unary minus, parentheses and the
functions ``sin``, ``cos``, ``exp``.  Expressions are parsed with the
standard :mod:`ast` module and only whitelisted nodes are accepted; values
and first derivatives are evaluated together by forward-mode differentiation.
"""

from __future__ import annotations

import ast
import math
from dataclasses import dataclass, field

import numpy as np

__all__ = ["ExpressionError", "EnergyProfile"]


class ExpressionError(ValueError):
    """Raised for expressions outside the accepted grammar."""


_FUNCS = {
    "sin": (np.sin, np.cos),
    "cos": (np.cos, lambda x: -np.sin(x)),
    "exp": (np.exp, np.exp),
}
_CONSTS = {"pi": math.pi, "e": math.e}


def _check(node: ast.AST) -> None:
    if isinstance(node, ast.Expression):
        _check(node.body)
    elif isinstance(node, ast.Constant):
        if isinstance(node.value, bool) or not isinstance(node.value, (int, float)):
            raise ExpressionError(f"unsupported literal {node.value!r}")
    elif isinstance(node, ast.Name):
        if node.id != "t" and node.id not in _CONSTS:
            raise ExpressionError(f"unknown name {node.id!r}")
    elif isinstance(node, ast.BinOp):
        if not isinstance(node.op, (ast.Add, ast.Sub, ast.Mult, ast.Div)):
            raise ExpressionError(f"unsupported operator {type(node.op).__name__}")
        _check(node.left)
        _check(node.right)
    elif isinstance(node, ast.UnaryOp):
        if not isinstance(node.op, (ast.USub, ast.UAdd)):
            raise ExpressionError(f"unsupported unary operator {type(node.op).__name__}")
        _check(node.operand)
    elif isinstance(node, ast.Call):
        if not isinstance(node.func, ast.Name) or node.func.id not in _FUNCS:
            raise ExpressionError("only sin, cos and exp may be called")
        if len(node.args) != 1 or node.keywords:
            raise ExpressionError(f"{node.func.id} takes exactly one argument")
        _check(node.args[0])
    else:
        raise ExpressionError(f"unsupported syntax {type(node).__name__}")


def _dual(node: ast.AST, t: np.ndarray):
    """Value and derivative with respect to ``t``."""
    if isinstance(node, ast.Expression):
        return _dual(node.body, t)
    if isinstance(node, ast.Constant):
        return np.full_like(t, float(node.value)), np.zeros_like(t)
    if isinstance(node, ast.Name):
        if node.id == "t":
            return t.copy(), np.ones_like(t)
        return np.full_like(t, _CONSTS[node.id]), np.zeros_like(t)
    if isinstance(node, ast.UnaryOp):
        v, d = _dual(node.operand, t)
        return (-v, -d) if isinstance(node.op, ast.USub) else (v, d)
    if isinstance(node, ast.BinOp):
        a, da = _dual(node.left, t)
        b, db = _dual(node.right, t)
        if isinstance(node.op, ast.Add):
            return a + b, da + db
        if isinstance(node.op, ast.Sub):
            return a - b, da - db
        if isinstance(node.op, ast.Mult):
            return a * b, da * b + a * db
        return a / b, (da * b - a * db) / (b * b)
    f, df = _FUNCS[node.func.id]  # type: ignore[attr-defined]
    v, d = _dual(node.args[0], t)  # type: ignore[attr-defined]
    return f(v), df(v) * d


@dataclass(frozen=True)
class EnergyProfile:
    """Target kinetic energy ``e(t)`` on ``[0, 1]``."""

    expression: str
    _tree: ast.Expression = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        try:
            tree = ast.parse(self.expression.strip(), mode="eval")
        except SyntaxError as exc:
            raise ExpressionError(f"cannot parse {self.expression!r}: {exc.msg}") from exc
        _check(tree)
        object.__setattr__(self, "_tree", tree)

    def __call__(self, t) -> np.ndarray:
        return self.value(t)

    def value(self, t) -> np.ndarray:
        t = np.atleast_1d(np.asarray(t, dtype=float))
        return _dual(self._tree, t)[0]

    def derivative(self, t) -> np.ndarray:
        t = np.atleast_1d(np.asarray(t, dtype=float))
        return _dual(self._tree, t)[1]

    def minimum(self, probes: int = 1024) -> float:
        return float(self.value(np.linspace(0.0, 1.0, probes)).min())

    def maximum(self, probes: int = 1024) -> float:
        return float(self.value(np.linspace(0.0, 1.0, probes)).max())

    def validate(self, probes: int = 1024) -> None:
        """Require finite positive values on a uniform probe grid."""
        vals = self.value(np.linspace(0.0, 1.0, probes))
        if not np.all(np.isfinite(vals)) or vals.min() <= 0:
            raise ExpressionError(f"energy profile {self.expression!r} must be positive on [0, 1]")

    def scaled(self, factor: float) -> "EnergyProfile":
        return EnergyProfile(f"({factor!r}) * ({self.expression})")
