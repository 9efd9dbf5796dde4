"""Tiny arithmetic evaluator for numeric arguments such as ``3*pi/2``.

Only numbers, ``pi``, unary minus and ``+ - * / **`` are accepted.  Values
are built with a caller-supplied number constructor, so the same expression
can be evaluated in float or in mpmath at any working precision.
"""

from __future__ import annotations

import ast
import math
import operator
from typing import Any, Callable

_BINOPS = {
    ast.Add: operator.add,
    ast.Sub: operator.sub,
    ast.Mult: operator.mul,
    ast.Div: operator.truediv,
    ast.Pow: operator.pow,
}


def evaluate(text: str, num: Callable[[str], Any] = float, pi: Any = math.pi):
    """Evaluate ``text`` with numbers built by ``num`` and ``pi`` bound to ``pi``."""
    try:
        tree = ast.parse(text.strip(), mode="eval")
    except SyntaxError as exc:
        raise ValueError(f"cannot parse number {text!r}") from exc

    def ev(node):
        if isinstance(node, ast.Expression):
            return ev(node.body)
        if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)):
            # Re-parse from source text so "0.92" is exact in extended precision.
            return num(ast.get_source_segment(text.strip(), node) or repr(node.value))
        if isinstance(node, ast.Name) and node.id == "pi":
            return pi
        if isinstance(node, ast.UnaryOp) and isinstance(node.op, (ast.USub, ast.UAdd)):
            v = ev(node.operand)
            return -v if isinstance(node.op, ast.USub) else v
        if isinstance(node, ast.BinOp) and type(node.op) in _BINOPS:
            return _BINOPS[type(node.op)](ev(node.left), ev(node.right))
        raise ValueError(f"unsupported expression in {text!r}")

    return ev(tree)


def to_float(value) -> float:
    """Float from a number or an expression string."""
    if isinstance(value, str):
        return float(evaluate(value))
    return float(value)
