"""A small, safe expression language for boundary data and table predicates.

Grammar: numbers (including ``1j``), names, ``+ - * / // % **``, unary minus,
calls to ``sin cos tan exp log sqrt abs re im conj atan2 sinh cosh``,
comparisons and ``and / or / not``.  Expressions are parsed with :mod:`ast` and
evaluated over numpy arrays; no Python ``eval`` is involved.

Chart variables for a point ``p`` with ``d`` real coordinates:
``x1..xd`` (alias ``x, y`` for the first two, ``t`` for one dimension), and for
complex charts ``z1..zn`` with ``z = z1``; ``r`` is the chart norm and
``theta = atan2(y, x)``.
"""

from __future__ import annotations

import ast
import math
import operator
from typing import Callable

import numpy as np

_FUNCS = {
    "sin": np.sin,
    "cos": np.cos,
    "tan": np.tan,
    "exp": np.exp,
    "log": np.log,
    "sqrt": np.sqrt,
    "abs": np.abs,
    "re": np.real,
    "im": np.imag,
    "conj": np.conj,
    "atan2": np.arctan2,
    "sinh": np.sinh,
    "cosh": np.cosh,
}
_CONSTS = {"pi": math.pi, "e": math.e, "I": 1j}

_BINOPS = {
    ast.Add: operator.add,
    ast.Sub: operator.sub,
    ast.Mult: operator.mul,
    ast.Div: operator.truediv,
    ast.FloorDiv: operator.floordiv,
    ast.Mod: operator.mod,
    ast.Pow: operator.pow,
}
_CMPOPS = {
    ast.Lt: operator.lt,
    ast.LtE: operator.le,
    ast.Gt: operator.gt,
    ast.GtE: operator.ge,
    ast.Eq: operator.eq,
    ast.NotEq: operator.ne,
}


class ExpressionError(ValueError):
    pass


def _compile(node) -> Callable[[dict], object]:
    if isinstance(node, ast.Expression):
        return _compile(node.body)
    if isinstance(node, ast.Constant) and isinstance(node.value, (int, float, complex)):
        value = node.value
        return lambda env: value
    if isinstance(node, ast.Name):
        name = node.id
        if name in _CONSTS:
            value = _CONSTS[name]
            return lambda env: value

        def lookup(env):
            try:
                return env[name]
            except KeyError:
                raise ExpressionError(f"unknown variable {name!r}") from None

        return lookup
    if isinstance(node, ast.BinOp) and type(node.op) in _BINOPS:
        op = _BINOPS[type(node.op)]
        left, right = _compile(node.left), _compile(node.right)
        return lambda env: op(left(env), right(env))
    if isinstance(node, ast.UnaryOp):
        operand = _compile(node.operand)
        if isinstance(node.op, ast.USub):
            return lambda env: -operand(env)
        if isinstance(node.op, ast.UAdd):
            return operand
        if isinstance(node.op, ast.Not):
            return lambda env: np.logical_not(operand(env))
    if isinstance(node, ast.BoolOp):
        parts = [_compile(v) for v in node.values]
        combine = np.logical_and if isinstance(node.op, ast.And) else np.logical_or

        def boolop(env):
            out = parts[0](env)
            for part in parts[1:]:
                out = combine(out, part(env))
            return out

        return boolop
    if isinstance(node, ast.Compare):
        first = _compile(node.left)
        ops = [_CMPOPS[type(o)] for o in node.ops]
        rest = [_compile(c) for c in node.comparators]

        def compare(env):
            left = first(env)
            out = True
            for op, item in zip(ops, rest):
                right = item(env)
                out = np.logical_and(out, op(left, right))
                left = right
            return out

        return compare
    if isinstance(node, ast.Call) and isinstance(node.func, ast.Name):
        if node.func.id not in _FUNCS or node.keywords:
            raise ExpressionError(f"function {node.func.id!r} is not allowed")
        fn = _FUNCS[node.func.id]
        args = [_compile(a) for a in node.args]
        return lambda env: fn(*[a(env) for a in args])
    raise ExpressionError(f"unsupported syntax: {ast.dump(node)[:60]}")


class Expression:
    """Compiled expression; call with a variable mapping."""

    def __init__(self, text: str):
        self.text = text
        try:
            tree = ast.parse(text.strip(), mode="eval")
        except SyntaxError as exc:
            raise ExpressionError(f"cannot parse {text!r}: {exc.msg}") from None
        self._fn = _compile(tree)

    def __call__(self, env: dict):
        return self._fn(env)

    def __repr__(self):
        return f"Expression({self.text!r})"


def chart_variables(points, is_complex: bool = False) -> dict:
    """Variable mapping for an array of chart points ``(..., d)``."""
    p = np.asarray(points, dtype=float)
    d = p.shape[-1]
    env = {f"x{i + 1}": p[..., i] for i in range(d)}
    env["x"] = p[..., 0]
    env["t"] = p[..., 0]
    if d >= 2:
        env["y"] = p[..., 1]
        env["theta"] = np.arctan2(p[..., 1], p[..., 0])
    env["r"] = np.sqrt(np.sum(p**2, axis=-1))
    if is_complex or d % 2 == 0:
        for k in range(d // 2):
            env[f"z{k + 1}"] = p[..., 2 * k] + 1j * p[..., 2 * k + 1]
            env[f"y{k + 1}"] = p[..., 2 * k + 1]
        if d >= 2:
            env["z"] = env["z1"]
    return env


def evaluate_on_points(exprs, points, target_dim: int, is_complex_target: bool):
    """Evaluate boundary-data expressions at chart points.

    ``exprs`` is one expression (complex-valued allowed for complex targets of
    complex dimension 1) or a list of expressions, one per target component.
    Returns an array ``(..., target_dim)`` of real target coordinates.
    """
    p = np.asarray(points, dtype=float)
    env = chart_variables(p)
    if isinstance(exprs, (str, Expression)):
        exprs = [exprs]
    values = [np.broadcast_to(Expression(str(e))(env) if isinstance(e, str) else e(env),
                              p.shape[:-1]) for e in exprs]
    if is_complex_target and len(values) == target_dim // 2:
        out = np.empty(p.shape[:-1] + (target_dim,))
        for k, v in enumerate(values):
            v = np.asarray(v, dtype=complex)
            out[..., 2 * k] = v.real
            out[..., 2 * k + 1] = v.imag
        return out
    if len(values) != target_dim:
        raise ExpressionError(
            f"expected {target_dim} component expressions, got {len(values)}"
        )
    out = np.stack([np.real_if_close(np.asarray(v)) for v in values], axis=-1)
    if np.iscomplexobj(out):
        raise ExpressionError("complex value for a real target component")
    return out.astype(float)
