"""Whitelisted arithmetic expressions over ``n`` (and ``k``), evaluated with numpy."""

from __future__ import annotations

import ast
import operator

import numpy as np

_BINOPS = {
    ast.Add: operator.add,
    ast.Sub: operator.sub,
    ast.Mult: operator.mul,
    ast.Div: operator.truediv,
    ast.Pow: operator.pow,
}
_UNOPS = {ast.USub: operator.neg, ast.UAdd: operator.pos}
_FUNCS = {
    "exp": np.exp,
    "log": np.log,
    "log1p": np.log1p,
    "sqrt": np.sqrt,
    "abs": np.abs,
    "sin": np.sin,
    "cos": np.cos,
}
_CONSTS = {"e": np.e, "pi": np.pi}


class ExpressionError(ValueError):
    pass


def compile_expression(src: str, names: tuple[str, ...]):
    """Parse ``src`` once and return a function of the given variable names."""
    try:
        tree = ast.parse(src, mode="eval")
    except SyntaxError as exc:
        raise ExpressionError(f"cannot parse expression {src!r}: {exc.msg}") from None

    def check(node):
        if isinstance(node, ast.Expression):
            return check(node.body)
        if isinstance(node, ast.BinOp) and type(node.op) in _BINOPS:
            check(node.left)
            check(node.right)
        elif isinstance(node, ast.UnaryOp) and type(node.op) in _UNOPS:
            check(node.operand)
        elif isinstance(node, ast.Call):
            if not (isinstance(node.func, ast.Name) and node.func.id in _FUNCS) or node.keywords:
                raise ExpressionError(f"function not allowed in {src!r}")
            for a in node.args:
                check(a)
        elif isinstance(node, ast.Name):
            if node.id not in names and node.id not in _CONSTS:
                raise ExpressionError(f"unknown name {node.id!r} in {src!r}")
        elif isinstance(node, ast.Constant):
            if not isinstance(node.value, (int, float)):
                raise ExpressionError(f"bad constant in {src!r}")
        else:
            raise ExpressionError(f"construct not allowed in {src!r}: {type(node).__name__}")

    check(tree)

    def ev(node, env):
        if isinstance(node, ast.Expression):
            return ev(node.body, env)
        if isinstance(node, ast.BinOp):
            return _BINOPS[type(node.op)](ev(node.left, env), ev(node.right, env))
        if isinstance(node, ast.UnaryOp):
            return _UNOPS[type(node.op)](ev(node.operand, env))
        if isinstance(node, ast.Call):
            return _FUNCS[node.func.id](*(ev(a, env) for a in node.args))
        if isinstance(node, ast.Name):
            return env[node.id] if node.id in env else _CONSTS[node.id]
        return float(node.value)

    def fn(**env):
        with np.errstate(all="ignore"):
            return ev(tree, {k: np.asarray(v, dtype=float) for k, v in env.items()})

    return fn
