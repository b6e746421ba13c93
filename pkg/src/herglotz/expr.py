"""Parse arithmetic expression strings into jet-compatible callables.

Only a whitelisted subset of Python expression syntax is accepted: numeric
literals, named symbols, ``+ - * / **``, unary minus and calls to the
elementary functions exported by :mod:`herglotz.ad`. ``^`` is accepted as a
synonym for ``**``.
"""

from __future__ import annotations

import ast
import re
from typing import Iterable, Mapping

from . import ad
from .errors import ExpressionError

FUNCTIONS = {
    "sin": ad.sin,
    "cos": ad.cos,
    "tan": ad.tan,
    "exp": ad.exp,
    "log": ad.log,
    "sqrt": ad.sqrt,
    "tanh": ad.tanh,
}
CONSTANTS = {"pi": 3.141592653589793, "e": 2.718281828459045}

_BINOPS = {
    ast.Add: lambda a, b: a + b,
    ast.Sub: lambda a, b: a - b,
    ast.Mult: lambda a, b: a * b,
    ast.Div: lambda a, b: a / b,
    ast.Pow: lambda a, b: a**b,
}


def _compile(node, allowed: set[str]):
    if isinstance(node, ast.Expression):
        return _compile(node.body, allowed)
    if isinstance(node, ast.Constant):
        if isinstance(node.value, bool) or not isinstance(node.value, (int, float)):
            raise ExpressionError(f"unsupported literal {node.value!r}")
        c = float(node.value)
        return lambda env: c
    if isinstance(node, ast.Name):
        name = node.id
        if name in CONSTANTS:
            c = CONSTANTS[name]
            return lambda env: c
        if name not in allowed:
            raise ExpressionError(f"unknown symbol {name!r}")
        return lambda env: env[name]
    if isinstance(node, ast.UnaryOp):
        inner = _compile(node.operand, allowed)
        if isinstance(node.op, ast.USub):
            return lambda env: -inner(env)
        if isinstance(node.op, ast.UAdd):
            return inner
        raise ExpressionError("unsupported unary operator")
    if isinstance(node, ast.BinOp):
        op = _BINOPS.get(type(node.op))
        if op is None:
            raise ExpressionError(f"unsupported operator {type(node.op).__name__}")
        left = _compile(node.left, allowed)
        right = _compile(node.right, allowed)
        return lambda env: op(left(env), right(env))
    if isinstance(node, ast.Call):
        if not isinstance(node.func, ast.Name) or node.func.id not in FUNCTIONS:
            raise ExpressionError("only sin, cos, tan, exp, log, sqrt, tanh calls are allowed")
        if len(node.args) != 1 or node.keywords:
            raise ExpressionError(f"{node.func.id} takes exactly one argument")
        fn = FUNCTIONS[node.func.id]
        arg = _compile(node.args[0], allowed)
        return lambda env: fn(arg(env))
    raise ExpressionError(f"unsupported syntax: {type(node).__name__}")


def symbols_in(text: str) -> set[str]:
    tree = _parse(text)
    return {n.id for n in ast.walk(tree) if isinstance(n, ast.Name)} - set(FUNCTIONS) - set(CONSTANTS)


def _parse(text: str) -> ast.Expression:
    if not isinstance(text, str) or not text.strip():
        raise ExpressionError("expression must be a non-empty string")
    try:
        return ast.parse(text.replace("^", "**"), mode="eval")
    except SyntaxError as exc:
        raise ExpressionError(f"cannot parse {text!r}: {exc.msg}") from None


def compile_expression(text: str, variables: Iterable[str], params: Mapping[str, float] | None = None):
    """Return ``fn(env) -> value`` for ``text``; ``env`` maps variable names to values.

    ``params`` are bound as constants at compile time and shadow nothing:
    a name cannot be both a variable and a parameter.
    """
    params = dict(params or {})
    variables = set(variables)
    clash = variables & set(params)
    if clash:
        raise ExpressionError(f"names used as both variable and parameter: {sorted(clash)}")
    fn = _compile(_parse(text), variables | set(params))

    def evaluate(env):
        return fn({**params, **env})

    return evaluate


_QV = re.compile(r"^[qv](\d+)$")


def lagrangian_from_expression(text: str, n_dof: int, params: Mapping[str, float] | None = None):
    """Compile ``text`` over ``t, q1..qN, v1..vN, S`` into ``L(t, q, v, S)``."""
    names = ["t", "S"] + [f"q{i + 1}" for i in range(n_dof)] + [f"v{i + 1}" for i in range(n_dof)]
    for sym in symbols_in(text):
        m = _QV.match(sym)
        if m and not 1 <= int(m.group(1)) <= n_dof:
            raise ExpressionError(f"{sym} out of range for n_dof={n_dof}")
    fn = compile_expression(text, names, params)

    def L(t, q, v, S):
        env = {"t": t, "S": S}
        for i in range(n_dof):
            env[f"q{i + 1}"] = q[i]
            env[f"v{i + 1}"] = v[i]
        return fn(env)

    return L


def generator_from_expression(text: str, n_dof: int, params: Mapping[str, float] | None = None):
    """Compile a symmetry-generator component over ``t, q1..qN`` only.

    Velocity- or action-dependent generators are rejected.
    """
    bad = {s for s in symbols_in(text) if s == "S" or re.match(r"^v\d+$", s)}
    if bad:
        raise ExpressionError(f"generators may depend on t and q only; got {sorted(bad)}")
    names = ["t"] + [f"q{i + 1}" for i in range(n_dof)]
    fn = compile_expression(text, names, params)

    def g(t, q):
        env = {"t": t}
        for i in range(n_dof):
            env[f"q{i + 1}"] = q[i]
        return fn(env)

    return g


def time_function_from_expression(text: str, params: Mapping[str, float] | None = None):
    fn = compile_expression(text, ["t"], params)
    return lambda t, *rest: fn({"t": t})
