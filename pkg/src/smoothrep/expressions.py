"""Small polynomial/absolute-value expressions parsed from strings.

Instance files carry objectives and constraint functions as plain strings
such as ``"(x0 - 1)**2 + (y0 - 1)**2"`` or ``"abs(y0 - x0)"``.  They are
parsed through :mod:`ast` with a strict whitelist (names, numbers, + - * /
** with integer exponents, unary minus, ``abs``, ``min``, ``max``) and
evaluated together with their gradient by forward accumulation.  ``abs``
uses the sign convention abs'(0) = 0; ``min``/``max`` propagate the
gradient of the attained branch.
"""

from __future__ import annotations

import ast
from dataclasses import dataclass, field

import numpy as np

from .errors import InstanceError

_BINOPS = (ast.Add, ast.Sub, ast.Mult, ast.Div, ast.Pow)


@dataclass(frozen=True)
class Expression:
    """A scalar expression over named variables with gradient evaluation."""

    source: str
    var_names: tuple[str, ...]
    _tree: ast.expr = field(repr=False, compare=False)
    _index: dict = field(repr=False, compare=False)

    def value(self, env: np.ndarray) -> float:
        v, _ = self._eval(self._tree, np.asarray(env, dtype=float), False)
        return float(v)

    def value_and_grad(self, env: np.ndarray) -> tuple[float, np.ndarray]:
        env = np.asarray(env, dtype=float)
        v, g = self._eval(self._tree, env, True)
        if g is None:
            g = np.zeros(env.size)
        return float(v), g

    def value_batch(self, envs: np.ndarray) -> np.ndarray:
        """Vectorized evaluation over rows of envs (batch, n_vars)."""
        envs = np.asarray(envs, dtype=float)
        v, _ = self._eval_batch(self._tree, envs)
        return np.broadcast_to(v, envs.shape[:1]).astype(float)

    # -- recursive evaluation ------------------------------------------------

    def _eval(self, node, env, want_grad):
        zeros = (lambda: np.zeros(env.size)) if want_grad else (lambda: None)
        if isinstance(node, ast.Constant):
            return float(node.value), zeros()
        if isinstance(node, ast.Name):
            i = self._index[node.id]
            g = zeros()
            if want_grad:
                g[i] = 1.0
            return env[i], g
        if isinstance(node, ast.UnaryOp):
            v, g = self._eval(node.operand, env, want_grad)
            if isinstance(node.op, ast.USub):
                return -v, (-g if want_grad else None)
            return v, g
        if isinstance(node, ast.BinOp):
            a, ga = self._eval(node.left, env, want_grad)
            b, gb = self._eval(node.right, env, want_grad)
            if isinstance(node.op, ast.Add):
                return a + b, (ga + gb if want_grad else None)
            if isinstance(node.op, ast.Sub):
                return a - b, (ga - gb if want_grad else None)
            if isinstance(node.op, ast.Mult):
                return a * b, (a * gb + b * ga if want_grad else None)
            if isinstance(node.op, ast.Div):
                g = (ga * b - a * gb) / (b * b) if want_grad else None
                return a / b, g
            # Pow with non-negative integer exponent (validated at parse).
            k = int(b)
            v = a**k
            g = (k * a ** (k - 1) * ga if k > 0 else zeros()) if want_grad else None
            return v, g
        if isinstance(node, ast.Call):
            name = node.func.id
            vals = [self._eval(arg, env, want_grad) for arg in node.args]
            if name == "abs":
                v, g = vals[0]
                return abs(v), (np.sign(v) * g if want_grad else None)
            pick = max(range(len(vals)), key=lambda i: vals[i][0])
            if name == "min":
                pick = min(range(len(vals)), key=lambda i: vals[i][0])
            return vals[pick]
        raise InstanceError(f"unsupported expression node {node!r}")

    def _eval_batch(self, node, envs):
        if isinstance(node, ast.Constant):
            return float(node.value), None
        if isinstance(node, ast.Name):
            return envs[:, self._index[node.id]], None
        if isinstance(node, ast.UnaryOp):
            v, _ = self._eval_batch(node.operand, envs)
            return (-v if isinstance(node.op, ast.USub) else v), None
        if isinstance(node, ast.BinOp):
            a, _ = self._eval_batch(node.left, envs)
            b, _ = self._eval_batch(node.right, envs)
            if isinstance(node.op, ast.Add):
                return a + b, None
            if isinstance(node.op, ast.Sub):
                return a - b, None
            if isinstance(node.op, ast.Mult):
                return a * b, None
            if isinstance(node.op, ast.Div):
                return a / b, None
            return a ** int(b), None
        if isinstance(node, ast.Call):
            vals = [self._eval_batch(arg, envs)[0] for arg in node.args]
            if node.func.id == "abs":
                return np.abs(vals[0]), None
            red = np.minimum if node.func.id == "min" else np.maximum
            out = vals[0]
            for v in vals[1:]:
                out = red(out, v)
            return out, None
        raise InstanceError(f"unsupported expression node {node!r}")


def _validate(node, names: set[str]) -> None:
    if isinstance(node, ast.Expression):
        _validate(node.body, names)
    elif isinstance(node, ast.Constant):
        if not isinstance(node.value, (int, float)):
            raise InstanceError(f"non-numeric constant {node.value!r}")
    elif isinstance(node, ast.Name):
        if node.id not in names:
            raise InstanceError(f"unknown variable {node.id!r}")
    elif isinstance(node, ast.UnaryOp):
        if not isinstance(node.op, (ast.USub, ast.UAdd)):
            raise InstanceError("unsupported unary operator")
        _validate(node.operand, names)
    elif isinstance(node, ast.BinOp):
        if not isinstance(node.op, _BINOPS):
            raise InstanceError("unsupported binary operator")
        _validate(node.left, names)
        if isinstance(node.op, ast.Pow):
            exp = node.right
            if not (
                isinstance(exp, ast.Constant)
                and isinstance(exp.value, int)
                and exp.value >= 0
            ):
                raise InstanceError("exponent must be a non-negative integer literal")
        else:
            _validate(node.right, names)
    elif isinstance(node, ast.Call):
        if not (isinstance(node.func, ast.Name) and node.func.id in ("abs", "min", "max")):
            raise InstanceError("only abs/min/max calls are allowed")
        if node.func.id == "abs" and len(node.args) != 1:
            raise InstanceError("abs takes exactly one argument")
        if node.func.id in ("min", "max") and len(node.args) < 2:
            raise InstanceError("min/max take at least two arguments")
        if node.keywords:
            raise InstanceError("keyword arguments are not allowed")
        for arg in node.args:
            _validate(arg, names)
    else:
        raise InstanceError(f"unsupported syntax: {ast.dump(node)}")


def parse_expression(source: str, var_names) -> Expression:
    """Parse a whitelisted arithmetic expression over the given variables."""
    var_names = tuple(var_names)
    try:
        tree = ast.parse(source, mode="eval")
    except SyntaxError as exc:
        raise InstanceError(f"bad expression {source!r}: {exc}") from exc
    _validate(tree, set(var_names))
    index = {name: i for i, name in enumerate(var_names)}
    return Expression(source=source, var_names=var_names, _tree=tree.body, _index=index)


def xy_names(s_dim: int, m_dim: int) -> tuple[str, ...]:
    """Standard variable ordering: x0..x{s-1} then y0..y{m-1}."""
    return tuple(f"x{i}" for i in range(s_dim)) + tuple(f"y{j}" for j in range(m_dim))
