"""Parametric set-valued maps x -> M(x) over a finite-dimensional parameter.

Each family exposes the value set at a parameter point as a SetOracle,
support values sigma_{M(x)}(d) (possibly +-inf), a domain box for the
parameter, and a value box enclosing the relevant part of the value space
(used for sampling).  `param_independent` marks families whose value set
does not depend on x; cut generation exploits it.

Graph helpers at the bottom sample points on the graph and estimate the
distance of an arbitrary (x, y) to the graph by a parameter-grid search
with local refinement (exact enough at desk scale for residual filters).
"""

from __future__ import annotations

import numpy as np

from .errors import ShapeSpecError
from .expressions import parse_expression, xy_names
from .oracles import (
    BallOracle,
    EpigraphOracle,
    FreeOracle,
    HalfspaceOracle,
    PointOracle,
    PolytopeOracle,
    SetOracle,
    _ExprFun,
    _as_box,
    make_shape_oracle,
)


def inflate_box(box: np.ndarray, rel: float = 0.5, pad: float = 0.5) -> np.ndarray:
    """Symmetric inflation of an axis-aligned box (for exterior sampling)."""
    box = np.asarray(box, dtype=float)
    half = (box[1] - box[0]) / 2.0
    mid = (box[1] + box[0]) / 2.0
    grow = half * (1.0 + rel) + pad
    return np.stack([mid - grow, mid + grow])


class ParamMultifunction:
    """Base class; subclasses define value_set and support."""

    param_dim: int
    value_dim: int
    values_convex: bool
    param_independent: bool = False
    domain_box: np.ndarray
    value_box: np.ndarray

    def value_set(self, x: np.ndarray) -> SetOracle:
        raise NotImplementedError

    def support(self, x, d) -> float:
        return self.value_set(np.asarray(x, dtype=float)).support(d)

    def member(self, x, y, tol: float = 1e-9) -> bool:
        return self.value_set(np.asarray(x, dtype=float)).member(y, tol)

    def value_distance_batch(self, xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
        """d(y_i, M(x_i)) for paired rows; generic loop, overridden when cheap."""
        return np.array(
            [self.value_set(x).distance(y) for x, y in zip(xs, ys)]
        )


class ConstantFamily(ParamMultifunction):
    param_independent = True

    def __init__(self, shape: SetOracle, domain_box, value_box=None):
        self.shape = shape
        self.domain_box = np.asarray(domain_box, dtype=float)
        self.param_dim = self.domain_box.shape[1]
        self.value_dim = shape.dim
        self.values_convex = shape.convex_flag
        self.value_box = (
            inflate_box(shape.bounding_box) if value_box is None
            else _as_box(value_box, shape.dim)
        )

    def value_set(self, x):
        return self.shape

    def support(self, x, d):
        return self.shape.support(d)

    def value_distance_batch(self, xs, ys):
        return self.shape.distance_batch(ys)


class AffinePointFamily(ParamMultifunction):
    """Singleton values M(x) = {W x + v}."""

    values_convex = True

    def __init__(self, W, v, domain_box, value_box=None):
        self.W = np.atleast_2d(np.asarray(W, dtype=float))
        self.v = np.asarray(v, dtype=float)
        self.value_dim, self.param_dim = self.W.shape
        self.domain_box = _as_box(domain_box, self.param_dim)
        if value_box is None:
            lo = self.v + np.sum(
                np.minimum(self.W * self.domain_box[0], self.W * self.domain_box[1]),
                axis=1,
            )
            hi = self.v + np.sum(
                np.maximum(self.W * self.domain_box[0], self.W * self.domain_box[1]),
                axis=1,
            )
            value_box = inflate_box(np.stack([lo, hi]))
        self.value_box = _as_box(value_box, self.value_dim)

    def value_set(self, x):
        return PointOracle(self.W @ np.asarray(x, dtype=float) + self.v)

    def support(self, x, d):
        return float(np.asarray(d, dtype=float) @ (self.W @ np.asarray(x, dtype=float) + self.v))

    def value_distance_batch(self, xs, ys):
        return np.linalg.norm(ys - (xs @ self.W.T + self.v), axis=1)


class AffinePolytopeFamily(ParamMultifunction):
    """M(x) = {y: A y <= c + B x}; values may be empty for some x."""

    values_convex = True

    def __init__(self, A, B, c, domain_box, value_box):
        self.A = np.atleast_2d(np.asarray(A, dtype=float))
        self.B = np.atleast_2d(np.asarray(B, dtype=float))
        self.c = np.asarray(c, dtype=float)
        self.value_dim = self.A.shape[1]
        self.param_dim = self.B.shape[1]
        if self.B.shape[0] != self.A.shape[0] or self.c.size != self.A.shape[0]:
            raise ShapeSpecError("affine polytope family: A, B, c row mismatch")
        self.domain_box = _as_box(domain_box, self.param_dim)
        self.value_box = _as_box(value_box, self.value_dim)

    def value_set(self, x):
        x = np.asarray(x, dtype=float)
        return PolytopeOracle(
            self.A, self.c + self.B @ x,
            bounding_box=self.value_box, allow_empty=True,
        )


class MovingBallFamily(ParamMultifunction):
    """M(x) = ball(h(x), r(x)) with expression-valued center and radius."""

    values_convex = True

    def __init__(self, center_exprs, radius_expr, domain_box, value_box=None):
        self.param_dim = np.asarray(domain_box, dtype=float).shape[1]
        names = tuple(f"x{i}" for i in range(self.param_dim))
        self.h = [parse_expression(e, names) for e in center_exprs]
        self.r = parse_expression(radius_expr, names)
        self.value_dim = len(self.h)
        self.domain_box = _as_box(domain_box, self.param_dim)
        if value_box is None:
            corners = _box_corners(self.domain_box)
            cs = np.array([[e.value(c) for e in self.h] for c in corners])
            rs = np.array([self.r.value(c) for c in corners])
            value_box = inflate_box(
                np.stack([cs.min(axis=0) - rs.max(), cs.max(axis=0) + rs.max()])
            )
        self.value_box = _as_box(value_box, self.value_dim)

    def value_set(self, x):
        x = np.asarray(x, dtype=float)
        r = self.r.value(x)
        if r < 0:
            raise ShapeSpecError(f"moving ball radius negative at x={x}")
        return BallOracle(np.array([e.value(x) for e in self.h]), r)

    def support(self, x, d):
        x = np.asarray(x, dtype=float)
        d = np.asarray(d, dtype=float)
        center = np.array([e.value(x) for e in self.h])
        return float(d @ center + self.r.value(x) * np.linalg.norm(d))

    def value_distance_batch(self, xs, ys):
        centers = np.stack(
            [np.array([e.value(x) for e in self.h]) for x in xs]
        )
        rs = np.array([self.r.value(x) for x in xs])
        return np.maximum(np.linalg.norm(ys - centers, axis=1) - rs, 0.0)


class LowerBoundFamily(ParamMultifunction):
    """Half-line values M(x) = [g(x), +inf) in R."""

    values_convex = True
    value_dim = 1

    def __init__(self, g_expr, domain_box, value_box=None):
        self.domain_box = np.asarray(domain_box, dtype=float)
        self.param_dim = self.domain_box.shape[1]
        names = tuple(f"x{i}" for i in range(self.param_dim))
        self.g = parse_expression(g_expr, names)
        if value_box is None:
            corners = _box_corners(self.domain_box)
            vals = np.array([self.g.value(c) for c in corners])
            value_box = inflate_box(np.array([[vals.min()], [vals.max()]]))
        self.value_box = _as_box(value_box, 1)

    def g_batch(self, xs: np.ndarray) -> np.ndarray:
        return self.g.value_batch(np.atleast_2d(xs))

    def value_set(self, x):
        gx = self.g.value(np.asarray(x, dtype=float))
        return HalfspaceOracle(
            np.array([-1.0]), -gx,
            bounding_box=np.array([[gx], [max(self.value_box[1, 0], gx + 1.0)]]),
        )

    def support(self, x, d):
        d = float(np.asarray(d, dtype=float).reshape(()))
        if d > 0:
            return np.inf
        if d == 0:
            return 0.0
        return d * self.g.value(np.asarray(x, dtype=float))

    def value_distance_batch(self, xs, ys):
        return np.maximum(self.g_batch(xs) - ys[:, 0], 0.0)


class EpigraphFamily(ParamMultifunction):
    """M(x) = {(y, a): f(x, y) <= a}, the value set being an epigraph."""

    values_convex = True

    def __init__(self, f_expr, y_lo, y_hi, domain_box, alpha_lo=None, alpha_hi=None):
        self.y_lo = np.atleast_1d(np.asarray(y_lo, dtype=float))
        self.y_hi = np.atleast_1d(np.asarray(y_hi, dtype=float))
        self.y_dim = self.y_lo.size
        self.value_dim = self.y_dim + 1
        self.domain_box = np.asarray(domain_box, dtype=float)
        self.param_dim = self.domain_box.shape[1]
        self.f = parse_expression(f_expr, xy_names(self.param_dim, self.y_dim))
        if alpha_lo is None or alpha_hi is None:
            xs = _box_corners(self.domain_box) if self.param_dim else np.zeros((1, 0))
            vals = []
            grid = np.linspace(0.0, 1.0, 17)
            for x in xs:
                for t in grid:
                    y = self.y_lo + t * (self.y_hi - self.y_lo)
                    vals.append(self.f.value(np.concatenate([x, y])))
            alpha_lo = min(vals) - 1.0 if alpha_lo is None else alpha_lo
            alpha_hi = max(vals) + 1.0 if alpha_hi is None else alpha_hi
        self.alpha_lo = float(alpha_lo)
        self.alpha_hi = float(alpha_hi)
        self.value_box = np.stack(
            [np.append(self.y_lo, self.alpha_lo), np.append(self.y_hi, self.alpha_hi)]
        )

    def restricted(self, x) -> "_RestrictedExpr":
        return _RestrictedExpr(self.f, np.asarray(x, dtype=float), self.y_dim)

    def value_set(self, x):
        return EpigraphOracle(
            self.restricted(x), self.y_lo, self.y_hi,
            alpha_lo=self.alpha_lo, alpha_hi=self.alpha_hi,
        )


class _RestrictedExpr:
    """f(x, .) for a fixed parameter x, with batch evaluation over y."""

    def __init__(self, expr, x, y_dim):
        self._expr = expr
        self._x = x
        self._y_dim = y_dim

    def __call__(self, y):
        return self._expr.value(np.concatenate([self._x, np.atleast_1d(y)]))

    def value_batch(self, ys):
        ys = np.atleast_2d(np.asarray(ys, dtype=float))
        envs = np.concatenate(
            [np.broadcast_to(self._x, (ys.shape[0], self._x.size)), ys], axis=1
        )
        return self._expr.value_batch(envs)


class FreeFamily(ParamMultifunction):
    """M(x) = R^m for every x (no constraint)."""

    values_convex = True
    param_independent = True

    def __init__(self, value_dim, domain_box, value_box):
        self.value_dim = int(value_dim)
        self.domain_box = np.asarray(domain_box, dtype=float)
        self.param_dim = self.domain_box.shape[1]
        self.value_box = _as_box(value_box, self.value_dim)

    def value_set(self, x):
        return FreeOracle(self.value_dim, self.value_box)

    def value_distance_batch(self, xs, ys):
        return np.zeros(ys.shape[0])


def _box_corners(box: np.ndarray) -> np.ndarray:
    box = np.asarray(box, dtype=float)
    dim = box.shape[1]
    if dim == 0:
        return np.zeros((1, 0))
    grids = np.meshgrid(*[box[:, i] for i in range(dim)], indexing="ij")
    return np.stack([g.ravel() for g in grids], axis=1)


def make_param_multifunction(spec: dict) -> ParamMultifunction:
    """Build a parametric multifunction from a declarative spec."""
    if not isinstance(spec, dict) or "kind" not in spec:
        raise ShapeSpecError(f"multifunction spec must be a dict with 'kind': {spec!r}")
    kind = spec["kind"]
    if kind == "constant":
        shape = make_shape_oracle(spec["shape"])
        pmf = ConstantFamily(shape, spec["domain_box"], spec.get("value_box"))
    elif kind == "affine_point":
        pmf = AffinePointFamily(spec["W"], spec["v"], spec["domain_box"], spec.get("value_box"))
    elif kind == "affine_polytope":
        pmf = AffinePolytopeFamily(
            spec["A"], spec["B"], spec["c"], spec["domain_box"], spec["value_box"]
        )
    elif kind == "moving_ball":
        pmf = MovingBallFamily(
            spec["center"], spec["radius"], spec["domain_box"], spec.get("value_box")
        )
    elif kind == "lower_bound":
        pmf = LowerBoundFamily(spec["g"], spec["domain_box"], spec.get("value_box"))
    elif kind == "epigraph":
        pmf = EpigraphFamily(
            spec["f"], spec["y_lo"], spec["y_hi"], spec["domain_box"],
            spec.get("alpha_lo"), spec.get("alpha_hi"),
        )
    elif kind == "free":
        pmf = FreeFamily(spec["value_dim"], spec["domain_box"], spec["value_box"])
    else:
        raise ShapeSpecError(f"unknown multifunction kind {kind!r}")
    if spec.get("values_convex", True) and not pmf.values_convex:
        raise ShapeSpecError("values_convex demanded but spec component nonconvex")
    return pmf


def sample_graph_points(
    pmf: ParamMultifunction, n: int, seed: int
) -> tuple[np.ndarray, np.ndarray]:
    """n points on the graph: Sobol parameters, value-box draws projected in."""
    from .sampling import sobol_box

    xs = sobol_box(n, pmf.domain_box[0], pmf.domain_box[1], seed)
    y0 = sobol_box(n, pmf.value_box[0], pmf.value_box[1], seed + 1)
    keep_x, keep_y = [], []
    for x, y in zip(xs, y0):
        vs = pmf.value_set(x)
        if vs.is_empty():
            continue
        keep_x.append(x)
        keep_y.append(vs.project(y))
    if not keep_x:
        return np.zeros((0, pmf.param_dim)), np.zeros((0, pmf.value_dim))
    return np.array(keep_x), np.array(keep_y)


def graph_distance_batch(
    pmf: ParamMultifunction, xs: np.ndarray, ys: np.ndarray, n_grid: int = 513
) -> np.ndarray:
    """Distance of each (x_i, y_i) to the graph of M.

    Minimizes sqrt(|x - x'|^2 + d(y, M(x'))^2) over a dense parameter grid
    (looping over the grid, vectorized over the points); exact for
    param-independent families.  Grid resolution bounds the overestimate
    by about half a grid step, which is enough for residual filtering.
    """
    xs = np.atleast_2d(np.asarray(xs, dtype=float))
    ys = np.atleast_2d(np.asarray(ys, dtype=float))
    if pmf.param_independent or pmf.param_dim == 0:
        return pmf.value_distance_batch(xs, ys)
    if pmf.param_dim == 1:
        grid = np.linspace(pmf.domain_box[0, 0], pmf.domain_box[1, 0], n_grid)[:, None]
    else:
        per_axis = max(9, int(round(n_grid ** (1.0 / pmf.param_dim))))
        axes = [np.linspace(pmf.domain_box[0, i], pmf.domain_box[1, i], per_axis)
                for i in range(pmf.param_dim)]
        mesh = np.meshgrid(*axes, indexing="ij")
        grid = np.stack([m.ravel() for m in mesh], axis=1)
    best = np.full(xs.shape[0], np.inf)
    for xg in grid:
        xg_rep = np.broadcast_to(xg, xs.shape)
        vert = pmf.value_distance_batch(xg_rep, ys)
        horiz = np.linalg.norm(xs - xg, axis=1)
        np.minimum(best, np.hypot(horiz, vert), out=best)
    return best
