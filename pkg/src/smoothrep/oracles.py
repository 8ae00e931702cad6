"""Uniform access to closed sets: membership, projection, distance, support.

Every oracle carries its dimension, a convexity flag, and an axis-aligned
bounding box of its relevant region.  Projections are analytic where a
closed form exists (ball, box, point, halfspace), combinatorial for
polytopes (active-set enumeration over faces, exact at desk scale), a
minimum over components for unions, and convex 1-D/2-D search for
epigraphs of convex functions.  Support functions may return +-inf.

Projection accuracy is PROJ_TOL absolute throughout; downstream bisection
budgets assume it.
"""

from __future__ import annotations

from itertools import combinations

import numpy as np
from scipy.optimize import linprog, minimize

from .errors import ShapeSpecError
from .expressions import parse_expression

PROJ_TOL = 1e-9


def _as_box(box, dim: int) -> np.ndarray:
    box = np.asarray(box, dtype=float)
    if box.shape != (2, dim) or np.any(box[0] > box[1]):
        raise ShapeSpecError(f"bounding box must be (2, {dim}) with lo <= hi")
    return box


class SetOracle:
    """Base class; subclasses set dim, convex_flag, bounding_box."""

    dim: int
    convex_flag: bool
    bounding_box: np.ndarray  # rows (lo, hi)

    def is_empty(self) -> bool:
        return False

    def project(self, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def project_batch(self, xs: np.ndarray) -> np.ndarray:
        return np.array([self.project(x) for x in np.asarray(xs, dtype=float)])

    def distance(self, x) -> float:
        x = np.asarray(x, dtype=float)
        return float(np.linalg.norm(x - self.project(x)))

    def distance_batch(self, xs: np.ndarray) -> np.ndarray:
        xs = np.asarray(xs, dtype=float)
        return np.linalg.norm(xs - self.project_batch(xs), axis=1)

    def member(self, x, tol: float = PROJ_TOL) -> bool:
        return self.distance(x) <= tol

    def support(self, d) -> float:
        """sup over the set of <d, u>."""
        raise NotImplementedError


def distance(oracle: SetOracle, x) -> float:
    """Distance of x to the set represented by the oracle."""
    return oracle.distance(x)


class BallOracle(SetOracle):
    convex_flag = True

    def __init__(self, center, radius: float, bounding_box=None):
        self.center = np.asarray(center, dtype=float)
        if radius < 0:
            raise ShapeSpecError("ball radius must be >= 0")
        self.radius = float(radius)
        self.dim = self.center.size
        if bounding_box is None:
            bounding_box = np.stack([self.center - radius, self.center + radius])
        self.bounding_box = _as_box(bounding_box, self.dim)

    def project(self, x):
        x = np.asarray(x, dtype=float)
        gap = x - self.center
        nrm = np.linalg.norm(gap)
        if nrm <= self.radius:
            return x.copy()
        return self.center + self.radius * gap / nrm

    def project_batch(self, xs):
        xs = np.asarray(xs, dtype=float)
        gap = xs - self.center
        nrm = np.linalg.norm(gap, axis=1, keepdims=True)
        scale = np.where(nrm > self.radius, self.radius / np.maximum(nrm, 1e-300), 1.0)
        return self.center + gap * scale

    def support(self, d):
        d = np.asarray(d, dtype=float)
        return float(d @ self.center + self.radius * np.linalg.norm(d))


class PointOracle(BallOracle):
    def __init__(self, at, bounding_box=None):
        super().__init__(at, 0.0, bounding_box)


class BoxOracle(SetOracle):
    convex_flag = True

    def __init__(self, lo, hi, bounding_box=None):
        self.lo = np.asarray(lo, dtype=float)
        self.hi = np.asarray(hi, dtype=float)
        if self.lo.shape != self.hi.shape or np.any(self.lo > self.hi):
            raise ShapeSpecError("box needs lo <= hi componentwise")
        self.dim = self.lo.size
        if bounding_box is None:
            bounding_box = np.stack([self.lo, self.hi])
        self.bounding_box = _as_box(bounding_box, self.dim)

    def project(self, x):
        return np.clip(np.asarray(x, dtype=float), self.lo, self.hi)

    def project_batch(self, xs):
        return np.clip(np.asarray(xs, dtype=float), self.lo, self.hi)

    def support(self, d):
        d = np.asarray(d, dtype=float)
        return float(np.sum(np.maximum(d * self.lo, d * self.hi)))


class HalfspaceOracle(SetOracle):
    """{u: <a, u> <= c} with a != 0."""

    convex_flag = True

    def __init__(self, a, c: float, bounding_box=None):
        self.a = np.asarray(a, dtype=float)
        self.c = float(c)
        if np.linalg.norm(self.a) == 0:
            raise ShapeSpecError("halfspace normal must be nonzero")
        self.dim = self.a.size
        if bounding_box is None:
            raise ShapeSpecError("unbounded spec without bounding box")
        self.bounding_box = _as_box(bounding_box, self.dim)

    def project(self, x):
        x = np.asarray(x, dtype=float)
        slack = self.a @ x - self.c
        if slack <= 0:
            return x.copy()
        return x - slack / (self.a @ self.a) * self.a

    def project_batch(self, xs):
        xs = np.asarray(xs, dtype=float)
        slack = np.maximum(xs @ self.a - self.c, 0.0)
        return xs - slack[:, None] * (self.a / (self.a @ self.a))

    def support(self, d):
        d = np.asarray(d, dtype=float)
        na = np.linalg.norm(self.a)
        t = (d @ self.a) / (na * na)
        if t < 0 or np.linalg.norm(d - t * self.a) > 1e-12 * max(1.0, np.linalg.norm(d)):
            return np.inf
        return float(t * self.c)


class PolytopeOracle(SetOracle):
    """{u: A u <= c}; projection by enumeration of active face subsets."""

    convex_flag = True

    def __init__(self, A, c, bounding_box=None, allow_empty: bool = False):
        self.A = np.atleast_2d(np.asarray(A, dtype=float))
        self.c = np.asarray(c, dtype=float)
        if self.A.shape[0] != self.c.size:
            raise ShapeSpecError("polytope A rows must match c length")
        if self.A.shape[0] > 32:
            raise ShapeSpecError("polytope limited to 32 faces at desk scale")
        self.dim = self.A.shape[1]
        self._empty = not self._feasible()
        if self._empty and not allow_empty:
            raise ShapeSpecError("empty set spec")
        if bounding_box is None:
            bounding_box = self._derive_box()
        self.bounding_box = _as_box(bounding_box, self.dim)
        self._subsets = [
            list(S)
            for size in range(1, min(self.dim, self.A.shape[0]) + 1)
            for S in combinations(range(self.A.shape[0]), size)
        ]

    def _feasible(self) -> bool:
        res = linprog(
            np.zeros(self.dim), A_ub=self.A, b_ub=self.c,
            bounds=[(None, None)] * self.dim, method="highs",
        )
        return res.status in (0, 3)

    def _derive_box(self) -> np.ndarray:
        if self._empty:
            return np.zeros((2, self.dim))
        lo = np.empty(self.dim)
        hi = np.empty(self.dim)
        for i in range(self.dim):
            e = np.zeros(self.dim)
            e[i] = 1.0
            for sign, dest in ((1.0, lo), (-1.0, hi)):
                res = linprog(
                    sign * e, A_ub=self.A, b_ub=self.c,
                    bounds=[(None, None)] * self.dim, method="highs",
                )
                if res.status == 3:
                    raise ShapeSpecError("unbounded spec without bounding box")
                dest[i] = sign * res.fun
        pad = 1e-9 * (1.0 + np.abs(hi - lo))
        return np.stack([lo - pad, hi + pad])

    def is_empty(self) -> bool:
        return self._empty

    def member(self, x, tol: float = PROJ_TOL) -> bool:
        if self._empty:
            return False
        x = np.asarray(x, dtype=float)
        return bool(np.all(self.A @ x - self.c <= tol))

    def distance(self, x) -> float:
        if self._empty:
            return np.inf
        return super().distance(x)

    def distance_batch(self, xs):
        if self._empty:
            return np.full(np.asarray(xs).shape[0], np.inf)
        return super().distance_batch(xs)

    def project(self, x):
        return self.project_batch(np.asarray(x, dtype=float)[None, :])[0]

    def project_batch(self, xs):
        if self._empty:
            raise ShapeSpecError("projection onto empty polytope")
        xs = np.asarray(xs, dtype=float)
        n = xs.shape[0]
        slack = xs @ self.A.T - self.c
        best = np.where(np.all(slack <= PROJ_TOL, axis=1)[:, None], xs, np.nan)
        best_d2 = np.where(np.isnan(best[:, 0]), np.inf, 0.0)
        feas_tol = 1e-9
        for S in self._subsets:
            As = self.A[S]
            M = As @ As.T
            if np.linalg.cond(M) > 1e12:
                continue
            lam = np.linalg.solve(M, slack[:, S].T).T  # (n, |S|)
            z = xs - lam @ As
            ok = np.all(lam >= -1e-10, axis=1)
            ok &= np.all(z @ self.A.T - self.c <= feas_tol, axis=1)
            d2 = np.sum((xs - z) ** 2, axis=1)
            upd = ok & (d2 < best_d2)
            best[upd] = z[upd]
            best_d2[upd] = d2[upd]
        bad = ~np.isfinite(best_d2)
        if np.any(bad):  # numerically degenerate; fall back to an LP-free polish
            for i in np.flatnonzero(bad):
                best[i] = self._project_fallback(xs[i])
        return best

    def _project_fallback(self, x):
        res = minimize(
            lambda z: 0.5 * np.sum((z - x) ** 2),
            x0=self.project_batch(self.bounding_box.mean(axis=0)[None, :])[0]
            if np.all(np.isfinite(self.bounding_box))
            else np.zeros(self.dim),
            jac=lambda z: z - x,
            constraints=[{"type": "ineq", "fun": lambda z: self.c - self.A @ z,
                          "jac": lambda z: -self.A}],
            method="SLSQP",
        )
        return res.x

    def support(self, d):
        d = np.asarray(d, dtype=float)
        if self._empty:
            return -np.inf
        res = linprog(
            -d, A_ub=self.A, b_ub=self.c,
            bounds=[(None, None)] * self.dim, method="highs",
        )
        if res.status == 3:
            return np.inf
        if res.status != 0:
            return -np.inf
        return float(-res.fun)


class UnionOracle(SetOracle):
    """Finite union of component oracles (nonconvex in general).

    Projection ties between components are broken toward the
    lexicographically smallest projected point, so results are
    deterministic.
    """

    def __init__(self, parts, bounding_box=None):
        if not parts:
            raise ShapeSpecError("empty set spec")
        self.parts = list(parts)
        self.dim = self.parts[0].dim
        if any(p.dim != self.dim for p in self.parts):
            raise ShapeSpecError("union components must share dimension")
        self.convex_flag = False
        if bounding_box is None:
            los = np.min([p.bounding_box[0] for p in self.parts], axis=0)
            his = np.max([p.bounding_box[1] for p in self.parts], axis=0)
            bounding_box = np.stack([los, his])
        self.bounding_box = _as_box(bounding_box, self.dim)

    def project(self, x):
        return self.project_batch(np.asarray(x, dtype=float)[None, :])[0]

    def project_batch(self, xs):
        xs = np.asarray(xs, dtype=float)
        projs = np.stack([p.project_batch(xs) for p in self.parts])  # (P, n, d)
        dists = np.linalg.norm(projs - xs, axis=2)  # (P, n)
        tie = 1e-12 * (1.0 + np.min(dists, axis=0))
        best = np.argmin(dists, axis=0)
        out = projs[best, np.arange(xs.shape[0])]
        for p in range(projs.shape[0]):
            cand = projs[p]
            close = dists[p] <= dists[best, np.arange(xs.shape[0])] + tie
            for i in np.flatnonzero(close):
                if tuple(cand[i]) < tuple(out[i]):
                    out[i] = cand[i]
        return out

    def support(self, d):
        return max(p.support(d) for p in self.parts)


class EpigraphOracle(SetOracle):
    """{(y, a): f(y) <= a} for a convex f given on a y-box.

    Points are (y, alpha) in R^{m+1}.  Membership is exact; projection
    minimizes the convex map y -> |y - y0|^2 + max(f(y) - a0, 0)^2 by
    dense grid plus local polish (ternary search in 1-D, Nelder-Mead in
    2-D).
    """

    convex_flag = True

    def __init__(self, f, y_lo, y_hi, alpha_lo=None, alpha_hi=None):
        self.f = f  # callable y -> float, vectorized via f_batch if present
        self.y_lo = np.atleast_1d(np.asarray(y_lo, dtype=float))
        self.y_hi = np.atleast_1d(np.asarray(y_hi, dtype=float))
        self.m = self.y_lo.size
        if self.m > 2:
            raise ShapeSpecError("epigraph shapes support y-dim <= 2")
        self.dim = self.m + 1
        grid = self._grid(65)
        vals = self.f_batch(grid)
        f_lo = float(np.min(vals))
        f_hi = float(np.max(vals))
        self.alpha_lo = f_lo - 1.0 if alpha_lo is None else float(alpha_lo)
        self.alpha_hi = f_hi + 1.0 if alpha_hi is None else float(alpha_hi)
        self.bounding_box = np.stack(
            [np.append(self.y_lo, self.alpha_lo), np.append(self.y_hi, self.alpha_hi)]
        )

    def f_batch(self, ys: np.ndarray) -> np.ndarray:
        fb = getattr(self.f, "value_batch", None)
        if fb is not None:
            return fb(ys)
        return np.array([float(self.f(y)) for y in ys])

    def _grid(self, n: int) -> np.ndarray:
        axes = [np.linspace(self.y_lo[i], self.y_hi[i], n) for i in range(self.m)]
        mesh = np.meshgrid(*axes, indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=1)

    def member(self, x, tol: float = PROJ_TOL) -> bool:
        x = np.asarray(x, dtype=float)
        y, a = x[: self.m], x[self.m]
        if np.any(y < self.y_lo - tol) or np.any(y > self.y_hi + tol):
            return False
        return float(self.f_batch(y[None, :])[0]) <= a + tol

    def _dist2_profile(self, ys: np.ndarray, y0: np.ndarray, a0: float) -> np.ndarray:
        gaps = np.maximum(self.f_batch(ys) - a0, 0.0)
        return np.sum((ys - y0) ** 2, axis=1) + gaps**2

    def project(self, x):
        x = np.asarray(x, dtype=float)
        y0, a0 = x[: self.m], x[self.m]
        grid = self._grid(129)
        d2 = self._dist2_profile(grid, y0, a0)
        y = grid[int(np.argmin(d2))]
        if self.m == 1:
            span = (self.y_hi[0] - self.y_lo[0]) / 128.0
            lo = max(self.y_lo[0], y[0] - span)
            hi = min(self.y_hi[0], y[0] + span)
            for _ in range(80):
                m1 = lo + (hi - lo) / 3.0
                m2 = hi - (hi - lo) / 3.0
                d1 = self._dist2_profile(np.array([[m1]]), y0, a0)[0]
                d2v = self._dist2_profile(np.array([[m2]]), y0, a0)[0]
                if d1 <= d2v:
                    hi = m2
                else:
                    lo = m1
            y = np.array([(lo + hi) / 2.0])
        else:
            res = minimize(
                lambda yy: self._dist2_profile(
                    np.clip(yy, self.y_lo, self.y_hi)[None, :], y0, a0
                )[0],
                x0=y,
                method="Nelder-Mead",
                options={"xatol": 1e-12, "fatol": 1e-24, "maxiter": 400},
            )
            y = np.clip(res.x, self.y_lo, self.y_hi)
        a = max(a0, float(self.f_batch(y[None, :])[0]))
        return np.append(y, a)

    def support(self, d):
        d = np.asarray(d, dtype=float)
        dy, da = d[: self.m], d[self.m]
        if da > 1e-12:
            return np.inf
        grid = self._grid(257 if self.m == 1 else 65)
        vals = grid @ dy + da * self.f_batch(grid)
        return float(np.max(vals))


class FreeOracle(SetOracle):
    """The whole space (used for unconstrained demo runs)."""

    convex_flag = True

    def __init__(self, dim: int, bounding_box):
        self.dim = dim
        self.bounding_box = _as_box(bounding_box, dim)

    def project(self, x):
        return np.asarray(x, dtype=float).copy()

    def project_batch(self, xs):
        return np.asarray(xs, dtype=float).copy()

    def support(self, d):
        d = np.asarray(d, dtype=float)
        return 0.0 if np.linalg.norm(d) == 0 else np.inf


class EmptyOracle(SetOracle):
    """The empty set (legitimate as a parametric value set)."""

    convex_flag = True

    def __init__(self, dim: int):
        self.dim = dim
        self.bounding_box = np.zeros((2, dim))

    def is_empty(self) -> bool:
        return True

    def member(self, x, tol: float = PROJ_TOL) -> bool:
        return False

    def project(self, x):
        raise ShapeSpecError("projection onto empty set")

    def distance(self, x) -> float:
        return np.inf

    def distance_batch(self, xs):
        return np.full(np.asarray(xs).shape[0], np.inf)

    def support(self, d):
        return -np.inf


def make_shape_oracle(spec: dict) -> SetOracle:
    """Build a set oracle from a declarative shape spec (JSON-compatible)."""
    if not isinstance(spec, dict) or "kind" not in spec:
        raise ShapeSpecError(f"shape spec must be a dict with 'kind': {spec!r}")
    kind = spec["kind"]
    box = spec.get("bounding_box")
    if kind == "ball":
        return BallOracle(spec["center"], spec["radius"], box)
    if kind == "point":
        return PointOracle(spec["at"], box)
    if kind == "box":
        return BoxOracle(spec["lo"], spec["hi"], box)
    if kind == "halfspace":
        return HalfspaceOracle(spec["a"], spec["c"], box)
    if kind == "polytope":
        return PolytopeOracle(spec["A"], spec["c"], box)
    if kind == "union":
        return UnionOracle([make_shape_oracle(p) for p in spec["parts"]], box)
    if kind == "epigraph":
        y_lo = np.atleast_1d(np.asarray(spec["y_lo"], dtype=float))
        names = tuple(f"y{i}" for i in range(y_lo.size))
        f = parse_expression(spec["f"], names)
        return EpigraphOracle(
            _ExprFun(f), y_lo, spec["y_hi"], spec.get("alpha_lo"), spec.get("alpha_hi")
        )
    if kind == "free":
        if box is None:
            raise ShapeSpecError("unbounded spec without bounding box")
        return FreeOracle(int(spec["dim"]), box)
    raise ShapeSpecError(f"unknown shape kind {kind!r}")


class _ExprFun:
    """Adapter exposing an Expression as a scalar function with value_batch."""

    def __init__(self, expr):
        self._expr = expr
        self.value_batch = expr.value_batch

    def __call__(self, y):
        return self._expr.value(np.atleast_1d(y))
