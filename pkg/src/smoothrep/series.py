"""Weighted smooth cut series whose zero set outer-approximates a set/graph.

For cuts n = 1..N with optional ball part (x*_n, beta_n) and halfspace part
(z*_n, gamma_n), the representation value at (x, y) is

    phi(x, y) = sum_n w_n * theta(a_n(x)) * theta(b_n(y)),
    a_n(x) = (<x*_n, x> - |x|^2/2 - beta_n) / zeta_n,
    b_n(y) = (<z*_n, y> - gamma_n) / xi_n,
    zeta_n = 1 + |beta_n| + |x*_n|,   xi_n = 1 + |z*_n| + |gamma_n|,
    w_n = (zeta_n^n * xi_n^n * 2^n)^{-1},

with a missing ball/halfspace factor replaced by the constant 1 and the
corresponding normalizer by 1.  Since theta vanishes identically on
(-inf, 0], phi is exactly zero at every point outside all cut regions; in
particular it is zero (no rounding residue) on the represented set or
graph.  phi is smooth, nonnegative, convex in y, and weakly convex in x
with an explicitly computable modulus.

The zero set of a finite series is an outer approximation: it equals the
intersection of the N closed cut complements.  Residual reports quantify
the gap from the target set instead of assuming a limit.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .bump import SmoothBump, make_bump, theta_eval
from .cuts import BallCut, GraphCut, HalfspaceCut, as_graph_cut
from .errors import DomainError
from .multifunctions import ParamMultifunction, graph_distance_batch, inflate_box, sample_graph_points
from .oracles import SetOracle
from .sampling import sobol_box


@dataclass
class SeriesRep:
    """Assembled cut series with precomputed weights and normalizers."""

    cuts: list[GraphCut]
    bump: SmoothBump
    s_dim: int
    m_dim: int
    zeta: np.ndarray
    xi: np.ndarray
    weights: np.ndarray
    sample_box: np.ndarray | None = None  # (2, s+m) region used by diagnostics
    # packed arrays for vectorized evaluation
    _has_ball: np.ndarray = field(repr=False, default=None)
    _xstar: np.ndarray = field(repr=False, default=None)
    _beta: np.ndarray = field(repr=False, default=None)
    _has_half: np.ndarray = field(repr=False, default=None)
    _zstar: np.ndarray = field(repr=False, default=None)
    _gamma: np.ndarray = field(repr=False, default=None)

    @property
    def n_cuts(self) -> int:
        return len(self.cuts)


@dataclass
class RepCertificate:
    """Curvature and growth constants validated on samples.

    L bounds the x-curvature: every sampled Hessian block satisfies
    eig_min(Hxx + L (|y|+1) I) >= -1e-8 (L is derived analytically, the
    samples only validate it).  C1, C2 are empirical suprema of
    |D^k phi| / ((|y|+1)(|x|^k+1)); R is the same for the y-block
    derivatives against (|x|+1).
    """

    L: float
    C1: float
    C2: float
    R: float
    min_eig_slack: float
    n_samples: int
    argmax_C1: list
    valid: bool


@dataclass
class ResidualReport:
    """Zero-set fidelity on samples: r_in on the set, r_out off the set."""

    r_in: float
    r_out: float
    coverage_fraction: float
    n_in: int
    n_out: int
    delta: float


def assemble(cuts, bump: SmoothBump | None = None,
             s_dim: int | None = None, m_dim: int | None = None,
             sample_box=None) -> SeriesRep:
    """Build a SeriesRep from cuts (graph cuts or bare halfspace/ball cuts).

    Cut order matters: weights decay like (zeta xi 2)^{-n} in list order,
    so influential (coverage-greedy) cuts belong first.  The assembler
    never merges or reorders.
    """
    cuts = [as_graph_cut(c) for c in cuts]
    if not cuts:
        raise DomainError("cannot assemble an empty cut list")
    if bump is None:
        bump = make_bump()

    def dims():
        s = m = None
        for c in cuts:
            if c.ball is not None:
                s = c.ball.x_star.size
            if c.half is not None:
                m = c.half.z_star.size
        return s, m

    ds, dm = dims()
    s_dim = ds if s_dim is None else s_dim
    m_dim = dm if m_dim is None else m_dim
    if s_dim is None:
        s_dim = 0
    if m_dim is None:
        m_dim = 0

    n = len(cuts)
    has_ball = np.zeros(n, dtype=bool)
    xstar = np.zeros((n, s_dim))
    beta = np.zeros(n)
    has_half = np.zeros(n, dtype=bool)
    zstar = np.zeros((n, m_dim))
    gamma = np.zeros(n)
    zeta = np.ones(n)
    xi = np.ones(n)
    for i, c in enumerate(cuts):
        if c.ball is not None:
            if c.ball.x_star.size != s_dim:
                raise DomainError("ball cut dimension mismatch")
            has_ball[i] = True
            xstar[i] = c.ball.x_star
            beta[i] = c.ball.beta
            zeta[i] = 1.0 + abs(c.ball.beta) + float(np.linalg.norm(c.ball.x_star))
        if c.half is not None:
            if c.half.z_star.size != m_dim:
                raise DomainError("halfspace cut dimension mismatch")
            has_half[i] = True
            zstar[i] = c.half.z_star
            gamma[i] = c.half.gamma
            xi[i] = 1.0 + float(np.linalg.norm(c.half.z_star)) + abs(c.half.gamma)

    idx = np.arange(1, n + 1, dtype=float)
    log_w = -idx * (np.log(zeta) + np.log(xi) + np.log(2.0))
    with np.errstate(under="ignore"):
        weights = np.exp(log_w)

    return SeriesRep(
        cuts=cuts, bump=bump, s_dim=s_dim, m_dim=m_dim,
        zeta=zeta, xi=xi, weights=weights,
        sample_box=None if sample_box is None else np.asarray(sample_box, dtype=float),
        _has_ball=has_ball, _xstar=xstar, _beta=beta,
        _has_half=has_half, _zstar=zstar, _gamma=gamma,
    )


def _args(rep: SeriesRep, X: np.ndarray, Y: np.ndarray):
    """Normalized cut arguments a (ball) and b (halfspace), shape (B, n)."""
    B = X.shape[0]
    if rep.s_dim:
        a = (X @ rep._xstar.T - 0.5 * np.sum(X * X, axis=1, keepdims=True) - rep._beta) / rep.zeta
    else:
        a = np.zeros((B, rep.n_cuts))
    if rep.m_dim:
        b = (Y @ rep._zstar.T - rep._gamma) / rep.xi
    else:
        b = np.zeros((B, rep.n_cuts))
    return a, b


def _split(rep: SeriesRep, points: np.ndarray):
    points = np.atleast_2d(np.asarray(points, dtype=float))
    return points[:, : rep.s_dim], points[:, rep.s_dim :]


def eval_batch(rep: SeriesRep, X: np.ndarray, Y: np.ndarray) -> np.ndarray:
    """phi at paired rows of X (B, s) and Y (B, m)."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    Y = np.atleast_2d(np.asarray(Y, dtype=float))
    a, b = _args(rep, X, Y)
    f1 = np.where(rep._has_ball, theta_eval(rep.bump, a), 1.0)
    f2 = np.where(rep._has_half, theta_eval(rep.bump, b), 1.0)
    return (f1 * f2) @ rep.weights


def eval(rep: SeriesRep, x, y) -> float:  # noqa: A001 - spec operation name
    """phi(x, y) >= 0; exactly 0 iff every cut argument is <= 0."""
    x = np.atleast_1d(np.asarray(x, dtype=float)).reshape(-1)
    y = np.atleast_1d(np.asarray(y, dtype=float)).reshape(-1)
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
        raise DomainError("eval requires finite inputs")
    return float(eval_batch(rep, x[None, :], y[None, :])[0])


def derivatives(rep: SeriesRep, x, y, order: int = 1):
    """Gradient (order 1) or (gradient, Hessian) (order 2) over (x, y).

    Term-wise chain rule with the closed-form theta derivatives; the
    Hessian is symmetric by construction.
    """
    if order not in (1, 2):
        raise DomainError("order must be 1 or 2")
    x = np.atleast_1d(np.asarray(x, dtype=float)).reshape(-1)
    y = np.atleast_1d(np.asarray(y, dtype=float)).reshape(-1)
    s, m = rep.s_dim, rep.m_dim
    a, b = _args(rep, x[None, :], y[None, :])
    a, b = a[0], b[0]
    t1 = np.where(rep._has_ball, theta_eval(rep.bump, a), 1.0)
    t2 = np.where(rep._has_half, theta_eval(rep.bump, b), 1.0)
    d1 = np.where(rep._has_ball, theta_eval(rep.bump, a, 1), 0.0)
    d2 = np.where(rep._has_half, theta_eval(rep.bump, b, 1), 0.0)

    # d a_n / dx = (x*_n - x) / zeta_n ;  d b_n / dy = z*_n / xi_n
    ga = (rep._xstar - x) / rep.zeta[:, None] if s else np.zeros((rep.n_cuts, 0))
    gb = rep._zstar / rep.xi[:, None] if m else np.zeros((rep.n_cuts, 0))

    w = rep.weights
    grad_x = (w * d1 * t2) @ ga if s else np.zeros(0)
    grad_y = (w * t1 * d2) @ gb if m else np.zeros(0)
    grad = np.concatenate([grad_x, grad_y])
    if order == 1:
        return grad

    dd1 = np.where(rep._has_ball, theta_eval(rep.bump, a, 2), 0.0)
    dd2 = np.where(rep._has_half, theta_eval(rep.bump, b, 2), 0.0)
    H = np.zeros((s + m, s + m))
    if s:
        coeff = w * t2
        Hxx = (ga.T * (coeff * dd1)) @ ga
        Hxx -= np.eye(s) * np.sum(coeff * d1 / rep.zeta)
        H[:s, :s] = Hxx
    if m:
        coeff = w * t1
        H[s:, s:] = (gb.T * (coeff * dd2)) @ gb
    if s and m:
        Hxy = (ga.T * (w * d1 * d2)) @ gb
        H[:s, s:] = Hxy
        H[s:, :s] = Hxy.T
    return grad, H


def weak_convexity_modulus(rep: SeriesRep) -> float:
    """Analytic L with eig_min(Hxx(x, y)) >= -L (|y|+1) for all (x, y).

    Each term's x-Hessian is w_n t2 [theta''(a) v v^T / zeta^2 -
    theta'(a) I / zeta] with the first part PSD, so the modulus is the
    bound of w_n t2 theta'(a) / zeta.  theta' <= 1, and the halfspace
    factor obeys t2 <= 1 + (xi - 1)/xi * (|y|+1) <= (1 + (xi-1)/xi)(|y|+1).
    Pure value-space representations carry no x-curvature: L = 0.
    """
    if rep.s_dim == 0 or not np.any(rep._has_ball):
        return 0.0
    t2_growth = np.where(rep._has_half, 1.0 + (rep.xi - 1.0) / rep.xi, 1.0)
    mask = rep._has_ball.astype(float)
    return float(np.sum(mask * rep.weights * t2_growth / rep.zeta))


def certify(rep: SeriesRep, sample_budget: int = 20000, seed: int = 2024,
            sample_box=None) -> RepCertificate:
    """Validate the analytic weak-convexity modulus and fit growth constants."""
    box = _resolve_box(rep, sample_box)
    pts = sobol_box(sample_budget, box[0], box[1], seed)
    X, Y = pts[:, : rep.s_dim], pts[:, rep.s_dim :]
    L = weak_convexity_modulus(rep)

    n_eig = min(sample_budget, 1000)
    slack = np.inf
    for i in range(n_eig):
        _, H = derivatives(rep, X[i], Y[i], order=2)
        s = rep.s_dim
        if s:
            Hxx = H[:s, :s]
            ny = float(np.linalg.norm(Y[i]))
            w = np.linalg.eigvalsh(Hxx + L * (ny + 1.0) * np.eye(s))
            slack = min(slack, float(w[0]))
    if not np.isfinite(slack):
        slack = 0.0
    valid = slack >= -1e-8

    norm_y = np.linalg.norm(Y, axis=1) + 1.0
    norm_x = np.linalg.norm(X, axis=1)
    c1_vals = np.empty(sample_budget)
    c2_vals = np.empty(sample_budget)
    r_vals = np.empty(sample_budget)
    for i in range(sample_budget):
        g, H = derivatives(rep, X[i], Y[i], order=2)
        gn = float(np.linalg.norm(g))
        hn = float(np.linalg.norm(H, 2)) if H.size else 0.0
        c1_vals[i] = gn / (norm_y[i] * (norm_x[i] + 1.0))
        c2_vals[i] = hn / (norm_y[i] * (norm_x[i] ** 2 + 1.0))
        s = rep.s_dim
        gy = float(np.linalg.norm(g[s:]))
        hy = float(np.linalg.norm(H[s:, s:], 2)) if rep.m_dim else 0.0
        r_vals[i] = max(gy, hy) / (norm_x[i] + 1.0)
    i1 = int(np.argmax(c1_vals))
    return RepCertificate(
        L=L,
        C1=float(np.max(c1_vals)),
        C2=float(np.max(c2_vals)),
        R=float(np.max(r_vals)),
        min_eig_slack=slack,
        n_samples=sample_budget,
        argmax_C1=pts[i1].tolist(),
        valid=valid,
    )


def _resolve_box(rep: SeriesRep, sample_box) -> np.ndarray:
    if sample_box is not None:
        return np.asarray(sample_box, dtype=float)
    if rep.sample_box is not None:
        return rep.sample_box
    raise DomainError("no sample box available; pass sample_box=")


def zero_set_residual(
    rep: SeriesRep,
    target: SetOracle | ParamMultifunction,
    n_samples: int = 1000,
    delta: float = 0.2,
    seed: int = 99,
) -> ResidualReport:
    """r_in = max phi on set/graph samples (expect exactly 0);
    r_out = min phi on samples at distance >= delta (expect > 0)."""
    if delta <= 0:
        raise DomainError("delta must be positive")
    if isinstance(target, ParamMultifunction):
        X, Y = sample_graph_points(target, n_samples, seed)
        r_in = float(np.max(eval_batch(rep, X, Y))) if X.shape[0] else 0.0
        # The representation covers the graph over its domain box only, so
        # exterior samples stay inside it (the value box is pre-inflated).
        box = np.concatenate([target.domain_box, target.value_box], axis=1)
        pts = sobol_box(4 * n_samples, box[0], box[1], seed + 1)
        Xo, Yo = pts[:, : rep.s_dim], pts[:, rep.s_dim :]
        dist = graph_distance_batch(target, Xo, Yo)
        far = dist >= delta
        Xo, Yo = Xo[far][:n_samples], Yo[far][:n_samples]
        vals = eval_batch(rep, Xo, Yo)
    else:
        box = inflate_box(target.bounding_box)
        pts = sobol_box(4 * n_samples, box[0], box[1], seed)
        members = target.project_batch(pts)
        r_in = float(np.max(eval_batch(rep, np.zeros((members.shape[0], 0)), members)))
        dist = target.distance_batch(pts)
        far = pts[dist >= delta][:n_samples]
        vals = eval_batch(rep, np.zeros((far.shape[0], 0)), far)
    r_out = float(np.min(vals)) if vals.size else np.inf
    coverage = float(np.mean(vals > 0.0)) if vals.size else 0.0
    return ResidualReport(
        r_in=r_in, r_out=r_out, coverage_fraction=coverage,
        n_in=n_samples, n_out=int(vals.size), delta=delta,
    )


# -- serialization ----------------------------------------------------------


def rep_to_dict(rep: SeriesRep) -> dict:
    cuts = []
    for c in rep.cuts:
        entry: dict = {}
        if c.ball is not None:
            entry["ball"] = {"x_star": c.ball.x_star.tolist(), "beta": c.ball.beta}
        if c.half is not None:
            entry["half"] = {"z_star": c.half.z_star.tolist(), "gamma": c.half.gamma}
        cuts.append(entry)
    return {
        "s_dim": rep.s_dim,
        "m_dim": rep.m_dim,
        "offset_b": rep.bump.offset_b,
        "cuts": cuts,
        "sample_box": None if rep.sample_box is None else rep.sample_box.tolist(),
    }


def rep_from_dict(data: dict) -> SeriesRep:
    cuts = []
    for entry in data["cuts"]:
        ball = half = None
        if "ball" in entry:
            ball = BallCut(np.asarray(entry["ball"]["x_star"], dtype=float),
                           float(entry["ball"]["beta"]))
        if "half" in entry:
            half = HalfspaceCut(np.asarray(entry["half"]["z_star"], dtype=float),
                                float(entry["half"]["gamma"]))
        cuts.append(GraphCut(ball=ball, half=half))
    return assemble(
        cuts, make_bump(), s_dim=data["s_dim"], m_dim=data["m_dim"],
        sample_box=data.get("sample_box"),
    )


def rep_to_json(rep: SeriesRep) -> str:
    return json.dumps(rep_to_dict(rep), sort_keys=True)


def rep_from_json(text: str) -> SeriesRep:
    return rep_from_dict(json.loads(text))
