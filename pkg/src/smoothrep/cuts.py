"""Separating cut families whose regions tile the complement of a set/graph.

Three cut kinds:

* HalfspaceCut: open region {u: <z*, u> > gamma} disjoint from a convex set
  (the set lies in the closed complement halfspace).
* BallCut: open region {x: <x, x*> - |x|^2/2 > beta}, i.e. the open ball of
  radius eps = sqrt(|x*|^2 - 2 beta) centered at x*, disjoint from a closed
  set.
* GraphCut: a product (ball region in parameter space) x (halfspace region
  in value space) disjoint from the graph of a parametric multifunction;
  either factor may be absent (None), meaning the whole space.

Countable dense families are replaced by seeded low-discrepancy exterior
sampling: each exterior sample yields one cut, near-duplicates are dropped,
and the survivors are ordered greedily so that each next cut covers the
most exterior samples not covered so far.  The returned report carries the
achieved coverage fraction, so the truncation quality is visible rather
than assumed.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import CertificateError, DomainError, SeparationError
from .multifunctions import ParamMultifunction, inflate_box
from .oracles import SetOracle
from .sampling import sobol_box


@dataclass(frozen=True)
class HalfspaceCut:
    """Open halfspace region {u: <z_star, u> > gamma}."""

    z_star: np.ndarray
    gamma: float

    def __post_init__(self):
        object.__setattr__(self, "z_star", np.asarray(self.z_star, dtype=float))
        if np.linalg.norm(self.z_star) == 0:
            raise DomainError("halfspace cut needs a nonzero normal")

    def contains(self, u) -> bool:
        return float(np.asarray(u, dtype=float) @ self.z_star) > self.gamma

    def contains_batch(self, us: np.ndarray) -> np.ndarray:
        return np.asarray(us, dtype=float) @ self.z_star > self.gamma


@dataclass(frozen=True)
class BallCut:
    """Open region {x: <x, x_star> - |x|^2/2 > beta} = open ball around x_star."""

    x_star: np.ndarray
    beta: float

    def __post_init__(self):
        object.__setattr__(self, "x_star", np.asarray(self.x_star, dtype=float))
        if self.x_star @ self.x_star - 2.0 * self.beta <= 0:
            raise DomainError("ball cut has nonpositive squared radius")

    @property
    def radius(self) -> float:
        return float(np.sqrt(self.x_star @ self.x_star - 2.0 * self.beta))

    def contains(self, x) -> bool:
        x = np.asarray(x, dtype=float)
        return float(x @ self.x_star - 0.5 * x @ x) > self.beta

    def contains_batch(self, xs: np.ndarray) -> np.ndarray:
        xs = np.asarray(xs, dtype=float)
        return xs @ self.x_star - 0.5 * np.sum(xs * xs, axis=1) > self.beta

    @staticmethod
    def from_center_radius(center, radius: float) -> "BallCut":
        center = np.asarray(center, dtype=float)
        return BallCut(center, 0.5 * float(center @ center) - 0.5 * radius**2)


@dataclass(frozen=True)
class GraphCut:
    """Product region (ball in parameter space) x (halfspace in value space)."""

    ball: BallCut | None
    half: HalfspaceCut | None

    def contains(self, x, y) -> bool:
        ok = True
        if self.ball is not None:
            ok = ok and self.ball.contains(x)
        if self.half is not None:
            ok = ok and self.half.contains(y)
        return ok

    def contains_batch(self, xs, ys) -> np.ndarray:
        n = np.asarray(ys).shape[0] if self.ball is None else np.asarray(xs).shape[0]
        mask = np.ones(n, dtype=bool)
        if self.ball is not None:
            mask &= self.ball.contains_batch(xs)
        if self.half is not None:
            mask &= self.half.contains_batch(ys)
        return mask


def as_graph_cut(cut) -> GraphCut:
    """Wrap a bare halfspace/ball cut as a degenerate graph cut."""
    if isinstance(cut, GraphCut):
        return cut
    if isinstance(cut, HalfspaceCut):
        return GraphCut(ball=None, half=cut)
    if isinstance(cut, BallCut):
        return GraphCut(ball=cut, half=None)
    raise DomainError(f"not a cut: {cut!r}")


@dataclass
class CoverReport:
    """Diagnostics from a complement-cover run."""

    n_candidates: int = 0
    n_exterior: int = 0
    n_deduped: int = 0
    n_skipped: int = 0
    coverage_fraction: float = 0.0
    warning: str | None = None


@dataclass
class CoverResult:
    cuts: list = field(default_factory=list)
    report: CoverReport = field(default_factory=CoverReport)


def separate_point_convex(oracle: SetOracle, p) -> HalfspaceCut:
    """Supporting halfspace separating an exterior point from a convex set.

    z* is the unit vector from the projection toward p and gamma the
    support value at the projection, so the set lies in {<z*,u> <= gamma}
    while <z*,p> = gamma + d(p, set) > gamma.
    """
    if not oracle.convex_flag:
        raise DomainError("halfspace separation requires a convex oracle")
    p = np.asarray(p, dtype=float)
    proj = oracle.project(p)
    gap = p - proj
    dist = float(np.linalg.norm(gap))
    if dist <= 1e-12:
        raise SeparationError("point lies in the set; no separation exists")
    z = gap / dist
    return HalfspaceCut(z_star=z, gamma=float(z @ proj))


def _dedup_key(vec: np.ndarray, scalars: tuple, tol: float) -> tuple:
    return tuple(np.round(vec / tol).astype(np.int64)) + tuple(
        int(round(s / tol)) for s in scalars
    )


def _greedy_order(
    cuts: list, covers: np.ndarray, budget: int, n_protected: int = 0
) -> tuple[list, float]:
    """Select and order cuts so each next one covers the most new samples.

    covers: boolean matrix (n_cuts, n_samples).  The first `n_protected`
    cuts are always selected (they come from structural tiling passes);
    greedy gains fill the remaining budget.  The final list is then
    re-ordered greedily as a whole, putting high-coverage cuts first where
    the series weights are largest.  Ties fall back to candidate order,
    keeping runs deterministic.
    """
    n_cuts, n_samples = covers.shape
    n_protected = min(n_protected, n_cuts, budget)
    selected = list(range(n_protected))
    uncovered = np.ones(n_samples, dtype=bool)
    for i in selected:
        uncovered &= ~covers[i]
    remaining = list(range(n_protected, n_cuts))
    while remaining and len(selected) < budget:
        gains = np.array([np.count_nonzero(covers[i] & uncovered) for i in remaining])
        j = int(np.argmax(gains))
        pick = remaining.pop(j)
        selected.append(pick)
        uncovered &= ~covers[pick]
    frac = 1.0 - (np.count_nonzero(uncovered) / n_samples if n_samples else 0.0)

    ordered: list[int] = []
    todo = list(selected)
    open_mask = np.ones(n_samples, dtype=bool)
    while todo:
        gains = np.array([np.count_nonzero(covers[i] & open_mask) for i in todo])
        j = int(np.argmax(gains))
        pick = todo.pop(j)
        ordered.append(pick)
        open_mask &= ~covers[pick]
    return [cuts[i] for i in ordered], frac


def cover_complement(
    oracle: SetOracle,
    mode: str,
    budget: int,
    seed: int,
    n_candidates: int = 4096,
    sample_box: np.ndarray | None = None,
    dedup_tol: float = 1e-3,
    candidates: np.ndarray | None = None,
    focus_delta: float = 0.0,
) -> CoverResult:
    """Cover the complement of a set with at most `budget` cuts.

    halfspace mode separates each sampled exterior point from a convex set;
    ball mode centers an open ball of radius d(x_k, set) at each exterior
    sample x_k (valid for any closed set).  Exterior samples are drawn from
    an inflation of the oracle's bounding box (or the given sample_box);
    an explicit candidate array overrides the sampler.  focus_delta > 0
    restricts candidates to points at distance >= focus_delta, spending
    the budget on the region residual checks probe.
    """
    if mode not in ("halfspace", "ball"):
        raise DomainError(f"unknown cover mode {mode!r}")
    if mode == "halfspace" and not oracle.convex_flag:
        raise DomainError("halfspace mode requires a convex oracle")
    report = CoverReport()
    if candidates is not None:
        pts = np.atleast_2d(np.asarray(candidates, dtype=float))
    else:
        box = inflate_box(oracle.bounding_box) if sample_box is None else np.asarray(sample_box, float)
        pts = sobol_box(n_candidates, box[0], box[1], seed)
    report.n_candidates = pts.shape[0]
    dists = oracle.distance_batch(pts)
    exterior = pts[dists > max(1e-9, focus_delta)]
    report.n_exterior = exterior.shape[0]
    if report.n_exterior == 0:
        report.warning = "no exterior samples found (set fills the box)"
        return CoverResult(cuts=[], report=report)

    cuts: list = []
    seen: set = set()
    if mode == "halfspace":
        projs = oracle.project_batch(exterior)
        for p, proj in zip(exterior, projs):
            gap = p - proj
            dist = float(np.linalg.norm(gap))
            if dist <= 1e-9:
                continue
            z = gap / dist
            gamma = float(z @ proj)
            key = _dedup_key(z, (gamma / (1.0 + abs(gamma)),), dedup_tol)
            if key in seen:
                continue
            seen.add(key)
            cuts.append(HalfspaceCut(z_star=z, gamma=gamma))
    else:
        scale = max(float(np.max(pts.max(axis=0) - pts.min(axis=0))), 1e-9)
        for p, dist in zip(exterior, dists[dists > max(1e-9, focus_delta)]):
            key = _dedup_key(p / scale, (dist / scale,), dedup_tol)
            if key in seen:
                continue
            seen.add(key)
            cuts.append(BallCut.from_center_radius(p, float(dist)))
    report.n_deduped = len(cuts)

    if cuts:
        covers = _visibility_matrix(cuts, exterior, exterior, budget)
        if mode == "halfspace":
            covers = _visibility_matrix(cuts, np.zeros((exterior.shape[0], 0)), exterior, budget)
    else:
        covers = np.zeros((0, 0), bool)
    ordered, frac = _greedy_order(cuts, covers, budget)
    report.coverage_fraction = frac
    return CoverResult(cuts=ordered, report=report)


def separate_graph_point(
    pmf: ParamMultifunction,
    x_hat,
    y_hat,
    eps_floor: float = 1e-6,
    eps_init: float | None = None,
) -> GraphCut:
    """Separate an off-graph point (x_hat, y_hat) from the graph of M.

    Picks a value-space direction y* with inf over M(x_hat) of <y*, .>
    strictly above <y*, y_hat>, takes alpha at the midpoint, then halves a
    parameter-ball radius eps until the lower bound persists on 2s+1
    deterministic probe points of the ball.  The returned cut pairs the
    ball (center x_hat, radius eps) with the halfspace {<-y*, u> > -alpha}.

    For parameter-independent families the ball factor is omitted: the cut
    region is unrestricted in the parameter.
    """
    if not pmf.values_convex:
        raise DomainError("graph separation requires convex values")
    x_hat = np.atleast_1d(np.asarray(x_hat, dtype=float))
    y_hat = np.atleast_1d(np.asarray(y_hat, dtype=float))
    vs = pmf.value_set(x_hat)
    if vs.member(y_hat):
        raise SeparationError("(x_hat, y_hat) lies on the graph; no separation")

    if vs.is_empty():
        nrm = float(np.linalg.norm(y_hat))
        if nrm == 0.0:
            y_star = np.zeros(pmf.value_dim)
            y_star[0] = 1.0
        else:
            y_star = -y_hat / nrm
        alpha = float(y_star @ y_hat) + 1.0
    else:
        proj = vs.project(y_hat)
        gap = proj - y_hat
        y_star = gap / np.linalg.norm(gap)
        lower = -pmf.support(x_hat, -y_star)  # inf over M(x_hat) of <y*, .>
        upper = float(y_star @ y_hat)
        if not lower > upper:
            raise SeparationError("separation direction failed (support oracle)")
        alpha = 0.5 * (lower + upper)

    half = HalfspaceCut(z_star=-y_star, gamma=-alpha)
    if pmf.param_independent:
        return GraphCut(ball=None, half=half)

    s = pmf.param_dim
    if eps_init is None:
        eps_init = float(np.max(pmf.domain_box[1] - pmf.domain_box[0])) / 4.0
    probes_dirs = np.concatenate([np.zeros((1, s)), np.eye(s), -np.eye(s)])

    def accepts(radius: float) -> bool:
        # Probes sit on the closed boundary of the open cut ball, so the
        # acceptance test is non-strict: values on the boundary may touch
        # the separating level without meeting the open region.
        for xp in x_hat + radius * probes_dirs:
            if not -pmf.support(xp, -y_star) >= alpha:
                return False
        return True

    eps = eps_init
    while eps >= eps_floor:
        if accepts(eps):
            if eps < eps_init:
                # Widen back toward the rejected radius: wider parameter
                # windows cover the complement with fewer cuts.
                lo, hi = eps, 2.0 * eps
                for _ in range(6):
                    mid = 0.5 * (lo + hi)
                    if accepts(mid):
                        lo = mid
                    else:
                        hi = mid
                eps = lo
            return GraphCut(ball=BallCut.from_center_radius(x_hat, eps), half=half)
        eps /= 2.0
    raise CertificateError(
        f"usc certificate failed at x_hat={x_hat.tolist()}: no ball radius "
        f">= {eps_floor} keeps the value sets above the separating level"
    )


# Smallest normalized argument at which the transition function is safely
# representable in double precision (it underflows to exact zero below
# ~1.35e-3); lattice marching keeps windows clear of this margin.
THETA_VIS = 3e-3

# log10 of the smallest positive double, with a small safety margin.
_LOG10_TINY = 317.0


def _visibility_matrix(cuts: list, xs: np.ndarray, ys: np.ndarray, budget: int) -> np.ndarray:
    """Boolean matrix: cut i contributes a *representable* series term at
    sample j even if placed last within the budget.

    The n-th series term is theta(a) theta(b) / (zeta xi 2)^n and
    theta(s) ~ e^{-1/s} near zero, so the term survives double-precision
    underflow iff 0.434 (1/a + 1/b) <= log10(tiny) - budget log10(zeta xi 2).
    Cuts whose normalizers make that bound vacuous can never contribute at
    this budget and cover nothing.
    """
    n = len(cuts)
    out = np.zeros((n, xs.shape[0]), dtype=bool)
    for i, craw in enumerate(cuts):
        c = as_graph_cut(craw)
        zx2 = 2.0
        inv_sum = np.zeros(xs.shape[0])
        ok = np.ones(xs.shape[0], dtype=bool)
        if c.ball is not None:
            zeta = 1.0 + abs(c.ball.beta) + float(np.linalg.norm(c.ball.x_star))
            zx2 *= zeta
            a = (xs @ c.ball.x_star - 0.5 * np.sum(xs * xs, axis=1) - c.ball.beta) / zeta
            ok &= a > 0
            with np.errstate(divide="ignore"):
                inv_sum += np.where(a > 0, 1.0 / np.maximum(a, 1e-300), np.inf)
        if c.half is not None:
            xi = 1.0 + float(np.linalg.norm(c.half.z_star)) + abs(c.half.gamma)
            zx2 *= xi
            b = (ys @ c.half.z_star - c.half.gamma) / xi
            ok &= b > 0
            with np.errstate(divide="ignore"):
                inv_sum += np.where(b > 0, 1.0 / np.maximum(b, 1e-300), np.inf)
        headroom = _LOG10_TINY - budget * np.log10(zx2)
        if headroom <= 0:
            continue
        out[i] = ok & (0.434 * inv_sum <= headroom)
    return out


def _lattice_graph_cuts(pmf, make_cut, focus_delta: float, seed: int) -> list:
    """Adaptive lattice of graph cuts marching along the parameter box.

    For every outward value-space direction d, generators sit at the
    boundary point of M(x) in direction d, stepped outward by a level
    proportional to the local graph slope (so that points at *graph
    distance* >= the focus land strictly outside the separating threshold
    regardless of steepness).  The march advances by the window's
    *numerically visible* half-width: a ball cut's argument at offset t
    from its center is (eps^2 - t^2)/(2 zeta), which must clear the
    double-precision floor of the transition function, not just be
    positive.  Each halfspace factor extends outward without bound, so a
    tiled shallow band covers everything farther out in its direction.
    """
    from .sampling import sobol_directions

    m = pmf.value_dim
    if m == 1:
        dirs = np.array([[1.0], [-1.0]])
    else:
        dirs = sobol_directions(8 * m, m, seed + 7)
    v_lo, v_hi = pmf.value_box
    span_v = float(np.max(v_hi - v_lo))
    base = max(2.5 * focus_delta, 0.05 * span_v)
    center = 0.5 * (v_lo + v_hi)
    reach = 2.0 * span_v

    d_lo, d_hi = pmf.domain_box
    span_x = float(np.max(d_hi - d_lo))
    min_step = span_x / 512.0
    slope_h = span_x / 256.0
    overhang = 0.25 * span_x  # march past the box so edge columns get neighbors

    rows = [None] if pmf.param_dim == 1 else list(np.linspace(d_lo[1], d_hi[1], 9))

    def anchor_at(x: np.ndarray, d: np.ndarray) -> np.ndarray | None:
        vs = pmf.value_set(x)
        if vs.is_empty():
            return None
        return vs.project(center + reach * d)

    cuts = []
    for d in dirs:
        for row in rows:
            t = float(d_lo[0]) - overhang
            while t <= d_hi[0] + overhang:
                x = np.array([t]) if row is None else np.array([t, row])
                step = 4.0 * min_step
                anchor = anchor_at(x, d)
                if anchor is not None:
                    slope = 0.0
                    for axis in range(pmf.param_dim):
                        xp = x.copy()
                        xp[axis] = xp[axis] + slope_h
                        a2 = anchor_at(xp, d)
                        if a2 is not None:
                            slope = max(
                                slope,
                                float(np.linalg.norm(a2 - anchor)) / slope_h,
                            )
                    level = base * float(np.hypot(1.0, slope))
                    y = anchor + level * d
                    inside = np.all(y >= v_lo - 1e-9) and np.all(y <= v_hi + 1e-9)
                    if inside and not pmf.value_set(x).member(y):
                        cut = make_cut(x, y)
                        if cut is not None:
                            cuts.append(cut)
                            if cut.ball is not None:
                                eps = cut.ball.radius
                                zeta = 1.0 + abs(cut.ball.beta) + float(
                                    np.linalg.norm(cut.ball.x_star)
                                )
                                visible = np.sqrt(
                                    max(eps * eps - 2.0 * zeta * THETA_VIS, 0.0)
                                )
                                step = max(0.8 * visible, min_step)
                t += step
    return cuts


def cover_complement_graph(
    pmf: ParamMultifunction,
    budget: int,
    seed: int,
    n_candidates: int = 8192,
    eps_floor: float = 1e-6,
    dedup_tol: float = 1e-3,
    repair_rounds: int = 2,
    focus_delta: float = 0.0,
) -> CoverResult:
    """Cover the graph complement with at most `budget` product cuts.

    After the greedy pass over the candidate cloud, `repair_rounds`
    holdout clouds (fresh seeds) are tested; uncovered holdout points
    spawn additional cuts while budget remains.  This closes tiling gaps
    between candidate samples that a single cloud would leave.

    focus_delta > 0 restricts candidates and coverage targets to points at
    graph distance >= focus_delta.  Points closer to the graph would each
    demand ever narrower cuts (only the infinite family covers them all),
    so a finite budget is spent where residual checks actually probe.
    """
    if not pmf.values_convex:
        raise DomainError("graph covers require convex values")
    report = CoverReport(n_candidates=n_candidates)

    def off_graph_cloud(n: int, s: int) -> tuple[np.ndarray, np.ndarray]:
        xs = sobol_box(n, pmf.domain_box[0], pmf.domain_box[1], s)
        ys = sobol_box(n, pmf.value_box[0], pmf.value_box[1], s + 1)
        if focus_delta > 0.0:
            from .multifunctions import graph_distance_batch

            off = graph_distance_batch(pmf, xs, ys) >= focus_delta
        else:
            off = pmf.value_distance_batch(xs, ys) > 1e-9
        return xs[off], ys[off]

    xs, ys = off_graph_cloud(n_candidates, seed)
    report.n_exterior = xs.shape[0]
    if report.n_exterior == 0:
        report.warning = "no off-graph samples found (graph fills the box)"
        return CoverResult(cuts=[], report=report)

    seen: set = set()
    scale = float(np.max(pmf.value_box[1] - pmf.value_box[0]))

    def make_cut(x, y) -> GraphCut | None:
        try:
            cut = separate_graph_point(pmf, x, y, eps_floor=eps_floor)
        except CertificateError:
            report.n_skipped += 1
            return None
        key = _dedup_key(cut.half.z_star, (cut.half.gamma / scale,), dedup_tol)
        if cut.ball is not None:
            key = key + _dedup_key(
                cut.ball.x_star / max(scale, 1.0),
                (cut.ball.radius / max(scale, 1.0),),
                dedup_tol,
            )
        if key in seen:
            return None
        seen.add(key)
        return cut

    def build_cuts(points_x, points_y) -> list[GraphCut]:
        out = []
        for x, y in zip(points_x, points_y):
            cut = make_cut(x, y)
            if cut is not None:
                out.append(cut)
        return out

    # Deterministic tiling pass: march generators along the parameter box
    # at a slope-normalized shallow level.  These cuts are protected from
    # budget truncation; sampled candidates fill the remaining slots.
    lattice: list[GraphCut] = []
    if not pmf.param_independent and 1 <= pmf.param_dim <= 2:
        lattice = _lattice_graph_cuts(pmf, make_cut, focus_delta, seed)
        if len(lattice) > budget:
            report.warning = (
                f"lattice tiling needs {len(lattice)} cuts, over budget {budget}"
            )
    cuts = lattice + build_cuts(xs, ys)
    for round_id in range(1, repair_rounds + 1):
        hx, hy = off_graph_cloud(n_candidates, seed + 1000 * round_id)
        if not cuts:
            uncovered = np.ones(hx.shape[0], dtype=bool)
        else:
            vis = _visibility_matrix(cuts, hx, hy, budget)
            uncovered = ~np.any(vis, axis=0)
        cuts.extend(build_cuts(hx[uncovered], hy[uncovered]))
        xs = np.concatenate([xs, hx])
        ys = np.concatenate([ys, hy])
    report.n_deduped = len(cuts)

    covers = (
        _visibility_matrix(cuts, xs, ys, budget)
        if cuts else np.zeros((0, 0), bool)
    )
    ordered, frac = _greedy_order(cuts, covers, budget, n_protected=len(lattice))
    report.coverage_fraction = frac
    return CoverResult(cuts=ordered, report=report)
