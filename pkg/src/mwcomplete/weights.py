"""Sample-complexity bound quantities and the weight search.

``f1`` and ``f2`` are the two angle/weight profiles the bounds are built
from::

    f1(w, θ) = sqrt(w^4 cos^2 θ + sin^2 θ)
    f2(w, θ) = sqrt(w^2 cos^2 θ + sin^2 θ)

``alpha123`` evaluates the multi-weight quantities and the lower bound on
the observation probability; ``alpha456`` evaluates the single-weight
(scalar λ, γ) quantities.  Both bounds hide an absolute constant, so only
comparisons between weight choices are meaningful.
"""

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateWeightError

MULTI_THRESHOLD = 0.25
SINGLE_THRESHOLD = 0.125
GRID_LOW = 0.01
COARSE_POINTS = 21
REFINE_FACTOR = 10


def _profile(wk, theta):
    # sqrt(wk cos^2 + sin^2).  For wk >= 1/4 use 1 - (1 - wk) cos^2, which is
    # exactly 1 at unit weight; small wk keeps the direct sum to avoid
    # cancellation near zero.
    wk = np.asarray(wk, dtype=float)
    theta = np.asarray(theta, dtype=float)
    c2 = np.cos(theta) ** 2
    near_one = 1.0 - (1.0 - wk) * c2
    direct = wk * c2 + np.sin(theta) ** 2
    return np.sqrt(np.where(wk >= 0.25, near_one, direct))


def f1(w, theta):
    w = np.asarray(w, dtype=float)
    return _profile(w ** 4, theta)


def f2(w, theta):
    w = np.asarray(w, dtype=float)
    return _profile(w ** 2, theta)


@dataclass(frozen=True)
class WeightSpec:
    lambda1: np.ndarray
    lambda2: np.ndarray
    gamma1: np.ndarray
    gamma2: np.ndarray

    def __post_init__(self):
        for name in ("lambda1", "lambda2", "gamma1", "gamma2"):
            w = np.atleast_1d(np.asarray(getattr(self, name), dtype=float))
            if np.any(~np.isfinite(w)) or np.any(w <= 0.0) or np.any(w > 1.0):
                raise DegenerateWeightError(f"{name} entries must lie in (0, 1]")
            object.__setattr__(self, name, w)
        if self.lambda1.size != self.gamma1.size or self.lambda2.size != self.gamma2.size:
            raise ValueError("column and row weight blocks must have matching sizes")

    @classmethod
    def uniform(cls, r, r_prime, lam=1.0, gamma=None):
        gamma = lam if gamma is None else gamma
        k = r_prime - r
        return cls(np.full(r, lam), np.full(k, lam), np.full(r, gamma), np.full(k, gamma))

    @property
    def lam(self):
        return np.concatenate([self.lambda1, self.lambda2])

    @property
    def gamma(self):
        return np.concatenate([self.gamma1, self.gamma2])

    def to_dict(self):
        return {k: getattr(self, k).tolist() for k in ("lambda1", "lambda2", "gamma1", "gamma2")}



def _angles(theta, name):
    t = np.atleast_1d(np.asarray(theta, dtype=float))
    if t.ndim != 1 or t.size < 1:
        raise ValueError(f"{name} must be a non-empty vector of angles")
    if not np.all(np.isfinite(t)) or np.any(t < 0.0) or np.any(t > np.pi / 2 + 1e-12):
        raise ValueError(f"{name} entries must lie in [0, pi/2]")
    return np.minimum(t, np.pi / 2)


@dataclass(frozen=True)
class BoundInputs:
    """Everything the multi-weight bound needs.

    ``eta_breve`` defaults to ``eta_x`` (coherence ratio 1), the angle-only
    design setting.  ``mu_ratio``/``nu_ratio`` hold max_i μ̆_i/μ_i and
    max_l ν̆_l/ν_l; they are carried for reporting and do not enter the
    closed-form bound.
    """

    theta_u: np.ndarray
    theta_v: np.ndarray
    weights: WeightSpec
    eta_x: float = 1.0
    eta_breve: float = None
    mu_ratio: float = 1.0
    nu_ratio: float = 1.0
    n: int = 20

    def __post_init__(self):
        tu = _angles(self.theta_u, "theta_u")
        tv = _angles(self.theta_v, "theta_v")
        if tu.size != tv.size:
            raise ValueError("theta_u and theta_v must have the same length")
        if self.weights.lambda1.size != tu.size:
            raise ValueError(f"lambda1 has {self.weights.lambda1.size} entries for {tu.size} angles")
        eta_b = self.eta_x if self.eta_breve is None else self.eta_breve
        if self.eta_x <= 0 or eta_b < 0:
            raise ValueError("coherence values must be positive")
        if self.n < 2:
            raise ValueError("n must be at least 2")
        object.__setattr__(self, "theta_u", tu)
        object.__setattr__(self, "theta_v", tv)
        object.__setattr__(self, "eta_breve", float(eta_b))

    @property
    def r(self):
        return self.theta_u.size

    @property
    def r_prime(self):
        return self.r + self.weights.lambda2.size


@dataclass(frozen=True)
class BoundReport:
    alpha1: float
    alpha2: float
    alpha3: float
    p_lower: float
    feasible: bool
    extra: dict = field(default_factory=dict)

    def to_dict(self):
        out = {"alpha1": self.alpha1, "alpha2": self.alpha2, "alpha3": self.alpha3,
               "p_lower": self.p_lower, "feasible": self.feasible}
        out.update(self.extra)
        return out


def probability_bound(alpha_log, alpha_sq, eta_x, eta_breve, r, n):
    """max[log(a n), 1] * (η r log n / n) * max[b^2 (1 + η̆/η), 1]."""
    head = max(np.log(alpha_log * n), 1.0)
    return float(head * eta_x * r * np.log(n) / n * max(alpha_sq ** 2 * (1.0 + eta_breve / eta_x), 1.0))


def _alpha_terms(tu, tv, lam1, lam2, gam1, gam2):
    """Vectorised alpha1..3 over leading batch axes (index axis last)."""
    fu1, fu2 = f1(lam1, tu), f2(lam1, tu)
    fv1, fv2 = f1(gam1, tv), f2(gam1, tv)
    ratio_u = np.max(fu1 ** 2 / fu2 ** 2, axis=-1)
    ratio_v = np.max(fv1 ** 2 / fv2 ** 2, axis=-1)
    a1 = np.sqrt(ratio_u * ratio_v)
    a2 = np.sqrt(np.max(fu2 ** 2, axis=-1) * ratio_v) + np.sqrt(np.max(fv2 ** 2, axis=-1) * ratio_u)
    lead_u = np.max(f2(1.0 - lam1 ** 2, tu) ** 2 / fu2 ** 2, axis=-1)
    lead_v = np.max(f2(1.0 - gam1 ** 2, tv) ** 2 / fv2 ** 2, axis=-1)
    pen_u = np.max(lam1 / fu2 - 1.0, axis=-1)
    pen_v = np.max(gam1 / fv2 - 1.0, axis=-1)
    if lam2.shape[-1]:
        pen_u = np.maximum(pen_u, np.max(lam2 - 1.0, axis=-1))
        pen_v = np.maximum(pen_v, np.max(gam2 - 1.0, axis=-1))
    a3 = np.sqrt(lead_u) * np.sqrt(lead_v) - pen_u - pen_v
    return a1, a2, a3


def alpha123(inputs):
    """Multi-weight quantities α1, α2, α3 and the bound on p."""
    w = inputs.weights
    if np.any(f2(w.lambda1, inputs.theta_u) == 0.0) or np.any(f2(w.gamma1, inputs.theta_v) == 0.0):
        raise DegenerateWeightError("f2 vanishes (zero weight at zero angle)")
    a1, a2, a3 = _alpha_terms(inputs.theta_u, inputs.theta_v, w.lambda1, w.lambda2, w.gamma1, w.gamma2)
    a1, a2, a3 = float(a1), float(a2), float(a3)
    p = probability_bound(a1, a2, inputs.eta_x, inputs.eta_breve, inputs.r, inputs.n)
    return BoundReport(alpha1=a1, alpha2=a2, alpha3=a3, p_lower=p, feasible=bool(a3 <= MULTI_THRESHOLD))


def alpha456(theta_u1, theta_v1, lam, gamma):
    """Single-weight quantities (α4, α5, α6) from the largest angles.

    Inputs broadcast; scalar inputs give floats.  α4 keeps the printed
    argument pairing ``f1(γ, θ_u) f1(λ, θ_v)`` in the numerator; it
    coincides with the symmetric pairing whenever λ = γ.
    """
    tu, tv, lam, gamma = np.broadcast_arrays(*(np.asarray(x, dtype=float) for x in (theta_u1, theta_v1, lam, gamma)))
    a = f2(lam, tu)
    b = f2(gamma, tv)
    if np.any(a == 0.0) or np.any(b == 0.0):
        raise DegenerateWeightError("f2 vanishes (zero weight at zero angle)")
    a4 = f1(gamma, tu) * f1(lam, tv) / (a * b)
    a5 = (a / b + b / a) * (f1(lam, tu) + f1(gamma, tv))
    a6 = 1.5 * (np.sqrt(1.0 - lam ** 2) * np.sin(tu) / a + np.sqrt(1.0 - gamma ** 2) * np.sin(tv) / b)
    if tu.ndim == 0:
        return float(a4), float(a5), float(a6)
    return a4, a5, a6


def single_weight_bound(theta_u1, theta_v1, lam, gamma, eta_x=1.0, eta_breve=None, r=1, n=20):
    """Bound on p for the single-weight problem and its feasibility flag."""
    a4, a5, a6 = alpha456(theta_u1, theta_v1, lam, gamma)
    eta_b = eta_x if eta_breve is None else eta_breve
    p = probability_bound(a4, a5, eta_x, eta_b, r, n)
    return {"alpha4": a4, "alpha5": a5, "alpha6": a6, "p_lower": p, "feasible": bool(a6 <= SINGLE_THRESHOLD)}


# ---------------------------------------------------------------------------
# Weight search
# ---------------------------------------------------------------------------


def coarse_grid(points=COARSE_POINTS, low=GRID_LOW):
    if points < 2:
        raise ValueError("grid resolution must be at least 2")
    return np.linspace(low, 1.0, points)


def _refined_grid(center, step, factor, low):
    pts = center + step * np.linspace(-1.0, 1.0, 2 * factor + 1)
    return np.unique(np.clip(pts, low, 1.0))


class _Objective:
    """Batched bound evaluation over a flat weight vector.

    Layout: ``[λ1 (r), λ2 (k), γ1 (r), γ2 (k)]`` with k = r' - r.
    """

    def __init__(self, tu, tv, k, eta_x, eta_breve, n):
        self.tu, self.tv, self.k = tu, tv, k
        self.r = tu.size
        self.eta_x, self.eta_breve, self.n = eta_x, eta_breve, n

    def split(self, x):
        r, k = self.r, self.k
        return x[..., :r], x[..., r:r + k], x[..., r + k:2 * r + k], x[..., 2 * r + k:]

    def evaluate(self, x):
        """Return (feasible, p_lower, alpha3) arrays for a batch of points."""
        l1, l2, g1, g2 = self.split(x)
        a1, a2, a3 = _alpha_terms(self.tu, self.tv, l1, l2, g1, g2)
        head = np.maximum(np.log(a1 * self.n), 1.0)
        scale = self.eta_x * self.r * np.log(self.n) / self.n
        tail = np.maximum(a2 ** 2 * (1.0 + self.eta_breve / self.eta_x), 1.0)
        return a3 <= MULTI_THRESHOLD, head * scale * tail, a3


def _key(feasible, p, a3, x):
    """Search ranking: feasible first, then bound, then α3, then closeness
    to all-ones (lexicographically largest weights win exact ties)."""
    # infeasible points are ranked by α3 alone so the search can walk into
    # the feasible region
    if feasible:
        return (0, float(p), float(a3), tuple(-np.round(x, 12)))
    return (1, float(a3), float(p), tuple(-np.round(x, 12)))


def _coordinate_descent(obj, x, grids, max_passes=50):
    feas, p, a3 = obj.evaluate(x[None, :])
    best = _key(feas[0], p[0], a3[0], x)
    for _ in range(max_passes):
        changed = False
        for j, grid in enumerate(grids):
            batch = np.repeat(x[None, :], grid.size, axis=0)
            batch[:, j] = grid
            feas, p, a3 = obj.evaluate(batch)
            for idx in range(grid.size):
                cand = _key(feas[idx], p[idx], a3[idx], batch[idx])
                if cand < best:
                    best = cand
                    x = batch[idx].copy()
                    changed = True
        if not changed:
            break
    return x, best


def _search_single(obj, points, low):
    """Exhaustive (λ, γ) grid, then a 10x refinement around the incumbent."""
    r, k = obj.r, obj.k

    def expand(lam, gam):
        lam = np.asarray(lam)[:, None]
        gam = np.asarray(gam)[:, None]
        return np.hstack([np.repeat(lam, r + k, axis=1), np.repeat(gam, r + k, axis=1)])

    def scan(lgrid, ggrid, best, best_pair):
        ll, gg = np.meshgrid(lgrid, ggrid, indexing="ij")
        batch = expand(ll.ravel(), gg.ravel())
        feas, p, a3 = obj.evaluate(batch)
        for idx in range(batch.shape[0]):
            cand = _key(feas[idx], p[idx], a3[idx], batch[idx])
            if best is None or cand < best:
                best, best_pair = cand, (ll.ravel()[idx], gg.ravel()[idx])
        return best, best_pair

    grid = coarse_grid(points, low)
    best, pair = scan(grid, grid, None, None)
    step = grid[1] - grid[0]
    fine_l = _refined_grid(pair[0], step, REFINE_FACTOR, low)
    fine_g = _refined_grid(pair[1], step, REFINE_FACTOR, low)
    best, pair = scan(fine_l, fine_g, best, pair)
    return expand([pair[0]], [pair[1]])[0], best


def _to_spec(obj, x):
    l1, l2, g1, g2 = obj.split(x)
    return WeightSpec(l1.copy(), l2.copy(), g1.copy(), g2.copy())


def optimize_weights(theta_u, theta_v, r_prime=None, eta_x=1.0, eta_breve=None, n=20,
                     points=COARSE_POINTS, mode="multi", low=GRID_LOW):
    """Search weights that minimise the multi-weight bound on p.

    Parameters
    ----------
    theta_u, theta_v : array_like
        Principal angles (radians), one per true direction.
    r_prime : int, optional
        Prior dimension; defaults to ``r``.
    points : int
        Coarse grid size per coordinate on ``[low, 1]``.
    mode : {"multi", "single", "none"}
        ``multi`` searches every index separately, ``single`` searches a
        scalar pair (λ, γ) applied to the whole prior, ``none`` returns the
        all-ones weights.

    Returns
    -------
    (WeightSpec, BoundReport)
        When no searched point satisfies α3 <= 1/4 the all-ones weights are
        returned with ``feasible=False``.

    Notes
    -----
    Feasible points are ranked by (bound, α3) and exact ties go to the
    weights closest to all-ones.  The bound ignores λ2 and γ2, so the α3
    tie-break sends them to the value that helps feasibility most.  The multi search starts from the better of all-ones
    and the single-mode optimum, and coordinate descent never worsens the
    key, so ``multi <= single <= none`` holds for every input.
    """
    tu = _angles(theta_u, "theta_u")
    tv = _angles(theta_v, "theta_v")
    if tu.size != tv.size:
        raise ValueError("theta_u and theta_v must have the same length")
    r = tu.size
    r_prime = r if r_prime is None else int(r_prime)
    if r_prime < r:
        raise ValueError("r_prime must be at least r")
    if mode not in ("multi", "single", "none"):
        raise ValueError(f"unknown mode {mode!r}")
    if points < 2:
        raise ValueError("grid resolution must be at least 2")
    eta_b = eta_x if eta_breve is None else eta_breve
    k = r_prime - r
    obj = _Objective(tu, tv, k, float(eta_x), float(eta_b), int(n))
    ones = np.ones(2 * r_prime)

    if mode == "none":
        x = ones
    else:
        x, best = _search_single(obj, points, low)
        if mode == "multi":
            grid = coarse_grid(points, low)
            x, best = _coordinate_descent(obj, x, [grid] * x.size)
            step = grid[1] - grid[0]
            fine = [_refined_grid(xj, step, REFINE_FACTOR, low) for xj in x]
            x, best = _coordinate_descent(obj, x, fine)
        if best[0] == 1:
            x = ones

    spec = _to_spec(obj, x)
    report = alpha123(BoundInputs(tu, tv, spec, eta_x=eta_x, eta_breve=eta_b, n=n))
    extra = single_weight_bound(tu[0], tv[0], float(spec.lambda1.max()), float(spec.gamma1.max()),
                                eta_x=eta_x, eta_breve=eta_b, r=r, n=n)
    extra = {"alpha4": extra["alpha4"], "alpha5": extra["alpha5"], "alpha6": extra["alpha6"]}
    report = BoundReport(report.alpha1, report.alpha2, report.alpha3, report.p_lower, report.feasible, extra)
    return spec, report


def weight_report_json(theta_u, theta_v, spec, report, mode="multi"):
    """JSON text {theta_u, theta_v, mode, weights, alpha1..6, p_lower, feasible}."""
    doc = {
        "theta_u": np.atleast_1d(theta_u).tolist(),
        "theta_v": np.atleast_1d(theta_v).tolist(),
        "mode": mode,
        "weights": spec.to_dict(),
    }
    doc.update(report.to_dict())
    return json.dumps(doc, indent=2)
