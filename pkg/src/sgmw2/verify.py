"""Sampling-based checks of the regularity and regime claims on mixture targets.

Each check returns a :class:`CheckReport` whose ``worst_margin`` is the most
violating slack observed (positive means the claim held with room to spare).
Sampling can only find violations, never certify their absence.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import constants as K
from . import streams
from .grid import TimeGrid
from .mixture import ConvexityParams, GaussianMixture, gmm_m2, gmm_score, gmm_weak_convexity_params
from .ou_flow import backward_drift, fd_hessians, forward_marginal, score_forward, score_modified

DEFAULT_S_GRID = np.geomspace(1e-2, 5.0, 20)


@dataclass
class CheckReport:
    name: str
    passed: bool
    worst_margin: float
    n_trials: int
    tolerance: float
    details: dict = field(default_factory=dict)
    gating: bool = True

    def row(self) -> dict:
        return {
            "name": self.name,
            "pass": self.passed,
            "worst_margin": self.worst_margin,
            "n_trials": self.n_trials,
            "tolerance": self.tolerance,
        }


def _report(name, margin, n, tol, details=None, gating=True):
    margin = float(margin)
    return CheckReport(name, bool(margin >= -tol), margin, int(n), tol, details or {}, gating)


def _combine(name, reports, tol):
    """Worst gating report wins; informational reports only add a detail."""
    gating = [r for r in reports if r.gating]
    info = [r for r in reports if not r.gating]
    details = {"n_checks": len(reports)}
    if gating:
        worst = min(gating, key=lambda r: r.worst_margin)
        margin = worst.worst_margin
        details["worst_at"] = worst.details
    else:
        margin = math.inf
    if info:
        details["informational_worst"] = min(r.worst_margin for r in info)
    return _report(name, margin, sum(r.n_trials for r in reports), tol, details)


def _anchor_points(g: GaussianMixture, s: float, n: int, rng) -> np.ndarray:
    """Marginal draws, heavy-tailed jitters of them, and points on inter-mode segments."""
    m = forward_marginal(g, s)
    labels = rng.choice(m.n_modes, size=n, p=m.weights)
    pts = m.means[labels] + m.scale * rng.standard_normal((n, g.dim))
    q = n // 4
    pts[:q] += rng.standard_t(2.0, size=(q, g.dim))
    if m.n_modes > 1:
        i = rng.integers(0, m.n_modes, q)
        j = rng.integers(0, m.n_modes, q)
        lam = rng.uniform(0.0, 1.0, (q, 1))
        pts[q : 2 * q] = lam * m.means[i] + (1.0 - lam) * m.means[j]
    return pts


def sample_pairs(g: GaussianMixture, s: float, n_pairs: int, seed: int):
    """Anchor x plus partner y = x + r u with r log-uniform on [1e-3, 20]."""
    rng = streams.substream(seed, streams.PAIRS, int(round(s * 1e6)))
    x = _anchor_points(g, s, n_pairs, rng)
    u = rng.standard_normal((n_pairs, g.dim))
    u /= np.linalg.norm(u, axis=1, keepdims=True)
    r = np.exp(rng.uniform(math.log(1e-3), math.log(20.0), n_pairs))
    y = x + r[:, None] * u
    return x, y, np.linalg.norm(x - y, axis=1)


def _params(g, params):
    return params if params is not None else gmm_weak_convexity_params(g)


def verify_score_lipschitz(
    g, s, n_pairs=10_000, tol=1e-9, params=None, seed=0, variant="statement"
) -> CheckReport:
    """|grad log p~_s(x) - grad log p~_s(y)| <= L_s |x - y| over sampled pairs."""
    p = _params(g, params)
    x, y, r = sample_pairs(g, s, n_pairs, seed)
    ratio = np.linalg.norm(score_modified(g, s, x) - score_modified(g, s, y), axis=1) / r
    l_s = K.lipschitz_l(s, p, variant)
    margin = l_s - ratio.max()
    details = {
        "s": s,
        "max_ratio": float(ratio.max()),
        "L_s": l_s,
        "L_s_proof": K.lipschitz_l(s, p, "proof"),
        "L_uniform": K.uniform_l(p),
    }
    return _report(f"score_lipschitz[s={s:.4g}]", margin, n_pairs, tol, details)


def verify_score_lipschitz_uniform(g, s, n_pairs=10_000, tol=1e-9, params=None, seed=0) -> CheckReport:
    p = _params(g, params)
    x, y, r = sample_pairs(g, s, n_pairs, seed)
    ratio = np.linalg.norm(score_modified(g, s, x) - score_modified(g, s, y), axis=1) / r
    lu = K.uniform_l(p)
    details = {"s": s, "max_ratio": float(ratio.max()), "L_uniform": lu}
    return _report(f"score_lipschitz_uniform[s={s:.4g}]", lu - ratio.max(), n_pairs, tol, details)


def verify_weak_convexity(g, s, n_pairs=10_000, tol=1e-9, params=None, seed=0, T=None) -> CheckReport:
    """Profile of -log p~_s against C_s and the r-dependent bound; log-concavity once s >= xi."""
    p = _params(g, params)
    x, y, r = sample_pairs(g, s, n_pairs, seed)
    dx = x - y
    q = -np.einsum("ij,ij->i", score_modified(g, s, x) - score_modified(g, s, y), dx) / r**2
    c_s = K.weak_convexity_c(s, p)
    margin_c = float((q - c_s).min())
    margin_profile = float((q - K.profile_lower_bound(s, r, p)).min())
    margins = [margin_c, margin_profile]
    details = {"s": s, "C_s": c_s, "margin_C": margin_c, "margin_profile": margin_profile}
    horizon = max(s, 1.0) if T is None else T
    if s >= K.xi(p, horizon):
        # kappa of -log p_s is q + 1
        margin_lc = float((q + 1.0).min())
        margins.append(margin_lc)
        details["margin_log_concave"] = margin_lc
    return _report(f"weak_convexity[s={s:.4g}]", min(margins), n_pairs, tol, details)


def verify_mixture_profile(g, n_pairs=10_000, tol=1e-9, params=None, seed=0) -> CheckReport:
    """Data-level profile of -log p against alpha - f_M(r)/r."""
    p = _params(g, params)
    x, y, r = sample_pairs(g, 0.0, n_pairs, seed)
    q = -np.einsum("ij,ij->i", gmm_score(g, x) - gmm_score(g, y), x - y) / r**2
    margin = float((q - (p.alpha - K.f_m(p.big_m, r) / r)).min())
    return _report("mixture_profile", margin, n_pairs, tol, {"min_profile": float(q.min())})


def verify_mixture_lipschitz(g, n_pairs=10_000, tol=1e-9, params=None, seed=0) -> CheckReport:
    """One-sided bound (grad U(x) - grad U(y)).(x - y) <= L_U |x - y|^2 with U = -log p."""
    p = _params(g, params)
    x, y, r = sample_pairs(g, 0.0, n_pairs, seed)
    q = -np.einsum("ij,ij->i", gmm_score(g, x) - gmm_score(g, y), x - y) / r**2
    return _report("mixture_lipschitz", p.l_u - q.max(), n_pairs, tol, {"max_quotient": float(q.max())})


def verify_drift_contraction(g, s_grid, n_pairs=10_000, tol=1e-9, params=None, T=None, seed=0) -> CheckReport:
    """(b_s(x) - b_s(y)).(x - y) <= -(2 C_s + 1)|x - y|^2 with 2 C_s + 1 >= 0, for s >= eta(0).

    Before eta(0) no contraction is claimed; those times are reported (margin =
    -max of the normalized inner product, negative when the drift expands) but
    never gate.
    """
    p = _params(g, params)
    s_grid = np.asarray(s_grid, dtype=np.float64)
    start = K.eta(p, 0.0, math.inf)
    reports = []
    for s in s_grid:
        x, y, r = sample_pairs(g, s, n_pairs, seed)
        dx = x - y
        inner = np.einsum("ij,ij->i", backward_drift(g, s, x) - backward_drift(g, s, y), dx) / r**2
        rate = 2.0 * K.weak_convexity_c(s, p) + 1.0
        in_window = s >= start
        if in_window:
            margin = min(float((-rate - inner).min()), rate)
        else:
            margin = -float(inner.max())
        details = {"s": float(s), "rate": rate, "max_inner": float(inner.max())}
        reports.append(_report(f"drift[s={s:.4g}]", margin, n_pairs, tol, details, gating=in_window))
    out = _combine("drift_contraction", reports, tol)
    out.details["window_start_s"] = start
    if T is not None:
        out.details["T_contract_0"] = K.t_contract(p, 0.0, T)
    return out


def verify_forward_moment(g, s_grid, n=100_000, seed=0) -> CheckReport:
    """E|X_s|^2 = e^{-2s} m2 + (1 - e^{-2s}) d within 3 s.e., and sup sqrt(E|X_s|^2) <= B + 3 s.e."""
    rng0 = streams.substream(seed, streams.MIXTURE, 10)
    labels = rng0.choice(g.n_modes, size=n, p=g.weights)
    x0 = g.means[labels] + g.scale * rng0.standard_normal((n, g.dim))
    gauss = streams.substream(seed, streams.MIXTURE, 11).standard_normal((n, g.dim))
    m2 = gmm_m2(g)
    b = K.b_const(m2, g.dim)
    worst = math.inf
    worst_s = None
    sup_margin = math.inf
    for s in np.asarray(s_grid, dtype=np.float64):
        xs = math.exp(-s) * x0 + math.sqrt(-math.expm1(-2.0 * s)) * gauss
        sq = (xs * xs).sum(axis=1)
        mean = sq.mean()
        se = sq.std(ddof=1) / math.sqrt(n)
        target = math.exp(-2.0 * s) * m2 - math.expm1(-2.0 * s) * g.dim
        margin = 3.0 * se - abs(mean - target)
        if margin < worst:
            worst, worst_s = margin, float(s)
        sup_margin = min(sup_margin, b + 3.0 * se / (2.0 * math.sqrt(mean)) - math.sqrt(mean))
    details = {"worst_s": worst_s, "margin_identity": worst, "margin_B": sup_margin, "B": b}
    return _report("forward_moment", min(worst, sup_margin), n * len(s_grid), 0.0, details)


def verify_step_size_lemma(p: ConvexityParams, grid: TimeGrid, tol=1e-12) -> CheckReport:
    """On steps with forward time >= eta(9L^2h/2): h <= 2(2C_s+1)/(9L^2) ^ 1 and eps1 in (0, 1]."""
    lu = K.uniform_l(p)
    K.check_step(grid.h, lu)
    h = grid.h
    # uncapped threshold: if it lies beyond T the window is empty
    start = K.eta(p, K.step_rho(h, lu), math.inf)
    margins = []
    for k in range(grid.N):
        s = grid.forward_time(k)
        if s < start - 1e-12:
            continue
        c = K.weak_convexity_c(s, p)
        lip = 2.0 * K.lipschitz_l(s, p) + 1.0
        eps1 = 1.0 + h * h * lip * lip - 2.0 * h * (2.0 * c + 1.0)
        cap = min(2.0 * (2.0 * c + 1.0) / (9.0 * lu * lu), 1.0)
        margins.append(min((cap - h) / h, eps1, 1.0 - eps1))
    worst = min(margins) if margins else math.inf
    details = {"window_start_s": start, "steps_checked": len(margins), "h": h, "h_max": K.h_max(lu)}
    return _report("step_size_lemma", worst, len(margins), tol, details)


def verify_log_concavity_regime(g, s_grid, n_points=100, tol=1e-6, params=None, seed=0, T=None) -> CheckReport:
    """FD min-eigenvalue of -Hess log p_s >= C_s + 1; log-concave (>= -tol) for s >= xi."""
    p = _params(g, params)
    s_grid = np.sort(np.asarray(s_grid, dtype=np.float64))
    T = float(s_grid.max()) if T is None else T
    xi_val = K.xi(p, T)
    margins = []
    first_lc = None
    min_eigs = []
    for s in s_grid:
        rng = streams.substream(seed, streams.PAIRS, 7, int(round(s * 1e6)))
        pts = _anchor_points(g, s, n_points, rng)
        hess = fd_hessians(lambda t, z: score_forward(g, t, z), s, pts)
        me = float(np.linalg.eigvalsh(-hess)[:, 0].min())
        min_eigs.append(me)
        margins.append(me - (K.weak_convexity_c(s, p) + 1.0))
        if s >= xi_val:
            margins.append(me + tol)  # shifted so that the pass rule reads me >= -tol
        if first_lc is None and me >= -tol:
            first_lc = float(s)
    # the empirical transition must not come after the first grid time >= xi
    after = s_grid[s_grid >= xi_val]
    limit = float(after[0]) if len(after) else math.inf
    if first_lc is not None:
        margins.append(limit - first_lc)
    details = {"xi": xi_val, "first_log_concave_s": first_lc, "min_eigs": min_eigs}
    return _report("log_concavity_regime", min(margins), n_points * len(s_grid), tol, details)


def default_step_grid(p: ConvexityParams, T: float, fraction: float = 0.5) -> TimeGrid:
    """Grid on [0, T] with h just below ``fraction * h_max``."""
    hm = K.h_max(K.uniform_l(p))
    return TimeGrid(T, math.ceil(T / (fraction * hm)))


def verify_suite(
    g: GaussianMixture,
    params: ConvexityParams | None = None,
    s_grid=DEFAULT_S_GRID,
    T: float = 4.0,
    n_pairs: int = 10_000,
    n_moment: int = 100_000,
    n_points: int = 100,
    seed: int = 0,
) -> list[CheckReport]:
    p = _params(g, params)
    s_grid = np.asarray(s_grid, dtype=np.float64)
    tol = 1e-9
    out = [
        verify_mixture_profile(g, n_pairs, tol, p, seed),
        verify_mixture_lipschitz(g, n_pairs, tol, p, seed),
        _combine(
            "score_lipschitz",
            [verify_score_lipschitz(g, s, n_pairs, tol, p, seed) for s in s_grid],
            tol,
        ),
        _combine(
            "score_lipschitz_uniform",
            [verify_score_lipschitz_uniform(g, s, n_pairs, tol, p, seed) for s in s_grid],
            tol,
        ),
        _combine(
            "weak_convexity",
            [verify_weak_convexity(g, s, n_pairs, tol, p, seed, T) for s in s_grid],
            tol,
        ),
        verify_drift_contraction(g, s_grid, n_pairs, tol, p, T, seed),
        verify_forward_moment(g, s_grid, n_moment, seed),
        verify_step_size_lemma(p, default_step_grid(p, T)),
        verify_log_concavity_regime(g, s_grid, n_points, 1e-6, p, seed, T),
    ]
    return out
