"""Closed-form constants of the W2 convergence bound.

All functions of time take the FORWARD time ``s``; a backward step k of a
grid uses s = T - t_k.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import partial
from typing import Callable

import numpy as np

from .errors import ConfigurationError
from .grid import TimeGrid
from .mixture import ConvexityParams


def f_m(big_m: float, r):
    """f_M(r) = 2 sqrt(M) tanh(r sqrt(M) / 2)."""
    if big_m < 0:
        raise ValueError("M must be nonnegative")
    sq = math.sqrt(big_m)
    return 2.0 * sq * np.tanh(np.asarray(r, dtype=np.float64) * sq / 2.0)


def _denominator(s: float, alpha: float) -> float:
    if s < 0:
        raise ValueError(f"forward time must be nonnegative, got {s}")
    den = alpha + (1.0 - alpha) * math.exp(-2.0 * s)
    if not den > 0:
        raise ConfigurationError("alpha + (1 - alpha) e^{-2s} must be positive")
    return den


def weak_convexity_c(s: float, p: ConvexityParams) -> float:
    """C_s: lower bound on the convexity profile of -log(p_s / pi_inf)."""
    den = _denominator(s, p.alpha)
    return p.alpha / den - math.exp(-2.0 * s) * p.big_m / den**2 - 1.0


def profile_lower_bound(s: float, r, p: ConvexityParams):
    """r-dependent profile bound alpha/D - 1 - (c/r) f_M(c r), c = e^{-s}/D."""
    den = _denominator(s, p.alpha)
    c = math.exp(-s) / den
    r = np.asarray(r, dtype=np.float64)
    return p.alpha / den - 1.0 - (c / r) * f_m(p.big_m, c * r)


def lipschitz_l(s: float, p: ConvexityParams, variant: str = "statement") -> float:
    """Spatial Lipschitz bound L_s of the modified score.

    ``variant="proof"`` places the extra +1 inside the first branch of the max.
    """
    if s < 0:
        raise ValueError(f"forward time must be nonnegative, got {s}")
    upper = p.l_u if s == 0 else min(-1.0 / math.expm1(-2.0 * s), math.exp(2.0 * s) * p.l_u)
    lower = -(weak_convexity_c(s, p) + 1.0)
    if variant == "statement":
        return max(upper, lower) + 1.0
    if variant == "proof":
        return max(upper + 1.0, lower) + 1.0
    raise ValueError(f"unknown L_s variant {variant!r}")


def uniform_l(p: ConvexityParams) -> float:
    return max(1.0 / p.alpha, 1.0) * (2.0 + p.l_u)


def xi(p: ConvexityParams, T: float) -> float:
    """Forward time after which p_s is log-concave (0 if already log-concave)."""
    if not T > 0:
        raise ValueError("T must be positive")
    if p.alpha - p.big_m < 0:
        return min(0.5 * math.log((p.alpha**2 + p.big_m - p.alpha) / p.alpha**2), T)
    return 0.0


def eta(p: ConvexityParams, rho: float, T: float) -> float:
    """Smallest forward time s (capped at T) with 2 C_s + 1 >= rho.

    The threshold solves e^{4s} - 2A e^{2s} - Q = 0; it is 0 when the positive
    root is <= 1, which at rho = 0 is exactly the case 2 alpha - 2M - 1 >= 0.
    """
    if not 0.0 <= rho < 1.0:
        raise ValueError(f"rho must lie in [0, 1), got {rho}")
    if not T > 0:
        raise ValueError("T must be positive")
    a, m = p.alpha, p.big_m
    big_a = (m + rho * a * (1.0 - a)) / ((1.0 - rho) * a * a)
    q = (1.0 + rho) * (1.0 - a) ** 2 / ((1.0 - rho) * a * a)
    root = big_a + math.sqrt(q + big_a * big_a)
    if root <= 1.0:
        return 0.0
    return min(0.5 * math.log(root), T)


def t_contract(p: ConvexityParams, rho: float, T: float) -> float:
    """Backward time T - eta up to which the backward drift contracts at rate rho."""
    return T - eta(p, rho, T)


def h_max(l_uniform: float) -> float:
    """Step-size ceiling 2 / (9 L^2); callers need h < h_max strictly."""
    if not l_uniform > 0:
        raise ConfigurationError("L must be positive")
    return 2.0 / (9.0 * l_uniform**2)


def check_step(h: float, l_uniform: float) -> None:
    hm = h_max(l_uniform)
    if not h < hm:
        raise ConfigurationError(
            f"step h={h:.6g} violates h < 2/(9 L^2) = {hm:.6g} (L={l_uniform:.6g})"
        )


def b_const(m2: float, d: int) -> float:
    return math.sqrt(m2 + d)


def step_rho(h: float, l_uniform: float) -> float:
    return 9.0 * l_uniform**2 * h / 2.0


def n_h(grid: TimeGrid, p: ConvexityParams) -> int:
    """Largest k in 0..N with t_k <= T - eta(9 L^2 h / 2)."""
    lu = uniform_l(p)
    check_step(grid.h, lu)
    limit = grid.T - eta(p, step_rho(grid.h, lu), grid.T)
    k = math.floor(limit / grid.h + 1e-9)
    return max(0, min(grid.N, k))


def delta_k(k: int, grid: TimeGrid, p: ConvexityParams, variant: str = "statement") -> float:
    """Per-step factor of the coupled EM recursion."""
    if not 0 <= k < grid.N:
        raise ValueError(f"k must lie in [0, N), got {k}")
    return float(delta_sequence(grid, p, variant)[k])


def delta_sequence(grid: TimeGrid, p: ConvexityParams, variant: str = "statement") -> np.ndarray:
    nh = n_h(grid, p)
    h = grid.h
    out = np.empty(grid.N)
    for k in range(grid.N):
        s = grid.forward_time(k)
        lip = 2.0 * lipschitz_l(s, p, variant) + 1.0
        if k < nh:
            val = 1.0 + h * h * lip * lip - 2.0 * h * (2.0 * weak_convexity_c(s, p) + 1.0)
        else:
            val = 1.0 + h * h * lip * lip + 2.0 * h * lip
        out[k] = math.sqrt(max(val, 0.0))
    return out


def bound_terms(
    p: ConvexityParams,
    T: float,
    h: float,
    eps: float,
    d: int,
    m2: float,
    w2_init: float,
    proof_faithful: bool = False,
) -> dict:
    """Prefactor and the three bracketed terms of the W2 bound."""
    if eps < 0 or w2_init < 0:
        raise ConfigurationError("eps and w2_init must be nonnegative")
    lu = uniform_l(p)
    check_step(h, lu)
    horizon = T - eta(p, 0.0, T)
    if proof_faithful:
        horizon += 1.0 / (3.0 * lu)
    log_prefactor = 3.0 * lu * eta(p, step_rho(h, lu), T)
    return {
        "log_prefactor": log_prefactor,
        "prefactor": _safe_exp(log_prefactor),
        "init_term": math.exp(-T) * w2_init,
        "score_term": 4.0 * eps * horizon,
        "disc_term": math.sqrt(2.0 * h) * (b_const(m2, d) + 6.0 * lu * math.sqrt(d)) * horizon,
    }


def _safe_exp(x: float) -> float:
    try:
        return math.exp(x)
    except OverflowError:
        return math.inf


def combine_terms(t: dict) -> float:
    """prefactor * (init + score + disc), evaluated in log space so an overflowing prefactor times 0 stays 0."""
    bracket = t["init_term"] + t["score_term"] + t["disc_term"]
    if bracket == 0.0:
        return 0.0
    return _safe_exp(t["log_prefactor"] + math.log(bracket))


def main_bound(
    p: ConvexityParams,
    T: float,
    h: float,
    eps: float,
    d: int,
    m2: float,
    w2_init: float,
    proof_faithful: bool = False,
) -> float:
    return combine_terms(bound_terms(p, T, h, eps, d, m2, w2_init, proof_faithful))


def analytic_w2_init(m2: float, d: int) -> float:
    """Upper bound sqrt(m2) + sqrt(d) on W2(data, N(0, I)) through the point mass at 0."""
    return math.sqrt(m2) + math.sqrt(d)


@dataclass
class ConstantsReport:
    alpha: float
    big_m: float
    l_u: float
    T: float
    h: float
    eps: float
    d: int
    m2: float
    L_uniform: float
    xi: float
    B: float
    h_max: float
    N_h: int
    delta: np.ndarray = field(repr=False)
    w2_init: float
    w2_init_source: str
    bound: float
    terms: dict
    l_u_proof: float | None = None
    C_of_s: Callable[[float], float] = field(repr=False, default=None)
    L_of_s: Callable[[float], float] = field(repr=False, default=None)
    eta_at: Callable[[float], float] = field(repr=False, default=None)
    T_contract_at: Callable[[float], float] = field(repr=False, default=None)

    def flat(self) -> dict:
        rho = step_rho(self.h, self.L_uniform)
        out = {
            "alpha": self.alpha,
            "big_m": self.big_m,
            "l_u": self.l_u,
            "l_u_proof": self.l_u_proof if self.l_u_proof is not None else "",
            "T": self.T,
            "h": self.h,
            "N": len(self.delta),
            "eps": self.eps,
            "d": self.d,
            "m2": self.m2,
            "B": self.B,
            "L_uniform": self.L_uniform,
            "h_max": self.h_max,
            "xi": self.xi,
            "eta_0": self.eta_at(0.0),
            "rho_h": rho,
            "eta_h": self.eta_at(rho),
            "T_contract_0": self.T_contract_at(0.0),
            "T_contract_h": self.T_contract_at(rho),
            "N_h": self.N_h,
            "delta_min": float(self.delta.min()),
            "delta_max": float(self.delta.max()),
            "delta_prod": float(np.prod(self.delta)),
            "w2_init": self.w2_init,
            "w2_init_source": self.w2_init_source,
        }
        out.update(self.terms)
        out["bound"] = self.bound
        return out


def build_report(
    p: ConvexityParams,
    grid: TimeGrid,
    eps: float,
    d: int,
    m2: float,
    w2_init: float | None = None,
    w2_init_source: str = "analytic",
    l_variant: str = "statement",
    proof_faithful: bool = False,
    l_u_proof: float | None = None,
) -> ConstantsReport:
    if w2_init is None:
        w2_init = analytic_w2_init(m2, d)
        w2_init_source = "analytic"
    lu = uniform_l(p)
    terms = bound_terms(p, grid.T, grid.h, eps, d, m2, w2_init, proof_faithful)
    bound = combine_terms(terms)
    return ConstantsReport(
        alpha=p.alpha,
        big_m=p.big_m,
        l_u=p.l_u,
        T=grid.T,
        h=grid.h,
        eps=eps,
        d=d,
        m2=m2,
        L_uniform=lu,
        xi=xi(p, grid.T),
        B=b_const(m2, d),
        h_max=h_max(lu),
        N_h=n_h(grid, p),
        delta=delta_sequence(grid, p, l_variant),
        w2_init=w2_init,
        w2_init_source=w2_init_source,
        bound=bound,
        terms=terms,
        l_u_proof=l_u_proof,
        C_of_s=partial(weak_convexity_c, p=p),
        L_of_s=partial(lipschitz_l, p=p, variant=l_variant),
        eta_at=lambda rho: eta(p, rho, grid.T),
        T_contract_at=lambda rho: t_contract(p, rho, grid.T),
    )
