"""Low-pass energy flux and its commutator decomposition.

For the low-pass filter ``m_Q`` (``theta_{<=Q}`` in the dyadic decomposition)
the flux through shell ``Q`` is

    Pi_Q = int (u theta)_{<=Q} . grad theta_{<=Q} dx

and the filtered product splits as

    (u theta)_{<=Q} = r_Q(u, theta) - u_{>Q} theta_{>Q} + u_{<=Q} theta_{<=Q},

with ``r_Q`` the mollified second-difference remainder.  The last term gives
no flux because ``u_{<=Q}`` is divergence free, leaving
``Pi_Q = int r_Q . grad theta_{<=Q} - int u_{>Q} theta_{>Q} . grad theta_{<=Q}``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .littlewood_paley import DEFAULT_PROFILE, low_pass_multiplier, shell_norms, shell_scales
from .regularity import trapezoid
from .spectral import (
    TWO_PI,
    ScalarField,
    VectorField,
    gradient,
    inner,
    lp_norm,
    riesz_perp,
    scale_vector,
    vector_inner,
    vector_lp_norm,
)


@dataclass
class FluxReport:
    Q: int
    Pi_Q: float
    Pi_Q_adjoint: float  # int (u theta) . grad (theta_{<=Q})_{<=Q}
    term_rQ: float
    term_high: float
    cancellation: float  # int u_{<=Q} theta_{<=Q} . grad theta_{<=Q}
    bound: float

    @property
    def ratio(self) -> float:
        if self.bound > 0:
            return abs(self.Pi_Q) / self.bound
        return 0.0 if self.Pi_Q == 0 else math.inf

    @property
    def identity_residual(self) -> float:
        return self.Pi_Q - self.term_rQ - self.term_high


def _check_Q(grid, Q):
    if not -1 <= Q <= grid.q_max:
        raise ValueError(f"Q={Q} outside [-1, {grid.q_max}]")


def rq_remainder(u: VectorField, theta: ScalarField, Q: int, profile=DEFAULT_PROFILE) -> VectorField:
    """``r_Q = (u theta)_{<=Q} + u_{>Q} theta_{>Q} - u_{<=Q} theta_{<=Q}`` (band-projected)."""
    _check_Q(theta.grid, Q)
    m = low_pass_multiplier(theta.grid, Q, profile)
    lo_u, lo_t = u.multiply(m), theta.multiply(m)
    hi_u, hi_t = u - lo_u, theta - lo_t
    return scale_vector(u, theta).multiply(m) + scale_vector(hi_u, hi_t) - scale_vector(lo_u, lo_t)


def mollifier_kernel(grid, Q: int, profile=DEFAULT_PROFILE) -> np.ndarray:
    """Periodised kernel of the low-pass filter on the grid, summed mode by mode.

    ``h(y) = (2 pi)^-2 sum_k m_Q(k) cos(k . y)`` (``m_Q`` is real and even), so
    that ``int h = 1`` and ``h * g`` has symbol ``m_Q``.
    """
    m = low_pass_multiplier(grid, Q, profile)
    idx = np.nonzero(m)
    h = np.zeros((grid.N, grid.N))
    for i, j in zip(*idx):
        h += m[i, j] * np.cos(grid.k1[i, j] * grid.x1 + grid.k2[i, j] * grid.x2)
    return h / TWO_PI**2


def rq_remainder_quadrature(u: VectorField, theta: ScalarField, Q: int,
                            profile=DEFAULT_PROFILE) -> VectorField:
    """Direct evaluation of ``int h_Q(y) (u(x-y) - u(x)) (theta(x-y) - theta(x)) dy``.

    Costs ``O(N^4)``; meant for small grids as an independent check of
    :func:`rq_remainder`.  The result is band-projected for comparison.
    """
    grid = theta.grid
    _check_Q(grid, Q)
    h = mollifier_kernel(grid, Q, profile)
    t = theta.values
    u1, u2 = u.u1.values, u.u2.values
    r1 = np.zeros_like(t)
    r2 = np.zeros_like(t)
    N = grid.N
    for a in range(N):
        for b in range(N):
            w = h[a, b]
            if w == 0.0:
                continue
            # f(x - y_ab) on the grid is a roll by (a, b)
            dt_ = np.roll(t, (a, b), axis=(0, 1)) - t
            r1 += w * (np.roll(u1, (a, b), axis=(0, 1)) - u1) * dt_
            r2 += w * (np.roll(u2, (a, b), axis=(0, 1)) - u2) * dt_
    cell = grid.cell_area
    out = VectorField(ScalarField.from_values(grid, r1 * cell), ScalarField.from_values(grid, r2 * cell))
    return out.multiply(grid.mask.astype(float))


def flux_bound(theta: ScalarField, Q: int, profile=DEFAULT_PROFILE, *, shell_l2=None) -> float:
    """``sum_p 2^{-|p-Q|/2} lambda_p ||theta_p||_2^2`` over ``p = -1..q_max``."""
    _check_Q(theta.grid, Q)
    n2 = shell_norms(theta, 2.0, profile) if shell_l2 is None else np.asarray(shell_l2)
    q_max = len(n2) - 2
    p = np.arange(-1, q_max + 1)
    return float(np.sum(2.0 ** (-0.5 * np.abs(p - Q)) * shell_scales(q_max) * n2**2))


def energy_flux(theta: ScalarField, Q: int, profile=DEFAULT_PROFILE, *, _u=None, _ut=None,
                _shell_l2=None) -> FluxReport:
    """Flux through shell ``Q`` in both filter placements plus the decomposition terms."""
    grid = theta.grid
    _check_Q(grid, Q)
    u = riesz_perp(theta) if _u is None else _u
    ut = scale_vector(u, theta) if _ut is None else _ut
    m = low_pass_multiplier(grid, Q, profile)
    lo_u, lo_t = u.multiply(m), theta.multiply(m)
    hi_u, hi_t = u - lo_u, theta - lo_t
    grad_lo = gradient(lo_t)
    pi = vector_inner(ut.multiply(m), grad_lo)
    pi_adj = vector_inner(ut, gradient(lo_t.multiply(m)))
    low_prod = scale_vector(lo_u, lo_t)
    high_prod = scale_vector(hi_u, hi_t)
    r = ut.multiply(m) + high_prod - low_prod
    term_r = vector_inner(r, grad_lo)
    term_h = -vector_inner(high_prod, grad_lo)
    cancel = vector_inner(low_prod, grad_lo)
    bound = flux_bound(theta, Q, profile, shell_l2=_shell_l2)
    return FluxReport(Q, pi, pi_adj, term_r, term_h, cancel, bound)


def flux_all(theta: ScalarField, profile=DEFAULT_PROFILE, Qs=None) -> list:
    """:func:`energy_flux` for every ``Q`` (default ``-1..q_max``) sharing the velocity and product."""
    grid = theta.grid
    u = riesz_perp(theta)
    ut = scale_vector(u, theta)
    n2 = shell_norms(theta, 2.0, profile)
    Qs = range(-1, grid.q_max + 1) if Qs is None else Qs
    return [energy_flux(theta, Q, profile, _u=u, _ut=ut, _shell_l2=n2) for Q in Qs]


def cancellation_scale(theta: ScalarField) -> float:
    """``||u||_2 ||theta||_2 ||grad theta||_inf`` for judging the cancellation term."""
    u = riesz_perp(theta)
    return vector_lp_norm(u, 2.0) * lp_norm(theta, 2.0) * vector_lp_norm(gradient(theta), math.inf)


# -- trajectory-level reports -------------------------------------------------


@dataclass
class EnergyBalanceReport:
    residual: float  # |E(T) + int D - E(0)|
    relative_residual: float
    flux_integrals: np.ndarray  # int |Pi_Q| dt, Q = -1..q_max
    tail_series: np.ndarray  # per frame tail surrogate
    tail_mean: float  # time average of the tail surrogate
    total_dissipation: float

    def flux_integral(self, Q: int) -> float:
        return float(self.flux_integrals[Q + 1])


def energy_balance_report(traj) -> EnergyBalanceReport:
    frames = traj.frames
    if len(frames) < 2:
        raise ValueError("need at least two frames")
    t = np.array([fr.t for fr in frames])
    e0, eT = frames[0].energy, frames[-1].energy
    diss = frames[-1].dissipated - frames[0].dissipated
    res = abs(eT + diss - e0)
    rel = res / e0 if e0 > 0 else res
    pi = np.abs(np.array([fr.Pi for fr in frames]))
    flux_int = np.array([trapezoid(pi[:, j], t) for j in range(pi.shape[1])])
    tail = np.array([fr.tail for fr in frames])
    span = t[-1] - t[0]
    tail_mean = trapezoid(tail, t) / span if span > 0 else float(tail[0])
    return EnergyBalanceReport(res, rel, flux_int, tail, tail_mean, diss)


def tail_flux_table(trajs) -> list:
    """Rows ``(tail_mean, int |Pi_{q_max-1}| dt, relative residual)`` per trajectory."""
    rows = []
    for tr in trajs:
        rep = energy_balance_report(tr)
        q_max = tr.config.grid.q_max
        rows.append((rep.tail_mean, rep.flux_integral(q_max - 1), rep.relative_residual))
    return rows


@dataclass
class LowModeBudget:
    times: np.ndarray  # interior frame times
    dEdt: np.ndarray  # centred difference of the filtered energy
    rhs: np.ndarray  # Pi_Q - dissipation of the filtered field
    relative_residual: float


def filtered_energy_terms(theta: ScalarField, Q: int, alpha: float, kappa: float, epsilon: float,
                          profile=DEFAULT_PROFILE):
    """``(E_Q, Pi_Q, D_Q)`` for the once-filtered field ``theta_{<=Q}``.

    ``d/dt E_Q = Pi_Q - D_Q`` along solutions, where ``E_Q = ||theta_{<=Q}||^2 / 2``.
    """
    grid = theta.grid
    m = low_pass_multiplier(grid, Q, profile)
    lo = theta.multiply(m)
    energy = 0.5 * inner(lo, lo)
    sym = kappa * grid.kmag**alpha + epsilon * grid.kmag**2
    diss = inner(lo, lo.multiply(sym))
    pi = energy_flux(theta, Q, profile).Pi_Q
    return energy, pi, diss


def low_mode_budget(traj, Q: int, profile=DEFAULT_PROFILE) -> LowModeBudget:
    """Centred-difference check of ``d/dt E_Q = Pi_Q - D_Q`` at interior frames."""
    cfg = traj.config
    t = np.array(traj.times)
    if len(t) < 3:
        raise ValueError("need at least three frames")
    terms = np.array([filtered_energy_terms(th, Q, cfg.alpha, cfg.kappa, cfg.epsilon, profile)
                      for th in traj.fields])
    E, pi, D = terms.T
    dEdt = (E[2:] - E[:-2]) / (t[2:] - t[:-2])
    rhs = (pi - D)[1:-1]
    scale = max(np.max(np.abs(dEdt)), np.max(np.abs(pi)), np.max(D), 1e-300)
    rel = float(np.max(np.abs(dEdt - rhs)) / scale)
    return LowModeBudget(t[1:-1], dEdt, rhs, rel)
