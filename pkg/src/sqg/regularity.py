"""Regularity monitors built on the dyadic decomposition.

The dissipation wavenumber is ``Lambda = 2**Q`` with ``Q >= 1`` the smallest
shell index beyond which every block is too small for the transport term to
beat the dissipation:

    lambda_p**(1 - alpha) * ||theta_p||_inf < c0 * kappa    for all p > Q.

The criterion functional is ``f = sup_{q <= Q} lambda_q ||theta_q||_inf``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple, Optional

import numpy as np
import scipy.fft as sfft

from .littlewood_paley import DEFAULT_PROFILE, _multipliers, besov_from_shells, lam, shell_scales
from .spectral import ScalarField


def block_norms(theta: ScalarField, ps, profile=DEFAULT_PROFILE) -> dict:
    """Shell norms ``||theta_q||_p`` for several ``p`` from one set of block transforms."""
    blocks = _multipliers(theta.grid, profile)[0]
    vals = sfft.ifft2(blocks * theta.coeffs[None], axes=(-2, -1)).real
    cell = theta.grid.cell_area
    out = {}
    absvals = np.abs(vals).reshape(len(blocks), -1)
    for p in ps:
        if math.isinf(p):
            out[p] = absvals.max(axis=1)
        else:
            out[p] = (np.sum(absvals**p, axis=1) * cell) ** (1.0 / p)
    return out


@dataclass
class WavenumberReport:
    Q: int
    Lambda: float
    resolved: bool
    witness: np.ndarray  # lambda_p^{1-alpha} ||theta_p||_inf, p = -1..q_max
    shell_linf: np.ndarray = field(repr=False, default=None)

    @property
    def q_max(self) -> int:
        return len(self.witness) - 2


def wavenumber_from_shells(shell_linf, alpha: float, kappa: float, c0: float) -> WavenumberReport:
    shell_linf = np.asarray(shell_linf, dtype=float)
    q_max = len(shell_linf) - 2
    witness = shell_scales(q_max) ** (1.0 - alpha) * shell_linf
    thr = c0 * kappa
    ok = witness < thr  # index p + 1
    Q = q_max
    for q in range(1, q_max + 1):
        if ok[q + 2:].all():
            Q = q
            break
    resolved = bool(ok[q_max + 1])
    return WavenumberReport(Q, lam(Q), resolved, witness, shell_linf)


def dissipation_wavenumber(theta: ScalarField, alpha: float, kappa: float, c0: float,
                           profile=DEFAULT_PROFILE) -> WavenumberReport:
    """Smallest ``Q >= 1`` with ``lambda_p^(1-alpha) ||theta_p||_inf < c0 kappa`` for all ``p > Q``.

    When the top resolved shell already violates the inequality no ``Q`` can be
    certified on this grid; the report then carries ``Q = q_max`` and
    ``resolved = False``.
    """
    if not (c0 > 0 and kappa > 0):
        raise ValueError("c0 and kappa must be positive")
    linf = block_norms(theta, [math.inf], profile)[math.inf]
    return wavenumber_from_shells(linf, alpha, kappa, c0)


def criterion_from_shells(shell_linf, Q: int) -> float:
    shell_linf = np.asarray(shell_linf, dtype=float)
    q_max = len(shell_linf) - 2
    top = min(Q, q_max)
    return float(np.max(shell_scales(q_max)[: top + 2] * shell_linf[: top + 2]))


def criterion_f(theta: ScalarField, report: WavenumberReport, profile=DEFAULT_PROFILE) -> float:
    """``sup_{-1 <= q <= Q} lambda_q ||theta_q||_inf`` with ``lambda_{-1} = 1/2``."""
    linf = block_norms(theta, [math.inf], profile)[math.inf]
    return criterion_from_shells(linf, report.Q)


def trapezoid(y, t) -> float:
    y = np.asarray(y, dtype=float)
    t = np.asarray(t, dtype=float)
    if len(t) < 2:
        return 0.0
    return float(np.sum(0.5 * (y[1:] + y[:-1]) * np.diff(t)))


def cumulative_trapezoid(y, t) -> np.ndarray:
    y = np.asarray(y, dtype=float)
    t = np.asarray(t, dtype=float)
    out = np.zeros(len(t))
    if len(t) > 1:
        out[1:] = np.cumsum(0.5 * (y[1:] + y[:-1]) * np.diff(t))
    return out


@dataclass
class CriterionSeries:
    times: np.ndarray
    f_values: np.ndarray
    Q_series: np.ndarray
    resolved: np.ndarray
    integral: float

    @property
    def all_resolved(self) -> bool:
        return bool(self.resolved.all())

    @property
    def unresolved_times(self) -> np.ndarray:
        return self.times[~self.resolved]


def criterion_integral(traj) -> CriterionSeries:
    """Per-frame ``f`` and ``Q`` with the trapezoid integral of ``f``."""
    frames = traj.frames
    if len(frames) < 2:
        raise ValueError("need at least two frames")
    t = np.array([fr.t for fr in frames])
    f = np.array([fr.f for fr in frames])
    Q = np.array([fr.Q for fr in frames], dtype=int)
    res = np.array([fr.resolved for fr in frames], dtype=bool)
    return CriterionSeries(t, f, Q, res, trapezoid(f, t))


def admissible_parameters(alpha: float, l_limit: int = 64):
    """Smallest even ``l >= 4`` admitting ``alpha/l < 1 - s < alpha - 2/l``, with ``s`` at the midpoint.

    The window is nonempty iff ``l > 1 + 2/alpha``.
    """
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"alpha={alpha} outside (0, 1)")
    for l in range(4, l_limit + 1, 2):
        lo, hi = alpha / l, alpha - 2.0 / l
        if lo < hi:
            s = 1.0 - 0.5 * (lo + hi)
            return s, l
    raise ValueError(f"no admissible even l <= {l_limit} for alpha={alpha}")


def lyapunov_from_shells(shell_l, s: float, l: int) -> float:
    shell_l = np.asarray(shell_l, dtype=float)
    q_max = len(shell_l) - 2
    return float(np.sum(shell_scales(q_max) ** (s * l) * shell_l**l))


def lyapunov_functional(theta: ScalarField, s: float, l: int, profile=DEFAULT_PROFILE) -> float:
    """``sum_{q=-1}^{q_max} lambda_q^{s l} ||theta_q||_l^l``."""
    if l < 4 or l % 2:
        raise ValueError("l must be even and >= 4")
    return lyapunov_from_shells(block_norms(theta, [float(l)], profile)[float(l)], s, l)


@dataclass
class GronwallReport:
    times: np.ndarray
    ratios: np.ndarray
    max_ratio: float
    defined: bool
    s: float
    l: int


def gronwall_monitor(traj, s: float, l: int, profile=DEFAULT_PROFILE) -> GronwallReport:
    """``||theta(t)||_{B^s_{l,l}} / (||theta_0||_{B^s_{l,l}} exp(int_0^t f))`` per frame."""
    t = np.array([fr.t for fr in traj.frames])
    f = np.array([fr.f for fr in traj.frames])
    norms = np.array([besov_from_shells(block_norms(th, [float(l)], profile)[float(l)], s, l)
                      for th in traj.fields])
    if norms[0] == 0:
        nan = np.full(len(t), np.nan)
        return GronwallReport(t, nan, math.nan, False, s, l)
    ratios = norms / (norms[0] * np.exp(cumulative_trapezoid(f, t)))
    return GronwallReport(t, ratios, float(ratios.max()), True, s, l)


def prodi_serrin_exponent(p: float, s: float, alpha: float) -> float:
    """``gamma = 2/p + 1 - alpha + alpha/s``."""
    return (0.0 if math.isinf(p) else 2.0 / p) + 1.0 - alpha + alpha / s


class ProdiSerrinNorm(NamedTuple):
    value: float
    gamma: float
    samples: np.ndarray  # ||theta(t)||_{B^gamma_{p,inf}} per frame


def _check_ps(s, p):
    if not (1.0 <= s < math.inf):
        raise ValueError("need 1 <= s < inf")
    if not (2.0 < p <= math.inf):
        raise ValueError("need 2 < p <= inf")


def prodi_serrin_norm(traj, s: float, p: float, alpha: Optional[float] = None,
                      profile=DEFAULT_PROFILE) -> ProdiSerrinNorm:
    """``(int_0^T ||theta||_{B^gamma_{p,inf}}^s dt)^(1/s)`` by the trapezoid rule."""
    _check_ps(s, p)
    alpha = traj.config.alpha if alpha is None else alpha
    gamma = prodi_serrin_exponent(p, s, alpha)
    t = np.array([fr.t for fr in traj.frames])
    samples = np.array([besov_from_shells(block_norms(th, [float(p)], profile)[float(p)], gamma, math.inf)
                        for th in traj.fields])
    return ProdiSerrinNorm(trapezoid(samples**s, t) ** (1.0 / s), gamma, samples)


@dataclass
class CompareReport:
    f_integral: float
    f_integral_U: float
    norm_s: float  # Prodi-Serrin norm raised to the power s
    gamma: float
    ratio: float
    U_fraction: float  # share of frames with Lambda > 2
    finite: bool


def compare_criteria(traj, s: float, p: float, profile=DEFAULT_PROFILE) -> CompareReport:
    """Compare ``int_U f`` with the Prodi-Serrin norm, ``U = {t : Lambda(t) > 2}``."""
    _check_ps(s, p)
    t = np.array([fr.t for fr in traj.frames])
    f = np.array([fr.f for fr in traj.frames])
    in_U = np.array([fr.Lambda > 2 for fr in traj.frames])
    ps = prodi_serrin_norm(traj, s, p, profile=profile)
    norm_s = ps.value**s
    fU = trapezoid(np.where(in_U, f, 0.0), t)
    if fU == 0.0:
        ratio = 0.0
    elif norm_s > 0:
        ratio = fU / norm_s
    else:
        ratio = math.inf
    total = trapezoid(f, t)
    finite = all(math.isfinite(v) for v in (total, fU, norm_s, ratio))
    return CompareReport(total, fU, norm_s, ps.gamma, ratio, float(in_U.mean()), finite)
