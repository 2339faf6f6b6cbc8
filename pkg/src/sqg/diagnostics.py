"""Per-frame diagnostics shared by the run loop, resume and offline recomputation."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field, fields

import numpy as np

from .flux import flux_all
from .littlewood_paley import besov_from_shells, shell_norms
from .regularity import admissible_parameters, block_norms, criterion_from_shells, wavenumber_from_shells
from .spectral import ScalarField, inner

SCHEMA_VERSION = "sqg.diagnostics/1"


def besov_parameters(alpha: float):
    """``(s, l)`` used for the per-frame ``B^s_{l,l}`` norm.

    Outside ``0 < alpha < 1`` the pair for ``alpha = 0.99`` is used.
    """
    return admissible_parameters(min(max(alpha, 1e-3), 0.99))


@dataclass
class DiagnosticsFrame:
    step: int
    t: float
    energy: float  # ||theta||_2^2 / 2
    dissipation: float  # kappa ||Lambda^{alpha/2} theta||^2 + eps ||grad theta||^2
    dissipated: float  # time integral of the dissipation rate
    budget_residual: float  # (energy + dissipated - energy_0) / energy_0
    mean: float
    linf: float
    Q: int
    Lambda: float
    resolved: bool
    f: float
    f_integral: float
    besov_sll: float
    gronwall_ratio: float
    tail: float  # max of 2^{q/2} ||theta_q||_2 over the top three shells
    top_shell_fraction: float  # ||theta_{q_max}||^2 / ||theta - mean||^2
    shell_l2: list = field(default_factory=list)
    shell_linf: list = field(default_factory=list)
    Pi: list = field(default_factory=list)  # flux rows for Q = -1..q_max
    term_rQ: list = field(default_factory=list)
    term_high: list = field(default_factory=list)
    bound: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "DiagnosticsFrame":
        names = {f.name for f in fields(cls)}
        return cls(**{k: v for k, v in d.items() if k in names})

    def flux_rows(self):
        """``(Q, Pi_Q, term_rQ, term_high, bound, ratio)`` for each ``Q``."""
        for j, (pi, r, h, b) in enumerate(zip(self.Pi, self.term_rQ, self.term_high, self.bound)):
            ratio = abs(pi) / b if b > 0 else 0.0
            yield j - 1, pi, r, h, b, ratio


def dissipation_rate(theta: ScalarField, alpha: float, kappa: float, epsilon: float) -> float:
    g = theta.grid
    sym = kappa * g.kmag**alpha + epsilon * g.kmag**2
    return inner(theta, theta.multiply(sym))


def diagnose(theta: ScalarField, cfg, step: int, t: float, acc) -> DiagnosticsFrame:
    """Evaluate every monitor on ``theta`` and advance the running sums in ``acc``.

    ``acc`` carries the dissipated energy (advanced by the integrator), the
    trapezoid integral of ``f`` over previous frames and the initial reference
    values.  Frames must be presented in time order.
    """
    s, l = besov_parameters(cfg.alpha)
    nrm = block_norms(theta, [math.inf, float(l)])
    linf_sh, l_sh = nrm[math.inf], nrm[float(l)]
    l2_sh = shell_norms(theta, 2.0)
    rep = wavenumber_from_shells(linf_sh, cfg.alpha, cfg.kappa, cfg.c0)
    f = criterion_from_shells(linf_sh, rep.Q)
    if acc.last_t is not None:
        acc.f_integral += 0.5 * (f + acc.last_f) * (t - acc.last_t)
    acc.last_t, acc.last_f = t, f

    energy = 0.5 * inner(theta, theta)
    if acc.energy0 is None:
        acc.energy0 = energy
    besov = besov_from_shells(l_sh, s, float(l))
    if acc.besov0 is None:
        acc.besov0 = besov
    gr = besov / (acc.besov0 * math.exp(acc.f_integral)) if acc.besov0 > 0 else math.nan
    budget = (energy + acc.dissipated - acc.energy0) / acc.energy0 if acc.energy0 > 0 else 0.0

    mean = theta.mean
    fluct = energy - 0.5 * mean**2 * (2 * math.pi) ** 2
    top = l2_sh[-1] ** 2 / (2.0 * fluct) if fluct > 0 else 0.0
    tail = float((2.0 ** (0.5 * np.arange(len(l2_sh) - 1)) * l2_sh[1:])[-3:].max())

    if cfg.advection:
        reports = flux_all(theta)
        Pi = [r.Pi_Q for r in reports]
        rQ = [r.term_rQ for r in reports]
        hi = [r.term_high for r in reports]
        bd = [r.bound for r in reports]
    else:
        from .flux import flux_bound

        n = len(l2_sh)
        Pi, rQ, hi = [0.0] * n, [0.0] * n, [0.0] * n
        bd = [flux_bound(theta, Q, shell_l2=l2_sh) for Q in range(-1, n - 1)]

    return DiagnosticsFrame(
        step=int(step),
        t=float(t),
        energy=float(energy),
        dissipation=dissipation_rate(theta, cfg.alpha, cfg.kappa, cfg.epsilon),
        dissipated=float(acc.dissipated),
        budget_residual=float(budget),
        mean=float(mean),
        linf=float(np.abs(theta.values).max()),
        Q=int(rep.Q),
        Lambda=float(rep.Lambda),
        resolved=bool(rep.resolved),
        f=float(f),
        f_integral=float(acc.f_integral),
        besov_sll=float(besov),
        gronwall_ratio=float(gr),
        tail=tail,
        top_shell_fraction=float(top),
        shell_l2=[float(x) for x in l2_sh],
        shell_linf=[float(x) for x in linf_sh],
        Pi=[float(x) for x in Pi],
        term_rQ=[float(x) for x in rQ],
        term_high=[float(x) for x in hi],
        bound=[float(x) for x in bd],
    )
