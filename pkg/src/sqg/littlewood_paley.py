"""Smooth dyadic (Littlewood-Paley) decomposition on the periodic grid.

Shell ``q >= 0`` carries the multiplier ``phi(k / 2**q)`` with
``phi(r) = chi(r/2) - chi(r)``; shell ``-1`` carries ``chi`` itself.  The
low-pass ``theta_{<=Q}`` is the sum of shells ``-1..Q``, which telescopes to
the single multiplier ``chi(k / 2**(Q+1))``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .spectral import (
    GridError,
    GridSpec,
    ScalarField,
    VectorField,
    advect,
    fractional_laplacian,
    gradient,
    lp_norm,
    upsample,
)


def lam(q) -> float:
    """Dyadic scale ``2**q`` (so ``lam(-1) == 0.5``)."""
    return 2.0 ** q


def _bump(x):
    out = np.zeros_like(x, dtype=float)
    pos = x > 0
    out[pos] = np.exp(-1.0 / x[pos])
    return out


def smooth_step(x):
    """C-infinity step ``f(x) / (f(x) + f(1-x))`` with ``f(x) = exp(-1/x)``."""
    x = np.clip(np.asarray(x, dtype=float), 0.0, 1.0)
    a = _bump(x)
    b = _bump(1.0 - x)
    return a / (a + b)


@dataclass(frozen=True)
class DyadicProfile:
    """Radial cutoff ``chi``: 1 on ``r <= 1 - w``, 0 on ``r >= 1``."""

    transition_width: float = 0.25

    def __post_init__(self):
        if not 0.0 < self.transition_width <= 0.5:
            # wider transitions break disjointness of shells two apart
            raise ValueError("transition_width must lie in (0, 1/2]")

    @property
    def flat_edge(self) -> float:
        return 1.0 - self.transition_width

    def chi(self, r):
        r = np.abs(np.asarray(r, dtype=float))
        w = self.transition_width
        out = np.where(r <= 1.0 - w, 1.0, 0.0)
        mid = (r > 1.0 - w) & (r < 1.0)
        if np.any(mid):
            out = np.where(mid, smooth_step((1.0 - r) / w), out)
        return out if out.ndim else float(out)

    def phi(self, r):
        r = np.asarray(r, dtype=float)
        out = self.chi(r / 2.0) - self.chi(r)
        return out if np.ndim(out) else float(out)


DEFAULT_PROFILE = DyadicProfile()


def make_profile(transition_width: float = 0.25) -> DyadicProfile:
    return DyadicProfile(transition_width)


@lru_cache(maxsize=16)
def _multipliers(grid: GridSpec, profile: DyadicProfile):
    k = grid.kmag
    qs = range(-1, grid.q_max + 1)
    # chi(k / 2**(Q+1)) for Q = -1..q_max
    low = np.stack([profile.chi(k / lam(Q + 1)) for Q in qs])
    blocks = np.empty_like(low)
    blocks[0] = profile.chi(k)
    blocks[1:] = low[1:] - low[:-1]
    low.flags.writeable = False
    blocks.flags.writeable = False
    return blocks, low


def block_multiplier(grid: GridSpec, q: int, profile: DyadicProfile = DEFAULT_PROFILE):
    _check_q(grid, q)
    return _multipliers(grid, profile)[0][q + 1]


def low_pass_multiplier(grid: GridSpec, Q: int, profile: DyadicProfile = DEFAULT_PROFILE):
    """Multiplier of ``theta_{<=Q}``; zero for ``Q < -1``."""
    if Q < -1:
        return np.zeros((grid.N, grid.N))
    if Q > grid.q_max:
        return np.ones((grid.N, grid.N))
    return _multipliers(grid, profile)[1][Q + 1]


def _check_q(grid, q):
    if not -1 <= q <= grid.q_max:
        raise ValueError(f"shell index {q} outside [-1, {grid.q_max}]")


def pure_shell_band(q: int) -> tuple[float, float]:
    """Radii ``[lo, hi]`` on which shell ``q`` has multiplier exactly 1."""
    if q == -1:
        return 0.0, 0.75
    return lam(q), 1.5 * lam(q)


# -- projections --------------------------------------------------------------


def project_block(theta: ScalarField, q: int, profile: DyadicProfile = DEFAULT_PROFILE) -> ScalarField:
    """The dyadic block ``Delta_q theta``."""
    return theta.multiply(block_multiplier(theta.grid, q, profile))


def low_pass(theta: ScalarField, Q: int, profile: DyadicProfile = DEFAULT_PROFILE) -> ScalarField:
    """``theta_{<=Q} = sum_{q=-1}^{Q} Delta_q theta``."""
    _check_q(theta.grid, Q)
    return theta.multiply(low_pass_multiplier(theta.grid, Q, profile))


def high_pass(theta: ScalarField, Q: int, profile: DyadicProfile = DEFAULT_PROFILE) -> ScalarField:
    _check_q(theta.grid, Q)
    return theta.multiply(1.0 - low_pass_multiplier(theta.grid, Q, profile))


def _low_pass_any(theta, Q, profile):
    return theta.multiply(low_pass_multiplier(theta.grid, Q, profile))


@dataclass(frozen=True)
class BlockSet:
    """Blocks ``theta_q`` for ``q = -1..q_max`` (``blocks[q + 1]``)."""

    blocks: tuple
    q_max: int

    def __getitem__(self, q: int) -> ScalarField:
        if q < -1 or q > self.q_max:
            raise IndexError(q)
        return self.blocks[q + 1]

    def get(self, q: int):
        """Block ``q``, or ``None`` outside the resolved range."""
        if q < -1 or q > self.q_max:
            return None
        return self.blocks[q + 1]

    def __len__(self):
        return len(self.blocks)

    def reconstruct(self) -> ScalarField:
        out = self.blocks[0]
        for b in self.blocks[1:]:
            out = out + b
        return out


def decompose(theta: ScalarField, profile: DyadicProfile = DEFAULT_PROFILE) -> BlockSet:
    grid = theta.grid
    blocks = _multipliers(grid, profile)[0]
    return BlockSet(tuple(theta.multiply(m) for m in blocks), grid.q_max)


def shell_norms(theta: ScalarField, p: float, profile: DyadicProfile = DEFAULT_PROFILE) -> np.ndarray:
    """``||theta_q||_p`` for ``q = -1..q_max``."""
    grid = theta.grid
    blocks = _multipliers(grid, profile)[0]
    if p == 2.0:
        # Parseval, no inverse transforms needed
        power = np.abs(theta.coeffs) ** 2
        scale = (2.0 * math.pi) ** 2 / float(grid.N) ** 4
        return np.sqrt(np.einsum("qij,ij->q", blocks**2, power) * scale)
    return np.array([lp_norm(theta.multiply(m), p) for m in blocks])


def shell_scales(q_max: int) -> np.ndarray:
    return np.array([lam(q) for q in range(-1, q_max + 1)])


# -- Besov-type quantities ----------------------------------------------------


def besov_from_shells(norms, s: float, r: float) -> float:
    """Inhomogeneous Besov norm from precomputed shell norms ``q = -1..q_max``."""
    norms = np.asarray(norms, dtype=float)
    q = np.arange(0, len(norms) - 1)
    weighted = (2.0 ** (s * q)) * norms[1:]
    if math.isinf(r):
        tail = float(weighted.max()) if weighted.size else 0.0
    else:
        tail = float(np.sum(weighted**r) ** (1.0 / r))
    return float(norms[0]) + tail


def besov_norm(theta: ScalarField, s: float, p: float, r: float,
               profile: DyadicProfile = DEFAULT_PROFILE) -> float:
    """``||theta_{-1}||_p + || (2**(q s) ||theta_q||_p)_{q=0..q_max} ||_{l^r}``."""
    if not (p >= 1.0 and r >= 1.0):
        raise ValueError("p and r must lie in [1, inf]")
    return besov_from_shells(shell_norms(theta, p, profile), s, r)


def c_natural_tail(theta: ScalarField, profile: DyadicProfile = DEFAULT_PROFILE) -> np.ndarray:
    """Sequence ``2**(q/2) ||theta_q||_2`` for ``q = 0..q_max``."""
    norms = shell_norms(theta, 2.0, profile)[1:]
    q = np.arange(len(norms))
    return 2.0 ** (0.5 * q) * norms


def tail_surrogate(theta: ScalarField, top: int = 3, profile: DyadicProfile = DEFAULT_PROFILE) -> float:
    """Max of the c(N) sequence over the top ``top`` resolved shells."""
    return float(c_natural_tail(theta, profile)[-top:].max())


# -- paraproduct and commutator ----------------------------------------------


def _vector_blocks(u: VectorField, profile):
    b1 = decompose(u.u1, profile)
    b2 = decompose(u.u2, profile)
    return b1, b2


def bony_decompose(u: VectorField, theta: ScalarField, q: int,
                   profile: DyadicProfile = DEFAULT_PROFILE):
    """Split ``Delta_q(u . grad theta)`` into low-high, high-low and high-high parts.

    Returns ``(T_lh, T_hl, R_hh)`` with

    * ``T_lh = sum_{|p-q|<=2} Delta_q(u_{<=p-2} . grad theta_p)``
    * ``T_hl = sum_{|p-q|<=2} Delta_q(u_p . grad theta_{<=p-2})``
    * ``R_hh = sum_{p>=q-2} Delta_q(u_p . grad (theta_{p-1}+theta_p+theta_{p+1}))``
    """
    grid = theta.grid
    if u.grid != grid:
        raise GridError("velocity and scalar live on different grids")
    _check_q(grid, q)
    qmax = grid.q_max
    tb = decompose(theta, profile)
    u1b, u2b = _vector_blocks(u, profile)

    def ublock(p):
        return VectorField(u1b[p], u2b[p])

    def ulow(m):
        return u.multiply(low_pass_multiplier(grid, m, profile))

    zero = ScalarField.zeros(grid)
    lh = zero
    hl = zero
    for p in range(max(-1, q - 2), min(qmax, q + 2) + 1):
        if p - 2 >= -1:
            lh = lh + advect(ulow(p - 2), tb[p])
            hl = hl + advect(ublock(p), _low_pass_any(theta, p - 2, profile))
    hh = zero
    for p in range(max(-1, q - 2), qmax + 1):
        tilde = tb[p]
        if p - 1 >= -1:
            tilde = tilde + tb[p - 1]
        if p + 1 <= qmax:
            tilde = tilde + tb[p + 1]
        hh = hh + advect(ublock(p), tilde)
    m = block_multiplier(grid, q, profile)
    return lh.multiply(m), hl.multiply(m), hh.multiply(m)


def commutator(u: VectorField, theta: ScalarField, q: int, p: int,
               profile: DyadicProfile = DEFAULT_PROFILE) -> ScalarField:
    """``[Delta_q, u_{<=p-2} . grad] theta_p``."""
    grid = theta.grid
    if u.grid != grid:
        raise GridError("velocity and scalar live on different grids")
    _check_q(grid, q)
    _check_q(grid, p)
    ulow = u.multiply(low_pass_multiplier(grid, p - 2, profile))
    tp = project_block(theta, p, profile)
    first = project_block(advect(ulow, tp), q, profile)
    second = advect(ulow, project_block(tp, q, profile))
    return first - second


# -- integral identities checked on exact-quadrature grids -------------------


def exact_factor(N: int, degree: float) -> int:
    """Smallest power-of-two refinement whose grid integrates degree ``degree`` exactly."""
    f = 1
    while f * N <= degree:
        f *= 2
    return f


def _band_edge(theta: ScalarField) -> int:
    c = theta.coeffs
    nz = np.abs(c) > 0
    if not nz.any():
        return 0
    g = theta.grid
    return int(max(np.abs(g.k1[nz]).max(), np.abs(g.k2[nz]).max()))


def transport_integral(u: VectorField, theta: ScalarField, q: int, l: int,
                       profile: DyadicProfile = DEFAULT_PROFILE):
    """``int u_{<=q-2} . grad theta_q  theta_q |theta_q|^(l-2) dx`` and its scale.

    Returns ``(value, scale)`` where
    ``scale = ||u||_inf ||grad theta_q||_l ||theta_q||_l^(l-1)``.  For even ``l``
    the integrand is a trigonometric polynomial and is integrated exactly on a
    refined grid.
    """
    grid = theta.grid
    tq = project_block(theta, q, profile)
    ulow = u.multiply(low_pass_multiplier(grid, q - 2, profile))
    degree = l * _band_edge(tq) + max(_band_edge(ulow.u1), _band_edge(ulow.u2))
    f = exact_factor(grid.N, degree)
    tq_f = upsample(tq, f)
    u1f = upsample(ulow.u1, f).values
    u2f = upsample(ulow.u2, f).values
    grad = gradient(tq_f)
    t = tq_f.values
    integrand = (u1f * grad.u1.values + u2f * grad.u2.values) * t * np.abs(t) ** (l - 2)
    value = float(integrand.sum()) * tq_f.grid.cell_area
    gmag = np.hypot(grad.u1.values, grad.u2.values)
    grad_l = (float(np.sum(gmag**l)) * tq_f.grid.cell_area) ** (1.0 / l)
    theta_l = lp_norm(tq_f, l)
    u_inf = float(np.hypot(u.u1.values, u.u2.values).max())
    return value, u_inf * grad_l * theta_l ** (l - 1)


def dissipation_ratio(theta: ScalarField, q: int, alpha: float, l: int,
                      profile: DyadicProfile = DEFAULT_PROFILE) -> float:
    """``l int theta_q Lambda^alpha theta_q |theta_q|^(l-2) / (2**(q alpha) ||theta_q||_l^l)``."""
    tq = project_block(theta, q, profile)
    f = exact_factor(theta.grid.N, l * _band_edge(tq))
    tq_f = upsample(tq, f)
    t = tq_f.values
    lt = fractional_laplacian(tq_f, alpha).values
    num = l * float(np.sum(t * lt * np.abs(t) ** (l - 2))) * tq_f.grid.cell_area
    den = lam(q) ** alpha * lp_norm(tq_f, l) ** l
    return num / den


def dyadic_rescale(theta: ScalarField, m: int) -> ScalarField:
    """Return ``theta(2**m x)`` for ``m >= 0`` (moves mode ``k`` to ``2**m k``)."""
    if m < 0:
        raise ValueError("only refinement (m >= 0) maps the torus to itself")
    g = theta.grid
    if m == 0:
        return theta
    s = 2**m
    out = np.zeros((g.N, g.N), complex)
    c = theta.coeffs
    nz = np.argwhere(np.abs(c) > 0)
    for i, j in nz:
        k1 = int(g.wavenumbers[i]) * s
        k2 = int(g.wavenumbers[j]) * s
        if math.hypot(k1, k2) > g.k_cut:
            raise GridError(f"rescaled mode ({k1}, {k2}) leaves the band")
        out[k1 % g.N, k2 % g.N] = c[i, j]
    return ScalarField(g, coeffs=out)
