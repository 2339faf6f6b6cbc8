"""Time integration of the regularised dissipative SQG equation.

    theta_t + u . grad(theta) + kappa Lambda^alpha theta - eps Laplace(theta) = 0,
    u = R^perp theta.

The linear symbol ``kappa |k|^alpha + eps |k|^2`` is integrated exactly with
exponential factors and the transport term with classical RK4 (the
integrating-factor RK4 scheme).  The dissipated energy is accumulated with
the same stage values, so that the discrete energy budget closes to the
order of the scheme.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np
import scipy.fft as sfft

from .spectral import TWO_PI, GridSpec, ScalarField, canonical, riesz_perp, vector_lp_norm

log = logging.getLogger(__name__)

IC_KINDS = ("single_mode", "random_spectrum", "gaussian_blobs")


class ConfigError(ValueError):
    pass


class BlowUpError(RuntimeError):
    """Integration aborted; ``report`` describes the state, ``trajectory`` the partial run."""

    status = "blown_up"

    def __init__(self, message, report=None, trajectory=None):
        super().__init__(message)
        self.report = report or {}
        self.trajectory = trajectory


class ResolutionLossError(BlowUpError):
    status = "unresolved"


@dataclass(frozen=True)
class InitialConditionSpec:
    """Initial datum.  Only the fields relevant to ``kind`` are used.

    ``random_spectrum`` draws complex Gaussian coefficients for every mode with
    ``k_min <= |k| <= k_max`` in a fixed, grid-independent order, with modal
    amplitude ``|k|**(-(beta+1)/2)`` (isotropic spectrum ``E(k) ~ k**-beta``),
    and rescales to root-mean-square value ``amplitude``.  The same seed gives
    the same function on every grid that resolves ``k_max``.
    """

    kind: str
    k: tuple = (1, 0)
    amplitude: float = 1.0
    beta: float = 2.0
    k_min: float = 1.0
    k_max: float = 8.0
    seed: Optional[int] = None
    centers: tuple = ()
    widths: tuple = ()
    amplitudes: tuple = ()

    def __post_init__(self):
        if self.kind not in IC_KINDS:
            raise ConfigError(f"unknown initial condition kind {self.kind!r}")
        if self.kind == "random_spectrum" and not 0 < self.k_min <= self.k_max:
            raise ConfigError("need 0 < k_min <= k_max")
        if self.kind == "gaussian_blobs":
            n = len(self.centers)
            if n == 0 or len(self.widths) != n or len(self.amplitudes) != n:
                raise ConfigError("gaussian_blobs needs matching centers, widths, amplitudes")
            if any(w <= 0 for w in self.widths):
                raise ConfigError("blob widths must be positive")


def single_mode(k=(1, 0), amplitude=1.0) -> InitialConditionSpec:
    return InitialConditionSpec("single_mode", k=tuple(int(v) for v in k), amplitude=float(amplitude))


def random_spectrum(beta=2.0, k_min=1.0, k_max=8.0, amplitude=1.0, seed=0) -> InitialConditionSpec:
    return InitialConditionSpec("random_spectrum", beta=float(beta), k_min=float(k_min),
                                k_max=float(k_max), amplitude=float(amplitude), seed=seed)


def gaussian_blobs(centers, widths, amplitudes) -> InitialConditionSpec:
    return InitialConditionSpec("gaussian_blobs",
                                centers=tuple(tuple(float(x) for x in c) for c in centers),
                                widths=tuple(float(w) for w in widths),
                                amplitudes=tuple(float(a) for a in amplitudes))


@dataclass(frozen=True)
class SolverConfig:
    alpha: float
    kappa: float
    N: int
    t_end: float
    ic: InitialConditionSpec
    epsilon: float = 0.0
    dt: Optional[float] = None  # None: advective CFL estimate from theta_0
    c0: float = 0.01
    seed: int = 0
    snapshot_every: int = 0  # 0: first and last state only
    diagnostics_every: int = 10
    advection: bool = True
    dealias_fraction: float = 2.0 / 3.0
    name: Optional[str] = None

    def __post_init__(self):
        if not 0.0 < self.alpha <= 2.0:
            raise ConfigError(f"alpha={self.alpha} outside (0, 2]")
        if not self.kappa > 0:
            raise ConfigError("kappa must be positive")
        if not self.epsilon >= 0:
            raise ConfigError("epsilon must be non-negative")
        if self.dt is not None and not self.dt > 0:
            raise ConfigError("dt must be positive")
        if not (self.t_end >= 0 and math.isfinite(self.t_end)):
            raise ConfigError("t_end must be finite and non-negative")
        if not self.c0 > 0:
            raise ConfigError("c0 must be positive")
        if self.snapshot_every < 0 or self.diagnostics_every < 0:
            raise ConfigError("cadences must be non-negative")
        try:
            self.grid
        except ValueError as exc:
            raise ConfigError(str(exc)) from None

    @property
    def grid(self) -> GridSpec:
        return GridSpec(self.N, self.dealias_fraction)

    @property
    def flags(self) -> list:
        out = []
        if self.alpha > 1.0:
            out.append("subcritical")
        if self.epsilon == 0.0:
            out.append("unregularized")
        if not self.advection:
            out.append("linear")
        return out

    def with_(self, **kw) -> "SolverConfig":
        return replace(self, **kw)


# -- initial data -----------------------------------------------------------


def make_initial(ic: InitialConditionSpec, grid: GridSpec, seed: int = 0) -> ScalarField:
    N = grid.N
    coeffs = np.zeros((N, N), complex)
    if ic.kind == "single_mode":
        k1, k2 = ic.k
        if math.hypot(k1, k2) > grid.k_cut:
            raise ConfigError(f"mode {ic.k} outside the dealiased band |k| <= {grid.k_cut}")
        # amplitude * cos(k . x)
        coeffs[k1 % N, k2 % N] += 0.5 * ic.amplitude * N**2
        coeffs[-k1 % N, -k2 % N] += 0.5 * ic.amplitude * N**2
        return ScalarField(grid, coeffs=coeffs)

    if ic.kind == "random_spectrum":
        if ic.k_max > grid.k_cut:
            raise ConfigError(f"k_max={ic.k_max} outside the dealiased band |k| <= {grid.k_cut}")
        rng = np.random.default_rng(seed if ic.seed is None else ic.seed)
        kk = int(math.floor(ic.k_max))
        # half plane: k1 > 0, or k1 == 0 and k2 > 0; fixed lexicographic order
        modes = [(a, b) for a in range(0, kk + 1) for b in range(-kk, kk + 1)
                 if (a > 0 or b > 0) and ic.k_min <= math.hypot(a, b) <= ic.k_max]
        z = rng.standard_normal((len(modes), 2))
        for (a, b), (re, im) in zip(modes, z):
            amp = math.hypot(a, b) ** (-(ic.beta + 1.0) / 2.0)
            c = amp * complex(re, im)
            coeffs[a % N, b % N] = c
            coeffs[-a % N, -b % N] = c.conjugate()
        power = float(np.sum(np.abs(coeffs) ** 2)) / N**4  # mean square value
        if power > 0:
            coeffs *= ic.amplitude / math.sqrt(power)
        return ScalarField(grid, coeffs=coeffs)

    # gaussian blobs: Fourier series of the periodised Gaussian, truncated to the band
    k1, k2 = grid.k1, grid.k2
    ksq = grid.kmag**2
    for (cx, cy), w, a in zip(ic.centers, ic.widths, ic.amplitudes):
        coeffs += a * w**2 / TWO_PI * np.exp(-0.5 * w**2 * ksq) * np.exp(-1j * (k1 * cx + k2 * cy))
    coeffs *= N**2
    coeffs[~grid.mask] = 0.0
    coeffs[grid.N // 2, :] = 0.0
    coeffs[:, grid.N // 2] = 0.0
    return ScalarField(grid, coeffs=coeffs)


def periodic_gaussian(grid: GridSpec, center, width, amplitude=1.0, images=3):
    """Closed-form periodised Gaussian sampled on the grid (image sum)."""
    out = np.zeros((grid.N, grid.N))
    for n1 in range(-images, images + 1):
        for n2 in range(-images, images + 1):
            d1 = grid.x1 - center[0] - TWO_PI * n1
            d2 = grid.x2 - center[1] - TWO_PI * n2
            out += np.exp(-(d1**2 + d2**2) / (2 * width**2))
    return amplitude * out


# -- integrator -------------------------------------------------------------


def linear_symbol(cfg: SolverConfig) -> np.ndarray:
    g = cfg.grid
    return cfg.kappa * g.kmag**cfg.alpha + cfg.epsilon * g.kmag**2


class IFRK4:
    """Integrating-factor RK4 on raw coefficient arrays.

    ``step`` returns the new coefficients and the energy dissipated over the
    step, ``int (kappa ||Lambda^{alpha/2} theta||^2 + eps ||grad theta||^2) dt``,
    evaluated with the RK4 weights on the stage states.
    """

    def __init__(self, cfg: SolverConfig, dt: float):
        g = cfg.grid
        self.grid = g
        self.dt = float(dt)
        self.advection = cfg.advection
        L = linear_symbol(cfg)
        self.E = np.exp(-0.5 * self.dt * L)
        self.E2 = np.exp(-self.dt * L)
        self.mask = g.mask
        self.ik1 = 1j * g.odd_k1
        self.ik2 = 1j * g.odd_k2
        self.inv_k = g.inv_kmag
        self._diss_weight = L * (TWO_PI**2 / float(g.N) ** 4)

    def nonlinear(self, c):
        """``-P(u . grad theta)`` with the mean mode held at zero."""
        w = c * self.inv_k
        # two real inverse transforms packed into one complex transform each
        u = sfft.ifft2(-self.ik2 * w + 1j * (self.ik1 * w))
        grad = sfft.ifft2(self.ik1 * c + 1j * (self.ik2 * c))
        prod = u.real * grad.real + u.imag * grad.imag
        out = sfft.fft2(prod)
        out = np.where(self.mask, -out, 0.0)
        out[0, 0] = 0.0
        return out

    def dissipation(self, c) -> float:
        return float(np.sum(self._diss_weight * (c.real**2 + c.imag**2)))

    def step(self, c):
        dt, E, E2 = self.dt, self.E, self.E2
        if not self.advection:
            ca = E * c
            cc = E2 * c
            d = dt / 6.0 * (self.dissipation(c) + 4.0 * self.dissipation(ca) + self.dissipation(cc))
            return cc, d
        k1 = self.nonlinear(c)
        ca = E * (c + 0.5 * dt * k1)
        k2 = self.nonlinear(ca)
        cb = E * c + 0.5 * dt * k2
        k3 = self.nonlinear(cb)
        cc = E2 * c + dt * (E * k3)
        k4 = self.nonlinear(cc)
        new = E2 * c + (dt / 6.0) * (E2 * k1 + 2.0 * E * (k2 + k3) + k4)
        d = dt / 6.0 * (self.dissipation(c) + 2.0 * self.dissipation(ca)
                        + 2.0 * self.dissipation(cb) + self.dissipation(cc))
        return new, d


def step(state: ScalarField, cfg: SolverConfig, dt: Optional[float] = None) -> ScalarField:
    """Advance ``state`` by one integrating-factor RK4 step."""
    dt = cfg.dt if dt is None else dt
    if dt is None:
        raise ConfigError("step needs an explicit dt")
    new, _ = IFRK4(cfg, dt).step(state.coeffs)
    if not np.all(np.isfinite(new)):
        raise BlowUpError("non-finite state after one step", blowup_report(state, 0.0))
    return ScalarField(state.grid, coeffs=new)


def blowup_report(state: ScalarField, t: float) -> dict:
    c = state.coeffs
    g = state.grid
    finite = np.isfinite(c)
    edges = np.arange(0, g.k_cut + 2)
    shell = np.digitize(g.kmag, edges) - 1
    power = np.where(finite, np.abs(np.where(finite, c, 0.0)) ** 2, 0.0)
    spectrum = np.bincount(shell.ravel(), weights=power.ravel(), minlength=len(edges))
    values = np.where(np.isfinite(state.values), state.values, np.nan)
    return {
        "t": float(t),
        "linf": float(np.nanmax(np.abs(values))) if np.isfinite(values).any() else float("nan"),
        "nonfinite_modes": int((~finite).sum()),
        "spectrum_tail": [float(x) for x in spectrum[-8:]],
    }


def auto_dt(theta0: ScalarField) -> float:
    """Advective estimate ``0.5 / (N max|u_0|)``."""
    umax = vector_lp_norm(riesz_perp(theta0), math.inf)
    if umax <= 0:
        umax = 1.0
    return 0.5 / (theta0.grid.N * umax)


def resolve_steps(cfg: SolverConfig, theta0: ScalarField):
    """Return ``(dt, n_steps)`` with ``n_steps * dt == t_end``."""
    dt = cfg.dt if cfg.dt is not None else auto_dt(theta0)
    if cfg.t_end == 0:
        return dt, 0
    n = max(1, math.ceil(cfg.t_end / dt - 1e-9))
    return cfg.t_end / n, n


# -- trajectories -----------------------------------------------------------


class Sink:
    """Receives frames and snapshots during a run; override what you need."""

    def on_start(self, info: dict):
        pass

    def on_frame(self, frame, field: ScalarField):
        pass

    def on_snapshot(self, step: int, t: float, field: ScalarField):
        pass

    def on_finish(self, status: str, info: dict):
        pass


@dataclass
class Trajectory:
    config: SolverConfig
    dt: float
    n_steps: int
    times: list = field(default_factory=list)
    frames: list = field(default_factory=list)
    fields: list = field(default_factory=list)  # aligned with frames; None when not kept
    snapshots: list = field(default_factory=list)  # (step, t)
    status: str = "running"

    @property
    def final(self) -> Optional[ScalarField]:
        for f in reversed(self.fields):
            if f is not None:
                return f
        return None

    def frame_values(self, key):
        return np.array([getattr(fr, key) for fr in self.frames], dtype=float)


@dataclass
class Accumulators:
    """Running sums carried across steps (restored on resume)."""

    dissipated: float = 0.0
    f_integral: float = 0.0
    energy0: Optional[float] = None
    besov0: Optional[float] = None
    last_t: Optional[float] = None
    last_f: Optional[float] = None


def run(cfg: SolverConfig, sinks=(), *, stop_at_step: Optional[int] = None,
        keep_fields: bool = True) -> Trajectory:
    """Integrate ``cfg`` from ``t = 0`` to ``t_end``."""
    grid = cfg.grid
    theta0 = make_initial(cfg.ic, grid, cfg.seed)
    dt, n_steps = resolve_steps(cfg, theta0)
    traj = Trajectory(cfg, dt, n_steps)
    sinks = list(sinks)
    for s in sinks:
        s.on_start({"dt": dt, "n_steps": n_steps})
    return integrate(traj, theta0, 0, Accumulators(), sinks,
                     stop_at_step=stop_at_step, keep_fields=keep_fields)


def integrate(traj: Trajectory, state: ScalarField, start_step: int, acc: Accumulators,
              sinks, *, stop_at_step=None, keep_fields=True, resumed=False) -> Trajectory:
    """Core loop shared by fresh and resumed runs.

    ``state`` is the state at ``start_step``; when ``resumed`` it has already
    been framed and snapshotted.
    """
    from .diagnostics import diagnose

    cfg = traj.config
    dt, n_steps = traj.dt, traj.n_steps
    integrator = IFRK4(cfg, dt)
    diag_every = cfg.diagnostics_every
    snap_every = cfg.snapshot_every

    def is_snap(n):
        return n == 0 or n == n_steps or (snap_every > 0 and n % snap_every == 0)

    def is_diag(n):
        return n == 0 or n == n_steps or (diag_every > 0 and n % diag_every == 0) or is_snap(n)

    def emit(n, st):
        t = n * dt
        if is_snap(n):
            written = ScalarField(st.grid, values=np.array(st.values))
            st = canonical(st)
            traj.snapshots.append((n, t))
            for s in sinks:
                s.on_snapshot(n, t, written)
        if is_diag(n):
            frame = diagnose(st, cfg, n, t, acc)
            traj.times.append(t)
            traj.frames.append(frame)
            traj.fields.append(st if keep_fields else None)
            for s in sinks:
                s.on_frame(frame, st)
            if frame.top_shell_fraction > 0.01:
                raise ResolutionLossError(
                    f"top shell holds {frame.top_shell_fraction:.3g} of the energy at t={t:.6g}",
                    blowup_report(st, t))
        return st

    try:
        if not resumed:
            state = emit(start_step, state)
        c = np.array(state.coeffs)
        n = start_step
        while n < n_steps:
            if stop_at_step is not None and n >= stop_at_step:
                traj.status = "aborted"
                break
            c, d = integrator.step(c)
            n += 1
            acc.dissipated += d
            if not np.all(np.isfinite(c)):
                bad = ScalarField(state.grid, coeffs=c)
                raise BlowUpError(f"non-finite state at step {n}", blowup_report(bad, n * dt))
            if is_diag(n) or is_snap(n):
                state = emit(n, ScalarField(state.grid, coeffs=c))
                c = np.array(state.coeffs)
        else:
            traj.status = "completed"
    except BlowUpError as exc:
        traj.status = exc.status
        exc.trajectory = traj
        log.warning("run stopped: %s", exc)
        for s in sinks:
            s.on_finish(traj.status, exc.report)
        raise
    for s in sinks:
        s.on_finish(traj.status, {"steps": n})
    return traj


# -- viscosity sequence -----------------------------------------------------


@dataclass
class ViscositySequence:
    epsilons: list
    trajectories: list
    times: np.ndarray
    distances: dict  # (i, j) -> array of ||theta_i(t) - theta_j(t)||_2 at `times`


def viscosity_sequence(cfg: SolverConfig, epsilons, sinks_factory=None) -> ViscositySequence:
    """One run per viscosity with a shared initial datum and step size."""
    from .spectral import lp_norm

    eps = [float(e) for e in epsilons]
    if not eps:
        raise ConfigError("need at least one epsilon")
    if any(e < 0 for e in eps) or any(b >= a for a, b in zip(eps, eps[1:])):
        raise ConfigError("epsilons must be non-negative and strictly decreasing")
    # one dt for every member so that samples align
    theta0 = make_initial(cfg.ic, cfg.grid, cfg.seed)
    dt = cfg.dt if cfg.dt is not None else auto_dt(theta0)
    trajs = []
    for i, e in enumerate(eps):
        member = cfg.with_(epsilon=e, dt=dt, name=f"{cfg.name or 'sweep'}-eps{i}")
        sinks = sinks_factory(i, member) if sinks_factory else ()
        trajs.append(run(member, sinks))
    times = np.array(trajs[0].times)
    distances = {}
    for i in range(len(trajs)):
        for j in range(i + 1, len(trajs)):
            distances[(i, j)] = np.array([
                lp_norm(a - b, 2.0) for a, b in zip(trajs[i].fields, trajs[j].fields)
            ])
    return ViscositySequence(eps, trajs, times, distances)
