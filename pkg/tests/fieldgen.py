"""Random and closed-form test fields."""

import numpy as np

from sqg.littlewood_paley import lam, pure_shell_band
from sqg.spectral import ScalarField, dealias


def cosine(grid, k1, k2, amp=1.0, phase=0.0):
    """``amp cos(k . x + phase)`` with exact coefficients."""
    N = grid.N
    c = np.zeros((N, N), complex)
    z = 0.5 * amp * N**2 * np.exp(1j * phase)
    c[k1 % N, k2 % N] += z
    c[-k1 % N, -k2 % N] += np.conj(z)
    return ScalarField(grid, coeffs=c)


def random_field(grid, rng, k_max=None, slope=1.0, mean=0.0):
    """Real band-limited field with coefficient magnitudes ~ |k|**-slope."""
    k_max = grid.k_cut if k_max is None else k_max
    k = np.maximum(grid.kmag, 1.0)
    c = (rng.standard_normal(k.shape) + 1j * rng.standard_normal(k.shape)) * k**-slope
    c[grid.kmag > k_max] = 0.0
    c[0, 0] = 0.0
    values = np.fft.ifft2(c).real
    values *= 1.0 / max(np.abs(values).max(), 1e-300)
    return dealias(ScalarField.from_values(grid, values + mean))


def shell_field(grid, q, rng, n_modes=6, amp=1.0):
    """Random-phase field supported where the shell-q multiplier equals 1 (exact coefficients)."""
    lo, hi = pure_shell_band(q)
    cand = np.argwhere((grid.kmag >= lo) & (grid.kmag <= hi) & (grid.k1 >= 0))
    pick = cand[rng.choice(len(cand), size=min(n_modes, len(cand)), replace=False)]
    N = grid.N
    c = np.zeros((N, N), complex)
    for i, j in pick:
        z = 0.5 * N**2 * np.exp(1j * rng.uniform(0, 2 * np.pi))
        c[i, j] += z
        c[-i % N, -j % N] += np.conj(z)
    th = ScalarField(grid, coeffs=c)
    return ScalarField(grid, coeffs=c * (amp / np.abs(th.values).max()))


def shell_packet(grid, q, shift=(0.0, 0.0)):
    """Coherent packet: all pure-shell modes of shell q with equal phase, translated by ``shift``."""
    lo, hi = pure_shell_band(q)
    sel = (grid.kmag >= lo) & (grid.kmag <= hi)
    c = np.where(sel, np.exp(-1j * (grid.k1 * shift[0] + grid.k2 * shift[1])), 0.0)
    return ScalarField(grid, coeffs=c * grid.N**2 / sel.sum())


__all__ = ["cosine", "random_field", "shell_field", "shell_packet", "lam"]
