import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fieldgen import cosine, random_field
from sqg.spectral import (
    GridError,
    GridSpec,
    ScalarField,
    VectorField,
    advect,
    canonical,
    dealias,
    divergence,
    fractional_laplacian,
    gradient,
    hermitian_defect,
    inner,
    integrate,
    is_dealiased,
    lp_norm,
    product,
    read_snapshot,
    riesz_perp,
    to_physical,
    to_spectral,
    upsample,
    vector_lp_norm,
    write_snapshot,
)


class TestGridSpec:
    def test_defaults(self):
        g = GridSpec(128)
        assert g.L == pytest.approx(2 * math.pi)
        assert g.k_cut == 42
        assert g.q_max == 5

    @pytest.mark.parametrize("N", [8, 12, 100, 0, -16])
    def test_rejects_bad_sizes(self, N):
        with pytest.raises(GridError):
            GridSpec(N)

    def test_rejects_tiny_cutoff(self):
        with pytest.raises(GridError):
            GridSpec(16, dealias_fraction=0.4)

    def test_band_is_disc(self, g64):
        assert g64.mask[0, 21] and not g64.mask[21, 21]


class TestTransforms:
    def test_constant(self, g32):
        c = 2.5
        th = to_spectral(ScalarField.from_values(g32, np.full((32, 32), c)))
        assert th.coeffs[0, 0] == pytest.approx(c * 32**2)
        rest = th.coeffs.copy()
        rest[0, 0] = 0
        assert np.abs(rest).max() < 1e-9
        back = to_physical(ScalarField.from_coeffs(g32, th.coeffs))
        assert np.allclose(back.values, c, atol=1e-14)

    def test_single_mode_support(self, g32):
        th = cosine(g32, 3, 0)
        nz = np.argwhere(np.abs(th.coeffs) > 1e-9)
        ks = sorted((int(g32.wavenumbers[i]), int(g32.wavenumbers[j])) for i, j in nz)
        assert ks == [(-3, 0), (3, 0)]

    def test_round_trip(self, g64, rng):
        th = random_field(g64, rng)
        back = to_physical(ScalarField.from_coeffs(g64, to_spectral(th).coeffs))
        assert np.abs(back.values - th.values).max() < 1e-12
        assert hermitian_defect(th) < 1e-12

    def test_fields_are_immutable(self, g16):
        th = cosine(g16, 1, 0)
        with pytest.raises(ValueError):
            th.values[0, 0] = 3.0

    def test_dealias_zeroes_outside_band(self, g32, rng):
        v = rng.standard_normal((32, 32))
        th = dealias(ScalarField.from_values(g32, v))
        assert is_dealiased(th)
        assert np.all(th.coeffs[~g32.mask] == 0)

    def test_canonical_is_fixed_by_snapshot_read(self, g32, rng, tmp_path):
        th = random_field(g32, rng)
        write_snapshot(tmp_path / "a.bin", th, 3, 0.5)
        back, _, _ = read_snapshot(tmp_path / "a.bin")
        assert np.array_equal(back.coeffs, canonical(th).coeffs)


class TestFractionalLaplacian:
    def test_eigenfunction(self, g32):
        out = fractional_laplacian(cosine(g32, 2, 0), 1.0)
        assert np.allclose(out.values, 2 * cosine(g32, 2, 0).values, atol=1e-12)

    def test_half_power(self, g32):
        th = cosine(g32, 3, 4)
        out = fractional_laplacian(th, 0.5)
        assert np.allclose(out.values, math.sqrt(5) * th.values, atol=1e-12)

    def test_constant_maps_to_zero(self, g16):
        th = ScalarField.from_values(g16, np.full((16, 16), 4.0))
        assert np.abs(fractional_laplacian(th, 0.7).values).max() < 1e-12

    @pytest.mark.parametrize("alpha", [0.0, -1.0, 2.5])
    def test_range(self, g16, alpha):
        with pytest.raises(ValueError):
            fractional_laplacian(cosine(g16, 1, 0), alpha)

    def test_semigroup(self, g64, rng):
        th = random_field(g64, rng)
        a = fractional_laplacian(fractional_laplacian(th, 0.4), 0.4)
        b = fractional_laplacian(th, 0.8)
        assert np.abs(a.coeffs - b.coeffs).max() <= 1e-12 * np.abs(b.coeffs).max()


class TestRiesz:
    def test_cos_x2(self, g32):
        u = riesz_perp(cosine(g32, 0, 1))
        assert np.allclose(u.u1.values, np.sin(g32.x2), atol=1e-13)
        assert np.abs(u.u2.values).max() < 1e-13

    def test_constant(self, g16):
        u = riesz_perp(ScalarField.from_values(g16, np.ones((16, 16))))
        assert vector_lp_norm(u, math.inf) == 0.0

    def test_symbol_divergence_free(self, g64):
        # k . (-k2, k1) vanishes in integer arithmetic
        k1 = g64.odd_k1.astype(np.int64)
        k2 = g64.odd_k2.astype(np.int64)
        assert np.all(k1 * -k2 + k2 * k1 == 0)

    def test_divergence_round_off(self, g64, rng):
        th = random_field(g64, rng)
        d = divergence(riesz_perp(th))
        assert np.abs(d.coeffs).max() <= 1e-14 * g64.k_cut * np.abs(th.coeffs).max()

    @settings(max_examples=25, deadline=None)
    @given(seed=st.integers(0, 2**32 - 1))
    def test_isometry(self, seed):
        g = GridSpec(32)
        th = random_field(g, np.random.default_rng(seed))
        n = lp_norm(th, 2)
        assert abs(vector_lp_norm(riesz_perp(th), 2) - n) <= 1e-12 * n


class TestAdvect:
    def test_zero_velocity(self, g32, rng):
        th = random_field(g32, rng)
        zero = ScalarField.zeros(g32)
        assert np.abs(advect(VectorField(zero, zero), th).values).max() == 0.0

    def test_constant_scalar(self, g32, rng):
        u = riesz_perp(random_field(g32, rng))
        th = ScalarField.from_values(g32, np.full((32, 32), 3.0))
        assert np.abs(advect(u, th).values).max() < 1e-12

    def test_uniform_flow(self, g32):
        one = ScalarField.from_values(g32, np.ones((32, 32)))
        out = advect(VectorField(one, ScalarField.zeros(g32)), cosine(g32, 1, 0))
        assert np.allclose(out.values, -np.sin(g32.x1), atol=1e-13)

    def test_mean_free_for_divergence_free_velocity(self, g64, rng):
        th = random_field(g64, rng)
        u = riesz_perp(random_field(g64, rng))
        m = integrate(advect(u, th))
        scale = vector_lp_norm(u, math.inf) * vector_lp_norm(gradient(th), 2)
        assert abs(m) <= 1e-12 * scale

    def test_grid_mismatch(self, g16, g32):
        u = riesz_perp(cosine(g16, 1, 0))
        with pytest.raises(GridError):
            advect(u, cosine(g32, 1, 0))

    def test_product_is_exact_on_band(self, g64):
        a, b = cosine(g64, 10, 3), cosine(g64, 7, -2)
        expected = 0.5 * (cosine(g64, 17, 1).values + cosine(g64, 3, 5).values)
        assert np.allclose(product(a, b).values, expected, atol=1e-13)


class TestNorms:
    def test_unit(self, g16):
        one = ScalarField.from_values(g16, np.ones((16, 16)))
        assert lp_norm(one, 2) == pytest.approx(2 * math.pi, rel=1e-14)
        assert lp_norm(one, 1) == pytest.approx(4 * math.pi**2, rel=1e-14)

    def test_cosine(self, g32):
        th = cosine(g32, 1, 0)
        assert lp_norm(th, 2) == pytest.approx(2 * math.pi * math.sqrt(0.5), rel=1e-13)
        assert lp_norm(th, math.inf) == pytest.approx(1.0)
        assert lp_norm(th, 2) == pytest.approx(4.4429, abs=1e-4)

    def test_parseval(self, g64, rng):
        th = random_field(g64, rng)
        quad = integrate(ScalarField.from_values(g64, th.values**2))
        assert inner(th, th) == pytest.approx(quad, rel=1e-12)

    def test_rejects_p_below_one(self, g16):
        with pytest.raises(ValueError):
            lp_norm(cosine(g16, 1, 0), 0.5)

    def test_upsample_preserves_function(self, g32, rng):
        th = random_field(g32, rng)
        fine = upsample(th, 2)
        assert np.allclose(fine.values[::2, ::2], th.values, atol=1e-13)
        assert lp_norm(fine, 2) == pytest.approx(lp_norm(th, 2), rel=1e-12)


class TestSnapshot:
    def test_round_trip_bitwise(self, g32, rng, tmp_path):
        th = random_field(g32, rng)
        p = write_snapshot(tmp_path / "s.bin", th, step=17, time=0.25)
        raw = p.read_bytes()
        assert raw[:4] == b"SQGF" and len(raw) == 32 + 8 * 32 * 32
        back, step, t = read_snapshot(p)
        assert (step, t) == (17, 0.25)
        assert np.array_equal(back.values, canonical(th).values)

    def test_bad_magic(self, g16, tmp_path):
        p = write_snapshot(tmp_path / "s.bin", cosine(g16, 1, 0))
        raw = bytearray(p.read_bytes())
        raw[0:4] = b"XXXX"
        p.write_bytes(bytes(raw))
        with pytest.raises(GridError, match="magic"):
            read_snapshot(p)

    def test_truncated(self, g16, tmp_path):
        p = write_snapshot(tmp_path / "s.bin", cosine(g16, 1, 0))
        p.write_bytes(p.read_bytes()[:-8])
        with pytest.raises(GridError):
            read_snapshot(p)
