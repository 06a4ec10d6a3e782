import json
import math

import numpy as np
import pytest

from biharm4 import (
    EnergyReport,
    ParameterError,
    RadialField,
    build_grid,
    dilate,
    energy_K,
    entropy,
    field_from_json,
    field_to_json,
    grad_sq,
    hessian_sq,
    integrate,
    l2_sq,
    laplacian,
    load_field_csv,
    sample_profile,
    save_field_csv,
    zero_field,
)
from biharm4.oracle import moments
from biharm4.radial import SPHERE_MEASURE, barycentric_resample

PI2 = math.pi**2


def gaussian(grid, a=1.0, sigma=1.0):
    return sample_profile(grid, lambda r: a * np.exp(-r**2 / (2.0 * sigma**2)))


def mixture(grid, params):
    w = np.zeros(grid.n)
    for a, s in params:
        w += a * np.exp(-grid.nodes**2 / (2.0 * s * s))
    return RadialField(grid, w)


class TestBuildGrid:
    def test_rejects_small_n(self):
        with pytest.raises(ParameterError):
            build_grid(8, 16.0)

    def test_rejects_bad_radius(self):
        with pytest.raises(ParameterError):
            build_grid(64, -1.0)
        with pytest.raises(ParameterError):
            build_grid(64, 0.0)

    def test_node_layout(self, grid128):
        r = grid128.nodes
        assert r[0] == 0.0
        assert r[-1] == 16.0
        assert np.all(np.diff(r) > 0)
        # affine image of the Gauss-Lobatto points
        j = np.arange(128)
        expected = 8.0 * (1.0 - np.cos(j * np.pi / 127))
        assert np.allclose(r, expected, atol=1e-12)

    def test_weights_nonnegative_and_vanish_at_origin(self, grid128):
        assert grid128.quad_weights[0] == 0.0
        assert np.all(grid128.quad_weights >= 0.0)

    def test_derivative_of_constant_vanishes(self, grid128):
        out = grid128.D1 @ np.ones(grid128.n)
        assert np.max(np.abs(out)) < 1e-11

    def test_second_derivative_of_r_squared(self, grid128):
        out = grid128.D2 @ grid128.nodes**2
        assert np.max(np.abs(out - 2.0)) < 1e-6

    def test_grid_arrays_read_only(self, grid128):
        with pytest.raises(ValueError):
            grid128.nodes[0] = 1.0


class TestIntegrate:
    def test_zero_integrand(self, grid128):
        assert integrate(grid128, np.zeros(grid128.n)) == 0.0

    @pytest.mark.parametrize("n,R", [(64, 12.0), (96, 12.0), (128, 16.0)])
    def test_gaussian(self, n, R):
        grid = build_grid(n, R)
        got = integrate(grid, lambda r: np.exp(-r**2))
        assert abs(got - PI2) / PI2 < 1e-8

    def test_r2_gaussian(self, grid128):
        got = integrate(grid128, lambda r: r**2 * np.exp(-r**2))
        assert abs(got - 2.0 * PI2) / (2.0 * PI2) < 1e-8

    @pytest.mark.parametrize("k", range(5))
    def test_moment_exactness(self, k):
        grid = build_grid(96, 12.0)
        exact = SPHERE_MEASURE * moments(2 * k + 3, 1.0)
        got = integrate(grid, lambda r: r ** (2 * k) * np.exp(-r**2))
        assert abs(got - exact) / abs(exact) < 1e-8

    def test_linearity(self, grid128, rng):
        f = rng.normal(size=grid128.n) * np.exp(-grid128.nodes)
        g = rng.normal(size=grid128.n) * np.exp(-grid128.nodes)
        lhs = integrate(grid128, 2.0 * f - 3.0 * g)
        rhs = 2.0 * integrate(grid128, f) - 3.0 * integrate(grid128, g)
        assert abs(lhs - rhs) < 1e-10 * (1.0 + abs(rhs))

    def test_positivity(self, grid128):
        f = np.exp(-grid128.nodes**2) * (1.0 + grid128.nodes**2)
        assert integrate(grid128, f) > 0.0

    def test_shape_mismatch(self, grid128):
        with pytest.raises(ParameterError):
            integrate(grid128, np.ones(12))


class TestLaplacian:
    def test_r_squared(self, grid96):
        f = RadialField(grid96, grid96.nodes**2, project_boundary=False)
        out = laplacian(f).values[:, 0]
        assert np.max(np.abs(out - 8.0)) < 1e-6

    def test_constant(self, grid96):
        f = RadialField(grid96, np.full(grid96.n, 3.7), project_boundary=False)
        out = laplacian(f).values[:, 0]
        assert np.max(np.abs(out)) < 1e-6

    def test_gaussian(self, grid96):
        f = gaussian(grid96)
        exact = (grid96.nodes**2 - 4.0) * np.exp(-grid96.nodes**2 / 2.0)
        out = laplacian(f).values[:, 0]
        assert np.max(np.abs(out - exact)) < 1e-8


class TestFunctionals:
    def test_zero_field(self, grid128):
        z = zero_field(grid128)
        assert energy_K(z) == 0.0
        assert hessian_sq(z) == 0.0
        assert grad_sq(z) == 0.0
        assert l2_sq(z) == 0.0
        assert entropy(z) == 0.0

    def test_gaussian_values(self, grid128):
        f = gaussian(grid128)
        assert abs(energy_K(f) - 3.0 * PI2) / (3.0 * PI2) < 1e-8
        assert abs(hessian_sq(f) - 6.0 * PI2) / (6.0 * PI2) < 1e-8
        assert abs(grad_sq(f) - 2.0 * PI2) / (2.0 * PI2) < 1e-8
        assert abs(l2_sq(f) - PI2) / PI2 < 1e-8
        assert abs(entropy(f) + PI2) / PI2 < 1e-8

    def test_kinetic_dilation_invariance(self, grid128):
        f = gaussian(grid128)
        for s in (0.5, 0.8, 1.3, 2.0):
            K = energy_K(dilate(f, s))
            assert abs(K - 3.0 * PI2) / (3.0 * PI2) < 1e-6

    def test_hessian_equals_laplacian_energy_on_bump(self, grid128):
        f = sample_profile(grid128, lambda r: r**2 * np.exp(-r**2))
        lw = laplacian(f).values[:, 0]
        lap_sq = integrate(grid128, lw * lw)
        assert abs(hessian_sq(f) - lap_sq) <= 1e-6 * (1.0 + lap_sq)

    def test_integration_by_parts(self, grid128):
        for f in (gaussian(grid128), mixture(grid128, [(1.0, 0.8), (-0.4, 1.6)])):
            lw = laplacian(f).values
            pairing = float(grid128.quad_weights @ (f.values * lw).sum(axis=1))
            assert abs(grad_sq(f) + pairing) < 1e-8

    def test_identity_corpus(self, grid128, rng):
        for _ in range(20):
            k = rng.integers(1, 4)
            params = [(rng.uniform(-2, 2), rng.uniform(0.4, 2.0)) for _ in range(k)]
            f = mixture(grid128, params)
            lw = laplacian(f).values[:, 0]
            lap_sq = integrate(grid128, lw * lw)
            assert abs(hessian_sq(f) - lap_sq) <= 1e-6 * (1.0 + lap_sq)
            pairing = float(grid128.quad_weights @ (f.values[:, 0] * lw))
            assert abs(grad_sq(f) + pairing) <= 1e-6 * (1.0 + grad_sq(f))

    def test_entropy_underflow_guard(self, grid128):
        f = RadialField(grid128, np.full(grid128.n, 1e-200), project_boundary=False)
        assert entropy(f) == 0.0

    def test_vector_field_reduces_to_scalar(self, grid128):
        f1 = gaussian(grid128)
        w = f1.values[:, 0] / math.sqrt(2.0)
        f2 = RadialField(grid128, np.column_stack([w, w]))
        for func in (energy_K, hessian_sq, grad_sq, l2_sq, entropy):
            assert abs(func(f2) - func(f1)) < 1e-10 * (1.0 + abs(func(f1)))


class TestDilate:
    def test_identity(self, grid128):
        f = gaussian(grid128)
        assert np.array_equal(dilate(f, 1.0).values, f.values)

    def test_invalid_rate(self, grid128):
        with pytest.raises(ParameterError):
            dilate(gaussian(grid128), 0.0)
        with pytest.raises(ParameterError):
            dilate(gaussian(grid128), -2.0)

    def test_l2_scaling(self, grid128):
        f = gaussian(grid128)
        for s in (0.5, 1.3, 2.0):
            got = l2_sq(dilate(f, s))
            assert abs(got - s**4 * PI2) / (s**4 * PI2) < 1e-6

    def test_entropy_scaling(self, grid128):
        f = gaussian(grid128)
        for s in (0.5, 2.0):
            got = entropy(dilate(f, s))
            assert abs(got - s**4 * (-PI2)) / PI2 < 1e-6

    def test_values_beyond_support_are_zero(self, grid128):
        f = gaussian(grid128)
        shrunk = dilate(f, 0.5)
        outside = grid128.nodes > 0.5 * grid128.R_max
        assert np.all(shrunk.values[outside] == 0.0)

    def test_truncation_warning(self, grid128):
        wide = sample_profile(grid128, lambda r: np.exp(-r**2 / 18.0))
        assert dilate(wide, 4.0).truncation_warning
        narrow = sample_profile(grid128, lambda r: np.exp(-r**2 / 2.0))
        assert not dilate(narrow, 1.2).truncation_warning

    def test_resample_matches_analytic(self, grid128):
        f = gaussian(grid128)
        d = dilate(f, 1.7)
        exact = np.exp(-(grid128.nodes / 1.7) ** 2 / 2.0)
        assert np.max(np.abs(d.values[:, 0] - exact)) < 1e-10

    def test_barycentric_exact_at_nodes(self, grid128):
        f = gaussian(grid128)
        out = barycentric_resample(grid128, f.values, grid128.nodes[5:9])
        assert np.array_equal(out, f.values[5:9])


class TestRadialField:
    def test_boundary_projection(self, grid128):
        vals = np.ones(grid128.n)
        f = RadialField(grid128, vals)
        assert f.values[-1, 0] == 0.0
        raw = RadialField(grid128, vals, project_boundary=False)
        assert raw.values[-1, 0] == 1.0

    def test_shape_validation(self, grid128):
        with pytest.raises(ParameterError):
            RadialField(grid128, np.ones(12))
        with pytest.raises(ParameterError):
            RadialField(grid128, np.ones((grid128.n, 2, 2)))

    def test_rejects_nonfinite(self, grid128):
        vals = np.ones(grid128.n)
        vals[3] = np.nan
        with pytest.raises(ParameterError):
            RadialField(grid128, vals)

    def test_values_read_only(self, grid128):
        f = gaussian(grid128)
        with pytest.raises(ValueError):
            f.values[0, 0] = 2.0

    def test_amplitude_vector(self, grid128):
        f = RadialField(grid128, np.column_stack([np.ones(grid128.n), np.ones(grid128.n)]))
        assert np.allclose(f.amplitude()[:-1], math.sqrt(2.0))


class TestSerialization:
    def test_csv_roundtrip(self, grid96, tmp_path):
        f = mixture(grid96, [(1.2, 0.7), (-0.3, 1.4)])
        path = tmp_path / "field.csv"
        save_field_csv(f, path)
        back = load_field_csv(path)
        assert back.grid.n == grid96.n
        assert np.allclose(back.values, f.values, atol=1e-15)

    def test_csv_roundtrip_with_grid(self, grid96, tmp_path):
        f = gaussian(grid96)
        path = tmp_path / "field.csv"
        save_field_csv(f, path)
        back = load_field_csv(path, grid96)
        assert np.allclose(back.values, f.values)

    def test_csv_grid_mismatch(self, grid96, grid128, tmp_path):
        f = gaussian(grid96)
        path = tmp_path / "field.csv"
        save_field_csv(f, path)
        with pytest.raises(ParameterError):
            load_field_csv(path, grid128)

    def test_json_roundtrip(self, grid96):
        f = mixture(grid96, [(0.9, 1.1)])
        payload = field_to_json(f)
        assert payload["grid"] == {"n": 96, "R_max": 16.0}
        back = field_from_json(json.dumps(payload))
        assert np.allclose(back.values, f.values)

    def test_multicomponent_csv(self, grid96, tmp_path):
        vals = np.column_stack([np.exp(-grid96.nodes**2), grid96.nodes * np.exp(-grid96.nodes**2)])
        f = RadialField(grid96, vals)
        path = tmp_path / "vec.csv"
        save_field_csv(f, path)
        assert load_field_csv(path).m == 2


def test_energy_report_action_identity():
    rep = EnergyReport.from_parts(K=3.0, V=1.25, l2_sq=1.0, grad_sq=2.0,
                                  entropy=-1.0, hess_sq=6.0)
    assert rep.S == rep.K - rep.V
    assert rep.to_dict()["S"] == rep.S
