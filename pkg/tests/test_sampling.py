"""Counter-based prior sampling: reproducibility, scaling, nesting.

The reproducibility properties are exact by construction (draw j is a
pure function of (seed, j)), so those tests use array equality, not
tolerances.  Moment checks use pinned seeds with Monte Carlo bounds.
"""

import numpy as np
import pytest

from bridgegp import (
    KernelSpec,
    NestedReport,
    OrderMismatchError,
    PriorSampler,
    SpectralField,
    SpectralSource,
    basis_field,
    eigenvalues,
    nested_consistency,
    sample,
    sample_coefficients,
    sample_power_version,
    sample_values,
    solve,
)


def make_sampler(order=32, beta=1.0, mesh=None, seed=0, mean=None):
    return PriorSampler(KernelSpec("bridge", order=order, beta=beta), mean, mesh, seed)


class TestReproducibility:
    def test_same_seed_same_draws(self):
        s = make_sampler(seed=11)
        np.testing.assert_array_equal(
            sample_coefficients(s, 5), sample_coefficients(s, 5)
        )

    def test_batch_order_invariance(self):
        # draw j depends only on (seed, j), never on batching
        s = make_sampler(seed=3)
        whole = sample_coefficients(s, 8)
        head = sample_coefficients(s, 3)
        tail = sample_coefficients(s, 5, start=3)
        np.testing.assert_array_equal(whole, np.vstack([head, tail]))
        np.testing.assert_array_equal(whole[6:7], sample_coefficients(s, 1, start=6))

    def test_mesh_prefix_coincidence(self):
        # the same (seed, j) stream feeds every mesh size
        coarse = make_sampler(mesh=4, seed=9)
        fine = make_sampler(mesh=20, seed=9)
        np.testing.assert_array_equal(
            sample_coefficients(coarse, 6), sample_coefficients(fine, 6)[:, :4]
        )

    def test_different_seeds_differ(self):
        a = sample_coefficients(make_sampler(seed=1), 1)
        b = sample_coefficients(make_sampler(seed=2), 1)
        assert not np.array_equal(a, b)

    def test_beta_rescales_same_noise(self):
        # beta only scales the fluctuation; the underlying xi is shared
        base = sample_coefficients(make_sampler(beta=1.0, seed=5), 4)
        scaled = sample_coefficients(make_sampler(beta=4.0, seed=5), 4)
        np.testing.assert_allclose(scaled, base / 2.0, rtol=1e-15)


class TestSamplerConstruction:
    def test_mean_from_solution(self):
        spec = KernelSpec("bridge", order=16)
        u0 = solve(SpectralSource(basis_field(1, 16, [1])), spec)
        s = PriorSampler(spec, u0, seed=0)
        np.testing.assert_array_equal(s.mean_prefix, u0.u0.coeffs)

    def test_scales_formula(self):
        spec = KernelSpec("bridge", order=8, beta=2.0)
        s = PriorSampler(spec, seed=0)
        np.testing.assert_allclose(
            s.scales, np.sqrt(eigenvalues(spec) / 2.0), rtol=1e-15
        )

    def test_mesh_size_validation(self):
        with pytest.raises(ValueError):
            make_sampler(order=8, mesh=0)
        with pytest.raises(ValueError):
            make_sampler(order=8, mesh=9)
        assert make_sampler(order=8).mesh_size == 8

    def test_seed_validation(self):
        with pytest.raises(ValueError):
            make_sampler(seed=-1)
        with pytest.raises(ValueError):
            make_sampler(seed=2**64)
        make_sampler(seed=2**64 - 1)

    def test_mean_mismatch(self):
        spec = KernelSpec("bridge", order=16)
        with pytest.raises(OrderMismatchError):
            PriorSampler(spec, basis_field(1, 8, [1]))
        with pytest.raises(TypeError):
            PriorSampler(spec, "not a field")

    def test_negative_count_rejected(self):
        s = make_sampler()
        with pytest.raises(ValueError):
            sample_coefficients(s, -1)
        with pytest.raises(ValueError):
            sample_coefficients(s, 2, start=-1)


class TestDraws:
    def test_full_fields_zero_tail(self):
        s = make_sampler(order=32, mesh=5, seed=2)
        fields = sample(s, 3)
        assert len(fields) == 3
        for f in fields:
            assert isinstance(f, SpectralField)
            np.testing.assert_array_equal(f.coeffs[5:], np.zeros(27))

    def test_values_match_field_evaluation(self):
        s = make_sampler(order=16, seed=4)
        x = np.linspace(0.1, 0.9, 7)
        vals = sample_values(s, x, 3)
        fields = sample(s, 3)
        for j in range(3):
            np.testing.assert_allclose(vals[j], fields[j](x), atol=1e-12)

    def test_values_chunking_invariant(self):
        # coefficients are bit-identical across batchings; the evaluation
        # matmul may block differently per chunk size, so values agree
        # only to rounding
        s = make_sampler(order=16, seed=8)
        x = np.array([0.25, 0.75])
        np.testing.assert_allclose(
            sample_values(s, x, 10, chunk=3),
            sample_values(s, x, 10, chunk=1000),
            atol=1e-14,
        )

    def test_moments(self):
        # mean and variance of the drawn coefficients at pinned seed
        spec = KernelSpec("bridge", order=4, beta=2.0)
        mean_field = SpectralField(1, 4, [1.0, -0.5, 0.0, 2.0])
        s = PriorSampler(spec, mean_field, seed=123)
        draws = sample_coefficients(s, 40000)
        expect_sd = s.scales
        np.testing.assert_allclose(
            draws.mean(axis=0), mean_field.coeffs, atol=5 * expect_sd.max() / 200.0
        )
        np.testing.assert_allclose(
            draws.std(axis=0), expect_sd, rtol=0.03
        )


class TestPowerVersions:
    def test_variance_profile(self):
        fields = sample_power_version(0.6, 64, seed=7, count=5000)
        coeffs = np.stack([f.coeffs for f in fields])
        lam = (np.arange(1, 65) ** 2 * np.pi**2) ** -0.6
        np.testing.assert_allclose(coeffs.var(axis=0), lam, rtol=0.15)
        assert abs(coeffs.mean()) < 0.01

    def test_p_one_matches_bridge_sampler(self):
        power = sample_power_version(1.0, 16, seed=5, count=3)
        bridge = sample(make_sampler(order=16, seed=5), 3)
        for a, b in zip(power, bridge):
            np.testing.assert_allclose(a.coeffs, b.coeffs, rtol=1e-12)

    def test_p_range_enforced(self):
        with pytest.raises(ValueError):
            sample_power_version(0.5, 16, seed=0, count=1)
        with pytest.raises(ValueError):
            sample_power_version(1.1, 16, seed=0, count=1)


class TestNestedConsistency:
    def test_passes_for_nested_meshes(self):
        spec = KernelSpec("bridge", order=64)
        small = PriorSampler(spec, mesh_size=4, seed=1)
        large = PriorSampler(spec, mesh_size=12, seed=1)
        report = nested_consistency(small, large, draws=10000)
        assert isinstance(report, NestedReport)
        assert report.analytic_exact
        assert report.prefix_draws_match
        assert report.within_bound
        assert report.max_deviation < report.bound
        assert report.draws == 10000

    def test_prefix_check_skipped_for_different_seeds(self):
        spec = KernelSpec("bridge", order=32)
        small = PriorSampler(spec, mesh_size=4, seed=1)
        large = PriorSampler(spec, mesh_size=8, seed=2)
        report = nested_consistency(small, large, draws=4000)
        assert report.prefix_draws_match is None
        assert report.analytic_exact

    def test_rejects_different_specs(self):
        small = PriorSampler(KernelSpec("bridge", order=32), mesh_size=4)
        large = PriorSampler(KernelSpec("bridge", order=32, beta=2.0), mesh_size=8)
        with pytest.raises(ValueError):
            nested_consistency(small, large)

    def test_rejects_non_nested_meshes(self):
        spec = KernelSpec("bridge", order=32)
        with pytest.raises(ValueError):
            nested_consistency(
                PriorSampler(spec, mesh_size=8), PriorSampler(spec, mesh_size=4)
            )

    def test_rejects_disagreeing_means(self):
        spec = KernelSpec("bridge", order=32)
        small = PriorSampler(spec, basis_field(1, 32, [1]), mesh_size=4)
        large = PriorSampler(spec, basis_field(1, 32, [2]), mesh_size=8)
        with pytest.raises(ValueError):
            nested_consistency(small, large)
