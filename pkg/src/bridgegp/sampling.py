"""Finite-dimensional draws from the physics prior.

A draw truncated to the first M canonical coefficients is

    c_alpha = c0_alpha + sqrt(lambda_alpha / beta) * xi_alpha,

with iid standard normal xi.  The covariance is diagonal, so nested
truncations are automatically consistent: the first M1 coordinates of
an M2-coefficient draw (M1 <= M2) have exactly the M1-draw law.

Randomness is counter-based: draw i uses a Philox generator keyed by
(seed, i), so draws are reproducible independently of how many are
requested at once or in what order batches are taken.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels, pde, spectral
from .errors import OrderMismatchError

__all__ = [
    "PriorSampler",
    "sample",
    "sample_coefficients",
    "sample_values",
    "sample_power_version",
    "NestedReport",
    "nested_consistency",
]


def _philox(seed: int, index: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(key=np.array([seed, index], dtype=np.uint64)))


def _check_seed(seed) -> int:
    seed = int(seed)
    if not 0 <= seed < 2**64:
        raise ValueError(f"seed must be an unsigned 64-bit integer, got {seed}")
    return seed


@dataclass(frozen=True)
class PriorSampler:
    """Sampler for the truncated prior around a mean field.

    Parameters
    ----------
    spec : KernelSpec
        Supplies the eigenvalues and the trust weight beta.
    mean : PdeSolution, SpectralField, or None
        Prior mean; None means the zero field.
    mesh_size : int, optional
        Number of leading canonical coefficients to draw; defaults to
        the full expansion.
    seed : int
        Unsigned 64-bit key shared by all draws.
    """

    spec: kernels.KernelSpec
    mean: object = None
    mesh_size: int | None = None
    seed: int = 0

    def __post_init__(self):
        mean = self.mean
        if isinstance(mean, pde.PdeSolution):
            mean = mean.u0
        if mean is None:
            mean = spectral.zero_field(self.spec.dim, self.spec.order)
        if not isinstance(mean, spectral.SpectralField):
            raise TypeError(f"cannot use {type(self.mean).__name__} as a sampler mean")
        if mean.dim != self.spec.dim or mean.order != self.spec.order:
            raise OrderMismatchError(
                f"mean ({mean.dim}, {mean.order}) does not match "
                f"spec ({self.spec.dim}, {self.spec.order})"
            )
        size = self.spec.n_coeffs if self.mesh_size is None else int(self.mesh_size)
        if not 1 <= size <= self.spec.n_coeffs:
            raise ValueError(
                f"mesh_size must be in [1, {self.spec.n_coeffs}], got {self.mesh_size}"
            )
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "mesh_size", size)
        object.__setattr__(self, "seed", _check_seed(self.seed))

    @property
    def scales(self) -> np.ndarray:
        """Standard deviations sqrt(lambda / beta) of the drawn coefficients."""
        lam = kernels.eigenvalues(self.spec)[: self.mesh_size]
        return np.sqrt(lam / self.spec.beta)

    @property
    def mean_prefix(self) -> np.ndarray:
        return self.mean.coeffs[: self.mesh_size]


def sample_coefficients(sampler: PriorSampler, count: int, start: int = 0) -> np.ndarray:
    """Coefficient draws with absolute indices start..start+count-1.

    Row j is fully determined by (seed, start + j); requesting draws in
    batches, in any order, yields the same numbers.
    """
    if count < 0 or start < 0:
        raise ValueError("count and start must be nonnegative")
    out = np.empty((count, sampler.mesh_size))
    scales = sampler.scales
    mean = sampler.mean_prefix
    for j in range(count):
        xi = _philox(sampler.seed, start + j).standard_normal(sampler.mesh_size)
        out[j] = mean + scales * xi
    return out


def sample(sampler: PriorSampler, count: int, start: int = 0) -> list[spectral.SpectralField]:
    """Draws as full fields (unsampled trailing coefficients are zero).

    Materializes count * order**dim coefficients; for moment estimation
    over many draws prefer `sample_values` or `sample_coefficients`.
    """
    coeffs = sample_coefficients(sampler, count, start)
    full = np.zeros((count, sampler.spec.n_coeffs))
    full[:, : sampler.mesh_size] = coeffs
    return [spectral.SpectralField(sampler.spec.dim, sampler.spec.order, row) for row in full]


def sample_values(sampler: PriorSampler, x, count: int, start: int = 0,
                  chunk: int = 2048) -> np.ndarray:
    """Draws evaluated at points `x`, shape (count, len(x)).

    Streams in chunks so large Monte Carlo runs never hold all
    coefficient vectors at once.
    """
    pts = spectral.validate_points(x, sampler.spec.dim)
    psi = spectral.basis_matrix(sampler.spec.dim, sampler.spec.order, pts)
    psi = psi[:, : sampler.mesh_size]
    out = np.empty((count, pts.shape[0]))
    done = 0
    while done < count:
        step = min(chunk, count - done)
        coeffs = sample_coefficients(sampler, step, start + done)
        out[done : done + step] = coeffs @ psi.T
        done += step
    return out


def sample_power_version(p: float, order: int, seed: int, count: int,
                         start: int = 0) -> list[spectral.SpectralField]:
    """Zero-mean draws from the one-dimensional power kernel.

    Coefficients are (n^2 pi^2)^(-p/2) * xi_n; p = 1 recovers the
    bridge, while smaller p (down to, but not including, 1/2) gives
    rougher versions of it.
    """
    spec = kernels.KernelSpec("power", dim=1, order=order, p=p)
    sampler = PriorSampler(spec, mean=None, seed=seed)
    return sample(sampler, count, start)


@dataclass(frozen=True)
class NestedReport:
    """Consistency of a coarse truncation against a finer one."""

    analytic_exact: bool
    prefix_draws_match: bool | None
    max_deviation: float
    bound: float
    within_bound: bool
    draws: int


def nested_consistency(small: PriorSampler, large: PriorSampler,
                       draws: int = 10000) -> NestedReport:
    """Check that the coarse prior is the marginal of the fine prior.

    Analytically, the leading block of the fine covariance must equal
    the coarse covariance exactly (both are diagonal in lambda / beta)
    and the mean prefixes must coincide.  Empirically, the sample
    covariance of the leading block over `draws` fine draws must match
    entrywise within 4 * max(lambda) / (beta * sqrt(draws)).

    Raises ValueError when the meshes are not nested refinements of
    the same prior.
    """
    if small.spec != large.spec:
        raise ValueError("samplers must share one kernel spec to be nested")
    if small.mesh_size > large.mesh_size:
        raise ValueError(
            f"mesh {small.mesh_size} is not a prefix of mesh {large.mesh_size}"
        )
    m = small.mesh_size
    analytic = bool(
        np.array_equal(small.scales, large.scales[:m])
        and np.array_equal(small.mean_prefix, large.mean_prefix[:m])
    )
    if not analytic:
        raise ValueError("prior means disagree on the shared coefficients")

    prefix_match: bool | None = None
    if small.seed == large.seed:
        a = sample_coefficients(small, 3)
        b = sample_coefficients(large, 3)[:, :m]
        prefix_match = bool(np.array_equal(a, b))

    target = np.diag(small.scales**2)
    dev = 0.0
    cross = np.zeros((m, m))
    done = 0
    while done < draws:
        step = min(4096, draws - done)
        block = sample_coefficients(large, step, done)[:, :m] - small.mean_prefix
        cross += block.T @ block
        done += step
    dev = float(np.abs(cross / draws - target).max())
    bound = 4.0 * float(np.max(small.scales**2)) / np.sqrt(draws)
    return NestedReport(analytic, prefix_match, dev, bound, dev < bound, draws)
