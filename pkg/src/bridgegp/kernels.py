"""Covariance kernels diagonalized by the sine basis.

Every kernel here has the Mercer form

    k(x, y) = beta^{-1} * sum_alpha lambda_alpha psi_alpha(x) psi_alpha(y)

with family-specific eigenvalues:

    bridge      lambda = 1 / (pi^2 |alpha|^2)         (any dim)
    helmholtz   lambda = 1 / (n^2 pi^2 - omega^2)     (dim 1)
    power       lambda = (n^2 pi^2)^(-p)              (dim 1)

The bridge family is the Green's operator of the Dirichlet Laplacian;
in one dimension the series sums to the Brownian-bridge covariance
min(x, y) - x*y, which is used as an exact closed form.  The scalar
beta rescales the whole covariance and acts as a trust weight on the
physics prior: large beta concentrates mass near the prior mean.

Gram matrices are factored through `SpdSolver`, which owns the one-shot
jitter policy for borderline-singular systems.
"""

from __future__ import annotations

import dataclasses
import logging
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from . import spectral
from .errors import OrderMismatchError, ResonanceError, SingularSystemError

logger = logging.getLogger(__name__)

FAMILIES = ("bridge", "helmholtz", "power")

_DEFAULT_ORDER = {1: 512, 2: 64, 3: 32}

_JITTER_SCALE = 1e-12


def default_order(dim: int) -> int:
    """Default truncation order per dimension."""
    if dim not in _DEFAULT_ORDER:
        raise ValueError(f"dimension must be 1, 2, or 3, got {dim}")
    return _DEFAULT_ORDER[dim]


@dataclass(frozen=True)
class KernelSpec:
    """Kernel family, truncation, and trust weight.

    Parameters
    ----------
    family : {'bridge', 'helmholtz', 'power'}
    dim : int
        Spatial dimension; helmholtz and power require dim = 1.
    order : int, optional
        Per-axis truncation; defaults to 512 / 64 / 32 for dim 1 / 2 / 3.
    beta : float
        Trust weight, strictly positive and finite.
    omega : float
        Frequency of the helmholtz family.
    p : float
        Exponent of the power family, 1/2 < p <= 1; p = 1 recovers the
        bridge eigenvalues.
    """

    family: str
    dim: int = 1
    order: int | None = None
    beta: float = 1.0
    omega: float | None = None
    p: float | None = None

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown kernel family {self.family!r}")
        order = self.order if self.order is not None else default_order(self.dim)
        spectral.check_size(self.dim, order)
        object.__setattr__(self, "order", int(order))
        beta = float(self.beta)
        if not np.isfinite(beta) or beta <= 0.0:
            raise ValueError(f"beta must be finite and positive, got {self.beta}")
        object.__setattr__(self, "beta", beta)
        if self.family == "helmholtz":
            if self.dim != 1:
                raise ValueError("helmholtz kernel is one-dimensional")
            if self.omega is None:
                raise ValueError("helmholtz kernel requires omega")
            omega = float(self.omega)
            n = np.arange(1, self.order + 1)
            gaps = n**2 * np.pi**2 - omega**2
            if np.any(np.abs(gaps) <= 1e-12 * n**2 * np.pi**2):
                raise ResonanceError(f"omega = {omega} is resonant with the sine spectrum")
            object.__setattr__(self, "omega", omega)
        elif self.omega is not None:
            raise ValueError(f"omega is only meaningful for helmholtz, got family {self.family!r}")
        if self.family == "power":
            if self.dim != 1:
                raise ValueError("power kernel is one-dimensional")
            if self.p is None:
                raise ValueError("power kernel requires p")
            p = float(self.p)
            if not 0.5 < p <= 1.0:
                raise ValueError(f"power exponent must satisfy 1/2 < p <= 1, got {p}")
            object.__setattr__(self, "p", p)
        elif self.p is not None:
            raise ValueError(f"p is only meaningful for power, got family {self.family!r}")

    @property
    def n_coeffs(self) -> int:
        return self.order**self.dim

    def with_beta(self, beta: float) -> "KernelSpec":
        return dataclasses.replace(self, beta=beta)


def eigenvalues(spec: KernelSpec, indices: np.ndarray | None = None) -> np.ndarray:
    """Eigenvalues of the beta = 1 kernel, canonical enumeration.

    `indices` may restrict to an (M, dim) array of multi-indices;
    helmholtz eigenvalues that are not strictly positive raise
    ResonanceError, since the kernel is not positive definite there.
    """
    if indices is None:
        indices = spectral.index_array(spec.dim, spec.order)
    idx = np.asarray(indices, dtype=float)
    if idx.ndim != 2 or idx.shape[1] != spec.dim:
        raise ValueError(f"indices must be (M, {spec.dim}), got shape {idx.shape}")
    sq = np.sum(idx**2, axis=1)
    if spec.family == "bridge":
        return 1.0 / (np.pi**2 * sq)
    if spec.family == "helmholtz":
        gaps = np.pi**2 * sq - spec.omega**2
        if np.any(gaps <= 0.0):
            raise ResonanceError(
                f"helmholtz eigenvalue n^2 pi^2 - omega^2 <= 0 at omega = {spec.omega}"
            )
        return 1.0 / gaps
    return (np.pi**2 * sq) ** (-spec.p)


def eigenvalue(spec: KernelSpec, alpha) -> float:
    """Single eigenvalue for the multi-index `alpha`."""
    idx = np.asarray(alpha, dtype=int).reshape(1, -1)
    if np.any(idx < 1):
        raise ValueError(f"multi-index entries must be >= 1, got {alpha}")
    return float(eigenvalues(spec, idx)[0])


def _bridge_closed_form(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """min(x, y) - x y on column vs row broadcasts; the beta = 1 bridge."""
    return np.minimum(x[:, None], y[None, :]) - np.outer(x, y)


def kernel_matrix(spec: KernelSpec, x, y=None) -> np.ndarray:
    """Kernel values k(x_i, y_j) including the beta scaling.

    The one-dimensional bridge uses the closed form min - xy; all other
    families sum the truncated Mercer series at the spec's order.  The
    beta = 1 value is computed first and divided by beta once, so
    rescaling beta is exact in floating point.
    """
    xs = spectral.validate_points(x, spec.dim)
    ys = xs if y is None else spectral.validate_points(y, spec.dim)
    if spec.family == "bridge" and spec.dim == 1:
        base = _bridge_closed_form(xs[:, 0], ys[:, 0])
    else:
        lam = eigenvalues(spec)
        px = spectral.basis_matrix(spec.dim, spec.order, xs)
        py = px if y is None else spectral.basis_matrix(spec.dim, spec.order, ys)
        base = (px * lam) @ py.T
    if y is None:
        base = 0.5 * (base + base.T)
    return base / spec.beta


def kernel_eval(spec: KernelSpec, x, y) -> float:
    """Scalar kernel value k(x, y) for single points."""
    xs = np.asarray(x, dtype=float).reshape(1, spec.dim)
    ys = np.asarray(y, dtype=float).reshape(1, spec.dim)
    return float(kernel_matrix(spec, xs, ys)[0, 0])


def kernel_diag(spec: KernelSpec, x) -> np.ndarray:
    """Pointwise variances k(x_i, x_i)."""
    xs = spectral.validate_points(x, spec.dim)
    if spec.family == "bridge" and spec.dim == 1:
        base = xs[:, 0] - xs[:, 0] ** 2
    else:
        lam = eigenvalues(spec)
        px = spectral.basis_matrix(spec.dim, spec.order, xs)
        base = np.einsum("ij,j,ij->i", px, lam, px)
    return base / spec.beta


def gram(spec: KernelSpec, x) -> np.ndarray:
    """Symmetric Gram matrix of the kernel on the points `x`."""
    return kernel_matrix(spec, x)


def mercer_partial_sum(spec: KernelSpec, x, y, order: int) -> float:
    """Truncated Mercer sum at an explicit order; for truncation studies."""
    spectral.check_size(spec.dim, order)
    idx = spectral.index_array(spec.dim, order)
    lam = eigenvalues(spec, idx)
    xs = spectral.validate_points(x, spec.dim)
    ys = spectral.validate_points(y, spec.dim)
    vx = np.ones(idx.shape[0])
    vy = np.ones(idx.shape[0])
    for axis in range(spec.dim):
        vx *= np.sin(np.pi * xs[0, axis] * idx[:, axis])
        vy *= np.sin(np.pi * ys[0, axis] * idx[:, axis])
    return float(2.0**spec.dim * np.sum(lam * vx * vy) / spec.beta)


def rkhs_sq_norm(spec: KernelSpec, u: spectral.SpectralField) -> float:
    """Squared native-space norm of the beta = 1 kernel: sum c^2 / lambda.

    The field must match the spec's dim and order.  The norm of the
    beta-scaled kernel's space is beta times this value.
    """
    if u.dim != spec.dim or u.order != spec.order:
        raise OrderMismatchError(
            f"field ({u.dim}, {u.order}) does not match spec ({spec.dim}, {spec.order})"
        )
    lam = eigenvalues(spec)
    return float(np.sum(u.coeffs**2 / lam))


class SpdSolver:
    """Cholesky factorization with a single jitter retry.

    On a failed factorization, adds 1e-12 * trace / n to the diagonal,
    logs the jitter magnitude, and tries once more; a second failure
    raises SingularSystemError.  Exposes solves against the factor and
    the log-determinant, so downstream code never refactors a Gram.
    """

    def __init__(self, matrix):
        a = np.array(matrix, dtype=float)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise ValueError(f"expected a square matrix, got shape {a.shape}")
        self.jitter = 0.0
        try:
            self._factor = scipy.linalg.cho_factor(a, lower=True)
        except np.linalg.LinAlgError:
            n = a.shape[0]
            self.jitter = _JITTER_SCALE * np.trace(a) / n
            logger.info("Gram factorization failed; retrying with jitter %.3e", self.jitter)
            try:
                self._factor = scipy.linalg.cho_factor(
                    a + self.jitter * np.eye(n), lower=True
                )
            except np.linalg.LinAlgError as exc:
                raise SingularSystemError(
                    f"Gram matrix is not positive definite after jitter {self.jitter:.3e}"
                ) from exc

    def solve(self, b) -> np.ndarray:
        return scipy.linalg.cho_solve(self._factor, np.asarray(b, dtype=float))

    def logdet(self) -> float:
        return float(2.0 * np.sum(np.log(np.diag(self._factor[0]))))
