"""Sine eigenbasis on the unit cube.

The Dirichlet Laplacian on [0, 1]^d has eigenfunctions

    psi_alpha(x) = 2^(d/2) * prod_i sin(alpha_i * pi * x_i),

indexed by multi-indices alpha in {1..S}^d, with eigenvalues
pi^2 * |alpha|^2.  Everything downstream (kernels, PDE solves,
posterior algebra, sampling) works in the coordinates of this basis,
so this module owns the bookkeeping: a canonical index enumeration, a
truncated-field container, tensor Gauss-Legendre quadrature, and the
transforms between point samples and coefficients.

Coefficient vectors are stored dense in the canonical (lexicographic)
enumeration of {1..S}^d, i.e. C-order raveling of an (S, ..., S)
tensor.  Dense storage is only viable at desk scale, so construction
enforces hard caps on the axis order per dimension.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, OrderMismatchError, ResourceLimitError

# Largest coefficient count we will hold in a dense vector (64**3).
MAX_COEFFS = 262144

# Per-axis truncation caps.  d = 1 is allowed long expansions because a
# vector of that length is still tiny; d >= 2 caps keep tensors within
# the dense budget.
_AXIS_CAP = {1: MAX_COEFFS, 2: 64, 3: 32}

# Extra Gauss-Legendre nodes per axis beyond the 2S + 1 minimum.  The
# integrands are oscillatory (frequencies up to 2*S*pi when checking
# orthonormality), and Gauss rules only resolve such modes once the
# node count passes ~pi/2 times the frequency; the slack keeps small-S
# rules comfortably past that threshold.
_EXTRA_NODES = 33


def check_size(dim: int, order: int) -> None:
    """Reject dimension/order pairs outside the dense-storage budget."""
    if dim not in (1, 2, 3):
        raise ResourceLimitError(f"dimension must be 1, 2, or 3, got {dim}")
    if order < 1:
        raise ValueError(f"truncation order must be >= 1, got {order}")
    if order > _AXIS_CAP[dim] or order**dim > MAX_COEFFS:
        raise ResourceLimitError(
            f"order {order} in dimension {dim} exceeds the dense budget "
            f"(axis cap {_AXIS_CAP[dim]}, total cap {MAX_COEFFS})"
        )


def enumerate_indices(dim: int, order: int) -> list[tuple[int, ...]]:
    """Canonical enumeration of {1..order}^dim as a list of tuples.

    The order is lexicographic: for dim=2, order=2 it is
    (1,1), (1,2), (2,1), (2,2).  Coefficient vectors throughout the
    package follow this enumeration.
    """
    check_size(dim, order)
    return list(itertools.product(range(1, order + 1), repeat=dim))


def index_array(dim: int, order: int) -> np.ndarray:
    """Same enumeration as `enumerate_indices` but as an (M, dim) int array."""
    check_size(dim, order)
    axes = [np.arange(1, order + 1)] * dim
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack(mesh, axis=-1).reshape(-1, dim)


def dirichlet_eigenvalues(dim: int, order: int) -> np.ndarray:
    """Eigenvalues pi^2 * |alpha|^2 of -Laplacian, canonical order."""
    idx = index_array(dim, order)
    return np.pi**2 * np.sum(idx.astype(float) ** 2, axis=1)


def _as_points(x, dim: int) -> tuple[np.ndarray, bool]:
    """Coerce `x` to an (N, dim) array; report whether it was a single point."""
    arr = np.asarray(x, dtype=float)
    if dim == 1:
        if arr.ndim == 0:
            return arr.reshape(1, 1), True
        if arr.ndim == 1:
            return arr.reshape(-1, 1), False
        if arr.ndim == 2 and arr.shape[1] == 1:
            return arr, False
    else:
        if arr.ndim == 1 and arr.shape[0] == dim:
            return arr.reshape(1, dim), True
        if arr.ndim == 2 and arr.shape[1] == dim:
            return arr, False
    raise ValueError(f"cannot interpret points of shape {arr.shape} in dimension {dim}")


def validate_points(x, dim: int) -> np.ndarray:
    """Return `x` as an (N, dim) array, rejecting points outside [0, 1]^d."""
    pts, _ = _as_points(x, dim)
    if not np.all(np.isfinite(pts)):
        raise DomainError("points must be finite")
    if np.any(pts < 0.0) or np.any(pts > 1.0):
        raise DomainError("points must lie in the closed unit cube")
    return pts


def as_point_batch(x, dim: int):
    """Validated (N, dim) batch plus a flag for scalar/single-point input."""
    _, single = _as_points(x, dim)
    return validate_points(x, dim), single


def basis_eval(alpha, x):
    """Evaluate psi_alpha at `x`.

    Parameters
    ----------
    alpha : sequence of int
        Multi-index with entries >= 1; its length sets the dimension.
    x : scalar, (d,) point, or (N, d) batch
        Points in the closed unit cube.

    Returns
    -------
    float or ndarray
        2^(d/2) * prod_i sin(alpha_i pi x_i), one value per point.
    """
    alpha = np.asarray(alpha, dtype=int).reshape(-1)
    if alpha.size == 0 or np.any(alpha < 1):
        raise ValueError(f"multi-index entries must be >= 1, got {tuple(alpha)}")
    dim = alpha.size
    pts, single = _as_points(x, dim)
    validate_points(pts, dim)
    vals = 2.0 ** (dim / 2.0) * np.prod(np.sin(np.pi * pts * alpha), axis=1)
    vals[np.any((pts == 0.0) | (pts == 1.0), axis=1)] = 0.0
    return float(vals[0]) if single else vals


def basis_matrix(dim: int, order: int, x) -> np.ndarray:
    """Matrix Psi with Psi[i, j] = psi_{alpha_j}(x_i), canonical columns."""
    pts = validate_points(x, dim)
    idx = index_array(dim, order)
    vals = np.ones((pts.shape[0], idx.shape[0]))
    for axis in range(dim):
        vals *= np.sin(np.pi * np.outer(pts[:, axis], idx[:, axis]))
    # sin(n pi x) vanishes identically on the boundary; make that exact
    # instead of leaving ~1e-16 residue from rounded pi.
    on_boundary = np.any((pts == 0.0) | (pts == 1.0), axis=1)
    vals[on_boundary] = 0.0
    return 2.0 ** (dim / 2.0) * vals


@dataclass(frozen=True)
class SpectralField:
    """A function on [0, 1]^d given by a truncated sine expansion.

    Parameters
    ----------
    dim : int
        Spatial dimension, 1 to 3.
    order : int
        Per-axis truncation order S; the field has order**dim coefficients.
    coeffs : ndarray
        Coefficients against the orthonormal basis, canonical enumeration.
        Stored read-only; fields are value objects.
    """

    dim: int
    order: int
    coeffs: np.ndarray

    def __post_init__(self):
        check_size(self.dim, self.order)
        c = np.array(self.coeffs, dtype=float).reshape(-1)
        if c.size != self.order**self.dim:
            raise OrderMismatchError(
                f"expected {self.order ** self.dim} coefficients, got {c.size}"
            )
        if not np.all(np.isfinite(c)):
            raise ValueError("coefficients must be finite")
        c.flags.writeable = False
        object.__setattr__(self, "coeffs", c)

    def as_tensor(self) -> np.ndarray:
        """Coefficients reshaped to an (S, ..., S) tensor."""
        return self.coeffs.reshape((self.order,) * self.dim)

    def __call__(self, x):
        return evaluate(self, x)

    def __add__(self, other: "SpectralField") -> "SpectralField":
        _check_compatible(self, other)
        return SpectralField(self.dim, self.order, self.coeffs + other.coeffs)

    def __sub__(self, other: "SpectralField") -> "SpectralField":
        _check_compatible(self, other)
        return SpectralField(self.dim, self.order, self.coeffs - other.coeffs)

    def __mul__(self, scalar) -> "SpectralField":
        return SpectralField(self.dim, self.order, float(scalar) * self.coeffs)

    __rmul__ = __mul__


def _check_compatible(u: SpectralField, v: SpectralField) -> None:
    if u.dim != v.dim or u.order != v.order:
        raise OrderMismatchError(
            f"incompatible fields: dim/order ({u.dim}, {u.order}) vs ({v.dim}, {v.order})"
        )


def zero_field(dim: int, order: int) -> SpectralField:
    check_size(dim, order)
    return SpectralField(dim, order, np.zeros(order**dim))


def basis_field(dim: int, order: int, alpha) -> SpectralField:
    """The field whose expansion is exactly psi_alpha."""
    alpha = tuple(int(a) for a in np.asarray(alpha).reshape(-1))
    if len(alpha) != dim or any(a < 1 or a > order for a in alpha):
        raise ValueError(f"multi-index {alpha} not in {{1..{order}}}^{dim}")
    coeffs = np.zeros(order**dim)
    flat = np.ravel_multi_index(tuple(a - 1 for a in alpha), (order,) * dim)
    coeffs[flat] = 1.0
    return SpectralField(dim, order, coeffs)


@dataclass(frozen=True)
class QuadratureRule:
    """Tensor-product Gauss-Legendre rule on [0, 1]^d.

    `axis_nodes` / `axis_weights` hold the 1D rule reused on every axis;
    `nodes` and `weights` expose the full tensor grid for generic
    integrands.  Weights are strictly positive and sum to one on each
    axis, hence to one over the cube.
    """

    dim: int
    axis_nodes: np.ndarray
    axis_weights: np.ndarray

    def __post_init__(self):
        for name in ("axis_nodes", "axis_weights"):
            arr = np.array(getattr(self, name), dtype=float)
            arr.flags.writeable = False
            object.__setattr__(self, name, arr)
        if np.any(self.axis_weights <= 0.0):
            raise ValueError("quadrature weights must be strictly positive")

    @property
    def nodes(self) -> np.ndarray:
        mesh = np.meshgrid(*([self.axis_nodes] * self.dim), indexing="ij")
        return np.stack(mesh, axis=-1).reshape(-1, self.dim)

    @property
    def weights(self) -> np.ndarray:
        w = self.axis_weights
        for _ in range(self.dim - 1):
            w = np.multiply.outer(w, self.axis_weights)
        return w.reshape(-1)

    def integrate(self, values_on_nodes) -> float:
        """Weighted sum of integrand values given on the tensor grid."""
        vals = np.asarray(values_on_nodes, dtype=float).reshape(-1)
        return float(self.weights @ vals)


def gauss_legendre_rule(dim: int, order: int) -> QuadratureRule:
    """Rule sized for products of basis functions up to `order` per axis.

    Uses 2*order + 33 Gauss-Legendre nodes per axis, mapped from
    [-1, 1] to [0, 1].  That exceeds the 2*order + 1 floor needed for
    polynomial exactness arguments and, more to the point, resolves the
    sin(m pi x) * sin(n pi x) integrands (m, n <= order) to near machine
    precision.
    """
    check_size(dim, order)
    n_nodes = 2 * order + _EXTRA_NODES
    nodes, weights = np.polynomial.legendre.leggauss(n_nodes)
    return QuadratureRule(dim, 0.5 * (nodes + 1.0), 0.5 * weights)


_RULE_CACHE: dict[tuple[int, int], QuadratureRule] = {}


def default_rule(dim: int, order: int) -> QuadratureRule:
    key = (dim, order)
    if key not in _RULE_CACHE:
        _RULE_CACHE[key] = gauss_legendre_rule(dim, order)
    return _RULE_CACHE[key]


def _axis_transform(order: int, axis_nodes: np.ndarray) -> np.ndarray:
    """T[n-1, j] = sqrt(2) sin(n pi x_j) for the 1D analysis/synthesis passes."""
    n = np.arange(1, order + 1)
    return np.sqrt(2.0) * np.sin(np.pi * np.outer(n, axis_nodes))


def project(f, dim: int, order: int, rule: QuadratureRule | None = None) -> SpectralField:
    """L2 projection of a callable onto the truncated basis.

    Parameters
    ----------
    f : callable
        Maps an (N,) array (dim = 1) or (N, dim) array to (N,) values.
    dim, order : int
        Target expansion shape.
    rule : QuadratureRule, optional
        Defaults to `default_rule(dim, order)`.

    Returns
    -------
    SpectralField
        Coefficients c_alpha = integral of f * psi_alpha, computed by
        axis-separated contraction of the tensor quadrature grid.
    """
    check_size(dim, order)
    if rule is None:
        rule = default_rule(dim, order)
    pts = rule.nodes
    vals = np.asarray(f(pts[:, 0] if dim == 1 else pts), dtype=float).reshape(
        (rule.axis_nodes.size,) * dim
    )
    t = _axis_transform(order, rule.axis_nodes) * rule.axis_weights
    tensor = vals
    for _ in range(dim):
        # Contract the leading grid axis down to coefficient length; after
        # d passes every axis has been transformed once.
        tensor = np.tensordot(t, tensor, axes=(1, 0))
        tensor = np.moveaxis(tensor, 0, dim - 1)
    return SpectralField(dim, order, tensor.reshape(-1))


def evaluate(u: SpectralField, x):
    """Evaluate the expansion at a point or batch of points."""
    pts, single = as_point_batch(x, u.dim)
    vals = basis_matrix(u.dim, u.order, pts) @ u.coeffs
    return float(vals[0]) if single else vals


def values_on_rule(u: SpectralField, rule: QuadratureRule) -> np.ndarray:
    """Field values on the rule's tensor grid, flattened in C order.

    Synthesis runs axis by axis, so the cost is O(d * m^d * S) instead
    of the O(m^d * S^d) a dense basis matrix would need.
    """
    if rule.dim != u.dim:
        raise OrderMismatchError(f"rule dimension {rule.dim} != field dimension {u.dim}")
    t = _axis_transform(u.order, rule.axis_nodes)
    tensor = u.as_tensor()
    for _ in range(u.dim):
        tensor = np.tensordot(t.T, tensor, axes=(1, 0))
        tensor = np.moveaxis(tensor, 0, u.dim - 1)
    return tensor.reshape(-1)


def l2_inner(u: SpectralField, v: SpectralField) -> float:
    """L2 inner product via Parseval; fields must share dim and order."""
    _check_compatible(u, v)
    return float(u.coeffs @ v.coeffs)


def l2_norm(u: SpectralField) -> float:
    return float(np.linalg.norm(u.coeffs))
