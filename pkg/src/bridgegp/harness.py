"""Design diagnostics and reproducible studies.

Two studies mirror the two failure axes of the method: `convergence_study`
tracks posterior error and uncertainty as point designs refine, and
`model_error_study` tracks the calibrated trust weight as the truth is
pushed away from the prior mean along a fixed direction.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.integrate
import scipy.spatial
import scipy.stats

from . import kernels, pde, regression, spectral

# Evaluation grids for the fill-distance supremum, per dimension; about
# 1e4 nodes each.  The 1D grid is inclusive with spacing 1e-4 so that
# the common uniform designs land on exact values.
_FILL_GRID = {1: 10001, 2: 101, 3: 22}


@dataclass(frozen=True)
class DesignMetrics:
    """Fill distance, separation radius, and their mesh ratio."""

    n: int
    fill: float
    separation: float

    @property
    def mesh_ratio(self) -> float:
        return self.fill / self.separation


def design_metrics(x) -> DesignMetrics:
    """Space-filling diagnostics of a point design in the unit cube.

    The fill distance sup_x min_i |x - x_i| is approximated on a dense
    grid (~1e4 nodes); the separation radius is half the smallest
    pairwise distance.  Designs need at least two distinct points.
    """
    arr = np.asarray(x, dtype=float)
    dim = 1 if arr.ndim <= 1 else arr.shape[1]
    pts = spectral.validate_points(arr, dim)
    if pts.shape[0] < 2:
        raise ValueError("design metrics need at least two points")
    separation = 0.5 * float(scipy.spatial.distance.pdist(pts).min())
    if separation == 0.0:
        raise ValueError("design contains duplicate points")
    per_axis = _FILL_GRID[dim]
    axes = [np.linspace(0.0, 1.0, per_axis)] * dim
    grid = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, dim)
    dist, _ = scipy.spatial.cKDTree(pts).query(grid)
    return DesignMetrics(pts.shape[0], float(dist.max()), separation)


@dataclass(frozen=True)
class StudyReport:
    """Rows plus headline numbers from one study run."""

    kind: str
    params: dict
    columns: tuple
    rows: tuple
    extras: dict = field(default_factory=dict)


def _l2_on_grid(values: np.ndarray, grid: np.ndarray) -> float:
    return float(np.sqrt(scipy.integrate.trapezoid(values**2, grid)))


def fit_loglog_slope(fills, errors):
    """Slope of log(error) against log(1/fill) with a 95% half-width.

    Errors decaying like fill^a come out as slope -a, so refinement
    studies report negative slopes.  Needs at least three rows.
    """
    fills = np.asarray(fills, dtype=float)
    errors = np.asarray(errors, dtype=float)
    if fills.size < 3:
        raise ValueError("a slope fit needs at least three refinement levels")
    fit = scipy.stats.linregress(np.log(1.0 / fills), np.log(errors))
    half = float(scipy.stats.t.ppf(0.975, fills.size - 2) * fit.stderr)
    return float(fit.slope), half


def convergence_study(truth, assumed_source, spec: kernels.KernelSpec, ns,
                      sigma2: float = 1e-8, seed: int = 0,
                      noise_sigma2: float = 0.0, grid: int = 2001) -> StudyReport:
    """Posterior error and uncertainty under design refinement (dim 1).

    For each n the design is the interior uniform grid {i/(n+1)}, the
    data are y = truth(X) (plus optional Gaussian noise), and the
    posterior uses the possibly misspecified prior mean solved from
    `assumed_source`.  sigma2 is deliberately tiny by default: the
    point is the data-rich regime, where a noise floor would mask the
    refinement rate.

    Reports per n: the fill distance, the L2 error of the posterior
    mean against the truth, and the integrated posterior variance (and
    its square root).  The headline slope is the log-log regression of
    the L2 error against the design density 1/h, with a 95% confidence
    half-width; an h^a error decay therefore shows up as slope -a.
    """
    if spec.dim != 1:
        raise ValueError("the convergence study is one-dimensional")
    ns = [int(n) for n in ns]
    if any(n < 1 for n in ns) or sorted(set(ns)) != ns:
        raise ValueError("ns must be strictly increasing positive integers")
    prior = pde.solve(assumed_source, spec) if assumed_source is not None else None
    grid_x = np.linspace(0.0, 1.0, int(grid))
    truth_on_grid = np.asarray(truth(grid_x), dtype=float)
    rows = []
    fills, errors = [], []
    for n in ns:
        x = np.arange(1, n + 1) / (n + 1.0)
        y = np.asarray(truth(x), dtype=float)
        if noise_sigma2 > 0.0:
            rng = np.random.default_rng([seed, n])
            y = y + rng.normal(scale=np.sqrt(noise_sigma2), size=n)
        post = regression.condition(spec, prior, regression.Dataset(x, y, sigma2))
        err = _l2_on_grid(post.mean(grid_x) - truth_on_grid, grid_x)
        var_int = float(scipy.integrate.trapezoid(post.var(grid_x), grid_x))
        metrics = design_metrics(x)
        rows.append({
            "n": n,
            "fill": metrics.fill,
            "l2_error": err,
            "var_integral": var_int,
            "sd_l2": float(np.sqrt(var_int)),
        })
        fills.append(metrics.fill)
        errors.append(err)
    extras = {"slope": None, "slope_half_width": None}
    if len(ns) >= 3:
        slope, half = fit_loglog_slope(fills, errors)
        extras = {"slope": slope, "slope_half_width": half}
    params = {"ns": ns, "sigma2": sigma2, "noise_sigma2": noise_sigma2,
              "seed": seed, "grid": int(grid)}
    return StudyReport("convergence", params,
                       ("n", "fill", "l2_error", "var_integral", "sd_l2"),
                       tuple(rows), extras)


def model_error_study(spec: kernels.KernelSpec, mesh_size: int, eps_values,
                      hyper: regression.HyperPrior = regression.FLAT,
                      sigma2: float = 0.0, prior=None, seed: int = 0) -> StudyReport:
    """Calibrated trust weight against controlled model error.

    The truth is the prior mean plus eps times the first basis
    function; its leading `mesh_size` coefficients are observed with
    variance `sigma2` (zero by default: the observation is exact).
    Each row reports the calibrated beta, the closed-form prediction
    M / ||deviation||_H^2 (flat prior; M - 2 in place of M for
    Jeffreys), their ratio, and the bracket boundary flag.  At eps = 0
    the evidence is monotone in beta and the search reports the upper
    boundary, i.e. the Dirac limit.
    """
    if hyper.kind == "fixed":
        raise ValueError("the study calibrates beta; use a flat or Jeffreys prior")
    mesh_size = int(mesh_size)
    if not 1 <= mesh_size <= spec.n_coeffs:
        raise ValueError(f"mesh_size must be in [1, {spec.n_coeffs}]")
    prior_field = regression._prior_field(prior, spec)
    c0 = prior_field.coeffs[:mesh_size]
    lam = kernels.eigenvalues(spec)[:mesh_size]
    numerator = mesh_size if hyper.kind == "flat" else mesh_size - 2
    rows = []
    for eps in [float(e) for e in eps_values]:
        observed = np.array(c0)
        observed[0] += eps
        obs = regression.CoefficientObservations(observed, sigma2)
        res = regression.beta_map(spec, prior_field, obs, hyper)
        dev2 = float(np.sum((observed - c0) ** 2 / lam))
        formula = numerator / dev2 if dev2 > 0 else np.inf
        ratio = res.beta / formula if np.isfinite(formula) else None
        rows.append({
            "eps": eps,
            "beta_star": res.beta,
            "boundary": res.boundary or "",
            "dirac_limit": int(res.dirac_limit),
            "deviation_norm2": dev2,
            "formula_beta": formula,
            "ratio": ratio,
        })
    params = {"mesh_size": mesh_size, "hyper": hyper.kind, "sigma2": sigma2,
              "seed": seed}
    return StudyReport("model-error", params,
                       ("eps", "beta_star", "boundary", "dirac_limit",
                        "deviation_norm2", "formula_beta", "ratio"),
                       tuple(rows))
