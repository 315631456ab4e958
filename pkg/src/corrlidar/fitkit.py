"""Damped Gauss-Newton fitting and the Fisher-scaling fit pipeline.

One small least-squares engine serves every fit in the package: the
per-N three-coefficient fit of the reduced Fisher information, the
power-law fits of those coefficients against the source count, and the
Poisson range estimator (which passes its own damping objective).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, IterationLimitError, RankDeficiencyError
from .fisher import FisherResult, fisher_integral

_REL_STEP_TOL = 1e-10
_MAX_ITERATIONS = 200
_MAX_BACKTRACKS = 40


def gauss_newton(residual, jacobian, init, objective=None, bounds=None,
                 rel_step_tol=_REL_STEP_TOL, max_iterations=_MAX_ITERATIONS):
    """Minimize an objective whose stationary points solve J^T r = 0.

    residual(p) and jacobian(p) define the normal equations; objective
    defaults to half the squared residual norm and controls step
    acceptance (halving backtracks). bounds, when given, is a
    (lower, upper) pair of arrays and every trial point is clamped to
    the box. Returns (params, iterations).

    Raises RankDeficiencyError when the normal matrix loses rank and
    IterationLimitError (carrying the last iterate) when max_iterations
    pass without the relative step dropping below rel_step_tol.
    """
    p = np.asarray(init, dtype=float).copy()
    if bounds is not None:
        lo, hi = (np.asarray(b, dtype=float) for b in bounds)
        p = np.clip(p, lo, hi)

    def default_objective(q):
        r = np.asarray(residual(q), dtype=float)
        return 0.5 * float(r @ r)

    score = objective if objective is not None else default_objective
    current = score(p)
    for iteration in range(1, max_iterations + 1):
        r = np.asarray(residual(p), dtype=float)
        jac = np.atleast_2d(np.asarray(jacobian(p), dtype=float))
        normal = jac.T @ jac
        rhs = -(jac.T @ r)
        try:
            np.linalg.cholesky(normal)
        except np.linalg.LinAlgError as exc:
            raise RankDeficiencyError(
                f"normal equations singular at iteration {iteration}; "
                f"params {p.tolist()}") from exc
        step = np.linalg.solve(normal, rhs)
        scale = 1.0
        accepted = None
        for _ in range(_MAX_BACKTRACKS):
            trial = p + scale * step
            if bounds is not None:
                trial = np.clip(trial, lo, hi)
            value = score(trial)
            if np.isfinite(value) and value <= current:
                accepted = trial
                break
            scale *= 0.5
        if accepted is None:
            # no descent along the Gauss-Newton direction: stationary
            return p, iteration
        moved = np.linalg.norm(accepted - p)
        p, current = accepted, value
        if moved <= rel_step_tol * (np.linalg.norm(p) + rel_step_tol):
            return p, iteration
    raise IterationLimitError(
        f"no convergence in {max_iterations} iterations",
        last_params=p, iterations=max_iterations)


def _finite_difference_jacobian(model, x, params):
    base = np.asarray(model(x, params), dtype=float)
    jac = np.empty((base.size, len(params)))
    for k in range(len(params)):
        h = math.sqrt(np.finfo(float).eps) * max(abs(params[k]), 1.0)
        bumped = np.array(params, dtype=float)
        bumped[k] += h
        jac[:, k] = (np.asarray(model(x, bumped), dtype=float) - base) / h
    return jac


def least_squares(model, x, y, init, jacobian=None, weights=None):
    """Weighted least squares of y against model(x, params).

    model maps (x, params) to predictions; jacobian, when given, maps
    the same arguments to the (n_points, n_params) derivative matrix,
    otherwise forward differences are used. Returns
    (params, covariance, residual_norm) with residual_norm the weighted
    sum of squared residuals.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    init = np.asarray(init, dtype=float)
    if y.size < init.size:
        raise ConfigError(
            f"need at least {init.size} points, got {y.size}")
    if weights is None:
        w = np.ones_like(y)
    else:
        w = np.asarray(weights, dtype=float)
        if w.shape != y.shape or not np.isfinite(w).all() or (w <= 0).any():
            raise ConfigError("weights must be finite, positive, and match y")
    sqrt_w = np.sqrt(w)

    def residual(p):
        return sqrt_w * (np.asarray(model(x, p), dtype=float) - y)

    def jac(p):
        if jacobian is not None:
            return sqrt_w[:, None] * np.asarray(jacobian(x, p), dtype=float)
        return sqrt_w[:, None] * _finite_difference_jacobian(model, x, p)

    params, _ = gauss_newton(residual, jac, init)
    r = residual(params)
    jfinal = jac(params)
    residual_norm = float(r @ r)
    normal = jfinal.T @ jfinal
    try:
        unscaled = np.linalg.inv(normal)
    except np.linalg.LinAlgError as exc:
        raise RankDeficiencyError("normal equations singular at solution") from exc
    dof = y.size - params.size
    sigma2 = residual_norm / dof if dof > 0 else residual_norm
    return params, sigma2 * unscaled, residual_norm


@dataclass(frozen=True)
class FitModelParams:
    """Coefficients of the m-dependence a*m + b - c*sqrt(m) at one N."""

    a: float
    b: float
    c: float
    n_sources: int
    residual_norm: float


@dataclass(frozen=True)
class PowerLawParams:
    """p * N**e scaling of one fit coefficient."""

    p: float
    e: float
    covariance: tuple

    def __post_init__(self):
        if not (np.isfinite(self.p) and np.isfinite(self.e) and self.p > 0):
            raise ConfigError(f"power law needs finite p > 0, got {self!r}")

    def __call__(self, n):
        return self.p * np.asarray(n, dtype=float) ** self.e


def reduced_fit_family(n_sources, order, a, b, c):
    """Reduced Fisher model (1+(m-1)/N)^-1 (2/N^2) (a m + b - c sqrt(m))."""
    N = float(n_sources)
    m = np.asarray(order, dtype=float)
    norm = 1.0 / (1.0 + (m - 1.0) / N)
    return norm * (2.0 / (N * N)) * (a * m + b - c * np.sqrt(m))


def fit_m_dependence(n_sources: int, fisher_values) -> FitModelParams:
    """Fit (a, b, c) to reduced Fisher values sampled over orders.

    fisher_values is a sequence of (order, reduced value) pairs. The
    model is linear in the coefficients, so the engine lands in one
    step from the N^3-scaled lower-bound start (N^3/8, N^3/8, N^3/4).
    """
    pairs = sorted((int(m), float(v)) for m, v in fisher_values)
    if len(pairs) < 3:
        raise ConfigError(f"need at least 3 (order, value) pairs, got {len(pairs)}")
    orders = np.array([m for m, _ in pairs], dtype=float)
    values = np.array([v for _, v in pairs])
    N = float(n_sources)

    def model(x, p):
        return reduced_fit_family(n_sources, x, *p)

    def jacobian(x, p):
        norm = 1.0 / (1.0 + (x - 1.0) / N)
        base = norm * (2.0 / (N * N))
        return np.stack([base * x, base, -base * np.sqrt(x)], axis=1)

    init = np.array([N ** 3 / 8.0, N ** 3 / 8.0, N ** 3 / 4.0])
    params, _, residual_norm = least_squares(model, orders, values, init,
                                             jacobian=jacobian)
    return FitModelParams(a=float(params[0]), b=float(params[1]),
                          c=float(params[2]), n_sources=n_sources,
                          residual_norm=residual_norm)


def fit_power_law(points) -> PowerLawParams:
    """Fit value = p * N**e to (N, value) points, all values positive."""
    pts = [(float(n), float(v)) for n, v in points]
    if len(pts) < 3:
        raise ConfigError(f"need at least 3 points, got {len(pts)}")
    n = np.array([q[0] for q in pts])
    v = np.array([q[1] for q in pts])
    if (v <= 0).any() or (n <= 0).any():
        raise ConfigError("power-law fit requires positive N and values")
    # log-log linear solution seeds the refinement on the original scale
    design = np.stack([np.ones_like(n), np.log(n)], axis=1)
    (intercept, slope), *_ = np.linalg.lstsq(design, np.log(v), rcond=None)

    def model(x, p):
        return p[0] * x ** p[1]

    def jacobian(x, p):
        powered = x ** p[1]
        return np.stack([powered, p[0] * np.log(x) * powered], axis=1)

    params, covariance, _ = least_squares(
        model, n, v, np.array([math.exp(intercept), slope]), jacobian=jacobian)
    return PowerLawParams(p=float(params[0]), e=float(params[1]),
                          covariance=tuple(map(tuple, covariance)))


@dataclass(frozen=True)
class FitPipelineResult:
    """Per-N coefficients plus their power laws in the source count."""

    per_n: tuple
    power_laws: dict

    def coefficient_table(self):
        """(N, a, b, c) rows in ascending N."""
        return [(f.n_sources, f.a, f.b, f.c) for f in self.per_n]

    def write_json(self, path):
        payload = {
            "per_n": [
                {"n_sources": f.n_sources, "a": f.a, "b": f.b, "c": f.c,
                 "residual_norm": f.residual_norm}
                for f in self.per_n
            ],
            "power_laws": {
                name: {"p": law.p, "e": law.e,
                       "covariance": [list(row) for row in law.covariance]}
                for name, law in self.power_laws.items()
            },
        }
        with open(path, "w") as fh:
            json.dump(payload, fh, indent=2, sort_keys=True)


def fit_pipeline(n_range=(2, 20), m_range=(2, 20), reduced_source=None) -> FitPipelineResult:
    """Run the two-stage fit: per-N (a, b, c), then power laws in N.

    reduced_source(N, m) defaults to the reduced value of
    fisher_integral and exists so tests can substitute a cheap oracle.
    """
    n_lo, n_hi = n_range
    m_lo, m_hi = m_range
    if n_lo < 2 or m_lo < 2 or n_hi < n_lo or m_hi < m_lo:
        raise ConfigError(f"invalid pipeline ranges N {n_range}, m {m_range}")
    source = reduced_source
    if source is None:
        source = lambda N, m: fisher_integral(N, m).reduced
    per_n = []
    for N in range(n_lo, n_hi + 1):
        values = [(m, source(N, m)) for m in range(m_lo, m_hi + 1)]
        per_n.append(fit_m_dependence(N, values))
    power_laws = {
        name: fit_power_law([(f.n_sources, getattr(f, name)) for f in per_n])
        for name in ("a", "b", "c")
    }
    return FitPipelineResult(per_n=tuple(per_n), power_laws=power_laws)


def fit_model_fisher(n_sources: int, order: int, power_laws: dict,
                     prefactor: float = 1.0) -> FisherResult:
    """Evaluate the fitted scaling model as a Fisher information result."""
    missing = {"a", "b", "c"} - set(power_laws)
    if missing:
        raise ConfigError(f"power_laws missing coefficients {sorted(missing)}")
    a = float(power_laws["a"](n_sources))
    b = float(power_laws["b"](n_sources))
    c = float(power_laws["c"](n_sources))
    reduced = float(reduced_fit_family(n_sources, order, a, b, c))
    return FisherResult(value=reduced * prefactor, reduced=reduced,
                        prefactor=prefactor, method="fit_model")
