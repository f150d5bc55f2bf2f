"""
Regularized FOCUSS: sparse coefficients c for f_W ~ U c by re-weighted
least squares with weights |c_i|^(1 - q/2).

Each step solves

    c = W A^T (A A^T + lambda I)^-1 f_W = W (A^T A + lambda I)^-1 A^T f_W,   A = U W,

through whichever of the two SPD systems is smaller.
"""

import logging
from dataclasses import dataclass
from typing import Literal, Optional

import numpy as np
import scipy.linalg
from pydantic import BaseModel, ConfigDict, Field

from .errors import ConditioningError, DictionaryError, DimensionError, NumericError, ParameterError

logger = logging.getLogger(__name__)


class FocussConfig(BaseModel):
    """Solver settings. `lambda_` is written as `lambda` in config files."""

    model_config = ConfigDict(frozen=True, extra="forbid", populate_by_name=True)

    q: float = Field(default=0.5, gt=0, le=1)
    lambda_: float = Field(default=1e-8, gt=0, alias="lambda")
    epsilon: float = Field(default=1e-8, gt=0)
    max_iter: int = Field(default=500, ge=1)
    prune_floor: float = Field(default=1e-12, ge=0)
    init: Literal["ridge", "ones"] = "ridge"


@dataclass(frozen=True)
class FocussResult:
    coefficients: np.ndarray
    iterations: int
    converged: bool
    # functional_value of every iterate, index 0 = initial vector
    functional_trace: np.ndarray
    residual_norm: float
    # reweighted_objective of the same iterates
    objective_trace: np.ndarray

    def support(self, rel_tol: float = 1e-6) -> np.ndarray:
        magnitude = np.abs(self.coefficients)
        peak = magnitude.max(initial=0.0)
        if peak == 0:
            return np.empty(0, dtype=int)
        return np.flatnonzero(magnitude > rel_tol * peak)


def _check_shapes(c: Optional[np.ndarray], U: np.ndarray, f: np.ndarray) -> None:
    if U.ndim != 2:
        raise DimensionError(f"dictionary must be a matrix, got shape {U.shape}")
    if f.shape != (U.shape[0],):
        raise DimensionError(f"target has shape {f.shape}, dictionary has {U.shape[0]} rows")
    if c is not None and c.shape != (U.shape[1],):
        raise DimensionError(f"coefficients have shape {c.shape}, dictionary has {U.shape[1]} columns")


def functional_value(c, U, f, q: float, lambda_: float) -> float:
    """sum |c_i|^q + lambda * ||f - U c||^2, with |0|^q = 0."""
    c, U, f = (np.asarray(a, dtype=float) for a in (c, U, f))
    _check_shapes(c, U, f)
    residual = f - U @ c
    return float(np.sum(np.abs(c) ** q) + lambda_ * residual @ residual)


def reweighted_objective(c, U, f, q: float, lambda_: float) -> float:
    """
    ||f - U c||^2 + (2 lambda / q) sum |c_i|^q, the cost the regularized
    step does not increase. Equal to (2 lambda/q) * functional_value(c, U, f, q, q/(2 lambda)).
    """
    c, U, f = (np.asarray(a, dtype=float) for a in (c, U, f))
    _check_shapes(c, U, f)
    residual = f - U @ c
    return float(residual @ residual + (2.0 * lambda_ / q) * np.sum(np.abs(c) ** q))


def _cholesky_solve(system: np.ndarray, rhs: np.ndarray, lambda_: float) -> np.ndarray:
    try:
        factor = scipy.linalg.cho_factor(system, lower=False, check_finite=False)
    except np.linalg.LinAlgError:
        raise ConditioningError(
            f"regularized system is not positive definite (lambda={lambda_:g})", lambda_=lambda_
        ) from None
    return scipy.linalg.cho_solve(factor, rhs, check_finite=False)


class _Problem:
    """Dictionary, target and the Gram products reused by every step of a run."""

    def __init__(self, U: np.ndarray, f: np.ndarray):
        self.U = U
        self.f = f
        self._gram = None
        self._correlation = None

    @property
    def gram(self) -> np.ndarray:
        if self._gram is None:
            self._gram = self.U.T @ self.U
        return self._gram

    @property
    def correlation(self) -> np.ndarray:
        if self._correlation is None:
            self._correlation = self.U.T @ self.f
        return self._correlation

    def weighted_solve(self, active: np.ndarray, weights: np.ndarray, lambda_: float) -> np.ndarray:
        """W (A^T A + lambda I)^-1 A^T f restricted to the active columns."""
        rows = self.U.shape[0]
        if active.size <= rows:
            system = weights[:, None] * self.gram[np.ix_(active, active)] * weights[None, :]
            system[np.diag_indices_from(system)] += lambda_
            rhs = weights * self.correlation[active]
            return weights * _cholesky_solve(system, rhs, lambda_)

        A = self.U[:, active] * weights[None, :]
        system = A @ A.T
        system[np.diag_indices_from(system)] += lambda_
        return weights * (A.T @ _cholesky_solve(system, self.f, lambda_))


def _step(problem: _Problem, c_prev: np.ndarray, cfg: FocussConfig) -> np.ndarray:
    magnitude = np.abs(c_prev)
    if not np.all(np.isfinite(magnitude)):
        raise NumericError("previous iterate contains non-finite coefficients")
    peak = magnitude.max(initial=0.0)
    active = np.flatnonzero((magnitude > 0) & (magnitude >= cfg.prune_floor * peak))

    c = np.zeros_like(c_prev)
    if active.size == 0:
        return c
    weights = magnitude[active] ** (1.0 - cfg.q / 2.0)
    if not np.all(np.isfinite(weights)):
        raise NumericError("FOCUSS weights are not finite")
    c[active] = problem.weighted_solve(active, weights, cfg.lambda_)
    if not np.all(np.isfinite(c)):
        raise NumericError(f"FOCUSS step produced non-finite coefficients (lambda={cfg.lambda_:g})")
    return c


def focuss_step(c_prev, U, f, cfg: FocussConfig) -> np.ndarray:
    """One re-weighted solve; coefficients below prune_floor * max|c_prev| stay at zero."""
    c_prev, U, f = (np.asarray(a, dtype=float) for a in (c_prev, U, f))
    _check_shapes(c_prev, U, f)
    return _step(_Problem(U, f), c_prev, cfg)


def ridge_solve(U, f, lambda_: float) -> np.ndarray:
    """argmin ||f - U c||^2 + lambda ||c||^2; lambda = 0 requires full column rank."""
    U, f = np.asarray(U, dtype=float), np.asarray(f, dtype=float)
    _check_shapes(None, U, f)
    if lambda_ < 0:
        raise ParameterError(f"lambda must be nonnegative, got {lambda_}")
    rows, cols = U.shape
    if lambda_ == 0:
        if np.linalg.matrix_rank(U) < cols:
            raise ConditioningError("U^T U is singular; ridge_solve needs lambda > 0", lambda_=0.0)
        system = U.T @ U
        return _cholesky_solve(system, U.T @ f, lambda_)

    if cols <= rows:
        system = U.T @ U
        system[np.diag_indices_from(system)] += lambda_
        return _cholesky_solve(system, U.T @ f, lambda_)
    system = U @ U.T
    system[np.diag_indices_from(system)] += lambda_
    return U.T @ _cholesky_solve(system, f, lambda_)


def run_focuss(U, f, cfg: FocussConfig) -> FocussResult:
    """Iterate focuss_step from the configured start until the relative change drops below epsilon."""
    U, f = np.asarray(U, dtype=float), np.asarray(f, dtype=float)
    _check_shapes(None, U, f)
    empty = np.flatnonzero(~np.any(U != 0, axis=0))
    if empty.size:
        raise DictionaryError(f"dictionary columns {empty.tolist()} are identically zero", columns=empty)

    if cfg.init == "ridge":
        c = ridge_solve(U, f, cfg.lambda_)
    else:
        c = np.ones(U.shape[1])

    problem = _Problem(U, f)
    trace = [functional_value(c, U, f, cfg.q, cfg.lambda_)]
    objective = [reweighted_objective(c, U, f, cfg.q, cfg.lambda_)]
    converged = False
    iterations = 0
    for iterations in range(1, cfg.max_iter + 1):
        c_next = _step(problem, c, cfg)
        trace.append(functional_value(c_next, U, f, cfg.q, cfg.lambda_))
        objective.append(reweighted_objective(c_next, U, f, cfg.q, cfg.lambda_))
        change = np.linalg.norm(c_next - c)
        threshold = cfg.epsilon * max(1.0, np.linalg.norm(c))
        c = c_next
        if change <= threshold:
            converged = True
            break

    residual_norm = float(np.linalg.norm(f - U @ c))
    if converged:
        logger.debug("FOCUSS q=%g converged after %d iterations, residual %.3g", cfg.q, iterations, residual_norm)
    else:
        logger.warning("FOCUSS q=%g stopped at max_iter=%d without converging", cfg.q, cfg.max_iter)
    trace = np.array(trace)
    trace.setflags(write=False)
    objective = np.array(objective)
    objective.setflags(write=False)
    c.setflags(write=False)
    return FocussResult(
        coefficients=c,
        iterations=iterations,
        converged=converged,
        functional_trace=trace,
        residual_norm=residual_norm,
        objective_trace=objective,
    )
