"""Fixed-step proximal-gradient solvers for the sparse recovery objective.

The main solver treats f(x) = 0.5*||F(x) - y_delta||^2 - alpha*eta*||x||^2
as the smooth part and g(x) = alpha*||x||_1^2 as the convex part, taking

    x_next = prox(x + (2*alpha*eta/L)*x - (1/L)*F'(x)^T (F(x) - y_delta))

with the squared-l1 prox at effective weight alpha/L (or literal alpha in
compatibility mode, see SolverConfig). Two soft-thresholding baselines share
the same loop: plain l1 (ista_solve) and l1-minus-l2 (stl1l2_solve, a
reconstruction of the cited iteration: the beta-term gradient -beta*x/||x||
is skipped at x = 0).

All solvers stop when the l2 distance between adjacent iterates drops below
``tol`` or after ``max_iters`` steps.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .core import NumericalOverflowError, ParameterError, as_vector, relative_error, snr_db
from .prox import prox_sql1, soft_threshold

TERMINATION_CONVERGED = "converged_by_tol"
TERMINATION_MAX_ITERS = "max_iters_reached"


@dataclass
class SolverConfig:
    """Fixed-step solver settings.

    Attributes
    ----------
    L : float
        Step constant; the step size is 1/L. Descent is guaranteed when L
        exceeds half the gradient Lipschitz constant of the smooth part.
    max_iters : int
        Iteration budget.
    tol : float
        Stop when ||x_next - x|| falls below this.
    x0 : ndarray or None
        Initial iterate; None means the zero vector.
    compat_alpha_mode : bool
        When True the prox uses weight alpha instead of alpha/L, matching
        a literal reading of the shrinkage map with the unscaled penalty.
    record_trace : bool
        Keep per-iteration history.
    trace_stride : int
        Record every stride-th iteration (the first and last are always
        kept) to bound trace memory on long runs.
    """

    L: float
    max_iters: int = 5000
    tol: float = 1e-5
    x0: np.ndarray | None = None
    compat_alpha_mode: bool = False
    record_trace: bool = True
    trace_stride: int = 1

    def __post_init__(self):
        if not (self.L > 0 and np.isfinite(self.L)):
            raise ParameterError(f"L must be positive and finite, got {self.L}")
        if self.max_iters < 1:
            raise ParameterError(f"max_iters must be >= 1, got {self.max_iters}")
        if not (self.tol > 0 and np.isfinite(self.tol)):
            raise ParameterError(f"tol must be positive and finite, got {self.tol}")
        if self.trace_stride < 1:
            raise ParameterError(f"trace_stride must be >= 1, got {self.trace_stride}")
        if self.x0 is not None:
            self.x0 = as_vector(self.x0, "x0")


@dataclass
class IterateTrace:
    """Per-iteration history of one solve.

    Entry 0 describes the initial iterate (its step_norm is nan); entry k
    describes the iterate after k steps. snr_db and rel_error stay empty
    when no reference signal was supplied.
    """

    iteration: list[int] = field(default_factory=list)
    objective: list[float] = field(default_factory=list)
    residual_norm: list[float] = field(default_factory=list)
    step_norm: list[float] = field(default_factory=list)
    snr_db: list[float] = field(default_factory=list)
    rel_error: list[float] = field(default_factory=list)


@dataclass(frozen=True)
class RecoveryResult:
    """Outcome of one solver run.

    ``stationarity`` is L*||x_star - step(x_star)||, the norm of the
    gradient-mapping residual at the returned point; small values certify
    approximate stationarity.
    """

    x_star: np.ndarray
    iterations: int
    termination: str
    trace: IterateTrace
    final_residual: float
    stationarity: float


# Iterates past this magnitude are treated as divergence: squaring them (in
# the prox certificate or the forward model) would leave float64 range.
DIVERGENCE_LIMIT = 1e150


def _check_finite(v: np.ndarray, what: str) -> np.ndarray:
    if not np.all(np.isfinite(v)):
        raise NumericalOverflowError(f"{what} became non-finite")
    top = float(np.abs(v).max()) if v.size else 0.0
    if top > DIVERGENCE_LIMIT:
        raise NumericalOverflowError(
            f"{what} reached magnitude {top:.3e}; iteration diverged")
    return v


def _hv_update(op, x, residual, alpha, eta, L, compat):
    grad = op.jacobian_adjoint_apply(x, residual)
    v = x + (2.0 * alpha * eta / L) * x - grad / L
    _check_finite(v, "gradient step v")
    alpha_eff = alpha if compat else alpha / L
    return prox_sql1(v, alpha_eff).p


def _st_update(op, x, residual, alpha, beta, L):
    grad = op.jacobian_adjoint_apply(x, residual)
    if beta != 0.0:
        norm_x = np.linalg.norm(x)
        if norm_x > 0.0:
            grad = grad - (beta / norm_x) * x
    v = x - grad / L
    _check_finite(v, "gradient step v")
    return soft_threshold(v, alpha / L)


def hv_step(op, x, y_delta, alpha: float, eta: float, L: float,
            compat: bool = False) -> np.ndarray:
    """One proximal-gradient step of the main solver from the point x."""
    x = as_vector(x, "x")
    residual = op.apply(x) - as_vector(y_delta, "y_delta")
    _check_finite(residual, "residual F(x) - y_delta")
    return _hv_update(op, x, residual, alpha, eta, L, compat)


def stationarity_residual(op, x, y_delta, alpha: float, eta: float, L: float,
                          compat: bool = False) -> float:
    """Gradient-mapping norm L*||x - step(x)||; zero exactly at stationary x."""
    x = as_vector(x, "x")
    return float(L * np.linalg.norm(x - hv_step(op, x, y_delta, alpha, eta, L, compat)))


def _run_fixed_step(op, y_delta, cfg: SolverConfig, update, objective_of,
                    x_true) -> RecoveryResult:
    """Shared solver loop: iterate ``update`` until tol or max_iters."""
    y_delta = as_vector(y_delta, "y_delta")
    if y_delta.size != op.output_dim:
        raise ParameterError(
            f"y_delta has length {y_delta.size}, operator expects {op.output_dim}")
    x = np.zeros(op.input_dim) if cfg.x0 is None else cfg.x0
    if x.size != op.input_dim:
        raise ParameterError(f"x0 has length {x.size}, operator expects {op.input_dim}")
    if x_true is not None:
        x_true = as_vector(x_true, "x_true")

    trace = IterateTrace()

    def record(k, x_k, res_norm, step):
        trace.iteration.append(k)
        obj = objective_of(x_k, res_norm)
        if not np.isfinite(obj):
            raise NumericalOverflowError("objective value became non-finite")
        trace.objective.append(obj)
        trace.residual_norm.append(res_norm)
        trace.step_norm.append(step)
        if x_true is not None:
            trace.snr_db.append(snr_db(x_k, x_true))
            trace.rel_error.append(relative_error(x_k, x_true))

    residual = _check_finite(op.apply(x) - y_delta, "residual F(x) - y_delta")
    if cfg.record_trace:
        record(0, x, float(np.linalg.norm(residual)), float("nan"))

    iterations = 0
    termination = TERMINATION_MAX_ITERS
    for k in range(1, cfg.max_iters + 1):
        x_new = update(x, residual)
        step = float(np.linalg.norm(x_new - x))
        x = x_new
        residual = _check_finite(op.apply(x) - y_delta, "residual F(x) - y_delta")
        iterations = k
        converged = step < cfg.tol
        if cfg.record_trace and (k % cfg.trace_stride == 0 or converged or k == cfg.max_iters):
            record(k, x, float(np.linalg.norm(residual)), step)
        if converged:
            termination = TERMINATION_CONVERGED
            break

    final_residual = float(np.linalg.norm(residual))
    stationarity = float(cfg.L * np.linalg.norm(x - update(x, residual)))
    return RecoveryResult(x_star=x, iterations=iterations, termination=termination,
                          trace=trace, final_residual=final_residual,
                          stationarity=stationarity)


def hv_solve(op, y_delta, alpha: float, eta: float, cfg: SolverConfig,
             x_true=None) -> RecoveryResult:
    """Minimize 0.5*||F(x)-y_delta||^2 + alpha*(||x||_1^2 - eta*||x||_2^2).

    Parameters
    ----------
    op : NonlinearOperator
        Forward model with Jacobian adjoint.
    y_delta : ndarray
        Measured data.
    alpha : float
        Penalty weight, positive.
    eta : float
        Concave ratio in [0, 1]; eta = 0 gives the plain squared-l1 endpoint
        kept for sweep parity.
    cfg : SolverConfig
    x_true : ndarray, optional
        Reference signal; when given, the trace carries SNR and relative
        error per iteration.
    """
    if not (alpha > 0 and np.isfinite(alpha)):
        raise ParameterError(f"alpha must be positive and finite, got {alpha}")
    if not (0.0 <= eta <= 1.0):
        raise ParameterError(f"eta must lie in [0, 1], got {eta}")

    def update(x, residual):
        return _hv_update(op, x, residual, alpha, eta, cfg.L, cfg.compat_alpha_mode)

    def objective_of(x, res_norm):
        norm1 = float(np.sum(np.abs(x)))
        return 0.5 * res_norm ** 2 + alpha * (norm1 * norm1 - eta * float(x @ x))

    return _run_fixed_step(op, y_delta, cfg, update, objective_of, x_true)


def stl1l2_solve(op, y_delta, alpha: float, beta: float, cfg: SolverConfig,
                 x_true=None) -> RecoveryResult:
    """Soft-thresholding baseline for the alpha*||x||_1 - beta*||x||_2 penalty.

    Reconstruction of the cited difference-of-norms iteration: a gradient
    step on 0.5*||F(x)-y_delta||^2 - beta*||x||_2 followed by soft
    thresholding at alpha/L. The -beta*x/||x|| term is skipped at x = 0,
    where that gradient is undefined. With beta = 0 the trajectory is
    identical to ista_solve.
    """
    if not (alpha > 0 and np.isfinite(alpha)):
        raise ParameterError(f"alpha must be positive and finite, got {alpha}")
    if not (0.0 <= beta <= alpha):
        raise ParameterError(f"beta must lie in [0, alpha], got beta={beta}, alpha={alpha}")

    def update(x, residual):
        return _st_update(op, x, residual, alpha, beta, cfg.L)

    def objective_of(x, res_norm):
        return (0.5 * res_norm ** 2 + alpha * float(np.sum(np.abs(x)))
                - beta * float(np.linalg.norm(x)))

    return _run_fixed_step(op, y_delta, cfg, update, objective_of, x_true)


def ista_solve(op, y_delta, alpha: float, cfg: SolverConfig, x_true=None) -> RecoveryResult:
    """Iterative soft thresholding: gradient step then shrink at alpha/L.

    alpha = 0 is allowed and degenerates to plain gradient descent on the
    data fidelity.
    """
    if not (alpha >= 0 and np.isfinite(alpha)):
        raise ParameterError(f"alpha must be nonnegative and finite, got {alpha}")

    def update(x, residual):
        return _st_update(op, x, residual, alpha, 0.0, cfg.L)

    def objective_of(x, res_norm):
        return 0.5 * res_norm ** 2 + alpha * float(np.sum(np.abs(x)))

    return _run_fixed_step(op, y_delta, cfg, update, objective_of, x_true)
