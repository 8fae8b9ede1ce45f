"""Forward models: the power-nonlinearity sensing operator and helpers.

The nonlinear model is F(x) = z + z^c componentwise with z = A(x + x^d),
where A is a dense m-by-n matrix and c, d are positive integers. Its
Jacobian factors as (I + diag(c*z^(c-1))) A (I + diag(d*x^(d-1))), and the
adjoint reverses that sandwich. Integer powers are evaluated by repeated
multiplication so signs of negative bases survive exactly.
"""

from __future__ import annotations

from abc import ABC, abstractmethod
from dataclasses import dataclass
from itertools import combinations

import numpy as np

from .core import NumericalOverflowError, ParameterError, as_matrix, as_vector
from .regfunc import smooth_grad

POWER_LIMIT = 1e150


class NonlinearOperator(ABC):
    """Evaluation interface shared by all forward models.

    Implementations must be deterministic, side-effect free, and satisfy
    the adjoint identity <J(x)u, r> = <u, J(x)^T r>.
    """

    @property
    @abstractmethod
    def input_dim(self) -> int: ...

    @property
    @abstractmethod
    def output_dim(self) -> int: ...

    @abstractmethod
    def apply(self, x) -> np.ndarray:
        """Evaluate F(x)."""

    @abstractmethod
    def jacobian_apply(self, x, u) -> np.ndarray:
        """Evaluate F'(x) u."""

    @abstractmethod
    def jacobian_adjoint_apply(self, x, r) -> np.ndarray:
        """Evaluate F'(x)^T r."""

    def _check_input(self, x, name: str = "x") -> np.ndarray:
        x = as_vector(x, name)
        if x.size != self.input_dim:
            raise ParameterError(
                f"{name} has length {x.size}, operator expects {self.input_dim}")
        return x

    def _check_output(self, r, name: str = "r") -> np.ndarray:
        r = as_vector(r, name)
        if r.size != self.output_dim:
            raise ParameterError(
                f"{name} has length {r.size}, operator expects {self.output_dim}")
        return r


def _int_power(v: np.ndarray, k: int, name: str) -> np.ndarray:
    """v**k by repeated multiplication; k = 0 gives ones. Guards overflow."""
    if k == 0:
        return np.ones_like(v)
    if k > 1:
        top = float(np.max(np.abs(v)))
        # k*log10(top) > 150 means v**k leaves the guarded range
        if top > 1.0 and k * np.log10(top) > np.log10(POWER_LIMIT):
            raise NumericalOverflowError(
                f"{name}^{k} exceeds {POWER_LIMIT:.0e} (max base magnitude {top:.3e})")
    out = v.copy()
    for _ in range(k - 1):
        out *= v
    return out


class MatrixOperator(NonlinearOperator):
    """A dense matrix seen through the nonlinear-operator interface."""

    def __init__(self, a):
        self.a = as_matrix(a, "A")

    @property
    def input_dim(self) -> int:
        return self.a.shape[1]

    @property
    def output_dim(self) -> int:
        return self.a.shape[0]

    def apply(self, x) -> np.ndarray:
        return self.a @ self._check_input(x)

    def jacobian_apply(self, x, u) -> np.ndarray:
        self._check_input(x)
        return self.a @ self._check_input(u, "u")

    def jacobian_adjoint_apply(self, x, r) -> np.ndarray:
        self._check_input(x)
        return self.a.T @ self._check_output(r)


class PowerCsOperator(NonlinearOperator):
    """Componentwise-power compressed-sensing model F(x) = z + z^c, z = A(x + x^d).

    Parameters
    ----------
    a : array of shape (m, n)
        Dense sensing matrix.
    c, d : int
        Positive integer exponents of the outer and inner nonlinearities.
    """

    def __init__(self, a, c: int, d: int):
        self.a = as_matrix(a, "A")
        if not (isinstance(c, (int, np.integer)) and c >= 1):
            raise ParameterError(f"c must be a positive integer, got {c!r}")
        if not (isinstance(d, (int, np.integer)) and d >= 1):
            raise ParameterError(f"d must be a positive integer, got {d!r}")
        self.c = int(c)
        self.d = int(d)

    @property
    def input_dim(self) -> int:
        return self.a.shape[1]

    @property
    def output_dim(self) -> int:
        return self.a.shape[0]

    def _inner(self, x: np.ndarray) -> np.ndarray:
        return self.a @ (x + _int_power(x, self.d, "x"))

    def apply(self, x) -> np.ndarray:
        x = self._check_input(x)
        z = self._inner(x)
        return z + _int_power(z, self.c, "z")

    def jacobian_apply(self, x, u) -> np.ndarray:
        x = self._check_input(x)
        u = self._check_input(u, "u")
        z = self._inner(x)
        inner_diag = 1.0 + self.d * _int_power(x, self.d - 1, "x")
        outer_diag = 1.0 + self.c * _int_power(z, self.c - 1, "z")
        return outer_diag * (self.a @ (inner_diag * u))

    def jacobian_adjoint_apply(self, x, r) -> np.ndarray:
        x = self._check_input(x)
        r = self._check_output(r)
        z = self._inner(x)
        inner_diag = 1.0 + self.d * _int_power(x, self.d - 1, "x")
        outer_diag = 1.0 + self.c * _int_power(z, self.c - 1, "z")
        return inner_diag * (self.a.T @ (outer_diag * r))


@dataclass(frozen=True)
class JacobianCheckReport:
    """Outcome of a finite-difference Jacobian comparison."""

    max_rel_deviation: float
    passed: bool
    h: float
    tol: float
    num_directions: int


def fd_jacobian_check(op: NonlinearOperator, x, h: float = 1e-6, tol: float = 1e-5,
                      num_directions: int = 10, seed=0) -> JacobianCheckReport:
    """Compare jacobian_apply against central differences of apply.

    Draws unit-norm random directions u and measures the relative gap
    between F'(x)u and (F(x+hu) - F(x-hu)) / (2h).
    """
    if not (h > 0 and np.isfinite(h)):
        raise ParameterError(f"h must be positive and finite, got {h}")
    if num_directions < 1:
        raise ParameterError(f"need at least one direction, got {num_directions}")
    x = as_vector(x, "x")
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(num_directions):
        u = rng.standard_normal(x.size)
        u /= np.linalg.norm(u)
        analytic = op.jacobian_apply(x, u)
        fd = (op.apply(x + h * u) - op.apply(x - h * u)) / (2.0 * h)
        scale = max(float(np.linalg.norm(analytic)), float(np.linalg.norm(fd)), 1e-30)
        worst = max(worst, float(np.linalg.norm(analytic - fd)) / scale)
    return JacobianCheckReport(max_rel_deviation=worst, passed=worst <= tol,
                               h=h, tol=tol, num_directions=num_directions)


def estimate_smooth_lipschitz(op: NonlinearOperator, probes, y_delta,
                              alpha: float, eta: float) -> float:
    """Largest secant slope of the smooth-part gradient over probe pairs.

    Returns max over pairs of ||grad f(x_i) - grad f(x_j)|| / ||x_i - x_j||,
    a lower bound on the gradient Lipschitz constant of
    f(x) = 0.5*||F(x) - y_delta||^2 - alpha*eta*||x||^2. Coincident probe
    pairs are skipped; if every pair coincides the estimate is undefined.
    """
    probes = [as_vector(p, f"probes[{i}]") for i, p in enumerate(probes)]
    if len(probes) < 2:
        raise ParameterError(f"need at least 2 probe points, got {len(probes)}")
    grads = [smooth_grad(op, p, y_delta, alpha, eta) for p in probes]
    best = -1.0
    for i, j in combinations(range(len(probes)), 2):
        gap = float(np.linalg.norm(probes[i] - probes[j]))
        if gap == 0.0:
            continue
        best = max(best, float(np.linalg.norm(grads[i] - grads[j])) / gap)
    if best < 0.0:
        raise ParameterError("all probe points coincide; secant estimate undefined")
    return best
