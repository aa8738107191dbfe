"""
SQP - sparse sequential quadratic programming with box bounds and equality constraints.

Each iteration solves a quadratic subproblem on the variable box (a primal-dual
active-set method with a primal active-set fallback, sparse LU solves of the
KKT system) and globalises the step with Armijo backtracking on an l1 merit
function. Rejected steps get a second-order correction and then increasing
Levenberg damping before the solver gives up.
"""

from dataclasses import dataclass, field
from enum import Enum
from typing import Optional, Protocol

import numpy as np
import scipy.sparse as sp
from pydantic import BaseModel, Field
from scipy.sparse.linalg import splu

from trailer_loading.utils.logging import get_logger

logger = get_logger()


class SolverStatus(str, Enum):
    """Outcome of a solve; never raised, always returned."""
    CONVERGED = "converged"
    MAX_ITER = "max_iter"
    STALLED = "stalled"
    INFEASIBLE = "infeasible"


class SQPOptions(BaseModel):
    """Tolerances and globalisation constants."""
    tol_kkt: float = Field(default=1e-6, gt=0.0)
    tol_con: float = Field(default=1e-8, gt=0.0)
    max_iter: int = Field(default=200, ge=1)
    armijo: float = Field(default=1e-4, gt=0.0, lt=0.5)
    backtrack: float = Field(default=0.5, gt=0.0, lt=1.0)
    max_backtracks: int = Field(default=30, ge=1)
    active_set_max_iter: int = Field(default=60, ge=1)
    active_set_sigma: float = Field(default=1.0, gt=0.0)
    merit_margin: float = Field(default=1e-3, ge=0.0)
    # fraction of the penalised violation the model must remove on top of the curvature term
    penalty_fraction: float = Field(default=0.1, gt=0.0, lt=1.0)
    min_damping: float = Field(default=1e-4, gt=0.0)
    max_damping: float = Field(default=1e6, gt=0.0)
    damping_growth: float = Field(default=10.0, gt=1.0)
    second_order_correction: bool = True


class NLP(Protocol):
    """Smooth problem: min f(x) s.t. c(x) = 0, lower <= x <= upper."""
    lower: np.ndarray
    upper: np.ndarray

    def objective(self, x: np.ndarray) -> float: ...

    def gradient(self, x: np.ndarray) -> np.ndarray: ...

    def hessian(self, x: np.ndarray) -> sp.spmatrix: ...

    def constraints(self, x: np.ndarray) -> np.ndarray: ...

    def jacobian(self, x: np.ndarray) -> sp.spmatrix: ...


@dataclass
class QPSolution:
    step: np.ndarray
    eq_multipliers: np.ndarray
    bound_multipliers: np.ndarray
    converged: bool
    iterations: int


@dataclass
class SQPResult:
    x: np.ndarray
    status: SolverStatus
    iterations: int
    kkt_residual: float
    constraint_violation: float
    objective: float
    merit_history: list[tuple[float, float]] = field(default_factory=list)
    eq_multipliers: Optional[np.ndarray] = None


def _solve_with_fixed(
    hessian: sp.csr_matrix,
    gradient: np.ndarray,
    jacobian: sp.csr_matrix,
    residual: np.ndarray,
    fixed: np.ndarray,
    fixed_values: np.ndarray,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    Equality-constrained QP with the ``fixed`` variables pinned to ``fixed_values``.

    Rows of fixed variables are replaced by identity rows in the KKT matrix.

    :return: (step, equality multipliers, bound multipliers on the fixed variables)
    :raises RuntimeError: If the KKT matrix is singular
    """
    n = gradient.shape[0]
    free = ~fixed
    keep = sp.diags(free.astype(float))
    pin = sp.diags(fixed.astype(float))
    kkt = sp.bmat(
        [[keep @ hessian + pin, keep @ jacobian.T], [jacobian, None]],
        format="csc",
    )
    rhs = np.concatenate([np.where(free, -gradient, fixed_values), -residual])
    solution = splu(kkt).solve(rhs)
    step, lam = solution[:n], solution[n:]
    mu = -(hessian @ step + gradient + jacobian.T @ lam)
    mu[free] = 0.0
    return step, lam, mu


def _primal_active_set(
    hessian: sp.csr_matrix,
    gradient: np.ndarray,
    jacobian: sp.csr_matrix,
    residual: np.ndarray,
    lower: np.ndarray,
    upper: np.ndarray,
    start: np.ndarray,
    max_iter: int,
) -> QPSolution:
    """
    Feasible-point active-set method, used when the primal-dual iteration cycles.

    Starts with every bounded variable pinned at ``start`` clipped to its box and
    the unbounded variables absorbing the equality constraints. Each iteration
    either releases the pinned variables whose multipliers have the wrong sign or
    moves toward the subproblem minimum until a bound blocks.
    """
    bounded = np.isfinite(lower) | np.isfinite(upper)
    fixed = bounded.copy()
    step, lam, mu = _solve_with_fixed(
        hessian, gradient, jacobian, residual, fixed, np.where(bounded, np.clip(start, lower, upper), 0.0)
    )
    converged = False

    iteration = 0
    for iteration in range(1, max_iter + 1):
        target, lam, mu = _solve_with_fixed(
            hessian, gradient, jacobian, residual, fixed, np.where(fixed, step, 0.0)
        )
        move = target - step
        scale = max(1.0, float(np.max(np.abs(step), initial=0.0)))
        if float(np.max(np.abs(move), initial=0.0)) <= 1e-12 * scale:
            tol = 1e-10 * max(1.0, float(np.max(np.abs(gradient), initial=0.0)))
            on_upper = fixed & (step >= upper - 1e-12 * scale)
            on_lower = fixed & (step <= lower + 1e-12 * scale) & ~on_upper
            wrong = np.where(on_upper, -mu, np.where(on_lower, mu, np.abs(mu)))
            wrong = np.where(fixed & (lower < upper), wrong, 0.0)
            release = wrong > tol
            if not np.any(release):
                converged = True
                break
            fixed &= ~release
            continue

        ratio = np.full(step.shape, np.inf)
        with np.errstate(divide="ignore", invalid="ignore"):
            rising = ~fixed & (move > 0.0) & np.isfinite(upper)
            falling = ~fixed & (move < 0.0) & np.isfinite(lower)
            ratio[rising] = (upper[rising] - step[rising]) / move[rising]
            ratio[falling] = (lower[falling] - step[falling]) / move[falling]
        blocking = int(np.argmin(ratio))
        length = min(1.0, max(0.0, float(ratio[blocking])))
        step = step + length * move
        if length < 1.0:
            step[blocking] = upper[blocking] if move[blocking] > 0.0 else lower[blocking]
            fixed[blocking] = True

    mu[~fixed] = 0.0
    return QPSolution(step, lam, mu, converged, iteration)


def solve_box_qp(
    hessian: sp.spmatrix,
    gradient: np.ndarray,
    jacobian: sp.spmatrix,
    residual: np.ndarray,
    lower: np.ndarray,
    upper: np.ndarray,
    sigma: float = 1.0,
    max_iter: int = 60,
) -> QPSolution:
    """
    Primal-dual active-set solve of

        min 0.5 d'Hd + g'd   s.t.  J d = -c,  lower <= d <= upper

    Bound multipliers are positive on upper and negative on lower bounds. When
    the primal-dual iteration does not settle within ``max_iter`` the problem is
    re-solved by a primal active-set method from the last iterate.

    :raises RuntimeError: If a KKT matrix is singular
    """
    n = gradient.shape[0]
    m = residual.shape[0]
    hessian = sp.csr_matrix(hessian)
    jacobian = sp.csr_matrix(jacobian)
    at_upper = np.zeros(n, dtype=bool)
    at_lower = np.zeros(n, dtype=bool)
    step = np.zeros(n)
    lam = np.zeros(m)
    mu = np.zeros(n)

    iteration = 0
    for iteration in range(1, max_iter + 1):
        fixed_values = np.where(at_upper, upper, np.where(at_lower, lower, 0.0))
        step, lam, mu = _solve_with_fixed(hessian, gradient, jacobian, residual, at_upper | at_lower, fixed_values)

        with np.errstate(invalid="ignore"):
            new_upper = (mu + sigma * (step - upper)) > 0.0
            new_lower = (mu + sigma * (step - lower)) < 0.0
        new_upper &= np.isfinite(upper)
        new_lower &= np.isfinite(lower) & ~new_upper
        if np.array_equal(new_upper, at_upper) and np.array_equal(new_lower, at_lower):
            return QPSolution(step, lam, mu, True, iteration)
        at_upper, at_lower = new_upper, new_lower

    try:
        fallback = _primal_active_set(
            hessian, gradient, jacobian, residual, lower, upper, step, max_iter=4 * n + max_iter,
        )
    except RuntimeError:
        # pinning every bounded variable can leave the constraints without free columns
        return QPSolution(step, lam, mu, False, iteration)
    fallback.iterations += iteration
    return fallback


def _kkt_residual(
    x: np.ndarray,
    gradient: np.ndarray,
    jacobian: sp.spmatrix,
    lam: np.ndarray,
    mu: np.ndarray,
    lower: np.ndarray,
    upper: np.ndarray,
) -> float:
    """Relative stationarity of the Lagrangian; bound multipliers count only at active bounds."""
    on_upper = np.isfinite(upper) & (np.abs(x - upper) <= 1e-9) & (mu > 0.0)
    on_lower = np.isfinite(lower) & (np.abs(x - lower) <= 1e-9) & (mu < 0.0)
    bound = np.where(on_upper | on_lower, mu, 0.0)
    stationarity = gradient + jacobian.T @ lam + bound
    return float(np.max(np.abs(stationarity)) / max(1.0, float(np.max(np.abs(gradient)))))


@dataclass
class _Iterate:
    """Quantities of the current SQP point shared by the step computations."""
    x: np.ndarray
    objective: float
    gradient: np.ndarray
    residual: np.ndarray
    jacobian: sp.csr_matrix
    hessian: sp.csr_matrix

    @property
    def violation_l1(self) -> float:
        return float(np.sum(np.abs(self.residual)))


class SQPSolver:
    """
    Line-search SQP for sparse NLPs with box bounds.

    The caller supplies a positive semidefinite Hessian approximation
    (Gauss-Newton style); constraint curvature is not used.
    """

    def __init__(self, options: Optional[SQPOptions] = None):
        self.options = options or SQPOptions()
        self.penalty = 0.0

    def _merit(self, problem: NLP, x: np.ndarray) -> float:
        return problem.objective(x) + self.penalty * float(np.sum(np.abs(problem.constraints(x))))

    def _subproblem(self, point: _Iterate, lower: np.ndarray, upper: np.ndarray, damping: float) -> QPSolution:
        hessian = point.hessian
        if damping > 0.0:
            hessian = hessian + damping * sp.identity(point.x.shape[0], format="csr")
        opts = self.options
        return solve_box_qp(
            hessian, point.gradient, point.jacobian, point.residual, lower - point.x, upper - point.x,
            sigma=opts.active_set_sigma, max_iter=opts.active_set_max_iter,
        )

    def _update_penalty(self, point: _Iterate, qp: QPSolution, damping: float) -> None:
        """Keep the penalty above the multipliers and large enough for a sufficient model decrease."""
        opts = self.options
        d = qp.step
        multipliers = float(np.max(np.abs(qp.eq_multipliers), initial=0.0))
        self.penalty = max(self.penalty, (1.0 + opts.merit_margin) * multipliers + opts.merit_margin)
        violation = point.violation_l1
        if violation > 0.0:
            curvature = max(0.0, float(d @ (point.hessian @ d)) + damping * float(d @ d))
            needed = (float(point.gradient @ d) + 0.5 * curvature) / ((1.0 - opts.penalty_fraction) * violation)
            self.penalty = max(self.penalty, needed)

    def _line_search(
        self,
        problem: NLP,
        point: _Iterate,
        qp: QPSolution,
        lower: np.ndarray,
        upper: np.ndarray,
        damping: float,
    ) -> Optional[tuple[np.ndarray, float, float]]:
        """
        Armijo backtracking on the l1 merit function with one second-order correction.

        :return: (accepted point, merit before, merit after), or None when every trial fails
        """
        opts = self.options
        self._update_penalty(point, qp, damping)
        d = qp.step
        merit = point.objective + self.penalty * point.violation_l1
        linearised = float(np.sum(np.abs(point.residual + point.jacobian @ d)))
        model_drop = float(point.gradient @ d) + self.penalty * (linearised - point.violation_l1)
        if not np.isfinite(model_drop) or model_drop >= 0.0:
            return None

        t = 1.0
        for attempt in range(opts.max_backtracks):
            candidate = np.clip(point.x + t * d, lower, upper)
            trial = self._merit(problem, candidate)
            if trial <= merit + opts.armijo * t * model_drop:
                return candidate, merit, trial
            if attempt == 0 and opts.second_order_correction and point.violation_l1 > 0.0:
                corrected = self._second_order_correction(problem, point, qp, candidate, lower, upper, damping)
                if corrected is not None:
                    trial = self._merit(problem, corrected)
                    if trial <= merit + opts.armijo * model_drop:
                        return corrected, merit, trial
            t *= opts.backtrack
        return None

    def _second_order_correction(
        self,
        problem: NLP,
        point: _Iterate,
        qp: QPSolution,
        candidate: np.ndarray,
        lower: np.ndarray,
        upper: np.ndarray,
        damping: float,
    ) -> Optional[np.ndarray]:
        """Re-solve the subproblem with the constraint residual observed at the full step."""
        shifted = _Iterate(
            x=point.x,
            objective=point.objective,
            gradient=point.gradient,
            residual=problem.constraints(candidate) - point.jacobian @ qp.step,
            jacobian=point.jacobian,
            hessian=point.hessian,
        )
        try:
            correction = self._subproblem(shifted, lower, upper, damping)
        except RuntimeError:
            return None
        if not correction.converged:
            return None
        return np.clip(point.x + correction.step, lower, upper)

    def solve(self, problem: NLP, x0: np.ndarray) -> SQPResult:
        opts = self.options
        lower, upper = problem.lower, problem.upper
        if np.any(lower > upper):
            logger.warning("Inconsistent variable bounds", module="optimizer")
            return SQPResult(
                x=np.asarray(x0, dtype=float), status=SolverStatus.INFEASIBLE, iterations=0,
                kkt_residual=float("inf"), constraint_violation=float("inf"),
                objective=float("nan"),
            )

        x = np.clip(np.asarray(x0, dtype=float), lower, upper)
        self.penalty = 0.0
        damping = 0.0
        history: list[tuple[float, float]] = []
        status = SolverStatus.MAX_ITER
        kkt = float("inf")
        lam = np.zeros(0)
        iterations = 0

        for iterations in range(1, opts.max_iter + 1):
            point = _Iterate(
                x=x,
                objective=problem.objective(x),
                gradient=problem.gradient(x),
                residual=problem.constraints(x),
                jacobian=sp.csr_matrix(problem.jacobian(x)),
                hessian=sp.csr_matrix(problem.hessian(x)),
            )
            violation = float(np.max(np.abs(point.residual))) if point.residual.size else 0.0
            try:
                qp = self._subproblem(point, lower, upper, damping)
            except RuntimeError as exc:
                logger.warning(f"Singular KKT system: {exc}", module="optimizer")
                status = SolverStatus.INFEASIBLE
                break
            lam = qp.eq_multipliers
            kkt = _kkt_residual(x, point.gradient, point.jacobian, lam, qp.bound_multipliers, lower, upper)
            if qp.converged and violation <= opts.tol_con and kkt <= opts.tol_kkt:
                status = SolverStatus.CONVERGED
                iterations -= 1
                break

            accepted = self._line_search(problem, point, qp, lower, upper, damping)
            while accepted is None and damping < opts.max_damping:
                damping = max(opts.min_damping, damping * opts.damping_growth)
                try:
                    qp = self._subproblem(point, lower, upper, damping)
                except RuntimeError:
                    continue
                accepted = self._line_search(problem, point, qp, lower, upper, damping)
            if accepted is None:
                logger.solve(f"Line search stalled at iteration {iterations} (kkt={kkt:.2e}, damping={damping:.0e})")
                status = SolverStatus.STALLED
                break

            candidate, merit, trial = accepted
            history.append((merit, trial))
            moved = float(np.max(np.abs(candidate - x), initial=0.0))
            x = candidate
            damping = 0.0 if damping <= opts.min_damping else damping / opts.damping_growth
            if moved < 1e-14:
                status = SolverStatus.STALLED
                break

        c = problem.constraints(x)
        violation = float(np.max(np.abs(c))) if c.size else 0.0
        return SQPResult(
            x=x,
            status=status,
            iterations=iterations,
            kkt_residual=kkt,
            constraint_violation=violation,
            objective=problem.objective(x),
            merit_history=history,
            eq_multipliers=lam,
        )
