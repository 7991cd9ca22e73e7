"""
Dense two-phase simplex with dual extraction

Solves

    minimize    c @ x
    subject to  A[i] @ x  (>=, <=, =)  rhs[i]        for every row i
                lower <= x <= upper                  (lower defaults to 0)

and returns the primal optimum together with one multiplier per row.
Sign convention for the multipliers (minimization): a '>=' row has
dual >= 0, a '<=' row has dual <= 0, an '=' row is free. Finite upper
bounds become internal '<=' rows whose multipliers are reported
separately as upper_duals.

Pivoting: Dantzig (most negative reduced cost) until a run of degenerate
pivots or the Dantzig budget is used up, then Bland's rule until
optimality. Hitting the iteration cap raises SolverStalledError.
"""

import time
from dataclasses import dataclass
from enum import Enum
from typing import Optional, Sequence

import numpy as np

from core_model import DimensionError, SimulationError
from logging_config import get_logger

logger = get_logger(__name__)

SENSES = (">=", "<=", "=")

TOL_FEAS = 1e-7
TOL_PIVOT = 1e-9
TOL_COST = 1e-10
TOL_ZERO = 1e-13

DEGENERATE_STREAK = 25


class LPStatus(str, Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    UNBOUNDED = "unbounded"


class LPDimensionError(DimensionError):
    pass


class SolverStalledError(SimulationError):
    def __init__(self, message, iterations=0, rule="dantzig"):
        super().__init__(message)
        self.iterations = iterations
        self.rule = rule


@dataclass
class LinearProgram:
    objective: np.ndarray
    constraints: np.ndarray
    rhs: np.ndarray
    senses: Sequence[str]
    lower: Optional[np.ndarray] = None
    upper: Optional[np.ndarray] = None

    def __post_init__(self):
        self.objective = np.asarray(self.objective, dtype=float).reshape(-1)
        n = self.objective.shape[0]
        A = np.asarray(self.constraints, dtype=float)
        if A.size == 0:
            A = A.reshape(0, n)
        self.constraints = A
        self.rhs = np.asarray(self.rhs, dtype=float).reshape(-1)
        self.senses = list(self.senses)
        if self.lower is not None:
            self.lower = np.asarray(self.lower, dtype=float).reshape(-1)
        if self.upper is not None:
            self.upper = np.asarray(self.upper, dtype=float).reshape(-1)

    @property
    def n(self):
        return self.objective.shape[0]

    @property
    def m(self):
        return self.constraints.shape[0]

    def lower_bounds(self):
        return np.zeros(self.n) if self.lower is None else self.lower

    def upper_bounds(self):
        return np.full(self.n, np.inf) if self.upper is None else self.upper

    def validate(self):
        n = self.n
        if self.constraints.ndim != 2 or self.constraints.shape[1] != n:
            raise LPDimensionError(f"constraint matrix has shape {self.constraints.shape}, expected (m, {n})")
        if self.rhs.shape[0] != self.m:
            raise LPDimensionError(f"rhs has {self.rhs.shape[0]} entries for {self.m} rows")
        if len(self.senses) != self.m:
            raise LPDimensionError(f"{len(self.senses)} senses for {self.m} rows")
        bad = [s for s in self.senses if s not in SENSES]
        if bad:
            raise LPDimensionError(f"unknown row senses {bad}; expected one of {SENSES}")
        for name, bound in (("lower", self.lower), ("upper", self.upper)):
            if bound is not None and bound.shape[0] != n:
                raise LPDimensionError(f"{name} bounds have {bound.shape[0]} entries for {n} variables")
        if not np.all(np.isfinite(self.objective)) or not np.all(np.isfinite(self.constraints)):
            raise LPDimensionError("objective and constraint coefficients must be finite")
        if not np.all(np.isfinite(self.rhs)):
            raise LPDimensionError("rhs must be finite")


@dataclass
class LPSolution:
    status: LPStatus
    x: Optional[np.ndarray] = None
    duals: Optional[np.ndarray] = None
    objective_value: Optional[float] = None
    upper_duals: Optional[np.ndarray] = None
    reduced_costs: Optional[np.ndarray] = None
    iterations: int = 0

    @property
    def optimal(self):
        return self.status == LPStatus.OPTIMAL

    def dual_objective(self, lp):
        """
        Dual value rhs @ duals plus the bound terms; equals the primal
        objective at an optimum (strong duality).
        """
        lower, upper = lp.lower_bounds(), lp.upper_bounds()
        value = float(lp.rhs @ self.duals)
        both = np.isfinite(lower) & np.isfinite(upper)
        value += float(upper[both] @ self.upper_duals[both])
        anchor = np.where(np.isfinite(lower), lower, np.where(np.isfinite(upper), upper, 0.0))
        value += float(anchor @ self.reduced_costs)
        return value


class _Standardized:
    """
    The LP rewritten over nonnegative variables xs with x = shift + M @ xs,
    every equality split into a '<=' / '>=' pair, finite upper bounds
    appended as '<=' rows, and every row scaled to a nonnegative rhs.
    """

    def __init__(self, lp):
        n = lp.n
        lower, upper = lp.lower_bounds(), lp.upper_bounds()
        self.shift = np.zeros(n)
        columns = []  # (original variable, sign)
        bound_rows = []  # (standard column, width, original variable)
        for j in range(n):
            lo, hi = lower[j], upper[j]
            if np.isfinite(lo):
                self.shift[j] = lo
                columns.append((j, 1.0))
                if np.isfinite(hi):
                    bound_rows.append((len(columns) - 1, hi - lo, j))
            elif np.isfinite(hi):
                self.shift[j] = hi
                columns.append((j, -1.0))
            else:
                columns.append((j, 1.0))
                columns.append((j, -1.0))

        ns = len(columns)
        self.M = np.zeros((n, ns))
        for k, (j, sign) in enumerate(columns):
            self.M[j, k] = sign
        self.ns = ns

        A_s = lp.constraints @ self.M
        rhs_s = lp.rhs - lp.constraints @ self.shift

        rows, senses, rhs, origins = [], [], [], []
        for i in range(lp.m):
            if lp.senses[i] == "=":
                for sense in ("<=", ">="):
                    rows.append(A_s[i]); senses.append(sense); rhs.append(rhs_s[i]); origins.append(("row", i))
            else:
                rows.append(A_s[i]); senses.append(lp.senses[i]); rhs.append(rhs_s[i]); origins.append(("row", i))
        for k, width, j in bound_rows:
            e = np.zeros(ns)
            e[k] = 1.0
            rows.append(e); senses.append("<="); rhs.append(width); origins.append(("upper", j))

        m = len(rows)
        self.m = m
        self.origins = origins
        self.signs = np.ones(m)
        A_rows = np.array(rows).reshape(m, ns) if m else np.zeros((0, ns))
        rhs = np.array(rhs, dtype=float)
        for r in range(m):
            if rhs[r] < 0:
                self.signs[r] = -1.0
                A_rows[r] = -A_rows[r]
                rhs[r] = -rhs[r]
                senses[r] = ">=" if senses[r] == "<=" else "<="

        # Slack (+1) for '<=' rows, surplus (-1) plus artificial (+1) for '>=' rows
        extra_cols = []
        self.unit_col = np.zeros(m, dtype=int)
        artificial = []
        basis = np.zeros(m, dtype=int)
        for r in range(m):
            e = np.zeros(m)
            e[r] = 1.0
            if senses[r] == "<=":
                extra_cols.append(e)
                basis[r] = ns + len(extra_cols) - 1
            else:
                extra_cols.append(-e)
                extra_cols.append(e)
                basis[r] = ns + len(extra_cols) - 1
                artificial.append(basis[r])
            self.unit_col[r] = basis[r]

        S = np.column_stack(extra_cols) if extra_cols else np.zeros((m, 0))
        self.A = np.hstack([A_rows, S])
        self.b = rhs
        self.N = self.A.shape[1]
        self.basis = basis
        self.artificial = np.zeros(self.N, dtype=bool)
        self.artificial[artificial] = True
        self.c = np.zeros(self.N)
        self.c[:ns] = lp.objective @ self.M
        self.constant = float(lp.objective @ self.shift)


class _Counter:
    def __init__(self, cap, dantzig_limit):
        self.iterations = 0
        self.cap = cap
        self.dantzig_limit = dantzig_limit
        self.rule = "dantzig"


def _pivot(T, row, col):
    T[row] /= T[row, col]
    factors = T[:, col].copy()
    factors[row] = 0.0
    T -= np.outer(factors, T[row])
    T[np.abs(T) < TOL_ZERO] = 0.0


def _iterate(T, basis, allowed, counter):
    """Run simplex pivots until optimal ('optimal') or an unbounded ray ('unbounded')."""
    m = T.shape[0] - 1
    degenerate = 0
    bland = counter.rule == "bland"
    while True:
        reduced = T[-1, :-1]
        candidates = allowed & (reduced < -TOL_COST)
        if not candidates.any():
            return "optimal"
        if counter.iterations >= counter.cap:
            raise SolverStalledError(
                f"simplex stalled after {counter.iterations} pivots (rule={counter.rule})",
                iterations=counter.iterations,
                rule=counter.rule,
            )

        if bland:
            col = int(np.flatnonzero(candidates)[0])
        else:
            col = int(np.argmin(np.where(candidates, reduced, np.inf)))

        column = T[:m, col]
        positive = column > TOL_PIVOT
        if not positive.any():
            return "unbounded"
        ratios = np.full(m, np.inf)
        ratios[positive] = T[:m, -1][positive] / column[positive]
        best = ratios.min()
        ties = np.flatnonzero(ratios <= best + 1e-12 * (1.0 + abs(best)))
        if bland:
            row = int(ties[np.argmin(basis[ties])])
        else:
            row = int(ties[np.argmax(column[ties])])

        degenerate = degenerate + 1 if best <= TOL_PIVOT else 0
        if not bland and (degenerate >= DEGENERATE_STREAK or counter.iterations >= counter.dantzig_limit):
            bland = True
            counter.rule = "bland"
            logger.debug(f"[LP] switching to Bland's rule after {counter.iterations} pivots")

        _pivot(T, row, col)
        basis[row] = col
        counter.iterations += 1


def solve(lp, max_iterations=None):
    """
    Solve a LinearProgram.

    Args:
        lp: LinearProgram (validated before solving)
        max_iterations: Pivot cap over both phases; defaults to 50 (m + n) + 1000

    Returns:
        LPSolution; x/duals are only set when status is optimal

    Raises:
        LPDimensionError: Inconsistent dimensions
        SolverStalledError: Pivot cap reached
    """
    lp.validate()
    start = time.time()

    lower, upper = lp.lower_bounds(), lp.upper_bounds()
    if np.any(lower > upper + TOL_FEAS):
        return LPSolution(status=LPStatus.INFEASIBLE)

    std = _Standardized(lp)
    m, N = std.m, std.N
    if max_iterations is None:
        max_iterations = 50 * (m + N) + 1000
    counter = _Counter(max_iterations, dantzig_limit=max_iterations // 2)

    T = np.zeros((m + 1, N + 1))
    T[:m, :N] = std.A
    T[:m, -1] = std.b
    basis = std.basis.copy()

    # Phase I: minimize the sum of artificials
    if std.artificial.any():
        c1 = std.artificial.astype(float)
        T[-1, :N] = c1 - c1[basis] @ T[:m, :N]
        T[-1, -1] = -(c1[basis] @ T[:m, -1])
        _iterate(T, basis, np.ones(N, dtype=bool), counter)
        infeasibility = -T[-1, -1]
        if infeasibility > TOL_FEAS * (1.0 + (np.abs(std.b).max() if m else 0.0)):
            logger.debug(f"[LP] infeasible, phase I residual {infeasibility:.3e}")
            return LPSolution(status=LPStatus.INFEASIBLE, iterations=counter.iterations)

        # Drive zero-level artificials out of the basis where possible
        for r in range(m):
            if std.artificial[basis[r]]:
                row = T[r, :N]
                options = np.flatnonzero(~std.artificial & (np.abs(row) > TOL_PIVOT))
                if options.size:
                    col = int(options[np.argmax(np.abs(row[options]))])
                    _pivot(T, r, col)
                    basis[r] = col
                    counter.iterations += 1

    # Phase II on the original objective; artificials may not re-enter
    c2 = std.c
    T[-1, :N] = c2 - c2[basis] @ T[:m, :N]
    T[-1, -1] = -(c2[basis] @ T[:m, -1])
    outcome = _iterate(T, basis, ~std.artificial, counter)
    if outcome == "unbounded":
        logger.debug(f"[LP] unbounded after {counter.iterations} pivots")
        return LPSolution(status=LPStatus.UNBOUNDED, iterations=counter.iterations)

    xs_full = np.zeros(N)
    xs_full[basis] = np.maximum(T[:m, -1], 0.0)
    x = std.shift + std.M @ xs_full[:std.ns]

    # Row multipliers from the reduced costs of each row's unit column
    y_std = -T[-1, std.unit_col] if m else np.zeros(0)
    duals = np.zeros(lp.m)
    upper_duals = np.zeros(lp.n)
    for r, (kind, idx) in enumerate(std.origins):
        value = std.signs[r] * y_std[r]
        if kind == "row":
            duals[idx] += value
        else:
            upper_duals[idx] += value

    reduced_costs = lp.objective - lp.constraints.T @ duals - upper_duals
    objective_value = float(lp.objective @ x)

    logger.debug(
        f"[LP] optimal obj={objective_value:.10g} pivots={counter.iterations} "
        f"rule={counter.rule} size={m}x{N} in {time.time() - start:.4f}s"
    )
    return LPSolution(
        status=LPStatus.OPTIMAL,
        x=x,
        duals=duals,
        objective_value=objective_value,
        upper_duals=upper_duals,
        reduced_costs=reduced_costs,
        iterations=counter.iterations,
    )


def row_slacks(lp, x):
    """Signed slack A x - rhs per row (>= 0 feasible for '>=', <= 0 for '<=')."""
    return lp.constraints @ x - lp.rhs


def max_violation(lp, x):
    """Largest primal infeasibility of x over rows and bounds."""
    slack = row_slacks(lp, x)
    worst = 0.0
    for i, sense in enumerate(lp.senses):
        if sense == ">=":
            worst = max(worst, -slack[i])
        elif sense == "<=":
            worst = max(worst, slack[i])
        else:
            worst = max(worst, abs(slack[i]))
    worst = max(worst, float(np.max(lp.lower_bounds() - x, initial=0.0)))
    worst = max(worst, float(np.max(x - lp.upper_bounds(), initial=0.0)))
    return worst
