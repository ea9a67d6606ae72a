"""Automatic choice of Mellin-Barnes contour abscissas by linear programming.

Per variable, the abscissa must sit right of the poles of the upper_num
gammas and left of the poles of the lower_num gammas; each outer_upper_num
gamma adds a joint halfspace. Among valid abscissa vectors the planner picks
one minimizing their sum.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .foxh import DEFAULT_HEIGHT, ContourSpec, FoxHParams

__all__ = [
    "DEFAULT_EPSILON",
    "ContourConstraints",
    "NoValidContourError",
    "derive_constraints",
    "plan_contour",
    "validate_contour",
    "solve_lp",
]

DEFAULT_EPSILON = 0.1
# width of the box side used when a variable has poles on one side only
DEFAULT_SPAN = 2.0
_MAX_SPAN = 2.0e6


class NoValidContourError(ValueError):
    pass


class _Infeasible(Exception):
    pass


@dataclass(frozen=True)
class ContourConstraints:
    """lb <= c <= ub and coeffs . c >= rhs for every halfspace.

    ``lb_from_poles`` / ``ub_from_poles`` say which bounds come from actual
    poles; the others are finite stand-ins that only keep the LP bounded.
    """

    lb: tuple[float, ...]
    ub: tuple[float, ...]
    halfspaces: tuple[tuple[tuple[float, ...], float], ...]
    lb_from_poles: tuple[bool, ...]
    ub_from_poles: tuple[bool, ...]

    @property
    def dim(self):
        return len(self.lb)


def derive_constraints(params: FoxHParams, epsilon: float = DEFAULT_EPSILON,
                       span: float = DEFAULT_SPAN) -> ContourConstraints:
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    lb, ub, lb_real, ub_real = [], [], [], []
    for blk in params.per_variable:
        lo = hi = None
        if blk.upper_num:
            lo = max((p.offset - 1.0) / _positive(p.coeffs[0]) for p in blk.upper_num) + epsilon
        if blk.lower_num:
            hi = min(p.offset / _positive(p.coeffs[0]) for p in blk.lower_num) - epsilon
        lb_real.append(lo is not None)
        ub_real.append(hi is not None)
        if lo is None and hi is None:
            lo, hi = -span / 2, span / 2
        elif lo is None:
            lo = hi - span
        elif hi is None:
            hi = lo + span
        lb.append(lo)
        ub.append(hi)
    halfspaces = tuple((p.coeffs, p.offset - 1.0 + epsilon) for p in params.outer_upper_num)
    return ContourConstraints(tuple(lb), tuple(ub), halfspaces, tuple(lb_real), tuple(ub_real))


def _positive(c):
    if c <= 0:
        raise ValueError(f"per-variable gamma coefficients must be positive, got {c}")
    return c


def plan_contour(params: FoxHParams, W: float = DEFAULT_HEIGHT,
                 epsilon: float = DEFAULT_EPSILON) -> ContourSpec:
    """Abscissas minimizing their sum under the pole-separation constraints.

    If the LP is infeasible only because of stand-in bounds, those are
    widened before giving up.

    Raises
    ------
    NoValidContourError
        Naming the empty interval or the unreachable halfspace.
    """
    span = DEFAULT_SPAN
    while True:
        cons = derive_constraints(params, epsilon, span)
        for i, (lo, hi) in enumerate(zip(cons.lb, cons.ub)):
            if lo > hi and cons.lb_from_poles[i] and cons.ub_from_poles[i]:
                raise NoValidContourError(
                    f"variable {i + 1}: empty interval lb = {lo:g} > ub = {hi:g}")
        try:
            c = solve_lp(np.ones(cons.dim), cons)
            return ContourSpec(tuple(c), W)
        except _Infeasible:
            artificial = not (all(cons.lb_from_poles) and all(cons.ub_from_poles))
            if not artificial or span >= _MAX_SPAN:
                raise NoValidContourError(_explain(cons)) from None
            span *= 10.0


def _explain(cons):
    lb = np.array(cons.lb)
    ub = np.array(cons.ub)
    for j, (a, rhs) in enumerate(cons.halfspaces):
        a = np.array(a)
        best = np.sum(np.where(a > 0, a * ub, a * lb))
        if best < rhs:
            return (f"halfspace {j + 1}: {list(a)} . c >= {rhs:g} cannot be met "
                    f"inside the variable bounds (max {best:g})")
    return "the joint halfspaces cannot be met simultaneously inside the variable bounds"


def validate_contour(params: FoxHParams, contour: ContourSpec,
                     epsilon: float = DEFAULT_EPSILON, tol: float = 1e-12) -> bool:
    """True when the abscissas respect every pole-derived bound and halfspace."""
    cons = derive_constraints(params, epsilon)
    c = np.array(contour.abscissa, dtype=float)
    if len(c) != cons.dim:
        return False
    for i in range(cons.dim):
        if cons.lb_from_poles[i] and c[i] < cons.lb[i] - tol:
            return False
        if cons.ub_from_poles[i] and c[i] > cons.ub[i] + tol:
            return False
    for a, rhs in cons.halfspaces:
        if float(np.dot(a, c)) < rhs - tol:
            return False
    return True


# -- exact two-phase simplex ------------------------------------------------

def solve_lp(cost, cons: ContourConstraints):
    """Minimize cost . c subject to ``cons``, in exact rational arithmetic.

    Returns the optimal vertex as floats; raises _Infeasible.
    """
    n = cons.dim
    lb = [Fraction(v) for v in cons.lb]
    ub = [Fraction(v) for v in cons.ub]
    if any(lo > hi for lo, hi in zip(lb, ub)):
        raise _Infeasible
    cost = [Fraction(float(v)) for v in cost]
    # x = c - lb >= 0; columns: x (n), box slacks (n), halfspace surplus (h), artificials
    h = len(cons.halfspaces)
    rows, rhs, basis = [], [], []
    n_cols = 2 * n + h
    for i in range(n):
        row = [Fraction(0)] * n_cols
        row[i] = Fraction(1)
        row[n + i] = Fraction(1)
        rows.append(row)
        rhs.append(ub[i] - lb[i])
        basis.append(n + i)
    need_art = []
    for j, (a, b) in enumerate(cons.halfspaces):
        a = [Fraction(float(v)) for v in a]
        r = Fraction(float(b)) - sum(ai * li for ai, li in zip(a, lb))
        row = [Fraction(0)] * n_cols
        for i in range(n):
            row[i] = a[i]
        row[2 * n + j] = Fraction(-1)
        if r < 0:
            row = [-v for v in row]
            r = -r
            rows.append(row)
            rhs.append(r)
            basis.append(2 * n + j)
        else:
            rows.append(row)
            rhs.append(r)
            need_art.append(len(rows) - 1)
            basis.append(None)
    n_art = len(need_art)
    for row in rows:
        row.extend([Fraction(0)] * n_art)
    for k, ri in enumerate(need_art):
        rows[ri][n_cols + k] = Fraction(1)
        basis[ri] = n_cols + k
    total = n_cols + n_art

    if n_art:
        phase1 = [Fraction(0)] * n_cols + [Fraction(1)] * n_art
        _pivot_loop(rows, rhs, basis, phase1)
        if _objective(phase1, rhs, basis) > 0:
            raise _Infeasible
        # drive remaining zero-level artificials out of the basis
        for ri, col in enumerate(basis):
            if col >= n_cols:
                for j in range(n_cols):
                    if rows[ri][j] != 0:
                        _pivot(rows, rhs, basis, ri, j)
                        break
        keep = [ri for ri, col in enumerate(basis) if col < n_cols]
        rows = [rows[ri][:n_cols] for ri in keep]
        rhs = [rhs[ri] for ri in keep]
        basis = [basis[ri] for ri in keep]
        total = n_cols
    phase2 = cost + [Fraction(0)] * (total - n)
    _pivot_loop(rows, rhs, basis, phase2)
    x = [Fraction(0)] * total
    for ri, col in enumerate(basis):
        x[col] = rhs[ri]
    return [float(x[i] + lb[i]) for i in range(n)]


def _objective(cost, rhs, basis):
    return sum(cost[col] * rhs[ri] for ri, col in enumerate(basis))


def _pivot(rows, rhs, basis, r, col):
    piv = rows[r][col]
    rows[r] = [v / piv for v in rows[r]]
    rhs[r] = rhs[r] / piv
    for k in range(len(rows)):
        if k != r and rows[k][col] != 0:
            f = rows[k][col]
            rows[k] = [a - f * b for a, b in zip(rows[k], rows[r])]
            rhs[k] = rhs[k] - f * rhs[r]
    basis[r] = col


def _pivot_loop(rows, rhs, basis, cost):
    # Bland's rule; the objective is bounded below for our problems because
    # every structural variable carries a finite box.
    n_cols = len(cost)
    while True:
        in_basis = set(basis)
        entering = None
        for j in range(n_cols):
            if j in in_basis:
                continue
            reduced = cost[j] - sum(cost[basis[ri]] * rows[ri][j] for ri in range(len(rows)))
            if reduced < 0:
                entering = j
                break
        if entering is None:
            return
        leave, best = None, None
        for ri in range(len(rows)):
            a = rows[ri][entering]
            if a > 0:
                ratio = rhs[ri] / a
                if best is None or ratio < best or (ratio == best and basis[ri] < basis[leave]):
                    leave, best = ri, ratio
        if leave is None:
            raise ArithmeticError("unbounded LP")
        _pivot(rows, rhs, basis, leave, entering)
