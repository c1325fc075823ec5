"""Dense convex QP solver specialized to diagonal Hessians.

Every optimization in this package (market clearing, best responses,
equilibrium and social-optimum dispatch) is a strictly convex QP with
a positive diagonal Hessian, a handful of equality rows, and two-sided
range constraints.  That family is small enough that a primal
active-set method with dense KKT solves is exact, deterministic, and
fast, and it hands back the constraint multipliers that the market
layer interprets as prices.  A brute-force enumerator over active-set
sign patterns provides an independent oracle for testing.

Conventions::

    minimize    0.5 * x' diag(h) x + g' x
    subject to  A x == b                 (duals: eq_duals, free sign)
                lo <= C x <= up          (duals: lower_duals, upper_duals >= 0)

Stationarity is ``diag(h) x + g + A' nu - C' mu_lo + C' mu_up = 0``.
Either side of a range row may be infinite; a row with ``lo == up`` is
effectively an equality and is handled without special casing.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np
from scipy.optimize import linprog

from .errors import InfeasibleError, SolverFailureError

__all__ = ["QpProblem", "QpSolution", "solve", "enumerate_oracle", "kkt_residuals"]

_FREE, _LOWER, _UPPER = 0, -1, 1
_STATUS_NAMES = {_FREE: "free", _LOWER: "lower", _UPPER: "upper"}
_STATUS_CODES = {name: code for code, name in _STATUS_NAMES.items()}

_FEAS_TOL = 1e-8
_DUAL_TOL = 1e-9
_STEP_TOL = 1e-11


def _as_matrix(value, n_cols: int) -> np.ndarray:
    # always copy: these arrays get frozen read-only, and freezing a
    # caller's array in place would be a surprising side effect
    if value is None:
        return np.zeros((0, n_cols))
    matrix = np.atleast_2d(np.array(value, dtype=float))
    if matrix.size == 0:
        return np.zeros((0, n_cols))
    return matrix


def _as_vector(value, length: int, fill: float) -> np.ndarray:
    if value is None:
        return np.full(length, fill)
    return np.atleast_1d(np.array(value, dtype=float))


@dataclass(frozen=True, eq=False)
class QpProblem:
    """Problem data for ``solve`` and ``enumerate_oracle``.

    Parameters
    ----------
    hessian : np.ndarray, shape (n,)
        Diagonal of the quadratic term; every entry must be positive.
    gradient : np.ndarray, shape (n,)
        Linear term.
    eq_matrix, eq_rhs : np.ndarray
        Equality system ``eq_matrix @ x == eq_rhs``; may be empty.
    range_matrix, range_lower, range_upper : np.ndarray
        Two-sided rows ``range_lower <= range_matrix @ x <= range_upper``.
        Bounds may be ``-inf``/``+inf``; missing bound arrays default to
        unbounded on that side.
    """

    hessian: np.ndarray
    gradient: np.ndarray
    eq_matrix: np.ndarray = None
    eq_rhs: np.ndarray = None
    range_matrix: np.ndarray = None
    range_lower: np.ndarray = None
    range_upper: np.ndarray = None

    def __post_init__(self):
        h = np.atleast_1d(np.array(self.hessian, dtype=float))
        g = np.atleast_1d(np.array(self.gradient, dtype=float))
        n = h.size
        if g.shape != (n,):
            raise ValueError(f"gradient shape {g.shape} does not match {n} variables")
        if not np.all(h > 0.0):
            raise ValueError("hessian diagonal must be strictly positive")
        A = _as_matrix(self.eq_matrix, n)
        b = _as_vector(self.eq_rhs, A.shape[0], 0.0)
        C = _as_matrix(self.range_matrix, n)
        lo = _as_vector(self.range_lower, C.shape[0], -np.inf)
        up = _as_vector(self.range_upper, C.shape[0], np.inf)
        if A.shape[1] != n or C.shape[1] != n:
            raise ValueError("constraint matrices must have one column per variable")
        if b.shape != (A.shape[0],):
            raise ValueError(f"eq_rhs length {b.shape} does not match {A.shape[0]} equality rows")
        if lo.shape != (C.shape[0],) or up.shape != (C.shape[0],):
            raise ValueError("range bounds must have one entry per range row")
        if np.any(lo > up):
            bad = int(np.flatnonzero(lo > up)[0])
            raise ValueError(f"range row {bad} has lower bound above upper bound")
        for name, arr in (("hessian", h), ("gradient", g), ("eq_matrix", A),
                          ("eq_rhs", b), ("range_matrix", C)):
            if not np.all(np.isfinite(arr)):
                raise ValueError(f"{name} contains non-finite entries")
        if np.any(np.isnan(lo)) or np.any(np.isnan(up)):
            raise ValueError("range bounds may be infinite but not NaN")
        for attr, arr in (("hessian", h), ("gradient", g), ("eq_matrix", A), ("eq_rhs", b),
                          ("range_matrix", C), ("range_lower", lo), ("range_upper", up)):
            arr.setflags(write=False)
            object.__setattr__(self, attr, arr)

    @property
    def n_vars(self) -> int:
        return self.hessian.size

    @property
    def n_eq(self) -> int:
        return self.eq_matrix.shape[0]

    @property
    def n_ranges(self) -> int:
        return self.range_matrix.shape[0]

    def objective(self, x: np.ndarray) -> float:
        x = np.asarray(x, dtype=float)
        return float(0.5 * (self.hessian * x * x).sum() + self.gradient @ x)


@dataclass(frozen=True, eq=False)
class QpSolution:
    """Primal/dual solution with the final constraint activity pattern."""

    x: np.ndarray
    eq_duals: np.ndarray
    lower_duals: np.ndarray
    upper_duals: np.ndarray
    statuses: tuple[str, ...]
    objective: float
    iterations: int


def _solve_kkt(problem: QpProblem, active: np.ndarray):
    """Solve the equality problem that fixes the given active rows.

    Returns the subspace minimizer, equality duals, and the raw
    multipliers of the active rows (sign convention: the multiplier of
    a row held at its lower bound equals minus that bound's dual).
    """
    n = problem.n_vars
    A, b = problem.eq_matrix, problem.eq_rhs
    rows = np.flatnonzero(active != 0)
    Cw = problem.range_matrix[rows]
    rhs_w = np.where(active[rows] == _LOWER,
                     problem.range_lower[rows], problem.range_upper[rows])
    n_eq, n_act = A.shape[0], rows.size
    size = n + n_eq + n_act
    kkt = np.zeros((size, size))
    kkt[:n, :n] = np.diag(problem.hessian)
    kkt[:n, n:n + n_eq] = A.T
    kkt[n:n + n_eq, :n] = A
    kkt[:n, n + n_eq:] = Cw.T
    kkt[n + n_eq:, :n] = Cw
    rhs = np.concatenate([-problem.gradient, b, rhs_w])
    try:
        sol = np.linalg.solve(kkt, rhs)
        # A numerically singular system can "solve" without raising;
        # route anything with a real residual through the lstsq path.
        bad = not np.all(np.isfinite(sol)) or (
            float(np.abs(kkt @ sol - rhs).max())
            > 1e-7 * max(1.0, float(np.abs(rhs).max())))
        if bad:
            raise np.linalg.LinAlgError
    except np.linalg.LinAlgError:
        # Redundant active rows make the system singular; the minimum
        # norm solution still satisfies it whenever it is consistent.
        sol, *_ = np.linalg.lstsq(kkt, rhs, rcond=None)
        residual = float(np.abs(kkt @ sol - rhs).max())
        if residual > 1e-7 * max(1.0, float(np.abs(rhs).max())):
            raise SolverFailureError(
                f"singular KKT system with inconsistent rows (residual {residual:.3e})"
            ) from None
    return sol[:n], sol[n:n + n_eq], sol[n + n_eq:], rows


def _range_violations(problem: QpProblem, x: np.ndarray) -> np.ndarray:
    values = problem.range_matrix @ x
    below = np.where(np.isfinite(problem.range_lower), problem.range_lower - values, -np.inf)
    above = np.where(np.isfinite(problem.range_upper), values - problem.range_upper, -np.inf)
    return np.maximum(np.maximum(below, above), 0.0)


def _feasible_point(problem: QpProblem, start: np.ndarray | None) -> np.ndarray:
    scale = max(1.0, float(np.abs(problem.eq_rhs).max()) if problem.n_eq else 1.0)
    if start is not None:
        x = np.asarray(start, dtype=float)
        if x.shape != (problem.n_vars,):
            raise ValueError(f"start point must have shape ({problem.n_vars},)")
        eq_ok = problem.n_eq == 0 or np.abs(problem.eq_matrix @ x - problem.eq_rhs).max() <= _FEAS_TOL * scale
        if eq_ok and (problem.n_ranges == 0 or _range_violations(problem, x).max() <= _FEAS_TOL * scale):
            return x
    return _phase_one(problem)


def _phase_one(problem: QpProblem) -> np.ndarray:
    """Chebyshev-style LP: minimize the worst range violation.

    Equalities are imposed exactly; a positive optimum is an
    infeasibility certificate and names the most violated row.
    """
    n, m = problem.n_vars, problem.n_ranges
    if m == 0 and problem.n_eq == 0:
        return np.zeros(n)
    cost = np.zeros(n + 1)
    cost[-1] = 1.0
    a_ub, b_ub = [], []
    for j in range(m):
        if np.isfinite(problem.range_lower[j]):
            row = np.concatenate([-problem.range_matrix[j], [-1.0]])
            a_ub.append(row)
            b_ub.append(-problem.range_lower[j])
        if np.isfinite(problem.range_upper[j]):
            row = np.concatenate([problem.range_matrix[j], [-1.0]])
            a_ub.append(row)
            b_ub.append(problem.range_upper[j])
    a_eq = None
    b_eq = None
    if problem.n_eq:
        a_eq = np.hstack([problem.eq_matrix, np.zeros((problem.n_eq, 1))])
        b_eq = problem.eq_rhs
    result = linprog(
        cost,
        A_ub=np.array(a_ub) if a_ub else None,
        b_ub=np.array(b_ub) if b_ub else None,
        A_eq=a_eq,
        b_eq=b_eq,
        bounds=[(None, None)] * n + [(0.0, None)],
        method="highs",
    )
    if result.status == 2:
        # The LP relaxes every range row, so only the equality system
        # can be inconsistent; point at its worst row.
        ls, *_ = np.linalg.lstsq(problem.eq_matrix, problem.eq_rhs, rcond=None)
        worst = int(np.argmax(np.abs(problem.eq_matrix @ ls - problem.eq_rhs)))
        raise InfeasibleError("equality constraints are inconsistent", "equality", worst)
    if result.status != 0:
        raise SolverFailureError(f"phase-one LP failed: {result.message}")
    x = result.x[:n]
    scale = max(1.0, float(np.abs(x).max()))
    if result.x[-1] > _FEAS_TOL * scale:
        worst = int(np.argmax(_range_violations(problem, x)))
        raise InfeasibleError("no point satisfies all range constraints", "range", worst)
    return x


def _build_solution(problem: QpProblem, x, nu, zeta, rows, active, iterations) -> QpSolution:
    m = problem.n_ranges
    lower = np.zeros(m)
    upper = np.zeros(m)
    for z, j in zip(zeta, rows):
        if active[j] == _LOWER:
            lower[j] = max(-z, 0.0)
        else:
            upper[j] = max(z, 0.0)
    statuses = tuple(_STATUS_NAMES[int(code)] for code in active)
    solution = QpSolution(
        x=x,
        eq_duals=nu,
        lower_duals=lower,
        upper_duals=upper,
        statuses=statuses,
        objective=problem.objective(x),
        iterations=iterations,
    )
    residuals = kkt_residuals(problem, solution)
    scale = max(1.0, float(np.abs(x).max()), float(np.abs(problem.gradient).max()))
    dual_scale = max(scale, float(lower.max(initial=0.0)), float(upper.max(initial=0.0)))
    if (max(residuals["stationarity"], residuals["equality"], residuals["primal"]) > 1e-7 * scale
            or residuals["complementarity"] > 1e-7 * dual_scale):
        raise SolverFailureError(f"solution failed self-check: residuals {residuals}")
    return solution


def solve(problem: QpProblem, start: np.ndarray | None = None,
          warm: tuple[str, ...] | None = None, max_iter: int | None = None) -> QpSolution:
    """Minimize the QP with a primal active-set method.

    Parameters
    ----------
    problem : QpProblem
    start : np.ndarray, optional
        Feasible starting point.  Points that fail feasibility checks
        are silently replaced by a phase-one solution, so callers may
        pass cheap guesses.
    warm : tuple of str, optional
        Statuses from a previous solution of a nearby problem.  If the
        optimizer of the warmed working set checks out it is returned
        after a single KKT solve; otherwise the cold path runs.
    max_iter : int, optional
        Iteration cap, default ``100 * (n_vars + n_ranges)``.

    Raises
    ------
    InfeasibleError
        If no point satisfies the constraints.
    SolverFailureError
        On iteration-cap overrun or a failed numerical self-check.

    Notes
    -----
    Tie-breaking is deterministic: the entering row is the most
    violated blocking row (lowest index on ties) and the leaving row
    has the most negative signed multiplier (lowest index on ties).
    Identical inputs therefore produce identical outputs bit for bit.
    """
    m = problem.n_ranges
    if max_iter is None:
        max_iter = 100 * (problem.n_vars + m)

    if warm is not None and len(warm) == m:
        candidate = _try_warm(problem, warm)
        if candidate is not None:
            return candidate

    x = _feasible_point(problem, start)
    active = np.zeros(m, dtype=np.int8)
    # Rows pinned by the start point stay inactive until they block a
    # step; starting from the all-free working set is always valid.
    for iteration in range(1, max_iter + 1):
        xh, nu, zeta, rows = _solve_kkt(problem, active)
        step = xh - x
        step_norm = float(np.abs(step).max()) if step.size else 0.0
        if step_norm <= _STEP_TOL * (1.0 + float(np.abs(x).max())):
            signed = active[rows] * zeta
            tol = _DUAL_TOL * (1.0 + (float(np.abs(zeta).max()) if zeta.size else 0.0))
            if signed.size == 0 or signed.min() >= -tol:
                return _build_solution(problem, xh, nu, zeta, rows, active, iteration)
            active[rows[int(np.argmin(signed))]] = _FREE
            x = xh
            continue
        alpha, blocker, side = _ratio_test(problem, x, step, active, xh)
        x = x + alpha * step
        if blocker is not None:
            active[blocker] = side
    raise SolverFailureError(f"active-set iteration cap {max_iter} exceeded")


def _try_warm(problem: QpProblem, warm: tuple[str, ...]) -> QpSolution | None:
    try:
        active = np.array([_STATUS_CODES[s] for s in warm], dtype=np.int8)
    except KeyError:
        return None
    for j in np.flatnonzero(active != 0):
        bound = problem.range_lower[j] if active[j] == _LOWER else problem.range_upper[j]
        if not np.isfinite(bound):
            return None
    try:
        x, nu, zeta, rows = _solve_kkt(problem, active)
    except SolverFailureError:
        return None
    scale = max(1.0, float(np.abs(x).max()))
    if problem.n_eq and np.abs(problem.eq_matrix @ x - problem.eq_rhs).max() > _FEAS_TOL * scale:
        return None
    if problem.n_ranges and _range_violations(problem, x).max() > _FEAS_TOL * scale:
        return None
    signed = active[rows] * zeta
    if signed.size and signed.min() < -_DUAL_TOL * (1.0 + float(np.abs(zeta).max())):
        return None
    try:
        return _build_solution(problem, x, nu, zeta, rows, active, 1)
    except SolverFailureError:
        return None


def _ratio_test(problem: QpProblem, x, step, active, xh):
    """Longest feasible prefix of the step, with the blocking row.

    Among rows blocking at the minimal ratio the one most violated at
    the full step wins, lowest index on ties.
    """
    direction = problem.range_matrix @ step
    values = problem.range_matrix @ x
    alpha = 1.0
    candidates: list[int] = []
    sides: dict[int, int] = {}
    ratios = np.full(problem.n_ranges, np.inf)
    for j in range(problem.n_ranges):
        if active[j] != _FREE or abs(direction[j]) <= 1e-12 * (1.0 + abs(values[j])):
            continue
        if direction[j] > 0 and np.isfinite(problem.range_upper[j]):
            ratios[j] = (problem.range_upper[j] - values[j]) / direction[j]
            sides[j] = _UPPER
        elif direction[j] < 0 and np.isfinite(problem.range_lower[j]):
            ratios[j] = (problem.range_lower[j] - values[j]) / direction[j]
            sides[j] = _LOWER
    ratios = np.maximum(ratios, 0.0)  # clip tiny negative ratios from roundoff
    if ratios.size and ratios.min() < alpha:
        alpha = float(ratios.min())
    if alpha >= 1.0:
        return 1.0, None, None
    near = np.flatnonzero(ratios <= alpha + 1e-10 * (1.0 + alpha))
    violations = _range_violations(problem, xh)
    best = max(near, key=lambda j: (violations[j], -j))
    return alpha, int(best), sides[int(best)]


def enumerate_oracle(problem: QpProblem, max_ranges: int = 12) -> QpSolution:
    """Solve by enumerating every active-set sign pattern.

    Exponential in the number of range rows, so guarded to small
    problems; exists purely as an independent check on ``solve``.
    The first pattern (in lexicographic free/lower/upper order) whose
    KKT point is primal feasible with correctly signed multipliers is
    returned.  Strict convexity makes the primal unique, so any such
    pattern yields the same ``x``.
    """
    m = problem.n_ranges
    if m > max_ranges:
        raise ValueError(f"oracle enumeration limited to {max_ranges} range rows, got {m}")
    options = []
    for j in range(m):
        choice = [_FREE]
        if np.isfinite(problem.range_lower[j]):
            choice.append(_LOWER)
        if np.isfinite(problem.range_upper[j]):
            choice.append(_UPPER)
        options.append(choice)
    best_violation = np.inf
    best_certificate = 0
    for combo in itertools.product(*options):
        active = np.array(combo, dtype=np.int8)
        try:
            x, nu, zeta, rows = _solve_kkt(problem, active)
        except SolverFailureError:
            continue
        violations = _range_violations(problem, x) if m else np.zeros(0)
        eq_residual = (float(np.abs(problem.eq_matrix @ x - problem.eq_rhs).max())
                       if problem.n_eq else 0.0)
        scale = max(1.0, float(np.abs(x).max()))
        worst = max(float(violations.max()) if m else 0.0, eq_residual)
        if worst < best_violation:
            best_violation = worst
            best_certificate = int(np.argmax(violations)) if m else 0
        if worst > _FEAS_TOL * scale:
            continue
        if rows.size:
            # the pattern is only meaningful if its rows really sit on
            # the bounds they were pinned to
            pinned = np.where(active[rows] == _LOWER,
                              problem.range_lower[rows], problem.range_upper[rows])
            if float(np.abs(problem.range_matrix[rows] @ x - pinned).max()) > _FEAS_TOL * scale:
                continue
        signed = active[rows] * zeta
        if signed.size and signed.min() < -_DUAL_TOL * (1.0 + float(np.abs(zeta).max())):
            continue
        try:
            return _build_solution(problem, x, nu, zeta, rows, active, 1)
        except SolverFailureError:
            continue
    raise InfeasibleError("no active-set pattern is feasible", "range", best_certificate)


def kkt_residuals(problem: QpProblem, solution: QpSolution) -> dict[str, float]:
    """Worst-case residual of each optimality condition.

    Keys: ``stationarity``, ``equality``, ``primal`` (range violation),
    ``dual_sign`` (negativity of inequality duals), and
    ``complementarity`` (dual times slack, including any dual attached
    to an infinite bound).  All are nonnegative; all vanish at an exact
    solution.
    """
    x = solution.x
    grad = problem.hessian * x + problem.gradient
    if problem.n_eq:
        grad = grad + problem.eq_matrix.T @ solution.eq_duals
        equality = float(np.abs(problem.eq_matrix @ x - problem.eq_rhs).max())
    else:
        equality = 0.0
    if problem.n_ranges:
        grad = grad - problem.range_matrix.T @ solution.lower_duals
        grad = grad + problem.range_matrix.T @ solution.upper_duals
        values = problem.range_matrix @ x
        primal = float(_range_violations(problem, x).max())
        dual_sign = float(max(0.0, -min(solution.lower_duals.min(initial=0.0),
                                        solution.upper_duals.min(initial=0.0))))
        # a missing bound has no slack to multiply by; any dual parked
        # on one is counted at face value
        slack_lo = np.where(np.isfinite(problem.range_lower),
                            np.abs(values - problem.range_lower), 1.0)
        slack_up = np.where(np.isfinite(problem.range_upper),
                            np.abs(problem.range_upper - values), 1.0)
        comp_lo = np.maximum(solution.lower_duals, 0.0) * slack_lo
        comp_up = np.maximum(solution.upper_duals, 0.0) * slack_up
        complementarity = float(max(comp_lo.max(initial=0.0), comp_up.max(initial=0.0)))
    else:
        primal = dual_sign = complementarity = 0.0
    return {
        "stationarity": float(np.abs(grad).max()),
        "equality": equality,
        "primal": primal,
        "dual_sign": dual_sign,
        "complementarity": complementarity,
    }
