"""Bounded-variable linear programs and a dense revised-simplex solver.

Problems take the form

    minimize    c . x
    subject to  A_eq x  = b_eq
                A_ub x <= b_ub
                lower <= x <= upper

Inequalities get slack variables in [0, inf); phase 1 minimizes the total
artificial residual, phase 2 the real objective.  The solver returns primal
values, equality and inequality row duals (d objective / d rhs), and reduced
costs, so callers can read locational prices straight off the balance rows.

Pivoting is deterministic: Dantzig pricing with lowest-index ties, switching
to Bland's rule after a long degenerate streak.  The final solution is always
recomputed canonically from the optimal basis so that results do not depend
on the pivot path that reached it (in particular, warm starts reproduce cold
solves bit for bit on the same final basis).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .errors import SimplexError

_TOL_RC = 1e-9        # reduced-cost threshold for optimality
_TOL_PIVOT = 1e-9     # smallest usable pivot magnitude
_TOL_BOUND = 1e-7     # slop when checking bound feasibility
_TOL_PHASE1 = 1e-7    # residual above which phase 1 declares infeasibility
_REFACTOR_EVERY = 64  # basis-inverse refresh cadence

_AT_LOWER, _AT_UPPER, _BASIC, _FREE = 0, 1, 2, 3


class SolveStatus(Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    UNBOUNDED = "unbounded"


@dataclass
class LinearProgram:
    """Dense LP with named rows and columns."""

    objective: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    a_eq: np.ndarray
    b_eq: np.ndarray
    a_ub: np.ndarray
    b_ub: np.ndarray
    column_names: list[str] = field(default_factory=list)
    eq_names: list[str] = field(default_factory=list)
    ub_names: list[str] = field(default_factory=list)

    def __post_init__(self):
        self.objective = np.asarray(self.objective, dtype=float)
        self.lower = np.asarray(self.lower, dtype=float)
        self.upper = np.asarray(self.upper, dtype=float)
        n = self.objective.size
        self.b_eq = np.asarray(self.b_eq, dtype=float).reshape(-1)
        self.b_ub = np.asarray(self.b_ub, dtype=float).reshape(-1)
        self.a_eq = np.asarray(self.a_eq, dtype=float).reshape(self.b_eq.size, n)
        self.a_ub = np.asarray(self.a_ub, dtype=float).reshape(self.b_ub.size, n)
        if not self.column_names:
            self.column_names = [f"x{i}" for i in range(n)]
        if not self.eq_names:
            self.eq_names = [f"eq{i}" for i in range(self.n_eq)]
        if not self.ub_names:
            self.ub_names = [f"ub{i}" for i in range(self.n_ub)]
        if self.lower.size != n or self.upper.size != n:
            raise ValueError("bounds must match the number of variables")
        if self.b_eq.size != self.a_eq.shape[0] or self.b_ub.size != self.a_ub.shape[0]:
            raise ValueError("rhs length must match constraint rows")
        if len(self.column_names) != n:
            raise ValueError("column_names must match the number of variables")
        if not np.all(np.isfinite(self.objective)):
            raise ValueError("objective coefficients must be finite")
        if not (np.all(np.isfinite(self.a_eq)) and np.all(np.isfinite(self.a_ub))):
            raise ValueError("constraint coefficients must be finite")
        if not (np.all(np.isfinite(self.b_eq)) and np.all(np.isfinite(self.b_ub))):
            raise ValueError("constraint rhs must be finite")
        if np.any(self.lower > self.upper):
            raise ValueError("each lower bound must not exceed its upper bound")

    @property
    def n_variables(self) -> int:
        return self.objective.size

    @property
    def n_eq(self) -> int:
        return self.a_eq.shape[0]

    @property
    def n_ub(self) -> int:
        return self.a_ub.shape[0]


@dataclass(frozen=True)
class Basis:
    """Snapshot of a simplex basis, reusable as a warm start."""

    basic: np.ndarray     # column index basic in each row (structural + slack space)
    at_upper: np.ndarray  # nonbasic-at-upper flags over structural + slack columns
    n_columns: int


@dataclass
class LPSolution:
    status: SolveStatus
    x: np.ndarray | None = None
    objective: float | None = None
    y_eq: np.ndarray | None = None
    y_ub: np.ndarray | None = None
    reduced_costs: np.ndarray | None = None
    certificate: str | None = None
    basis: Basis | None = None
    iterations: int = 0

    def dual_objective(self, lp: LinearProgram) -> float:
        """y.b plus the bound terms; equals the primal objective at optimality."""

        if self.status is not SolveStatus.OPTIMAL:
            raise ValueError("dual objective only defined for optimal solutions")
        total = float(self.y_eq @ lp.b_eq) + float(self.y_ub @ lp.b_ub)
        for j in range(lp.n_variables):
            d = self.reduced_costs[j]
            if d > _TOL_RC and np.isfinite(lp.lower[j]):
                total += d * lp.lower[j]
            elif d < -_TOL_RC and np.isfinite(lp.upper[j]):
                total += d * lp.upper[j]
        return total


def solve_lp(lp: LinearProgram, warm_start: Basis | None = None) -> LPSolution:
    """Solve the LP, optionally resuming from a previous basis."""

    return _Simplex(lp).solve(warm_start)


class _Simplex:
    """One solve's worth of mutable simplex state."""

    def __init__(self, lp: LinearProgram):
        self.lp = lp
        n = lp.n_variables
        m_eq, m_ub = lp.n_eq, lp.n_ub
        self.m = m_eq + m_ub
        self.n_real = n + m_ub            # structural + slack columns
        self.n_total = self.n_real + self.m  # + one artificial per row

        self.a = np.zeros((self.m, self.n_total))
        self.a[:m_eq, :n] = lp.a_eq
        self.a[m_eq:, :n] = lp.a_ub
        self.a[m_eq:, n : self.n_real] = np.eye(m_ub)
        self.b = np.concatenate([lp.b_eq, lp.b_ub])

        self.lo = np.concatenate([lp.lower, np.zeros(m_ub), np.zeros(self.m)])
        self.hi = np.concatenate(
            [lp.upper, np.full(m_ub, np.inf), np.full(self.m, np.inf)]
        )
        self.c2 = np.zeros(self.n_total)
        self.c2[:n] = lp.objective

        self.status = np.full(self.n_total, _AT_LOWER, dtype=np.int8)
        self.basic = np.zeros(self.m, dtype=np.int64)
        self.binv = np.eye(self.m)
        self.xb = np.zeros(self.m)
        self.iterations = 0
        self.max_iterations = 2000 + 50 * (self.n_total + self.m)

    # -- helpers ----------------------------------------------------------

    def _default_status(self, j: int) -> int:
        if np.isfinite(self.lo[j]):
            return _AT_LOWER
        if np.isfinite(self.hi[j]):
            return _AT_UPPER
        return _FREE

    def _nonbasic_values(self) -> np.ndarray:
        values = np.zeros(self.n_total)
        at_lower = self.status == _AT_LOWER
        at_upper = self.status == _AT_UPPER
        values[at_lower] = self.lo[at_lower]
        values[at_upper] = self.hi[at_upper]
        return values

    def _recompute_xb(self) -> None:
        values = self._nonbasic_values()
        values[self.basic] = 0.0
        self.xb = self.binv @ (self.b - self.a @ values)

    def _refactor(self) -> None:
        try:
            self.binv = np.linalg.inv(self.a[:, self.basic])
        except np.linalg.LinAlgError as exc:
            raise SimplexError(f"singular basis: {exc}") from exc
        self._recompute_xb()

    # -- main loop ---------------------------------------------------------

    def solve(self, warm_start: Basis | None) -> LPSolution:
        warm_ok = warm_start is not None and self._try_warm_start(warm_start)
        if not warm_ok:
            infeasible_row = self._phase_one()
            if infeasible_row is not None:
                return LPSolution(
                    status=SolveStatus.INFEASIBLE,
                    certificate=infeasible_row,
                    iterations=self.iterations,
                )
        # Pin the artificials for phase 2 so they can never re-enter.
        self.hi[self.n_real :] = 0.0
        self.lo[self.n_real :] = 0.0
        unbounded_col = self._optimize(self.c2)
        if unbounded_col is not None:
            return LPSolution(
                status=SolveStatus.UNBOUNDED,
                certificate=unbounded_col,
                iterations=self.iterations,
            )
        return self._finalize()

    def _try_warm_start(self, warm: Basis) -> bool:
        if warm.n_columns != self.n_real or warm.basic.size != self.m:
            return False
        basic = np.asarray(warm.basic, dtype=np.int64)
        if basic.size != np.unique(basic).size:
            return False
        if np.any(basic < 0) or np.any(basic >= self.n_real):
            return False
        status = np.empty(self.n_total, dtype=np.int8)
        for j in range(self.n_real):
            status[j] = (
                _AT_UPPER
                if (warm.at_upper[j] and np.isfinite(self.hi[j]))
                else self._default_status(j)
            )
        status[self.n_real :] = _AT_LOWER
        status[basic] = _BASIC
        self.status = status
        self.basic = basic
        try:
            self.binv = np.linalg.inv(self.a[:, basic])
        except np.linalg.LinAlgError:
            return False
        self._recompute_xb()
        slop = _TOL_BOUND * max(1.0, float(np.abs(self.b).max(initial=0.0)))
        if np.any(self.xb < self.lo[basic] - slop) or np.any(
            self.xb > self.hi[basic] + slop
        ):
            return False
        return True

    def _phase_one(self) -> str | None:
        """Install artificials, minimize their sum; returns a certificate row name."""

        for j in range(self.n_real):
            self.status[j] = self._default_status(j)
        values = self._nonbasic_values()
        values[self.n_real :] = 0.0
        residual = self.b - self.a[:, : self.n_real] @ values[: self.n_real]
        signs = np.where(residual >= 0.0, 1.0, -1.0)
        art = np.arange(self.n_real, self.n_total)
        self.a[:, art] = np.diag(signs)
        self.basic = art.copy()
        self.status[art] = _BASIC
        self.binv = np.diag(signs)  # inverse of a diagonal +/-1 matrix is itself
        self.xb = np.abs(residual)

        c1 = np.zeros(self.n_total)
        c1[art] = 1.0
        unbounded = self._optimize(c1)
        if unbounded is not None:  # cannot happen: phase-1 objective >= 0
            raise SimplexError("phase 1 reported unbounded")

        residual_total = float(
            self.xb[np.isin(self.basic, art)].sum() if self.m else 0.0
        )
        scale = max(1.0, float(np.abs(self.b).max(initial=0.0)))
        if residual_total > _TOL_PHASE1 * scale:
            worst_row = -1
            worst = -1.0
            for row, col in enumerate(self.basic):
                if col >= self.n_real and self.xb[row] > worst:
                    worst = self.xb[row]
                    worst_row = row
            return self._row_name(worst_row)
        self._drive_out_artificials()
        return None

    def _drive_out_artificials(self) -> None:
        """Degenerate pivots replacing basic artificials with real columns."""

        for row in range(self.m):
            if self.basic[row] < self.n_real:
                continue
            pivot_row = self.binv[row, :] @ self.a[:, : self.n_real]
            candidates = np.flatnonzero(
                (np.abs(pivot_row) > 1e-7) & (self.status[: self.n_real] != _BASIC)
            )
            if candidates.size == 0:
                continue  # redundant row: leave the artificial pinned at zero
            entering = int(candidates[0])
            w = self.binv @ self.a[:, entering]
            entering_value = float(self._nonbasic_values()[entering])
            self.status[self.basic[row]] = _AT_LOWER
            self.status[entering] = _BASIC
            self.basic[row] = entering
            self._pivot_update(row, w)
            self.xb[row] = entering_value

    def _optimize(self, c: np.ndarray) -> str | None:
        """Pivot to optimality; returns the entering column name if unbounded."""

        bland = False
        degenerate_run = 0
        movable = (self.hi - self.lo) > 0.0
        while True:
            self.iterations += 1
            if self.iterations > self.max_iterations:
                raise SimplexError("simplex iteration limit exceeded")
            if self.iterations % _REFACTOR_EVERY == 0:
                self._refactor()

            y = c[self.basic] @ self.binv
            d = c - y @ self.a
            candidates = movable & (
                ((self.status == _AT_LOWER) & (d < -_TOL_RC))
                | ((self.status == _AT_UPPER) & (d > _TOL_RC))
                | ((self.status == _FREE) & (np.abs(d) > _TOL_RC))
            )
            if not candidates.any():
                return None
            if bland:
                entering = int(np.flatnonzero(candidates)[0])
            else:
                score = np.where(candidates, np.abs(d), -1.0)
                entering = int(np.argmax(score))

            direction = 1.0
            if self.status[entering] == _AT_UPPER or (
                self.status[entering] == _FREE and d[entering] > 0
            ):
                direction = -1.0
            w = self.binv @ self.a[:, entering]

            # How far the entering variable can travel before something blocks.
            t_flip = self.hi[entering] - self.lo[entering]  # inf for slack/free
            g = -direction * w  # movement of each basic value per unit step
            up_room = np.maximum(self.hi[self.basic] - self.xb, 0.0)
            dn_room = np.maximum(self.xb - self.lo[self.basic], 0.0)
            with np.errstate(divide="ignore", invalid="ignore"):
                t_rows = np.where(
                    g > _TOL_PIVOT,
                    up_room / np.where(g > _TOL_PIVOT, g, 1.0),
                    np.where(
                        g < -_TOL_PIVOT,
                        dn_room / np.where(g < -_TOL_PIVOT, -g, 1.0),
                        np.inf,
                    ),
                )
            t_block = float(t_rows.min()) if self.m else np.inf

            if not np.isfinite(t_block) and not np.isfinite(t_flip):
                return self._column_name(entering)

            if t_flip <= t_block:
                # Entering variable runs to its opposite bound; basis unchanged.
                step = t_flip
                self.xb = self.xb - direction * step * w
                self.status[entering] = (
                    _AT_UPPER if self.status[entering] == _AT_LOWER else _AT_LOWER
                )
            else:
                step = t_block
                near = t_rows <= t_block + 1e-12
                if bland:
                    rows = np.flatnonzero(near)
                    leave = int(rows[np.argmin(self.basic[rows])])
                else:
                    stability = np.where(near, np.abs(w), -1.0)
                    leave = int(np.argmax(stability))
                leaving_col = int(self.basic[leave])
                entering_value = float(self._nonbasic_values()[entering])
                self.xb = self.xb - direction * step * w
                # Classify which bound the leaving variable stopped at.
                g_leave = g[leave]
                self.status[leaving_col] = _AT_UPPER if g_leave > 0 else _AT_LOWER
                self.status[entering] = _BASIC
                self.basic[leave] = entering
                self._pivot_update(leave, w)
                self.xb[leave] = entering_value + direction * step

            if step <= 1e-12:
                degenerate_run += 1
                if degenerate_run > 2 * (self.m + self.n_total) and not bland:
                    bland = True
            else:
                degenerate_run = 0

    def _pivot_update(self, row: int, w: np.ndarray) -> None:
        pivot = w[row]
        if abs(pivot) < _TOL_PIVOT:
            raise SimplexError("pivot element vanished")
        new_row = self.binv[row, :] / pivot
        self.binv -= np.outer(w, new_row)
        self.binv[row, :] = new_row

    # -- extraction --------------------------------------------------------

    def _finalize(self) -> LPSolution:
        lp = self.lp
        try:
            binv = np.linalg.inv(self.a[:, self.basic])
        except np.linalg.LinAlgError as exc:
            raise SimplexError(f"singular final basis: {exc}") from exc
        values = self._nonbasic_values()
        values[self.basic] = 0.0
        xb = binv @ (self.b - self.a @ values)
        x_full = values
        x_full[self.basic] = xb
        y = self.c2[self.basic] @ binv
        d = self.c2 - y @ self.a

        n = lp.n_variables
        x = x_full[:n].copy()
        basis = Basis(
            basic=self.basic.copy(),
            at_upper=(self.status[: self.n_real] == _AT_UPPER).copy(),
            n_columns=self.n_real,
        )
        return LPSolution(
            status=SolveStatus.OPTIMAL,
            x=x,
            objective=float(lp.objective @ x),
            y_eq=y[: lp.n_eq].copy(),
            y_ub=y[lp.n_eq :].copy(),
            reduced_costs=d[:n].copy(),
            basis=basis,
            iterations=self.iterations,
        )

    def _row_name(self, row: int) -> str:
        if row < self.lp.n_eq:
            return self.lp.eq_names[row]
        return self.lp.ub_names[row - self.lp.n_eq]

    def _column_name(self, col: int) -> str:
        if col < self.lp.n_variables:
            return self.lp.column_names[col]
        if col < self.n_real:
            return f"slack:{self.lp.ub_names[col - self.lp.n_variables]}"
        return f"artificial:{self._row_name(col - self.n_real)}"


def verify_optimality(lp: LinearProgram, solution: LPSolution, tol: float = 1e-6) -> dict:
    """Residuals of the KKT conditions for an optimal solution (for tests)."""

    if solution.status is not SolveStatus.OPTIMAL:
        raise ValueError("verify_optimality expects an optimal solution")
    x = solution.x
    scale = max(1.0, float(np.abs(lp.b_eq).max(initial=0.0)), float(np.abs(lp.b_ub).max(initial=0.0)))
    eq_residual = float(np.abs(lp.a_eq @ x - lp.b_eq).max(initial=0.0))
    ub_slack = lp.b_ub - lp.a_ub @ x
    ub_violation = float(np.maximum(-ub_slack, 0.0).max(initial=0.0))
    bound_violation = float(
        max(
            np.maximum(lp.lower - x, 0.0).max(initial=0.0),
            np.maximum(x - lp.upper, 0.0).max(initial=0.0),
        )
    )
    # Inequality duals must be <= 0 for a minimization and vanish off-binding.
    dual_sign = float(np.maximum(solution.y_ub, 0.0).max(initial=0.0))
    slackness = float(np.abs(solution.y_ub * ub_slack).max(initial=0.0))
    gap = abs(solution.objective - solution.dual_objective(lp))
    report = {
        "eq_residual": eq_residual,
        "ub_violation": ub_violation,
        "bound_violation": bound_violation,
        "dual_sign": dual_sign,
        "complementary_slackness": slackness,
        "duality_gap": gap,
    }
    report["ok"] = all(value <= tol * scale for value in report.values())
    return report
