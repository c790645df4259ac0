"""Dense bounded-variable simplex.

Every row ``lo <= a.x <= hi`` gets an activity variable ``r = a.x`` carrying
the row bounds, so the tableau only ever holds equalities ``[A, -I] z = 0``
and all bounds live on variables.  The primal method uses a composite
phase 1 (sum of infeasibilities), Dantzig pricing with a Harris ratio test,
and switches to Bland's rule after a run of degenerate pivots.  The dual
method restarts from a basis that stays dual feasible after bound changes,
which is what branch-and-bound needs.
"""

from __future__ import annotations

import numpy as np

from .model import INFEASIBLE, OPTIMAL, UNBOUNDED, NumericFailure

OPT_TOL = 1e-7
FEAS_TOL = 1e-6
PIV_TOL = 1e-9
WORK_TOL = 1e-9
DEGENERATE_RUN = 50
REFACTOR_EVERY = 100


class Tableau:
    """Maximise ``c.x`` subject to row and variable bounds."""

    def __init__(self, A, row_lo, row_hi, lb, ub, c):
        A = np.asarray(A, dtype=float)
        m, n = A.shape
        self.m, self.n, self.N = m, n, n + m
        self.Afull = np.hstack([A, -np.eye(m)])
        self.lo = np.concatenate([np.asarray(lb, float), np.asarray(row_lo, float)])
        self.hi = np.concatenate([np.asarray(ub, float), np.asarray(row_hi, float)])
        self.c = np.concatenate([np.asarray(c, float), np.zeros(m)])
        self.basis = np.arange(n, n + m)
        self.is_basic = np.zeros(self.N, dtype=bool)
        self.is_basic[self.basis] = True
        self.T = np.hstack([-A, np.eye(m)])
        x = np.zeros(self.N)
        xs = np.where(np.isfinite(self.lo[:n]), self.lo[:n], np.where(np.isfinite(self.hi[:n]), self.hi[:n], 0.0))
        x[:n] = xs
        x[n:] = A @ xs
        self.x = x
        self.iterations = 0
        self._since_refactor = 0
        self._tol = WORK_TOL

    # -- state --------------------------------------------------------------

    @property
    def values(self) -> np.ndarray:
        return self.x[: self.n].copy()

    @property
    def objective(self) -> float:
        return float(self.c @ self.x)

    def set_bounds(self, j: int, lo: float, hi: float) -> None:
        self.lo[j], self.hi[j] = lo, hi
        if not self.is_basic[j]:
            new = min(max(self.x[j], lo), hi)
            delta = new - self.x[j]
            if delta:
                self.x[j] = new
                self.x[self.basis] -= self.T[:, j] * delta

    def refactor(self) -> None:
        B = self.Afull[:, self.basis]
        try:
            T = np.linalg.solve(B, self.Afull)
        except np.linalg.LinAlgError as exc:
            raise NumericFailure("singular basis") from exc
        T[:, self.basis] = np.eye(self.m)
        self.T = T
        nb = ~self.is_basic
        self.x[self.basis] = -(T[:, nb] @ self.x[nb])
        self._since_refactor = 0

    def _pivot(self, r: int, j: int) -> None:
        T = self.T
        T[r] /= T[r, j]
        col = T[:, j].copy()
        col[r] = 0.0
        nz = np.flatnonzero(col)
        if nz.size:
            T[nz] -= np.outer(col[nz], T[r])
        T[:, j] = 0.0
        T[r, j] = 1.0
        self.is_basic[self.basis[r]] = False
        self.basis[r] = j
        self.is_basic[j] = True
        self.iterations += 1
        self._since_refactor += 1
        if self._since_refactor >= REFACTOR_EVERY:
            self.refactor()

    def _violation(self) -> tuple[np.ndarray, np.ndarray]:
        xb = self.x[self.basis]
        return self.lo[self.basis] - xb, xb - self.hi[self.basis]

    def primal_infeasibility(self) -> float:
        below, above = self._violation()
        return float(max(below.max(initial=0.0), above.max(initial=0.0), 0.0))

    def _reduced_costs(self) -> np.ndarray:
        d = self.c - self.c[self.basis] @ self.T
        d[self.basis] = 0.0
        return d

    def dual_infeasibility(self) -> float:
        d = self._reduced_costs()
        nb = ~self.is_basic
        up = nb & (self.x < self.hi - FEAS_TOL)
        down = nb & (self.x > self.lo + FEAS_TOL)
        return float(max(np.where(up, d, 0.0).max(initial=0.0), np.where(down, -d, 0.0).max(initial=0.0)))

    # -- drivers ------------------------------------------------------------

    def solve(self) -> str:
        limit = self.iterations + 50 * (self.n + self.m) + 50
        self._tol = WORK_TOL
        for _ in range(4):
            if self.primal_infeasibility() > self._tol and self.dual_infeasibility() <= OPT_TOL:
                if self._dual(limit) == INFEASIBLE:
                    self.refactor()
                    if self.primal_infeasibility() > self._tol and self._dual(limit) == INFEASIBLE:
                        return INFEASIBLE
            status = self._primal(limit)
            if status != OPTIMAL:
                return status
            self.refactor()
            if self.primal_infeasibility() <= max(self._tol, 1e-8) and self.dual_infeasibility() <= OPT_TOL:
                return OPTIMAL
        if self.primal_infeasibility() <= FEAS_TOL:
            return OPTIMAL
        raise NumericFailure("simplex failed to settle after refactorisation")

    def _primal(self, limit: int) -> str:
        bland = False
        degenerate = 0
        while True:
            if self.iterations >= limit:
                raise NumericFailure(f"iteration cap {limit} reached")
            tol = self._tol
            below, above = self._violation()
            low, high = below > tol, above > tol
            phase1 = bool(low.any() or high.any())
            if phase1:
                cb = low.astype(float) - high.astype(float)
                d = -(cb @ self.T)
                d[self.basis] = 0.0
            else:
                d = self._reduced_costs()
            nb = ~self.is_basic
            can_up = self.x < self.hi - tol
            can_down = self.x > self.lo + tol
            elig = nb & (((d > OPT_TOL) & can_up) | ((d < -OPT_TOL) & can_down))
            if not elig.any():
                if not phase1:
                    return OPTIMAL
                self.refactor()
                worst = self.primal_infeasibility()
                if worst <= tol:
                    continue
                if worst <= FEAS_TOL and self._tol < FEAS_TOL:
                    self._tol = FEAS_TOL
                    continue
                return INFEASIBLE
            cand = np.flatnonzero(elig)
            j = int(cand[0]) if bland else int(cand[np.argmax(np.abs(d[cand]))])
            sigma = 1.0 if d[j] > 0 else -1.0
            alpha = -sigma * self.T[:, j]
            t, r, target = self._ratio(alpha, low, high, bland)
            own = (self.hi[j] - self.x[j]) if sigma > 0 else (self.x[j] - self.lo[j])
            if own <= t:
                t, r = own, -1
            if not np.isfinite(t):
                if phase1:
                    raise NumericFailure("unbounded ray in phase 1")
                return UNBOUNDED
            t = max(t, 0.0)
            self.x[j] += sigma * t
            self.x[self.basis] += alpha * t
            if r >= 0:
                leaving = self.basis[r]
                self._pivot(r, j)
                self.x[leaving] = target
            else:
                self.x[j] = self.hi[j] if sigma > 0 else self.lo[j]
                self.iterations += 1
            if t <= 1e-12:
                degenerate += 1
                if degenerate > DEGENERATE_RUN:
                    bland = True
            else:
                degenerate = 0
                bland = False

    def _ratio(self, alpha, low, high, bland):
        """Harris two-pass ratio test; returns (step, row, bound the row stops at)."""
        xb = self.x[self.basis]
        lob = self.lo[self.basis]
        hib = self.hi[self.basis]
        tol = self._tol
        up = alpha > PIV_TOL
        down = alpha < -PIV_TOL
        # bound each moving basic variable heads for; infeasible ones stop on reaching feasibility
        target = np.full(self.m, np.nan)
        target[up & low] = lob[up & low]
        target[up & ~low & ~high] = hib[up & ~low & ~high]
        target[down & high] = hib[down & high]
        target[down & ~low & ~high] = lob[down & ~low & ~high]
        ok = np.isfinite(target)
        if not ok.any():
            return np.inf, -1, np.nan
        rows = np.flatnonzero(ok)
        a = alpha[rows]
        gap = target[rows] - xb[rows]
        exact = np.maximum(gap / a, 0.0)
        if bland:
            tmin = exact.min()
            tied = rows[exact <= tmin + 1e-12]
            r = int(tied[np.argmin(self.basis[tied])])
            return float(exact[rows == r][0]), r, float(target[r])
        relaxed = (gap + np.sign(a) * tol) / a
        tmax = relaxed.min()
        pick = exact <= tmax
        k = np.flatnonzero(pick)[np.argmax(np.abs(a[pick]))]
        r = int(rows[k])
        return float(exact[k]), r, float(target[r])

    def _dual(self, limit: int) -> str:
        bland = False
        degenerate = 0
        while True:
            if self.iterations >= limit:
                raise NumericFailure(f"iteration cap {limit} reached")
            below, above = self._violation()
            viol = np.maximum(below, above)
            tol = self._tol
            if viol.max(initial=0.0) <= tol:
                return OPTIMAL
            bad = np.flatnonzero(viol > tol)
            r = int(bad[np.argmin(self.basis[bad])]) if bland else int(bad[np.argmax(viol[bad])])
            raise_it = below[r] > tol
            row = self.T[r]
            d = self._reduced_costs()
            nb = ~self.is_basic
            can_up = nb & (self.x < self.hi - tol)
            can_down = nb & (self.x > self.lo + tol)
            # basic value moves by -row[j] * dx_j
            if raise_it:
                elig = (can_up & (row < -PIV_TOL)) | (can_down & (row > PIV_TOL))
            else:
                elig = (can_up & (row > PIV_TOL)) | (can_down & (row < -PIV_TOL))
            if not elig.any():
                return INFEASIBLE
            cand = np.flatnonzero(elig)
            ratios = np.abs(d[cand]) / np.abs(row[cand])
            tmin = ratios.min()
            tied = cand[ratios <= tmin + 1e-12]
            j = int(tied[0]) if bland else int(tied[np.argmax(np.abs(row[tied]))])
            leaving = self.basis[r]
            target = self.lo[leaving] if raise_it else self.hi[leaving]
            dx = (target - self.x[leaving]) / (-row[j])
            self.x[j] += dx
            self.x[self.basis] -= self.T[:, j] * dx
            self._pivot(r, j)
            self.x[leaving] = target
            if tmin <= 1e-12:
                degenerate += 1
                if degenerate > DEGENERATE_RUN:
                    bland = True
            else:
                degenerate = 0
                bland = False
