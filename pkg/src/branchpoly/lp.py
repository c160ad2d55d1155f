"""Dense bounded-variable simplex solver.

Problems are stated as::

    minimize    c @ x
    subject to  a_eq @ x == b_eq
                a_ge @ x >= b_ge
                lower <= x <= upper        (bounds may be infinite)

The core routine is a two-phase revised primal simplex on the bounded
standard form ``A x = b, l <= x <= u``.  Dantzig pricing is used until the
objective stalls, after which Bland's rule takes over until progress
resumes.  Tall problems (many more rows than variables, as produced by the
polygon branch limits) are solved through their dual so the basis stays the
size of the variable count.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Literal, Sequence

import numpy as np

logger = logging.getLogger(__name__)

Status = Literal["optimal", "infeasible", "unbounded"]

PIVOT_TOL = 1e-9
FEAS_TOL = 1e-7
OPT_TOL = 1e-9
HARRIS_TOL = 1e-9
STALL_LIMIT = 50
REFACTOR_EVERY = 64
MAX_ITER = 200_000
DUAL_PERTURB = 1e-7
DUAL_PERTURB_SEED = 20190101

_AT_LOWER, _AT_UPPER, _FREE, _BASIC = 0, 1, 2, 3


class LpError(ValueError):
    """Malformed problem or solver breakdown."""


def _matrix(a, n: int) -> np.ndarray:
    # empty blocks may come in any shape; anything else must already be 2-D
    a = np.asarray(a, dtype=float)
    return a.reshape(0, n) if a.size == 0 else np.atleast_2d(a)


@dataclass
class LpProblem:
    c: np.ndarray
    a_eq: np.ndarray
    b_eq: np.ndarray
    a_ge: np.ndarray
    b_ge: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    var_names: Sequence[str] | None = None
    eq_names: Sequence[str] | None = None
    ge_names: Sequence[str] | None = None

    def __post_init__(self):
        self.c = np.asarray(self.c, dtype=float).ravel()
        n = self.c.size
        self.a_eq = _matrix(self.a_eq, n)
        self.a_ge = _matrix(self.a_ge, n)
        self.b_eq = np.asarray(self.b_eq, dtype=float).ravel()
        self.b_ge = np.asarray(self.b_ge, dtype=float).ravel()
        self.lower = np.asarray(self.lower, dtype=float).ravel()
        self.upper = np.asarray(self.upper, dtype=float).ravel()
        self.validate()

    @classmethod
    def build(cls, c, a_eq=None, b_eq=None, a_ge=None, b_ge=None,
              lower=None, upper=None, **names) -> "LpProblem":
        """Convenience constructor filling omitted parts with empty rows / free bounds."""
        c = np.asarray(c, dtype=float).ravel()
        n = c.size
        empty = np.zeros((0, n))
        return cls(
            c=c,
            a_eq=empty if a_eq is None else a_eq,
            b_eq=np.zeros(0) if b_eq is None else b_eq,
            a_ge=empty if a_ge is None else a_ge,
            b_ge=np.zeros(0) if b_ge is None else b_ge,
            lower=np.full(n, -np.inf) if lower is None else lower,
            upper=np.full(n, np.inf) if upper is None else upper,
            **names,
        )

    @property
    def n(self) -> int:
        return self.c.size

    def validate(self) -> None:
        n = self.n
        if self.a_eq.shape != (self.b_eq.size, n):
            raise LpError(f"equality block has shape {self.a_eq.shape}, rhs {self.b_eq.size}")
        if self.a_ge.shape != (self.b_ge.size, n):
            raise LpError(f"inequality block has shape {self.a_ge.shape}, rhs {self.b_ge.size}")
        if self.lower.size != n or self.upper.size != n:
            raise LpError("bound vectors must match the variable count")
        for name, arr in (("c", self.c), ("a_eq", self.a_eq), ("b_eq", self.b_eq),
                          ("a_ge", self.a_ge), ("b_ge", self.b_ge)):
            if not np.all(np.isfinite(arr)):
                raise LpError(f"{name} contains NaN or infinite entries")
        if np.any(np.isnan(self.lower)) or np.any(np.isnan(self.upper)):
            raise LpError("bounds contain NaN")
        bad = np.flatnonzero(self.lower > self.upper)
        if bad.size:
            raise LpError(f"lower bound exceeds upper bound for variable {int(bad[0])}")
        for label, names, size in (("var_names", self.var_names, n),
                                   ("eq_names", self.eq_names, self.b_eq.size),
                                   ("ge_names", self.ge_names, self.b_ge.size)):
            if names is not None and len(names) != size:
                raise LpError(f"{label} has {len(names)} entries, expected {size}")

    def dump(self) -> str:
        """Plain-text listing for debugging; not an interchange format."""
        vn = self.var_names or [f"x{j}" for j in range(self.n)]
        lines = ["VARIABLES", "name\tlower\tupper\tcost"]
        for j in range(self.n):
            lines.append(f"{vn[j]}\t{self.lower[j]:g}\t{self.upper[j]:g}\t{self.c[j]:g}")

        def rows(title, a, b, names, sense):
            lines.append(title)
            for i in range(b.size):
                terms = " ".join(f"{a[i, j]:+g}*{vn[j]}" for j in np.flatnonzero(a[i]))
                label = names[i] if names is not None else f"r{i}"
                lines.append(f"{label}\t{terms} {sense} {b[i]:g}")

        rows("EQUALITIES", self.a_eq, self.b_eq, self.eq_names, "=")
        rows("INEQUALITIES", self.a_ge, self.b_ge, self.ge_names, ">=")
        return "\n".join(lines) + "\n"


@dataclass
class LpSolution:
    status: Status
    objective: float = float("nan")
    x: np.ndarray = field(default_factory=lambda: np.zeros(0))
    eq_activity: np.ndarray = field(default_factory=lambda: np.zeros(0))
    ge_activity: np.ndarray = field(default_factory=lambda: np.zeros(0))
    iterations: int = 0
    method: str = ""


# core bounded simplex ---------------------------------------------------------


@dataclass
class _Result:
    status: str
    x: np.ndarray
    y: np.ndarray
    objective: float
    iterations: int


class _BoundedSimplex:
    """Revised simplex on ``min c x, A x = b, l <= x <= u`` with an explicit basis inverse."""

    def __init__(self, c, A, b, lower, upper):
        self.A = np.asarray(A, dtype=float)
        self.b = np.asarray(b, dtype=float)
        self.c = np.asarray(c, dtype=float)
        self.l = np.asarray(lower, dtype=float).copy()
        self.u = np.asarray(upper, dtype=float).copy()
        self.m, self.n = self.A.shape
        self.iterations = 0

    # basis bookkeeping
    def _refactor(self):
        B = self.A[:, self.basis]
        try:
            self.binv = np.linalg.inv(B)
        except np.linalg.LinAlgError as exc:
            raise LpError("basis matrix became singular") from exc
        self.since_refactor = 0

    def _nonbasic_values(self):
        x = np.zeros(self.n)
        st = self.state
        lo, up = st == _AT_LOWER, st == _AT_UPPER
        x[lo] = self.l[lo]
        x[up] = self.u[up]
        return x

    def _primal(self):
        x = self._nonbasic_values()
        x[self.basis] = 0.0
        rhs = self.b - self.A @ x
        x[self.basis] = self.binv @ rhs
        return x

    def _initial_state(self):
        st = np.full(self.n, _FREE, dtype=np.int8)
        st[np.isfinite(self.l)] = _AT_LOWER
        only_upper = ~np.isfinite(self.l) & np.isfinite(self.u)
        st[only_upper] = _AT_UPPER
        return st

    def _iterate(self, cost, allowed):
        """Run simplex iterations from the current basis; returns 'optimal' or 'unbounded'."""
        best = np.inf
        stall = 0
        bland = False
        while True:
            if self.iterations >= MAX_ITER:
                raise LpError(f"iteration limit {MAX_ITER} reached")
            if self.since_refactor >= REFACTOR_EVERY:
                self._refactor()
            x = self._primal()
            obj = float(cost @ x)
            if obj < best - 1e-12 * max(1.0, abs(best) if np.isfinite(best) else 1.0):
                best = obj
                stall = 0
                bland = False
            else:
                stall += 1
                if stall > STALL_LIMIT:
                    bland = True

            pi = cost[self.basis] @ self.binv
            d = cost - pi @ self.A
            st = self.state
            gain = np.zeros(self.n)
            lo = (st == _AT_LOWER) & allowed
            up = (st == _AT_UPPER) & allowed
            fr = (st == _FREE) & allowed
            gain[lo] = np.where(d[lo] < -OPT_TOL, -d[lo], 0.0)
            gain[up] = np.where(d[up] > OPT_TOL, d[up], 0.0)
            gain[fr] = np.where(np.abs(d[fr]) > OPT_TOL, np.abs(d[fr]), 0.0)
            # fixed variables can never move
            gain[self.l == self.u] = 0.0
            cand = np.flatnonzero(gain > 0)
            if cand.size == 0:
                return "optimal"
            j = int(cand[0]) if bland else int(cand[np.argmax(gain[cand])])
            direction = 1.0 if d[j] < 0 else -1.0

            w = self.binv @ self.A[:, j]
            xb = x[self.basis]
            lb, ub = self.l[self.basis], self.u[self.basis]
            step = self.u[j] - self.l[j]  # bound flip distance (may be inf)
            leave = -1
            leave_to = _AT_LOWER
            dw = direction * w
            piv_tol = PIVOT_TOL * max(1.0, float(np.abs(w).max(initial=0.0)))
            dec = dw > piv_tol
            inc = dw < -piv_tol
            fin_l, fin_u = np.isfinite(lb), np.isfinite(ub)
            with np.errstate(invalid="ignore", divide="ignore"):
                gap_dec = np.where(dec & fin_l, xb - lb, np.inf)
                gap_inc = np.where(inc & fin_u, ub - xb, np.inf)
                # Harris pass 1: largest step allowed with bounds relaxed by a tolerance
                relaxed = np.minimum((gap_dec + HARRIS_TOL) / np.abs(dw),
                                     (gap_inc + HARRIS_TOL) / np.abs(dw))
                exact = np.minimum(gap_dec / np.abs(dw), gap_inc / np.abs(dw))
            relaxed = np.where(dec | inc, relaxed, np.inf)
            exact = np.where(dec | inc, exact, np.inf)
            tmax = relaxed.min() if self.m else np.inf
            if tmax < step:
                # pass 2: among rows blocking within tmax take the largest pivot
                if bland:
                    # Bland needs the exact minimum-ratio set to rule out cycling
                    emin = exact.min()
                    ties = np.flatnonzero(exact <= emin + 1e-12 * max(1.0, abs(emin)))
                    r = int(ties[np.argmin(np.asarray(self.basis)[ties])])
                    tmax = emin
                else:
                    ties = np.flatnonzero(exact <= tmax)
                    r = int(ties[np.argmax(np.abs(w[ties]))])
                leave = r
                leave_to = _AT_LOWER if gap_dec[r] <= gap_inc[r] else _AT_UPPER
                step = max(float(exact[r]), 0.0)
            if not np.isfinite(step):
                self.unbounded_dir = (j, direction)
                return "unbounded"

            self.iterations += 1
            if leave < 0:
                st[j] = _AT_UPPER if direction > 0 else _AT_LOWER
                continue
            out = self.basis[leave]
            self.basis[leave] = j
            st[j] = _BASIC
            if self.l[out] == self.u[out]:
                st[out] = _AT_LOWER
            elif leave_to == _AT_LOWER and np.isfinite(self.l[out]):
                st[out] = _AT_LOWER
            elif np.isfinite(self.u[out]):
                st[out] = _AT_UPPER
            else:
                st[out] = _AT_LOWER
            # product-form update of the inverse
            piv = w[leave]
            row = self.binv[leave] / piv
            self.binv -= np.outer(w, row)
            self.binv[leave] = row
            self.since_refactor += 1

    def solve(self) -> _Result:
        m, n = self.m, self.n
        self.state = self._initial_state()
        x0 = self._nonbasic_values()
        resid = self.b - self.A @ x0
        sign = np.where(resid >= 0, 1.0, -1.0)

        # phase 1 on the problem augmented with one artificial per row
        A_full = np.hstack([self.A, np.diag(sign)])
        c_orig = self.c
        l_orig, u_orig = self.l, self.u
        self.A = A_full
        self.l = np.concatenate([l_orig, np.zeros(m)])
        self.u = np.concatenate([u_orig, np.full(m, np.inf)])
        self.n = n + m
        self.state = np.concatenate([self.state, np.full(m, _BASIC, dtype=np.int8)])
        self.basis = list(range(n, n + m))
        self._refactor()

        allowed = np.ones(n + m, dtype=bool)
        c1 = np.concatenate([np.zeros(n), np.ones(m)])
        self._iterate(c1, allowed)
        x = self._primal()
        infeas = float(x[n:].sum())
        scale = 1.0 + float(np.abs(self.b).max(initial=0.0))
        if infeas > FEAS_TOL * scale:
            return _Result("infeasible", x[:n], np.zeros(m), np.nan, self.iterations)

        # pin artificials to zero and try to pivot basic ones out
        self.u[n:] = 0.0
        for r, var in enumerate(list(self.basis)):
            if var < n:
                continue
            row = self.binv[r] @ self.A[:, :n]
            row[self.state[:n] == _BASIC] = 0.0
            k = int(np.argmax(np.abs(row))) if n else 0
            if n and abs(row[k]) > 1e-7:
                w = self.binv @ self.A[:, k]
                self.basis[r] = k
                self.state[k] = _BASIC
                self.state[var] = _AT_LOWER
                piv = w[r]
                prow = self.binv[r] / piv
                self.binv -= np.outer(w, prow)
                self.binv[r] = prow
        self._refactor()
        allowed = np.concatenate([np.ones(n, dtype=bool), np.zeros(m, dtype=bool)])
        c2 = np.concatenate([c_orig, np.zeros(m)])
        status = self._iterate(c2, allowed)
        self._refactor()
        x = self._primal()
        y = c2[self.basis] @ self.binv
        if status == "unbounded":
            return _Result("unbounded", x[:n], y, -np.inf, self.iterations)
        return _Result("optimal", x[:n], y, float(c_orig @ x[:n]), self.iterations)


# public entry -------------------------------------------------------------------


def _finish(p: LpProblem, status: str, x: np.ndarray | None, iters: int, method: str) -> LpSolution:
    if status != "optimal":
        obj = -np.inf if status == "unbounded" else np.nan
        return LpSolution(status=status, objective=obj, iterations=iters, method=method)
    x = np.clip(x, p.lower, p.upper)
    return LpSolution(
        status="optimal",
        objective=float(p.c @ x),
        x=x,
        eq_activity=p.a_eq @ x,
        ge_activity=p.a_ge @ x,
        iterations=iters,
        method=method,
    )


def _solve_primal(p: LpProblem) -> LpSolution:
    n, me, mg = p.n, p.b_eq.size, p.b_ge.size
    A = np.zeros((me + mg, n + mg))
    A[:me, :n] = p.a_eq
    A[me:, :n] = p.a_ge
    A[me:, n:] = -np.eye(mg)
    b = np.concatenate([p.b_eq, p.b_ge])
    c = np.concatenate([p.c, np.zeros(mg)])
    lower = np.concatenate([p.lower, np.zeros(mg)])
    upper = np.concatenate([p.upper, np.full(mg, np.inf)])
    res = _BoundedSimplex(c, A, b, lower, upper).solve()
    return _finish(p, res.status, res.x[:n], res.iterations, "primal")


def _dual_data(p: LpProblem):
    """Rewrite bounds as rows: returns (G, h, E, f) with x free."""
    n = p.n
    eye = np.eye(n)
    fixed = p.lower == p.upper
    lo = np.isfinite(p.lower) & ~fixed
    up = np.isfinite(p.upper) & ~fixed
    G = np.vstack([p.a_ge, eye[lo], -eye[up]])
    h = np.concatenate([p.b_ge, p.lower[lo], -p.upper[up]])
    E = np.vstack([p.a_eq, eye[fixed]])
    f = np.concatenate([p.b_eq, p.lower[fixed]])
    return G, h, E, f


def _solve_dual(p: LpProblem) -> LpSolution:
    G, h, E, f = _dual_data(p)
    mg, me = h.size, f.size
    A = np.hstack([G.T, E.T])
    lower = np.concatenate([np.zeros(mg), np.full(me, -np.inf)])
    upper = np.full(mg + me, np.inf)
    cost = -np.concatenate([h, f])

    # Zero-cost primal variables make the dual right-hand side mostly zero and
    # the dual badly degenerate.  A small fixed perturbation picks the basis;
    # the primal point is read from the basis multipliers and does not depend on it.
    rng = np.random.default_rng(DUAL_PERTURB_SEED)
    rhs = p.c + DUAL_PERTURB * (1.0 + np.abs(p.c)) * rng.uniform(0.5, 1.0, p.n)
    res = _BoundedSimplex(cost, A, rhs, lower, upper).solve()
    iters = res.iterations
    if res.status == "optimal":
        return _finish(p, "optimal", -res.y, iters, "dual")
    if res.status == "unbounded":
        return _finish(p, "infeasible", None, iters, "dual")
    # dual infeasible: the primal is unbounded if it is feasible at all
    feas = _solve_primal(LpProblem(c=np.zeros(p.n), a_eq=p.a_eq, b_eq=p.b_eq, a_ge=p.a_ge,
                                   b_ge=p.b_ge, lower=p.lower, upper=p.upper))
    iters += feas.iterations
    status = "infeasible" if feas.status == "infeasible" else "unbounded"
    return _finish(p, status, None, iters, "dual")


def _row_scaled(p: LpProblem) -> LpProblem:
    """Equivalent problem with every row scaled to unit infinity-norm."""

    def scale(a, b):
        norms = np.abs(a).max(axis=1, initial=0.0) if a.size else np.ones(b.size)
        norms = np.where(norms > 0, norms, 1.0)
        return a / norms[:, None], b / norms

    a_eq, b_eq = scale(p.a_eq, p.b_eq)
    a_ge, b_ge = scale(p.a_ge, p.b_ge)
    return LpProblem(c=p.c, a_eq=a_eq, b_eq=b_eq, a_ge=a_ge, b_ge=b_ge,
                     lower=p.lower, upper=p.upper)


def solve(p: LpProblem, method: Literal["auto", "primal", "dual"] = "auto") -> LpSolution:
    """Solve ``p`` to optimality or certify it infeasible or unbounded."""
    p.validate()
    scaled = _row_scaled(p)
    if method == "auto":
        rows = p.b_ge.size + p.b_eq.size
        method = "dual" if rows > 2 * p.n else "primal"
    if method == "primal":
        sol = _solve_primal(scaled)
    elif method == "dual":
        sol = _solve_dual(scaled)
    else:
        raise LpError(f"unknown method {method!r}")
    if sol.status == "optimal":
        sol = _finish(p, "optimal", sol.x, sol.iterations, sol.method)
    logger.debug("lp %s: %s after %d iterations", sol.method, sol.status, sol.iterations)
    return sol


def max_violation(p: LpProblem, x: np.ndarray) -> float:
    """Largest row violation, each row scaled by its coefficient norm."""
    worst = 0.0
    if p.b_eq.size:
        norms = np.maximum(np.linalg.norm(p.a_eq, axis=1), 1.0)
        worst = max(worst, float(np.max(np.abs(p.a_eq @ x - p.b_eq) / norms)))
    if p.b_ge.size:
        norms = np.maximum(np.linalg.norm(p.a_ge, axis=1), 1.0)
        worst = max(worst, float(np.max(np.maximum(p.b_ge - p.a_ge @ x, 0.0) / norms)))
    return worst
