"""Per-iteration min-max subproblem and its simplex-constrained dual.

For given x in dom F, y and ell > 0 the solver minimizes

    phi(z) = max_i [<grad f_i(y), z - y> + g_i(z) + f_i(y) - F_i(x)]
             + (ell / 2) ||z - y||^2

whose unique minimizer drives both the step and the stopping test.  The
dual maximizes the concave function

    theta(lam) = min_z sum_i lam_i [<grad f_i(y), z - y> + g_i(z)
                 + f_i(y) - F_i(x)] + (ell / 2) ||z - y||^2

over the unit simplex by projected supergradient ascent with an Armijo
line search; the inner minimizer is the exact coordinatewise prox, so the
duality gap max_i G_i - sum_i lam_i G_i certifies optimality directly.
Single-objective calls skip the dual loop: the minimizer is the plain
proximal gradient step.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .problems import ProblemSpec, evaluate
from .prox import BoxIndicator, ProxKernel, WeightedL1, piece_values_rows

_ARMIJO_C1 = 1e-4
_SIGMA_MIN = 1e-18
_SIGMA_MAX = 1e12


class SubproblemError(RuntimeError):
    """Dual ascent failed to reach the gap tolerance."""

    def __init__(self, message: str, gap: float):
        super().__init__(message)
        self.gap = gap


@dataclass(frozen=True)
class DualSolverConfig:
    """Inner-solver knobs.

    `gap_tol` is a relative base: the ascent stops once the duality gap
    falls below gap_tol * max(1, |primal|).  `max_inner` bounds the number
    of inner prox evaluations; the default is 10 * m * n clamped into
    [600, 5000] (one bisection sweep costs ~65 evaluations regardless of
    n, so small problems need the floor).  `initial_lambda` defaults to
    the uniform simplex point.
    """

    gap_tol: float = 1e-10
    max_inner: Optional[int] = None
    initial_lambda: Optional[np.ndarray] = None

    def resolve_max_inner(self, m: int, n: int) -> int:
        if self.max_inner is not None:
            if self.max_inner < 1:
                raise ValueError("max_inner must be >= 1")
            return self.max_inner
        return min(5000, max(600, 10 * m * n))


@dataclass(frozen=True)
class SubproblemResult:
    z: np.ndarray
    lam: np.ndarray
    primal_value: float
    dual_value: float
    gap: float
    inner_iterations: int


def project_simplex_rows(v: np.ndarray) -> np.ndarray:
    """Euclidean projection of each row onto the unit simplex
    (sort-and-threshold)."""
    v = np.atleast_2d(v)
    m = v.shape[1]
    u = -np.sort(-v, axis=1)
    css = np.cumsum(u, axis=1) - 1.0
    rho_cand = u - css / np.arange(1.0, m + 1.0)
    rho = m - 1 - np.argmax((rho_cand > 0)[:, ::-1], axis=1)
    tau = css[np.arange(v.shape[0]), rho] / (rho + 1.0)
    return np.maximum(v - tau[:, None], 0.0)


def project_simplex_weighted_rows(v: np.ndarray, d: np.ndarray) -> np.ndarray:
    """Rowwise argmin of sum_i (c_i - v_i)^2 / d_i over the unit simplex.

    The metric generalization of sort-and-threshold: c_i = max(0,
    v_i - tau d_i) with tau fixing the sum, found by scanning the
    breakpoints v_i / d_i in decreasing order.  Reduces to the Euclidean
    projection when d is constant.
    """
    v = np.atleast_2d(v)
    d = np.atleast_2d(d)
    m = v.shape[1]
    ratio = v / d
    order = np.argsort(-ratio, axis=1)
    v_s = np.take_along_axis(v, order, axis=1)
    d_s = np.take_along_axis(d, order, axis=1)
    r_s = np.take_along_axis(ratio, order, axis=1)
    tau_cand = (np.cumsum(v_s, axis=1) - 1.0) / np.cumsum(d_s, axis=1)
    valid = r_s > tau_cand
    rho = m - 1 - np.argmax(valid[:, ::-1], axis=1)
    tau = tau_cand[np.arange(v.shape[0]), rho]
    return np.maximum(v - tau[:, None] * d, 0.0)


class _DualState:
    """Mutable per-row dual state shared by the ascent phases."""

    def __init__(self, kernel, pieces, J, consts, Y, ell, lam0):
        self.kernel = kernel
        self.pieces = pieces
        self.J = J
        self.consts = consts
        self.Y = Y
        self.ell = ell
        self.lam = lam0.copy()
        B, m, _ = J.shape
        self.evals = np.zeros(B, dtype=int)
        self.Z, self.G, self.pen, self.theta = self.eval_at(self.lam, np.arange(B))

    def eval_at(self, lam_rows, rows):
        """Inner minimizer, bracket values, penalty and theta for a trial
        lam on the given rows."""
        self.evals[rows] += 1
        d = np.einsum("bm,bmn->bn", lam_rows, self.J[rows])
        w = self.Y[rows] - d / self.ell[rows, None]
        Z = self.kernel(lam_rows, w, self.ell[rows])
        diff = Z - self.Y[rows]
        G = np.einsum("bmn,bn->bm", self.J[rows], diff) \
            + piece_values_rows(self.pieces, Z) + self.consts[rows]
        pen = 0.5 * self.ell[rows] * (diff * diff).sum(axis=1)
        theta = (lam_rows * G).sum(axis=1) + pen
        return Z, G, pen, theta

    def commit(self, rows, lam_rows, Z, G, pen, theta):
        self.lam[rows] = lam_rows
        self.Z[rows] = Z
        self.G[rows] = G
        self.pen[rows] = pen
        self.theta[rows] = theta

    def gap(self, rows):
        g = self.G[rows]
        return g.max(axis=1) - (self.lam[rows] * g).sum(axis=1)

    def primal(self, rows):
        return self.G[rows].max(axis=1) + self.pen[rows]

    def tol(self, rows, gap_tol):
        return gap_tol * np.maximum(1.0, np.abs(self.primal(rows)))


def _edge_bisect(state: _DualState, rows: np.ndarray, i: int, j: int,
                 gap_tol: float, max_steps: int = 64) -> None:
    """Exact concave maximization along lam + t (e_i - e_j) by bisection.

    The directional derivative h(t) = G_i - G_j is nonincreasing in t, so
    its sign drives a scale-invariant bisection on t in [-lam_i, lam_j];
    one-signed h converges to the matching endpoint.  The last evaluated
    midpoint (the 1-D argmax up to the final interval width) is always
    committed, keeping cyclic edge sweeps monotone in theta.  For m = 2 a
    single call solves the whole dual.
    """
    lam0 = state.lam[rows]
    lo = -lam0[:, i].copy()
    hi = lam0[:, j].copy()
    alive = np.flatnonzero(hi - lo > 0)
    if alive.size == 0:
        return
    lo, hi, lam0 = lo[alive], hi[alive], lam0[alive]
    rows = rows[alive]

    for _ in range(max_steps):
        mid = 0.5 * (lo + hi)
        cand = lam0.copy()
        cand[:, i] = lam0[:, i] + mid
        cand[:, j] = lam0[:, j] - mid
        np.maximum(cand, 0.0, out=cand)
        Zc, Gc, penc, thetac = state.eval_at(cand, rows)
        h = Gc[:, i] - Gc[:, j]
        gap_c = Gc.max(axis=1) - (cand * Gc).sum(axis=1)
        lo = np.where(h > 0, mid, lo)
        hi = np.where(h > 0, hi, mid)
        width = hi - lo
        settled = (width <= 1e-18 * np.maximum(1.0, np.abs(lo) + np.abs(hi))) \
            | (gap_c <= gap_tol * np.maximum(1.0, np.abs(Gc.max(axis=1) + penc)))
        # Commit settled rows at their final midpoint; keep bisecting the rest.
        done_rows = np.flatnonzero(settled)
        if done_rows.size:
            r = rows[done_rows]
            state.commit(r, cand[done_rows], Zc[done_rows], Gc[done_rows],
                         penc[done_rows], thetac[done_rows])
        keep = np.flatnonzero(~settled)
        if keep.size == 0:
            return
        lo, hi, lam0, rows = lo[keep], hi[keep], lam0[keep], rows[keep]
        cand_keep, Z_keep = cand[keep], Zc[keep]
        G_keep, pen_keep, theta_keep = Gc[keep], penc[keep], thetac[keep]
    # Budget exhausted: commit the last midpoint evaluations.
    state.commit(rows, cand_keep, Z_keep, G_keep, pen_keep, theta_keep)


def _effective_jacobian(state: _DualState, rows: np.ndarray) -> np.ndarray:
    """Bracket derivatives d bracket_i / dz at the current inner minimizer.

    Adds the l1 subgradient branch to the smooth gradients and zeroes
    coordinates pinned by a box edge or held at an l1 kink, so that
    J_eff J_eff^T / ell is the curvature of theta on the local smooth
    piece.
    """
    Z = state.Z[rows]
    Jt = state.J[rows].copy()
    free = np.ones(Z.shape, dtype=bool)
    for idx, piece in enumerate(state.pieces):
        if isinstance(piece, WeightedL1):
            d = Z - piece.shift
            at_kink = np.abs(d) <= 1e-14 * np.maximum(1.0, np.abs(piece.shift))
            weighted = (state.lam[rows, idx] * piece.weight) > 0.0
            free &= ~(at_kink & weighted[:, None])
            Jt[:, idx, :] += piece.weight * np.sign(d)
        elif isinstance(piece, BoxIndicator):
            lo_f = np.isfinite(piece.lower)
            hi_f = np.isfinite(piece.upper)
            tol_lo = 1e-14 * np.maximum(1.0, np.where(lo_f, np.abs(piece.lower), 0.0))
            tol_hi = 1e-14 * np.maximum(1.0, np.where(hi_f, np.abs(piece.upper), 0.0))
            pinned = (lo_f & (Z <= piece.lower + tol_lo)) \
                | (hi_f & (Z >= piece.upper - tol_hi))
            free &= ~pinned
    return Jt * free[:, None, :]


def _newton_step(state: _DualState, rows: np.ndarray, gap_tol: float,
                 max_steps: int = 50) -> None:
    """One Newton-type ascent step on the simplex affine hull.

    Models theta with the quadratic of the active smooth piece (Hessian
    -J_eff J_eff^T / ell from `_effective_jacobian`), solves the
    equality-constrained step, then maximizes exactly along that
    direction inside the simplex by sign bisection on the directional
    derivative.  This crosses the narrow valleys and degenerate ridges
    where scaled gradient ascent zigzags.
    """
    m = state.lam.shape[1]
    J_r = _effective_jacobian(state, rows)
    H = np.einsum("pin,pjn->pij", J_r, J_r) / state.ell[rows, None, None]
    trace = np.einsum("pii->p", H)
    P = rows.size
    A = np.zeros((P, m + 1, m + 1))
    A[:, :m, :m] = H + (1e-12 * trace + 1e-30)[:, None, None] * np.eye(m)
    A[:, m, :m] = 1.0
    A[:, :m, m] = 1.0
    rhs = np.concatenate([state.G[rows], np.zeros((P, 1))], axis=1)
    try:
        delta = np.linalg.solve(A, rhs[..., None])[:, :m, 0]
    except np.linalg.LinAlgError:
        return
    lam0 = state.lam[rows]
    with np.errstate(divide="ignore", invalid="ignore"):
        ratios = np.where(delta < 0, lam0 / np.maximum(-delta, 1e-300), np.inf)
    t_hi = np.minimum(ratios.min(axis=1), 4.0)
    alive = np.flatnonzero((t_hi > 0) & np.isfinite(t_hi)
                           & (np.abs(delta).max(axis=1) > 0))
    if alive.size == 0:
        return
    rows, lam0, delta, t_hi = rows[alive], lam0[alive], delta[alive], t_hi[alive]
    t_lo = np.zeros_like(t_hi)
    theta_in = state.theta[rows].copy()
    for _ in range(max_steps):
        mid = 0.5 * (t_lo + t_hi)
        cand = np.maximum(lam0 + mid[:, None] * delta, 0.0)
        cand /= cand.sum(axis=1, keepdims=True)
        Zc, Gc, penc, thetac = state.eval_at(cand, rows)
        h = (Gc * delta).sum(axis=1)
        gap_c = Gc.max(axis=1) - (cand * Gc).sum(axis=1)
        t_lo = np.where(h > 0, mid, t_lo)
        t_hi = np.where(h > 0, t_hi, mid)
        settled = ((t_hi - t_lo) <= 1e-18 * np.maximum(1.0, t_hi)) \
            | (gap_c <= gap_tol * np.maximum(1.0, np.abs(Gc.max(axis=1) + penc)))
        # Only commit points that do not lose theta: the truncated Newton
        # arc is not guaranteed monotone away from its 1-D maximizer.
        good = thetac >= theta_in - 1e-12 * np.maximum(1.0, np.abs(theta_in))
        done_rows = np.flatnonzero(settled & good)
        if done_rows.size:
            r = rows[done_rows]
            state.commit(r, cand[done_rows], Zc[done_rows], Gc[done_rows],
                         penc[done_rows], thetac[done_rows])
        keep = np.flatnonzero(~settled)
        if keep.size == 0:
            return
        rows, lam0, delta, theta_in = rows[keep], lam0[keep], delta[keep], theta_in[keep]
        t_lo, t_hi = t_lo[keep], t_hi[keep]
        cand_keep, Z_keep = cand[keep], Zc[keep]
        G_keep, pen_keep, theta_keep = Gc[keep], penc[keep], thetac[keep]
        good_keep = good[keep]
    final = np.flatnonzero(good_keep)
    if final.size:
        state.commit(rows[final], cand_keep[final], Z_keep[final],
                     G_keep[final], pen_keep[final], theta_keep[final])


def _try_snap(state: _DualState, rows: np.ndarray) -> None:
    """Zero out vanishing weights when that shrinks the gap.

    Bisection leaves coordinates at 2^-k rather than exactly 0; with very
    large bracket values even lam_i ~ 1e-13 contributes visibly to the
    gap through lam_i (max G - G_i), so the exact face point is tried as
    a candidate and committed only if it improves.
    """
    lam0 = state.lam[rows]
    tiny = (lam0 > 0.0) & (lam0 < 1e-12)
    cand_rows = np.flatnonzero(tiny.any(axis=1))
    if cand_rows.size == 0:
        return
    rows = rows[cand_rows]
    cand = np.where(tiny[cand_rows], 0.0, lam0[cand_rows])
    cand /= cand.sum(axis=1, keepdims=True)
    Zc, Gc, penc, thetac = state.eval_at(cand, rows)
    gap_c = Gc.max(axis=1) - (cand * Gc).sum(axis=1)
    better = gap_c < state.gap(rows)
    if better.any():
        r = rows[better]
        state.commit(r, cand[better], Zc[better], Gc[better], penc[better],
                     thetac[better])


def _pga_steps(state: _DualState, rows: np.ndarray, D: np.ndarray,
               sigma: np.ndarray, gap_tol: float, steps: int) -> None:
    """Preconditioned projected supergradient ascent with Armijo backoff.

    Steps follow D * G projected in the matching weighted metric (plain
    Euclidean projection would not be an ascent direction).  Near the
    maximum, theta increments sink below float resolution; a non-worsening
    trial that strictly shrinks the (well-resolved) gap is accepted too,
    without growing sigma.
    """
    for _ in range(steps):
        act = rows[state.gap(rows) > state.tol(rows, gap_tol)]
        if act.size == 0:
            return
        pending = act
        while pending.size:
            lam_p = state.lam[pending]
            G_p = state.G[pending]
            cand = project_simplex_weighted_rows(
                lam_p + sigma[pending, None] * D[pending] * G_p, D[pending])
            Zc, Gc, penc, thetac = state.eval_at(cand, pending)
            gain = ((cand - lam_p) * G_p).sum(axis=1)
            moved = np.abs(cand - lam_p).max(axis=1) > 0.0
            theta_p = state.theta[pending]
            armijo = thetac >= theta_p + _ARMIJO_C1 * gain
            near = thetac >= theta_p - 1e-15 * np.maximum(1.0, np.abs(theta_p))
            gap_p = G_p.max(axis=1) - (lam_p * G_p).sum(axis=1)
            gap_c = Gc.max(axis=1) - (cand * Gc).sum(axis=1)
            fallback = near & (gap_c <= gap_p * (1.0 - 1e-3)) & ~armijo
            accept = armijo | fallback | ~moved
            take = accept & moved
            state.commit(pending[take], cand[take], Zc[take], Gc[take],
                         penc[take], thetac[take])
            grow = pending[armijo & accept]
            sigma[grow] = np.minimum(sigma[grow] * 2.0, _SIGMA_MAX)
            pending = pending[~accept]
            sigma[pending] *= 0.5
            pending = pending[sigma[pending] >= _SIGMA_MIN]


def _solve_rows(kernel: ProxKernel, pieces, J, consts, Y, ell, lam0,
                gap_tol: float, max_inner: int):
    """Batched dual solve.

    J: (B, m, n) gradients at y; consts: (B, m) values f_i(y) - F_i(x);
    Y: (B, n); ell and the warm start lam0: (B, m).  Returns
    (Z, lam, primal, dual, gap, inner, ok).
    """
    B, m, n = J.shape
    state = _DualState(kernel, pieces, J, consts, Y, ell,
                       np.ones((B, 1)) if m == 1 else lam0)
    all_rows = np.arange(B)

    if m == 1:
        primal = state.G[:, 0] + state.pen
        return (state.Z, state.lam, primal, state.theta, np.zeros(B),
                state.evals, np.ones(B, dtype=bool))

    if m == 2:
        # The simplex is a segment: an exact bisection solves the dual;
        # re-centered repeats mop up float-resolution tail cases.
        while True:
            rows = all_rows[(state.gap(all_rows) > state.tol(all_rows, gap_tol))
                            & (state.evals < max_inner)]
            if rows.size == 0:
                break
            _edge_bisect(state, rows, 0, 1, gap_tol)
            _try_snap(state, rows)
    else:
        # Preconditioned ascent for global progress, Newton steps to cross
        # ill-conditioned valleys, exact edge sweeps to settle face changes.
        row_norms = (J * J).sum(axis=2)
        floor = np.maximum(1e-12 * row_norms.max(axis=1, keepdims=True), 1e-30)
        D = np.minimum(ell[:, None] / np.maximum(row_norms, floor), 1e15)
        sigma = np.ones(B)
        edges = [(i, j) for i in range(m) for j in range(i + 1, m)]
        while True:
            rows = all_rows[(state.gap(all_rows) > state.tol(all_rows, gap_tol))
                            & (state.evals < max_inner)]
            if rows.size == 0:
                break
            _pga_steps(state, rows, D, sigma, gap_tol, steps=5)
            rows = rows[(state.gap(rows) > state.tol(rows, gap_tol))
                        & (state.evals[rows] < max_inner)]
            if rows.size:
                _newton_step(state, rows, gap_tol)
                rows = rows[state.gap(rows) > state.tol(rows, gap_tol)]
            if rows.size:
                _try_snap(state, rows)
                rows = rows[state.gap(rows) > state.tol(rows, gap_tol)]
            if rows.size == 0:
                continue
            # Complementarity freeze: a zero-weight coordinate whose bracket
            # sits far below the max cannot carry weight at the optimum;
            # letting edge sweeps re-open it only trades gap terms around.
            gap_r = state.gap(rows)
            G_r = state.G[rows]
            margin = 1e3 * np.maximum(gap_r, state.tol(rows, gap_tol))
            frozen = (state.lam[rows] == 0.0) \
                & (G_r < (G_r.max(axis=1) - margin)[:, None])
            for i, j in edges:
                sub = rows[~frozen[:, i] & ~frozen[:, j]]
                if sub.size == 0:
                    continue
                _edge_bisect(state, sub, i, j, gap_tol)
            rows = rows[state.gap(rows) > state.tol(rows, gap_tol)]
            if rows.size:
                _try_snap(state, rows)

    gap = state.gap(all_rows)
    primal = state.primal(all_rows)
    ok = gap <= gap_tol * np.maximum(1.0, np.abs(primal))
    return (state.Z, state.lam, primal, state.theta, gap, state.evals, ok)


def _oracles_at(problem: ProblemSpec, x: np.ndarray, y: np.ndarray):
    Fx = evaluate(problem, x)
    if not np.all(np.isfinite(Fx)):
        raise ValueError("x must lie in dom F (all F_i(x) finite)")
    fy, J = problem.smooth_and_jac(np.atleast_2d(y))
    return Fx, np.atleast_2d(fy), J.reshape(1, problem.m, problem.n)


def phi_value(problem: ProblemSpec, ell: float, z: np.ndarray, x: np.ndarray,
              y: np.ndarray) -> float:
    """Objective of the subproblem at z (may be +inf outside dom g)."""
    if ell <= 0:
        raise ValueError("ell must be positive")
    z = np.asarray(z, dtype=float)
    y = np.asarray(y, dtype=float)
    Fx, fy, J = _oracles_at(problem, x, y)
    diff = z - y
    brackets = J[0] @ diff + piece_values_rows(problem.pieces, z) + fy[0] - Fx
    return float(brackets.max() + 0.5 * ell * (diff * diff).sum())


def solve_subproblem(problem: ProblemSpec, ell: float, x: np.ndarray, y: np.ndarray,
                     cfg: Optional[DualSolverConfig] = None) -> SubproblemResult:
    """Minimize the subproblem via its simplex dual; exact for m = 1."""
    if ell <= 0:
        raise ValueError("ell must be positive")
    cfg = cfg or DualSolverConfig()
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    Fx, fy, J = _oracles_at(problem, x, y)
    consts = fy - Fx[None]
    kernel = ProxKernel(problem.pieces, enforce_all_boxes=True)
    if cfg.initial_lambda is not None:
        lam0 = np.asarray(cfg.initial_lambda, dtype=float)[None]
    else:
        lam0 = np.full((1, problem.m), 1.0 / problem.m)
    Z, lam, primal, dual, gap, inner, ok = _solve_rows(
        kernel, problem.pieces, J, consts, y[None], np.array([ell]), lam0,
        cfg.gap_tol, cfg.resolve_max_inner(problem.m, problem.n),
    )
    if not ok[0]:
        raise SubproblemError(
            f"dual ascent did not reach gap tolerance (last gap {gap[0]:.3e})",
            gap=float(gap[0]),
        )
    return SubproblemResult(
        z=Z[0], lam=lam[0], primal_value=float(primal[0]),
        dual_value=float(dual[0]), gap=float(gap[0]),
        inner_iterations=int(inner[0]),
    )


def stationarity_residual(problem: ProblemSpec, ell: float, x: np.ndarray,
                          y: np.ndarray, cfg: Optional[DualSolverConfig] = None) -> float:
    """||p - y||_inf, the quantity the stopping rule compares against eps."""
    result = solve_subproblem(problem, ell, x, y, cfg)
    return float(np.abs(result.z - np.asarray(y, dtype=float)).max())


def kkt_residual(problem: ProblemSpec, ell: float, y: np.ndarray,
                 result: SubproblemResult) -> float:
    """||z - prox(lam, y - (1/ell) sum_i lam_i grad f_i(y))||_inf.

    Consistency check of a returned (z, lam) pair against the fixed-point
    characterization of the inner minimizer.
    """
    y = np.asarray(y, dtype=float)
    _, J = problem.smooth_and_jac(np.atleast_2d(y))
    J = J.reshape(problem.m, problem.n)
    w = y - (result.lam @ J) / ell
    kernel = ProxKernel(problem.pieces, enforce_all_boxes=True)
    z_fix = kernel(result.lam[None], w[None], np.array([ell]))[0]
    return float(np.abs(result.z - z_fix).max())
