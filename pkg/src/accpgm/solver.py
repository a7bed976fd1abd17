"""Main accelerated proximal gradient loop with generalized momentum.

Each iteration solves the dual subproblem at (x^{k-1}, y^k), tests the
stopping rule ||p - y^k||_inf < eps on the candidate before acceptance,
backtracks ell through the componentwise descent-lemma check (doubling and
re-solving until it passes), then applies the momentum extrapolation
y^{k+1} = x^k + gamma_k (x^k - x^{k-1}).

`multistart` runs a batch of starts in lockstep over shared problem
oracles; `solve` is the single-start view of the same loop.  Runs in a
batch are mathematically independent: per-run histories and termination
are identical to running each start alone.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .momentum import MomentumParams, gamma_sequence, t_sequence
from .problems import ProblemSpec
from .prox import ProxKernel, piece_values_rows
from .subproblem import DualSolverConfig, _solve_rows

TERMINATED_CONVERGED = "converged"
TERMINATED_MAX_ITER = "max_iter"
TERMINATED_FAILURE = "subproblem_failure"

_ELL_CAP_FACTOR = float(2**60)


@dataclass(frozen=True)
class SolverConfig:
    """Outer-loop configuration.

    With `use_known_L` the problem's known Lipschitz constant is used as a
    constant ell and backtracking is skipped; otherwise ell starts at
    `ell0` and is multiplied by `backtrack_factor` (never decreased)
    whenever the descent check fails.
    """

    params: MomentumParams
    eps: float = 1e-5
    ell0: float = 1.0
    backtrack_factor: float = 2.0
    max_iterations: int = 10000
    use_known_L: bool = False
    history_stride: int = 1
    dual: DualSolverConfig = field(default_factory=DualSolverConfig)

    def __post_init__(self):
        if self.eps <= 0:
            raise ValueError("eps must be positive")
        if self.ell0 <= 0:
            raise ValueError("ell0 must be positive")
        if self.backtrack_factor <= 1:
            raise ValueError("backtrack_factor must exceed 1")
        if self.max_iterations < 1 or self.history_stride < 1:
            raise ValueError("max_iterations and history_stride must be >= 1")


@dataclass(frozen=True)
class RunHistory:
    """Stride-sampled per-iteration data (column arrays of equal length)."""

    ks: np.ndarray          # accepted iteration indices
    F: np.ndarray           # (T, m) objective vectors F(x^k)
    step_norms: np.ndarray  # ||x^k - x^{k-1}||_2
    residuals: np.ndarray   # ||p - y^k||_inf of the accepted candidate


@dataclass(frozen=True)
class RunRecord:
    iterations: int
    terminated: str
    final_x: np.ndarray
    final_F: np.ndarray
    final_ell: float
    final_residual: float
    final_step_inf: float
    history: RunHistory
    wall_time: float


def backtrack_check(problem: ProblemSpec, ell: float, y: np.ndarray,
                    p: np.ndarray) -> bool:
    """Componentwise descent-lemma test validating the current ell.

    True iff for every i
        f_i(p) <= f_i(y) + <grad f_i(y), p - y> + (ell/2) ||p - y||^2
                  + 1e-12 max(1, |f_i(y)|).
    """
    y = np.asarray(y, dtype=float)
    p = np.asarray(p, dtype=float)
    fy, J = problem.smooth_and_jac(y[None])
    fp = problem.values(p[None])
    return bool(_descent_ok(fp, fy, J, p[None] - y[None], np.array([ell]))[0])


def _descent_ok(fp, fy, J, diff, ell):
    bound = fy + np.einsum("bmn,bn->bm", J, diff) \
        + 0.5 * ell[:, None] * (diff * diff).sum(axis=1)[:, None] \
        + 1e-12 * np.maximum(1.0, np.abs(fy))
    return np.all(fp <= bound, axis=1)


def solve(problem: ProblemSpec, x0: np.ndarray, cfg: SolverConfig) -> RunRecord:
    """Run the accelerated loop from a single feasible start."""
    return multistart(problem, np.asarray(x0, dtype=float)[None], cfg)[0]


def multistart(problem: ProblemSpec, starts, cfg: SolverConfig) -> list[RunRecord]:
    """Run one independent solve per start, sharing batched oracle calls."""
    X0 = np.atleast_2d(np.asarray(starts, dtype=float))
    if X0.size == 0:
        return []
    if X0.shape[1] != problem.n:
        raise ValueError(f"starts must have dimension {problem.n}")
    B, n = X0.shape
    m = problem.m

    t_start = time.perf_counter()
    F0 = problem.values(X0) + piece_values_rows(problem.pieces, X0)
    if not np.all(np.isfinite(F0)):
        bad = int(np.flatnonzero(~np.all(np.isfinite(F0), axis=1))[0])
        raise ValueError(f"start {bad} lies outside dom F (some F_i infinite)")

    if cfg.use_known_L:
        if problem.known_L is None:
            raise ValueError("use_known_L requires problem.known_L")
        ell = np.full(B, float(problem.known_L))
        ell_cap = np.inf
    else:
        ell = np.full(B, cfg.ell0)
        ell_cap = _ELL_CAP_FACTOR * cfg.ell0

    t_tab = t_sequence(cfg.params, cfg.max_iterations + 2)
    gamma_tab = gamma_sequence(t_tab)  # gamma_tab[k-1] = gamma_k
    kernel = ProxKernel(problem.pieces, enforce_all_boxes=True)
    gap_tol = cfg.dual.gap_tol
    max_inner = cfg.dual.resolve_max_inner(m, n)
    if cfg.dual.initial_lambda is not None:
        lam_warm = np.tile(np.asarray(cfg.dual.initial_lambda, dtype=float), (B, 1))
    else:
        lam_warm = np.full((B, m), 1.0 / m)

    X_prev = X0.copy()
    X = X0.copy()
    Y = X0.copy()
    Fx = F0.copy()
    active = np.ones(B, dtype=bool)
    status = [TERMINATED_MAX_ITER] * B
    iterations = np.zeros(B, dtype=int)
    final_res = np.full(B, np.nan)
    last_res = np.full(B, np.nan)
    last_step_inf = np.zeros(B)
    wall = np.zeros(B)
    hist_ks: list[list[int]] = [[] for _ in range(B)]
    hist_F: list[list[np.ndarray]] = [[] for _ in range(B)]
    hist_step: list[list[float]] = [[] for _ in range(B)]
    hist_res: list[list[float]] = [[] for _ in range(B)]

    def finalize(rows, reason, residuals=None):
        now = time.perf_counter() - t_start
        for j, b in enumerate(rows):
            status[b] = reason
            wall[b] = now
            if residuals is not None:
                final_res[b] = residuals[j]
            else:
                final_res[b] = last_res[b]
            active[b] = False

    for k in range(1, cfg.max_iterations + 1):
        idx = np.flatnonzero(active)
        if idx.size == 0:
            break
        Yk = Y[idx]
        fy, J = problem.smooth_and_jac(Yk)
        consts = fy - Fx[idx]
        P, lam, _, _, gap, _, ok = _solve_rows(
            kernel, problem.pieces, J, consts, Yk, ell[idx], lam_warm[idx],
            gap_tol, max_inner)
        res = np.abs(P - Yk).max(axis=1)
        last_res[idx] = res

        if not ok.all():
            finalize(idx[~ok], TERMINATED_FAILURE)
        conv = ok & (res < cfg.eps)
        if conv.any():
            finalize(idx[conv], TERMINATED_CONVERGED, residuals=res[conv])

        sel = np.flatnonzero(ok & ~conv)  # local positions within idx
        if sel.size == 0:
            continue
        rows = idx[sel]
        P_acc = P[sel]
        lam_acc = lam[sel]
        fy_sel = fy[sel]
        J_sel = J[sel]
        consts_sel = consts[sel]
        fp = problem.values(P_acc)

        if not cfg.use_known_L:
            # Double ell and re-solve until the descent test accepts.
            while rows.size:
                good = _descent_ok(fp, fy_sel, J_sel, P_acc - Y[rows], ell[rows])
                if good.all():
                    break
                bad = np.flatnonzero(~good)
                ell[rows[bad]] *= cfg.backtrack_factor
                drop = np.zeros(rows.size, dtype=bool)
                over = ell[rows[bad]] > ell_cap
                if over.any():
                    finalize(rows[bad[over]], TERMINATED_FAILURE)
                    drop[bad[over]] = True
                resolve = bad[~over]
                if resolve.size:
                    Pb, lamb, _, _, _, _, okb = _solve_rows(
                        kernel, problem.pieces, J_sel[resolve], consts_sel[resolve],
                        Y[rows[resolve]], ell[rows[resolve]], lam_acc[resolve],
                        gap_tol, max_inner)
                    if (~okb).any():
                        finalize(rows[resolve[~okb]], TERMINATED_FAILURE)
                        drop[resolve[~okb]] = True
                    good_pos = np.flatnonzero(okb)
                    P_acc[resolve[good_pos]] = Pb[good_pos]
                    lam_acc[resolve[good_pos]] = lamb[good_pos]
                    fp[resolve[good_pos]] = problem.values(Pb[good_pos])
                if drop.any():
                    keep = ~drop
                    rows = rows[keep]
                    P_acc, lam_acc, fp = P_acc[keep], lam_acc[keep], fp[keep]
                    fy_sel, J_sel, consts_sel = fy_sel[keep], J_sel[keep], consts_sel[keep]
            if rows.size == 0:
                continue

        FP = fp + piece_values_rows(problem.pieces, P_acc)
        step = P_acc - X[rows]
        step_norm = np.sqrt((step * step).sum(axis=1))
        res_acc = np.abs(P_acc - Y[rows]).max(axis=1)
        gamma_k = gamma_tab[k - 1]
        X_prev[rows] = X[rows]
        X[rows] = P_acc
        Y[rows] = P_acc + gamma_k * step
        Fx[rows] = FP
        lam_warm[rows] = lam_acc
        iterations[rows] = k
        last_step_inf[rows] = np.abs(step).max(axis=1)
        if (k - 1) % cfg.history_stride == 0:
            for j, b in enumerate(rows):
                hist_ks[b].append(k)
                hist_F[b].append(FP[j])
                hist_step[b].append(float(step_norm[j]))
                hist_res[b].append(float(res_acc[j]))

    if active.any():
        finalize(np.flatnonzero(active), TERMINATED_MAX_ITER)

    records = []
    for b in range(B):
        history = RunHistory(
            ks=np.array(hist_ks[b], dtype=int),
            F=np.array(hist_F[b]).reshape(len(hist_ks[b]), m),
            step_norms=np.array(hist_step[b]),
            residuals=np.array(hist_res[b]),
        )
        records.append(RunRecord(
            iterations=int(iterations[b]),
            terminated=status[b],
            final_x=X[b].copy(),
            final_F=Fx[b].copy(),
            final_ell=float(ell[b]),
            final_residual=float(final_res[b]),
            final_step_inf=float(last_step_inf[b]),
            history=history,
            wall_time=float(wall[b]),
        ))
    return records
