"""Convex-composite problem descriptions F_i = f_i + g_i and the four
multi-objective benchmark problems (JOS1, JOS1-L1, FDS, FDS-CON).

Smooth oracles are batched: they accept (n,) or (B, n) arrays and return
values with matching leading shape, which the lockstep multistart solver
relies on.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .prox import BoxIndicator, SeparablePiece, WeightedL1, Zero, piece_values_rows

PROBLEM_NAMES = ("JOS1", "JOS1_L1", "FDS", "FDS_CON")


@dataclass(frozen=True, eq=False)
class ProblemSpec:
    """Problem data: smooth oracles, nonsmooth pieces and an init box.

    `values` maps (..., n) -> (..., m); `jacobian` maps (..., n) ->
    (..., m, n); `values_and_jacobian` computes both sharing intermediate
    work.  `known_L`, when set, upper-bounds every gradient Lipschitz
    constant on the region of interest.
    """

    name: str
    n: int
    m: int
    values: Callable[[np.ndarray], np.ndarray]
    jacobian: Callable[[np.ndarray], np.ndarray]
    pieces: list
    init_lower: np.ndarray
    init_upper: np.ndarray
    known_L: Optional[float] = None
    values_and_jacobian: Optional[Callable[[np.ndarray], tuple]] = None

    def smooth_and_jac(self, x: np.ndarray):
        if self.values_and_jacobian is not None:
            return self.values_and_jacobian(x)
        return self.values(x), self.jacobian(x)


def evaluate(problem: ProblemSpec, x: np.ndarray) -> np.ndarray:
    """Objective vector (f_i(x) + g_i(x))_i; +inf where a box is violated."""
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != problem.n:
        raise ValueError(f"dimension mismatch: expected {problem.n}, got {x.shape[-1]}")
    return problem.values(x) + piece_values_rows(problem.pieces, x)


def gradient(problem: ProblemSpec, i: int, x: np.ndarray) -> np.ndarray:
    """Gradient of the i-th smooth part, 1-based index as in the math."""
    if not 1 <= i <= problem.m:
        raise IndexError(f"objective index must be in 1..{problem.m}, got {i}")
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != problem.n:
        raise ValueError(f"dimension mismatch: expected {problem.n}, got {x.shape[-1]}")
    return problem.jacobian(x)[..., i - 1, :]


def in_domain(problem: ProblemSpec, x: np.ndarray) -> bool:
    return bool(np.all(np.isfinite(evaluate(problem, x))))


def _jos1_oracles(n: int):
    def values(x):
        x = np.asarray(x, dtype=float)
        f1 = (x * x).sum(axis=-1) / n
        f2 = ((x - 2.0) ** 2).sum(axis=-1) / n
        return np.stack([f1, f2], axis=-1)

    def jacobian(x):
        x = np.asarray(x, dtype=float)
        return np.stack([2.0 * x / n, 2.0 * (x - 2.0) / n], axis=-2)

    return values, jacobian


def _fds_oracles(n: int):
    idx = np.arange(1.0, n + 1.0)
    rev = idx * (n - idx + 1.0)
    denom = n * (n + 1.0)

    def values(x):
        x = np.asarray(x, dtype=float)
        f1 = (idx * (x - idx) ** 4).sum(axis=-1) / n**2
        f2 = np.exp(x.sum(axis=-1) / n) + (x * x).sum(axis=-1)
        f3 = (rev * np.exp(-x)).sum(axis=-1) / denom
        return np.stack([f1, f2, f3], axis=-1)

    def jacobian(x):
        x = np.asarray(x, dtype=float)
        j1 = 4.0 * idx * (x - idx) ** 3 / n**2
        e = np.exp(x.sum(axis=-1) / n)
        j2 = e[..., None] / n + 2.0 * x
        j3 = -rev * np.exp(-x) / denom
        return np.stack([j1, j2, j3], axis=-2)

    def both(x):
        x = np.asarray(x, dtype=float)
        d = x - idx
        d3 = d * d * d
        e = np.exp(x.sum(axis=-1) / n)
        enx = np.exp(-x)
        f1 = (idx * d3 * d).sum(axis=-1) / n**2
        f2 = e + (x * x).sum(axis=-1)
        f3 = (rev * enx).sum(axis=-1) / denom
        j1 = 4.0 * idx * d3 / n**2
        j2 = e[..., None] / n + 2.0 * x
        j3 = -rev * enx / denom
        return (np.stack([f1, f2, f3], axis=-1), np.stack([j1, j2, j3], axis=-2))

    return values, jacobian, both


def make_problem(name: str, n: int) -> ProblemSpec:
    """Build one of the named benchmark problems at dimension n.

    Init boxes: [-2, 4]^n for JOS1 and JOS1-L1, [-2, 2]^n for FDS and
    [0, 2]^n for FDS-CON.  The quadratic problems carry known_L = 2/n;
    FDS variants rely on backtracking.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    ones = np.ones(n)
    if name in ("JOS1", "JOS1_L1"):
        values, jacobian = _jos1_oracles(n)
        if name == "JOS1":
            pieces = [Zero(n), Zero(n)]
        else:
            pieces = [
                WeightedL1(n, 1.0 / n, np.zeros(n)),
                WeightedL1(n, 1.0 / (2.0 * n), ones),
            ]
        return ProblemSpec(
            name=name, n=n, m=2, values=values, jacobian=jacobian, pieces=pieces,
            init_lower=-2.0 * ones, init_upper=4.0 * ones, known_L=2.0 / n,
        )
    if name in ("FDS", "FDS_CON"):
        values, jacobian, both = _fds_oracles(n)
        if name == "FDS":
            pieces = [Zero(n)] * 3
            lower = -2.0 * ones
        else:
            pieces = [BoxIndicator(n, np.zeros(n), np.full(n, np.inf)) for _ in range(3)]
            lower = np.zeros(n)
        return ProblemSpec(
            name=name, n=n, m=3, values=values, jacobian=jacobian, pieces=pieces,
            init_lower=lower, init_upper=2.0 * ones, known_L=None,
            values_and_jacobian=both,
        )
    raise ValueError(f"unknown problem name {name!r}; expected one of {PROBLEM_NAMES}")
