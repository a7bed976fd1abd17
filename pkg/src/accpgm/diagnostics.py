"""Merit-function values, Pareto certificates and rate-bound checks.

The merit function u_0(x) = sup_z min_i [F_i(x) - F_i(z)] vanishes exactly
at weakly Pareto optimal points.  The global sup is not computable for
m >= 2, so this module reports certified lower bounds obtained by
restricting the sup to a finite reference set; for m = 1 with the
minimizer among the references the bound is exact.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .problems import ProblemSpec, evaluate
from .solver import RunRecord
from .subproblem import DualSolverConfig, stationarity_residual


@dataclass(frozen=True)
class MeritSample:
    k: int
    u0_value: float
    sigma_refs: list


@dataclass(frozen=True)
class RateCheck:
    """Outcome of testing u0(x^k) (k+1)^2 <= 2 ell R along a run."""

    bound_constant: float
    violations: int
    max_ratio: float


def sigma(problem: ProblemSpec, x_k: np.ndarray, z: np.ndarray) -> float:
    """min_i [F_i(x_k) - F_i(z)]; both points must lie in dom F."""
    Fx = evaluate(problem, x_k)
    Fz = evaluate(problem, z)
    if not (np.all(np.isfinite(Fx)) and np.all(np.isfinite(Fz))):
        raise ValueError("sigma requires both points in dom F")
    return float((Fx - Fz).min())


def merit_lower_bound(problem: ProblemSpec, x: np.ndarray,
                      references: Sequence[np.ndarray]) -> float:
    """max over reference points z of sigma(x, z), clamped at zero.

    A certified lower bound on u_0(x); adding references never decreases
    it.  Exact for m = 1 when a minimizer is among the references.
    """
    if len(references) == 0:
        raise ValueError("reference set must be nonempty")
    best = max(sigma(problem, x, z) for z in references)
    return max(0.0, best)


def merit_lower_bound_curve(F_history: np.ndarray, F_references: np.ndarray) -> np.ndarray:
    """Vectorized lower bounds from stored objective vectors.

    F_history is (T, m) objective values along a run; F_references is
    (Z, m) values of the reference points.  Row t receives
    max(0, max_z min_i [F_history[t, i] - F_references[z, i]]).
    """
    diffs = F_history[:, None, :] - F_references[None, :, :]
    return np.maximum(diffs.min(axis=2).max(axis=1), 0.0)


def merit_samples(ks: np.ndarray, F_history: np.ndarray,
                  F_references: np.ndarray) -> list[MeritSample]:
    values = merit_lower_bound_curve(F_history, F_references)
    return [MeritSample(int(k), float(v), []) for k, v in zip(ks, values)]


def check_rate_bound(record: RunRecord, ell: float, R: float, F_star: float,
                     rel_slack: float = 1e-9) -> RateCheck:
    """Verify the single-objective rate bound u0(x^k) <= 2 ell R / (k+1)^2.

    Requires an m = 1 history with per-iteration objective values; R is
    the squared distance from x^0 to a minimizer and F_star a certified
    optimal value.
    """
    hist = record.history
    if hist.ks.size == 0:
        raise ValueError("record has no history to check")
    if hist.F.shape[1] != 1:
        raise ValueError("rate bound check requires a single-objective record")
    bound = 2.0 * ell * R
    u0 = hist.F[:, 0] - F_star
    ratios = u0 * (hist.ks + 1.0) ** 2 / bound
    violations = int((ratios > 1.0 + rel_slack).sum())
    return RateCheck(bound_constant=bound, violations=violations,
                     max_ratio=float(ratios.max()))


def pareto_certificate(problem: ProblemSpec, x: np.ndarray, ell: float,
                       cfg: Optional[DualSolverConfig] = None) -> float:
    """Fixed-point residual ||p(x, x) - x||_inf.

    Values below eps certify eps-approximate weak Pareto optimality in the
    fixed-point sense.
    """
    return stationarity_residual(problem, ell, x, x, cfg)
