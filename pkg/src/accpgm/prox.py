"""Separable convex nonsmooth pieces and exact proximal maps of their
nonnegative weighted combinations.

Three piece kinds cover every problem in the benchmark suite: the zero
function, a weighted shifted l1 norm c * ||x - s||_1, and a box indicator.
For weights lam on the unit simplex the map

    argmin_z  sum_i lam_i g_i(z) + (ell / 2) ||z - w||^2

separates over coordinates into piecewise-quadratic minimizations that are
solved exactly from the sorted kink locations, so no inner iteration or
tolerance enters the dual subproblem solver built on top.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence, Union

import numpy as np


class InfeasibleCombinationError(ValueError):
    """Positive-weight box indicators with empty intersection."""


@dataclass(frozen=True, eq=False)
class Zero:
    n: int


@dataclass(frozen=True, eq=False)
class WeightedL1:
    """g(x) = weight * sum_j |x_j - shift_j| with weight >= 0."""

    n: int
    weight: float
    shift: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "shift", np.broadcast_to(
            np.asarray(self.shift, dtype=float), (self.n,)).copy())
        if self.weight < 0:
            raise ValueError("l1 weight must be nonnegative")


@dataclass(frozen=True, eq=False)
class BoxIndicator:
    """Indicator of [lower, upper]; bounds may be +-inf componentwise."""

    n: int
    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        lo = np.broadcast_to(np.asarray(self.lower, dtype=float), (self.n,)).copy()
        hi = np.broadcast_to(np.asarray(self.upper, dtype=float), (self.n,)).copy()
        if np.any(lo > hi):
            raise ValueError("box lower bound exceeds upper bound")
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)


SeparablePiece = Union[Zero, WeightedL1, BoxIndicator]


def piece_value(piece: SeparablePiece, x: np.ndarray) -> float:
    """Evaluate one piece at x (may be +inf for box indicators)."""
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != piece.n:
        raise ValueError(f"dimension mismatch: piece has n={piece.n}, x has {x.shape[-1]}")
    if isinstance(piece, Zero):
        return 0.0
    if isinstance(piece, WeightedL1):
        return float(piece.weight * np.abs(x - piece.shift).sum())
    if np.all(x >= piece.lower) and np.all(x <= piece.upper):
        return 0.0
    return np.inf


def piece_values_rows(pieces: Sequence[SeparablePiece], x: np.ndarray) -> np.ndarray:
    """Values of every piece at each row of x: (B, n) -> (B, m)."""
    x = np.asarray(x, dtype=float)
    out = np.empty(x.shape[:-1] + (len(pieces),))
    for i, piece in enumerate(pieces):
        if isinstance(piece, Zero):
            out[..., i] = 0.0
        elif isinstance(piece, WeightedL1):
            out[..., i] = piece.weight * np.abs(x - piece.shift).sum(axis=-1)
        else:
            ok = np.all(x >= piece.lower, axis=-1) & np.all(x <= piece.upper, axis=-1)
            out[..., i] = np.where(ok, 0.0, np.inf)
    return out


@dataclass(eq=False)
class WeightedCombination:
    """Simplex-weighted sum of separable pieces over a common dimension."""

    pieces: list
    weights: np.ndarray

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=float)
        if len(self.pieces) != self.weights.shape[0]:
            raise ValueError("one weight per piece required")
        dims = {p.n for p in self.pieces}
        if len(dims) != 1:
            raise ValueError("pieces must share a common dimension")
        if np.any(self.weights < -1e-12) or abs(self.weights.sum() - 1.0) > 1e-12:
            raise ValueError("weights must lie on the unit simplex")

    @property
    def n(self) -> int:
        return self.pieces[0].n


def combination_value(comb: WeightedCombination, x: np.ndarray) -> float:
    """sum_i lam_i g_i(x) with the 0 * inf = 0 convention for zero weights."""
    total = 0.0
    for lam_i, piece in zip(comb.weights, comb.pieces):
        if lam_i <= 0.0:
            continue
        v = piece_value(piece, x)
        if np.isinf(v):
            return np.inf
        total += lam_i * v
    return total


class ProxKernel:
    """Precompiled coordinatewise prox for a fixed list of pieces.

    Splits the pieces into l1 terms (scalar weight c_i, shift vector s_i)
    and boxes, precomputing the per-coordinate sort of the shift matrix.
    Calls are batched: lam is (B, m), w is (B, n), ell is (B,).

    With `enforce_all_boxes` the minimization is restricted to the
    intersection of every box piece regardless of its weight.  The dual
    subproblem solver needs this: the weighted inner minimum with the
    0 * inf convention is discontinuous in lam at the simplex boundary
    when box pieces differ, while the restricted version stays concave
    and recovers the same saddle point.
    """

    def __init__(self, pieces: Sequence[SeparablePiece], enforce_all_boxes: bool = False):
        self.pieces = list(pieces)
        self.n = pieces[0].n
        self.enforce_all_boxes = enforce_all_boxes
        self.l1_idx = [i for i, p in enumerate(pieces) if isinstance(p, WeightedL1)]
        self.box_idx = [i for i, p in enumerate(pieces) if isinstance(p, BoxIndicator)]
        if self.l1_idx:
            self.l1_c = np.array([pieces[i].weight for i in self.l1_idx])
            shifts = np.stack([pieces[i].shift for i in self.l1_idx])  # (K, n)
            order = np.argsort(shifts, axis=0, kind="stable")
            self.l1_order = order
            self.l1_shifts_sorted = np.take_along_axis(shifts, order, axis=0)
        if self.box_idx:
            self.box_lower = np.stack([pieces[i].lower for i in self.box_idx])
            self.box_upper = np.stack([pieces[i].upper for i in self.box_idx])
            if enforce_all_boxes:
                self.all_lower = self.box_lower.max(axis=0)
                self.all_upper = self.box_upper.min(axis=0)
                if np.any(self.all_lower > self.all_upper):
                    raise InfeasibleCombinationError("box pieces have empty intersection")

    def __call__(self, lam: np.ndarray, w: np.ndarray, ell: np.ndarray) -> np.ndarray:
        lam = np.atleast_2d(np.asarray(lam, dtype=float))
        w = np.atleast_2d(np.asarray(w, dtype=float))
        ell = np.atleast_1d(np.asarray(ell, dtype=float))
        B = w.shape[0]

        if not self.l1_idx:
            z = w.copy()
        else:
            # Unconstrained minimizer of sum_k u_k |z - s_k| + (ell/2)(z - w)^2.
            # With kinks sorted ascending and p_r the weight below interval r,
            # the stationary point of interval r is z_r = w - (2 p_r - U)/ell,
            # and the minimizer is max_r min(z_r, s_(r)) (s_(K) = +inf): the
            # selection is purely geometric, so zero-weight kinks cannot
            # perturb the result.
            u = lam[:, self.l1_idx] * self.l1_c  # (B, K)
            u_sorted = np.take_along_axis(
                np.broadcast_to(u[:, :, None], (B, len(self.l1_idx), self.n)),
                np.broadcast_to(self.l1_order[None], (B, len(self.l1_idx), self.n)),
                axis=1,
            )
            total = u_sorted.sum(axis=1)  # (B, n)
            prefix = np.concatenate(
                [np.zeros((B, 1, self.n)), np.cumsum(u_sorted, axis=1)], axis=1
            )  # (B, K+1, n)
            z_cand = w[:, None, :] - (2.0 * prefix - total[:, None, :]) / ell[:, None, None]
            caps = np.concatenate(
                [self.l1_shifts_sorted, np.full((1, self.n), np.inf)], axis=0
            )
            z = np.minimum(z_cand, caps[None]).max(axis=1)

        if self.box_idx:
            if self.enforce_all_boxes:
                z = np.clip(z, self.all_lower, self.all_upper)
            else:
                active = lam[:, self.box_idx] > 0.0  # (B, nbox)
                lo = np.where(active[:, :, None], self.box_lower[None], -np.inf).max(axis=1)
                hi = np.where(active[:, :, None], self.box_upper[None], np.inf).min(axis=1)
                if np.any(lo > hi):
                    raise InfeasibleCombinationError(
                        "positive-weight boxes have empty intersection"
                    )
                z = np.clip(z, lo, hi)
        return z


def weighted_prox(comb: WeightedCombination, w: np.ndarray, ell: float) -> np.ndarray:
    """argmin_z sum_i lam_i g_i(z) + (ell/2)||z - w||^2, solved exactly."""
    if ell <= 0:
        raise ValueError("ell must be positive")
    w = np.asarray(w, dtype=float)
    if w.shape[0] != comb.n:
        raise ValueError(f"dimension mismatch: expected {comb.n}, got {w.shape[0]}")
    kernel = ProxKernel(comb.pieces)
    return kernel(comb.weights[None], w[None], np.array([ell]))[0]


def subgradient_residual(comb: WeightedCombination, z: np.ndarray, w: np.ndarray,
                         ell: float, kink_tol: float = 1e-9) -> float:
    """Distance of -ell (z - w) from the subdifferential of the combination.

    Returns the largest coordinatewise violation of the optimality
    inclusion 0 in d(sum lam_i g_i)(z) + ell (z - w); zero (up to fp) for
    the output of `weighted_prox`.  Interval membership handles kinks and
    box edges.
    """
    z = np.asarray(z, dtype=float)
    w = np.asarray(w, dtype=float)
    target = -ell * (z - w)
    lo = np.zeros_like(z)
    hi = np.zeros_like(z)
    for lam_i, piece in zip(comb.weights, comb.pieces):
        if lam_i <= 0.0 or isinstance(piece, Zero):
            continue
        if isinstance(piece, WeightedL1):
            d = z - piece.shift
            at_kink = np.abs(d) <= kink_tol
            s = lam_i * piece.weight * np.sign(d)
            lo += np.where(at_kink, -lam_i * piece.weight, s)
            hi += np.where(at_kink, lam_i * piece.weight, s)
        else:
            if np.any(z < piece.lower - kink_tol) or np.any(z > piece.upper + kink_tol):
                return np.inf
            lo = np.where(z <= piece.lower + kink_tol, -np.inf, lo)
            hi = np.where(z >= piece.upper - kink_tol, np.inf, hi)
    below = np.maximum(lo - target, 0.0)
    above = np.maximum(target - hi, 0.0)
    return float(np.maximum(below, above).max()) if z.size else 0.0
