"""Generalized momentum sequences for the accelerated proximal gradient loop.

The extrapolation factors are driven by two hyperparameters (a, b) through

    t_1 = 1,    t_{k+1} = sqrt(t_k^2 - a * t_k + b) + 1/2,
    gamma_k = (t_k - 1) / t_{k+1},

valid for a in [0, 1) and b in [a^2/4, 1/4].  The classical choice is
(a, b) = (0, 1/4); b = a^2/4 yields the arithmetic sequence
t_k = (1 - a) k / 2 + (1 + a) / 2.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

# Absolute slack so grid values such as b = a^2/4 computed in decimal
# notation are not rejected by a one-ulp rounding difference.
_VALIDATION_SLACK = 1e-12


@dataclass(frozen=True)
class MomentumParams:
    """Hyperparameters (a, b) of the momentum recurrence."""

    a: float
    b: float

    def __post_init__(self):
        a, b = self.a, self.b
        if not (0.0 <= a < 1.0):
            raise ValueError(f"momentum parameter a must satisfy 0 <= a < 1, got {a}")
        if not (a * a / 4.0 - _VALIDATION_SLACK <= b <= 0.25 + _VALIDATION_SLACK):
            raise ValueError(
                f"momentum parameter b must satisfy a^2/4 <= b <= 1/4, got a={a}, b={b}"
            )


@dataclass(frozen=True)
class MomentumState:
    """One step of the (t_k, gamma_k) sequence.

    `t_next` is t_{k+1}, already advanced so that gamma_k is available
    without recomputing the square root.
    """

    k: int
    t: float
    t_next: float
    gamma: float


def initial_state(params: MomentumParams) -> MomentumState:
    """State at k = 1 (t_1 = 1, so gamma_1 = 0)."""
    t_next = _advance(1.0, params)
    return MomentumState(k=1, t=1.0, t_next=t_next, gamma=0.0)


def _advance(t: float, params: MomentumParams) -> float:
    return math.sqrt(t * t - params.a * t + params.b) + 0.5


def momentum_step(state: MomentumState, params: MomentumParams) -> MomentumState:
    """Advance the sequence from k to k + 1.

    Pure function: the input state is untouched.  Invalid hyperparameters
    are rejected when `MomentumParams` is constructed, so the solver loop
    never observes them here.
    """
    t = state.t_next
    t_next = _advance(t, params)
    return MomentumState(k=state.k + 1, t=t, t_next=t_next, gamma=(t - 1.0) / t_next)


def t_sequence(params: MomentumParams, count: int) -> np.ndarray:
    """The values t_1, ..., t_count as a float array."""
    if count < 1:
        raise ValueError("count must be >= 1")
    a, b = params.a, params.b
    t = np.empty(count)
    t[0] = 1.0
    cur = 1.0
    for k in range(1, count):
        cur = math.sqrt(cur * cur - a * cur + b) + 0.5
        t[k] = cur
    return t


def gamma_sequence(t: np.ndarray) -> np.ndarray:
    """gamma_k = (t_k - 1) / t_{k+1} for k = 1, ..., len(t) - 1."""
    return (t[:-1] - 1.0) / t[1:]


def momentum_table(params: MomentumParams, k_max: int) -> list[tuple[int, float, float]]:
    """Rows (k, t_k, gamma_k) for k = 1..k_max.

    The underlying t-sequence is generated one entry past the last row,
    since gamma_{k_max} needs t_{k_max + 1}.
    """
    if k_max < 1:
        raise ValueError("k_max must be >= 1")
    t = t_sequence(params, k_max + 1)
    gamma = gamma_sequence(t)
    return [(k, float(t[k - 1]), float(gamma[k - 1])) for k in range(1, k_max + 1)]


def closed_form_t(params: MomentumParams, k) -> np.ndarray:
    """Arithmetic general term valid when b = a^2/4 exactly."""
    k = np.asarray(k, dtype=float)
    return (1.0 - params.a) * k / 2.0 + (1.0 + params.a) / 2.0


#: The 15 hyperparameter pairs used throughout the benchmark protocol:
#: a in {0, 1/6, 1/4, 1/2, 3/4} crossed with b in {a^2/4, (a^2+1)/8, 1/4}.
PAIR_GRID: tuple[tuple[float, float], ...] = (
    (0.0, 0.0),
    (0.0, 1.0 / 8.0),
    (0.0, 1.0 / 4.0),
    (1.0 / 6.0, 1.0 / 144.0),
    (1.0 / 6.0, 37.0 / 288.0),
    (1.0 / 6.0, 1.0 / 4.0),
    (1.0 / 4.0, 1.0 / 64.0),
    (1.0 / 4.0, 17.0 / 128.0),
    (1.0 / 4.0, 1.0 / 4.0),
    (1.0 / 2.0, 1.0 / 16.0),
    (1.0 / 2.0, 5.0 / 32.0),
    (1.0 / 2.0, 1.0 / 4.0),
    (3.0 / 4.0, 9.0 / 64.0),
    (3.0 / 4.0, 25.0 / 128.0),
    (3.0 / 4.0, 1.0 / 4.0),
)
