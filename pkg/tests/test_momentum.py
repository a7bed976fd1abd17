import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from accpgm.momentum import (PAIR_GRID, MomentumParams, closed_form_t,
                             gamma_sequence, initial_state, momentum_step,
                             momentum_table, t_sequence)

PHI = (1.0 + math.sqrt(5.0)) / 2.0


def test_classical_first_steps():
    params = MomentumParams(0.0, 0.25)
    state = initial_state(params)
    assert state.t == 1.0
    assert state.gamma == 0.0
    assert state.t_next == pytest.approx(PHI, abs=1e-11)
    nxt = momentum_step(state, params)
    assert nxt.k == 2
    assert nxt.t == pytest.approx(1.61803398875, abs=1e-10)
    # frozen from evaluating the recurrence with mpmath at 50 digits
    assert nxt.t_next == pytest.approx(2.193527085331054, abs=1e-12)
    assert nxt.gamma == pytest.approx((nxt.t - 1.0) / nxt.t_next, abs=1e-15)


def test_arithmetic_sequence_when_b_is_a2_over_4():
    params = MomentumParams(0.5, 1.0 / 16.0)
    t = t_sequence(params, 10)
    for k in range(1, 11):
        assert t[k - 1] == pytest.approx(k / 4.0 + 0.75, abs=1e-12)
    assert t[3] == pytest.approx(1.75, abs=1e-12)


def test_momentum_table_rows():
    rows = momentum_table(MomentumParams(0.0, 0.25), 3)
    ks, ts, gammas = zip(*rows)
    assert ks == (1, 2, 3)
    assert ts == pytest.approx((1.0, 1.61803398875, 2.19352708533), abs=1e-10)
    # gamma_k = (t_k - 1) / t_{k+1}
    assert gammas[0] == 0.0
    assert gammas[1] == pytest.approx(0.61803398875 / 2.19352708533, abs=1e-10)

    rows = momentum_table(MomentumParams(0.75, 9.0 / 64.0), 4)
    for k, t, _ in rows:
        assert t == pytest.approx(k / 8.0 + 7.0 / 8.0, abs=1e-12)

    rows = momentum_table(MomentumParams(0.0, 0.0), 2)
    assert rows[1][1] == pytest.approx(1.5, abs=1e-12)
    assert rows[1][2] == pytest.approx(0.25, abs=1e-12)


def test_momentum_step_is_pure():
    params = MomentumParams(0.25, 0.25)
    state = initial_state(params)
    before = (state.k, state.t, state.t_next, state.gamma)
    momentum_step(state, params)
    assert (state.k, state.t, state.t_next, state.gamma) == before


@pytest.mark.parametrize("a,b", [(-0.1, 0.1), (1.0, 0.25), (1.5, 0.3),
                                 (0.5, 0.0), (0.0, 0.3), (0.2, -0.01)])
def test_invalid_params_rejected(a, b):
    with pytest.raises(ValueError):
        MomentumParams(a, b)


@given(a=st.floats(0.0, 0.999), scale=st.floats(0.0, 1.0))
@settings(max_examples=60, deadline=None)
def test_valid_param_region_accepted(a, scale):
    b = a * a / 4.0 + scale * (0.25 - a * a / 4.0)
    params = MomentumParams(a, b)
    assert params.a == a


@pytest.mark.parametrize("a,b", PAIR_GRID)
def test_lemma_inequalities_short_horizon(a, b):
    # Same checks as the acceptance suite, on a shorter horizon.
    params = MomentumParams(a, b)
    k_max = 2000
    t = t_sequence(params, k_max + 1)
    k = np.arange(1.0, k_max + 1.0)
    tk, tk1 = t[:-1], t[1:]
    tol = 1e-9
    assert np.all(tk1 >= tk + (1.0 - a) / 2.0 - tol)
    assert np.all(tk >= (1.0 - a) * k / 2.0 + (1.0 + a) / 2.0 - tol)
    root = math.sqrt(max(4.0 * b - a * a, 0.0))
    assert np.all(tk1 <= tk + (1.0 - a + root) / 2.0 + tol)
    assert np.all(tk <= k + tol)
    lhs = tk**2 - tk1**2 + tk1
    rhs = a * tk - b + 0.25
    assert np.abs(lhs - rhs).max() <= tol
    assert np.all(rhs >= a * tk - tol)
    gamma = gamma_sequence(t)
    assert np.all(gamma >= -tol)
    assert np.all(gamma <= (k - 1.0) / (k + 0.5) + tol)
    assert np.all(1.0 - gamma**2 >= 1.0 / tk - 1e-12)


@pytest.mark.parametrize("a,b", [(0.0, 0.25), (0.5, 1.0 / 16.0), (0.75, 0.25)])
def test_product_bound(a, b):
    t = t_sequence(MomentumParams(a, b), 2002)
    gamma = gamma_sequence(t)  # gamma[q-1] = gamma_q
    for s in (1, 2, 3, 5, 13, 100, 1000, 2000):
        prods = np.cumprod(gamma[s - 1:2000])
        assert prods.sum() <= 2.0 * (s - 1) + 1e-9


def test_closed_form_matches_recurrence():
    for a in (0.0, 1.0 / 6.0, 0.25, 0.5, 0.75):
        params = MomentumParams(a, a * a / 4.0)
        t = t_sequence(params, 1000)
        k = np.arange(1.0, 1001.0)
        assert np.all(np.abs(t - closed_form_t(params, k)) <= 1e-10 * k)


def test_t_sequence_validation():
    with pytest.raises(ValueError):
        t_sequence(MomentumParams(0.0, 0.25), 0)
    with pytest.raises(ValueError):
        momentum_table(MomentumParams(0.0, 0.25), 0)
