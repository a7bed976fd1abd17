import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from accpgm.prox import (BoxIndicator, InfeasibleCombinationError,
                         WeightedCombination, WeightedL1, Zero,
                         combination_value, piece_value, subgradient_residual,
                         weighted_prox)

from _oracles import prox_grid_oracle_1d


def test_piece_values():
    l1 = WeightedL1(2, 0.5, np.zeros(2))
    assert piece_value(l1, np.array([1.0, -3.0])) == 2.0
    box = BoxIndicator(2, np.zeros(2), np.full(2, np.inf))
    assert piece_value(box, np.array([0.0, 5.0])) == 0.0
    assert piece_value(box, np.array([-0.1, 5.0])) == np.inf
    assert piece_value(Zero(2), np.array([7.0, -4.0])) == 0.0


def test_piece_value_dimension_mismatch():
    with pytest.raises(ValueError):
        piece_value(Zero(3), np.array([1.0, 2.0]))


def test_combination_validation():
    with pytest.raises(ValueError):
        WeightedCombination([Zero(2)], np.array([0.7]))
    with pytest.raises(ValueError):
        WeightedCombination([Zero(2), Zero(3)], np.array([0.5, 0.5]))
    with pytest.raises(ValueError):
        WeightedCombination([Zero(2), Zero(2)], np.array([1.5, -0.5]))


def test_combination_value_zero_weight_box_ignored():
    comb = WeightedCombination(
        [BoxIndicator(1, np.zeros(1), np.ones(1)), Zero(1)],
        np.array([0.0, 1.0]))
    assert combination_value(comb, np.array([5.0])) == 0.0
    comb2 = WeightedCombination(
        [BoxIndicator(1, np.zeros(1), np.ones(1)), Zero(1)],
        np.array([0.5, 0.5]))
    assert combination_value(comb2, np.array([5.0])) == np.inf


def test_weighted_prox_frozen_examples():
    # c = 0.3 soft threshold of w = 1 at ell = 1; value frozen from the
    # 1-D grid oracle (z in [-2, 2], step 1e-6).
    comb = WeightedCombination([WeightedL1(1, 0.3, np.zeros(1))], np.array([1.0]))
    assert weighted_prox(comb, np.array([1.0]), 1.0)[0] == pytest.approx(0.7, abs=1e-6)

    comb = WeightedCombination(
        [BoxIndicator(1, np.zeros(1), np.full(1, np.inf))], np.array([1.0]))
    assert weighted_prox(comb, np.array([-2.0]), 1.0)[0] == 0.0

    # 0.5|z| + 0.25|z-1| + 0.5 (z-2)^2, minimized on z > 1 at 2 - 0.75.
    comb = WeightedCombination(
        [WeightedL1(1, 1.0, np.zeros(1)), WeightedL1(1, 0.5, np.ones(1))],
        np.array([0.5, 0.5]))
    assert weighted_prox(comb, np.array([2.0]), 1.0)[0] == pytest.approx(1.25, abs=1e-6)

    comb = WeightedCombination([Zero(2), Zero(2)], np.array([0.3, 0.7]))
    out = weighted_prox(comb, np.array([3.0, -1.0]), 5.0)
    assert np.array_equal(out, np.array([3.0, -1.0]))


def test_weighted_prox_grid_agreement_500():
    rng = np.random.default_rng(31415)
    for _ in range(500):
        m = int(rng.integers(1, 4))
        anchor = rng.normal(0, 1)  # keeps sampled boxes overlapping
        pieces = []
        for _ in range(m):
            kind = rng.integers(0, 3)
            if kind == 0:
                pieces.append(Zero(1))
            elif kind == 1:
                pieces.append(WeightedL1(1, float(rng.uniform(0, 2)),
                                         rng.normal(0, 1, 1)))
            else:
                lo = anchor - rng.uniform(0.05, 2, 1)
                pieces.append(BoxIndicator(1, lo, anchor + rng.uniform(0.05, 2, 1)))
        raw = rng.uniform(0.05, 1.0, m)
        weights = raw / raw.sum()
        comb = WeightedCombination(pieces, weights)
        w = rng.normal(0, 2, 1)
        ell = float(rng.uniform(0.3, 4))
        z = weighted_prox(comb, w, ell)
        z_ref = prox_grid_oracle_1d(pieces, weights, float(w[0]), ell)
        assert abs(z[0] - z_ref) <= 1e-5
        assert subgradient_residual(comb, z, w, ell) <= 1e-8


@given(data=st.data())
@settings(max_examples=60, deadline=None)
def test_firm_nonexpansiveness(data):
    n = data.draw(st.integers(1, 4))
    rng = np.random.default_rng(data.draw(st.integers(0, 2**32 - 1)))
    pieces = [WeightedL1(n, float(rng.uniform(0, 1)), rng.normal(0, 1, n)),
              Zero(n)]
    comb = WeightedCombination(pieces, np.array([0.4, 0.6]))
    w1 = rng.normal(0, 3, n)
    w2 = rng.normal(0, 3, n)
    z1 = weighted_prox(comb, w1, 1.3)
    z2 = weighted_prox(comb, w2, 1.3)
    assert np.linalg.norm(z1 - z2) <= np.linalg.norm(w1 - w2) + 1e-12


def test_zero_weight_piece_has_no_effect():
    rng = np.random.default_rng(7)
    for _ in range(50):
        n = int(rng.integers(1, 5))
        base = [WeightedL1(n, float(rng.uniform(0, 2)), rng.normal(0, 1, n)),
                Zero(n)]
        extra_kind = rng.integers(0, 2)
        if extra_kind == 0:
            extra = WeightedL1(n, float(rng.uniform(0, 2)), rng.normal(0, 1, n))
        else:
            lo = rng.normal(-2, 1, n)
            extra = BoxIndicator(n, lo, lo + rng.uniform(0.5, 2, n))
        w = rng.normal(0, 2, n)
        ell = float(rng.uniform(0.5, 3))
        with_extra = WeightedCombination(base + [extra], np.array([0.25, 0.75, 0.0]))
        without = WeightedCombination(base, np.array([0.25, 0.75]))
        z1 = weighted_prox(with_extra, w, ell)
        z2 = weighted_prox(without, w, ell)
        assert np.array_equal(z1, z2), "zero-weight piece changed the prox output"


def test_infeasible_boxes_rejected():
    pieces = [BoxIndicator(1, np.zeros(1), np.ones(1)),
              BoxIndicator(1, np.full(1, 2.0), np.full(1, 3.0))]
    comb = WeightedCombination(pieces, np.array([0.5, 0.5]))
    with pytest.raises(InfeasibleCombinationError):
        weighted_prox(comb, np.array([0.5]), 1.0)


def test_subgradient_residual_flags_nonoptimal_point():
    comb = WeightedCombination([WeightedL1(1, 0.3, np.zeros(1))], np.array([1.0]))
    assert subgradient_residual(comb, np.array([0.2]), np.array([1.0]), 1.0) > 0.1
