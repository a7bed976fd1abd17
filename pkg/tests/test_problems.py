import numpy as np
import pytest

from accpgm.problems import evaluate, gradient, in_domain, make_problem
from accpgm.prox import BoxIndicator, WeightedL1, Zero, piece_value
from accpgm.rng import SplitMix64

from _oracles import central_difference_jacobian


def test_jos1_values_and_gradients():
    prob = make_problem("JOS1", 2)
    assert prob.m == 2
    F = evaluate(prob, np.array([0.0, 0.0]))
    assert F == pytest.approx([0.0, 4.0])
    g1 = gradient(prob, 1, np.array([1.0, 3.0]))
    assert g1 == pytest.approx([1.0, 3.0])


def test_jos1_l1_evaluate():
    prob = make_problem("JOS1_L1", 2)
    F = evaluate(prob, np.array([1.0, 1.0]))
    assert F == pytest.approx([2.0, 1.0])


def test_fds_con_infinite_outside_orthant():
    prob = make_problem("FDS_CON", 2)
    F = evaluate(prob, np.array([-1.0, 0.0]))
    assert F[0] == np.inf
    assert not in_domain(prob, np.array([-1.0, 0.0]))
    assert in_domain(prob, np.array([0.0, 0.0]))


def test_fds_gradients_at_reference_points():
    prob = make_problem("FDS", 2)
    g3 = gradient(prob, 3, np.zeros(2))
    assert g3 == pytest.approx([-1.0 / 3.0, -1.0 / 3.0])
    g1 = gradient(prob, 1, np.array([1.0, 2.0]))
    assert g1 == pytest.approx([0.0, 0.0], abs=1e-14)


def test_make_problem_metadata():
    jos1 = make_problem("JOS1", 50)
    assert jos1.m == 2
    assert all(isinstance(p, Zero) for p in jos1.pieces)
    assert jos1.known_L == pytest.approx(0.04)
    assert jos1.init_lower[0] == -2.0 and jos1.init_upper[0] == 4.0

    fds_con = make_problem("FDS_CON", 50)
    assert fds_con.m == 3
    assert all(isinstance(p, BoxIndicator) for p in fds_con.pieces)
    assert fds_con.known_L is None
    assert fds_con.init_lower[0] == 0.0 and fds_con.init_upper[0] == 2.0

    l1 = make_problem("JOS1_L1", 50)
    assert isinstance(l1.pieces[0], WeightedL1)
    assert l1.pieces[0].weight == pytest.approx(1.0 / 50.0)
    assert np.all(l1.pieces[0].shift == 0.0)
    assert l1.pieces[1].weight == pytest.approx(1.0 / 100.0)
    assert np.all(l1.pieces[1].shift == 1.0)

    with pytest.raises(ValueError):
        make_problem("NOPE", 10)


def test_gradient_index_contract():
    prob = make_problem("JOS1", 3)
    with pytest.raises(IndexError):
        gradient(prob, 0, np.zeros(3))
    with pytest.raises(IndexError):
        gradient(prob, 3, np.zeros(3))
    with pytest.raises(ValueError):
        gradient(prob, 1, np.zeros(4))


@pytest.mark.parametrize("name", ["JOS1", "JOS1_L1", "FDS", "FDS_CON"])
def test_gradients_match_finite_differences(name):
    prob = make_problem(name, 6)
    gen = SplitMix64(99)
    for _ in range(100):
        x = gen.uniform_box(prob.init_lower, prob.init_upper, 1)[0]
        J = prob.jacobian(x)
        J_fd = central_difference_jacobian(prob, x)
        err = np.abs(J - J_fd).max() / max(1.0, np.abs(J_fd).max())
        assert err <= 1e-4


@pytest.mark.parametrize("name", ["JOS1", "JOS1_L1", "FDS", "FDS_CON"])
def test_convexity_sampling(name):
    prob = make_problem(name, 8)
    gen = SplitMix64(5)
    for _ in range(60):
        x = gen.uniform_box(prob.init_lower, prob.init_upper, 1)[0]
        z = gen.uniform_box(prob.init_lower, prob.init_upper, 1)[0]
        fx, fz = prob.values(x), prob.values(z)
        for alpha in (0.25, 0.5, 0.75):
            mid = prob.values(alpha * x + (1 - alpha) * z)
            assert np.all(mid <= alpha * fx + (1 - alpha) * fz + 1e-10)


@pytest.mark.parametrize("name", ["JOS1", "JOS1_L1", "FDS", "FDS_CON"])
def test_evaluate_consistency(name):
    prob = make_problem(name, 5)
    gen = SplitMix64(11)
    for _ in range(20):
        x = gen.uniform_box(prob.init_lower, prob.init_upper, 1)[0]
        F = evaluate(prob, x)
        f = prob.values(x)
        for i, piece in enumerate(prob.pieces):
            assert F[i] == f[i] + piece_value(piece, x)


def test_batched_oracles_match_single():
    prob = make_problem("FDS", 7)
    gen = SplitMix64(3)
    X = gen.uniform_box(prob.init_lower, prob.init_upper, 4)
    batch_v = prob.values(X)
    batch_J = prob.jacobian(X)
    vj_v, vj_J = prob.smooth_and_jac(X)
    for b in range(4):
        assert prob.values(X[b]) == pytest.approx(batch_v[b])
        assert np.allclose(prob.jacobian(X[b]), batch_J[b])
        assert np.allclose(vj_v[b], batch_v[b])
        assert np.allclose(vj_J[b], batch_J[b], atol=1e-14)
