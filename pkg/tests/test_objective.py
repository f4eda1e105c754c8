import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from idledqn.objective import (PenaltyModel, QuadraticProblem, generate_quadratics, global_minimizer,
                               local_cost, penalty_gradient, penalty_value)

from conftest import k2, small_instance


def central_diff(f, x, h):
    g = np.empty_like(x)
    for k in range(x.size):
        e = np.zeros_like(x)
        e[k] = h
        g[k] = (f(x + e) - f(x - e)) / (2 * h)
    return g


def dense_value(model, x):
    Z = np.kron(model.graph.W, np.eye(model.p))
    X = x.reshape(model.n, model.p)
    F = model.problem.values(X).sum()
    return model.alpha * F + 0.5 * x @ (np.eye(x.size) - Z) @ x


def test_generated_spectra_in_range():
    pr = generate_quadratics(30, 6, seed=1)
    assert 1.0 <= pr.mu <= pr.L <= 31.0
    eig = np.linalg.eigvalsh(pr.A)
    assert eig.min() >= pr.mu - 1e-9 and eig.max() <= pr.L + 1e-9
    assert np.all((pr.b >= 1) & (pr.b <= 31))
    for A in pr.A:
        assert np.abs(A - A.T).max() <= 1e-12


def test_generation_deterministic():
    a, b = generate_quadratics(8, 4, seed=5), generate_quadratics(8, 4, seed=5)
    assert np.array_equal(a.A, b.A) and np.array_equal(a.b, b.b)


def test_single_node_minimizer_is_center():
    pr = generate_quadratics(1, 5, seed=2)
    np.testing.assert_allclose(pr.x_global, pr.b[0], rtol=1e-13)


def test_identity_hessians_give_mean():
    b = np.random.default_rng(0).uniform(1, 31, size=(6, 3))
    pr = QuadraticProblem.from_arrays(np.broadcast_to(np.eye(3), (6, 3, 3)).copy(), b)
    np.testing.assert_allclose(global_minimizer(pr), b.mean(axis=0), rtol=1e-14)


def test_global_minimizer_residual():
    pr = generate_quadratics(20, 10, seed=3)
    res = np.einsum("ipq,iq->p", pr.A, pr.x_global - pr.b)
    assert np.linalg.norm(res) <= 1e-10 * pr.n * pr.L * np.abs(pr.b).max()


def test_local_cost_at_center_and_fd():
    pr = generate_quadratics(4, 6, seed=4)
    v, g, H = local_cost(pr, 2, pr.b[2])
    assert v == 0 and np.all(g == 0)
    assert np.array_equal(H, pr.A[2])
    rng = np.random.default_rng(1)
    for _ in range(10):
        x = rng.normal(scale=10, size=6)
        h = 1e-5 * (1 + np.linalg.norm(x))
        fd = central_diff(lambda z: local_cost(pr, 2, z)[0], x, h)
        g = local_cost(pr, 2, x)[1]
        assert np.linalg.norm(fd - g) <= 1e-6 * np.linalg.norm(g)


def test_penalty_consensus_has_no_coupling(model10):
    c = np.random.default_rng(2).normal(size=model10.p)
    x = np.tile(c, model10.n)
    expected = model10.alpha * model10.problem.values(np.tile(c, (model10.n, 1))).sum()
    assert penalty_value(model10, x) == pytest.approx(expected, rel=1e-14)


def test_penalty_edge_form_matches_kronecker(model10):
    rng = np.random.default_rng(3)
    for _ in range(20):
        x = rng.normal(scale=20, size=model10.n * model10.p)
        assert penalty_value(model10, x) == pytest.approx(dense_value(model10, x), rel=1e-10)


def test_penalty_minimizer_is_minimum(model10):
    xs = model10.x_penalty
    f0 = penalty_value(model10, xs)
    rng = np.random.default_rng(4)
    for _ in range(20):
        assert penalty_value(model10, xs + 1e-3 * rng.normal(size=xs.size)) >= f0


def test_gradient_dimension_mismatch(model10):
    with pytest.raises(ValueError):
        penalty_gradient(model10, np.zeros(3))
    with pytest.raises(ValueError):
        penalty_value(model10, np.zeros(3))


def test_gradient_zero_at_minimizer(model10):
    g = penalty_gradient(model10, model10.x_penalty)
    assert np.linalg.norm(g) <= 1e-10 * model10.scale()


def test_gradient_matches_dense_kronecker(model10):
    rng = np.random.default_rng(5)
    Z = np.kron(model10.graph.W, np.eye(model10.p))
    I = np.eye(Z.shape[0])
    for _ in range(100):
        x = rng.normal(scale=20, size=Z.shape[0])
        X = x.reshape(model10.n, model10.p)
        dense = model10.alpha * model10.problem.gradients(X).reshape(-1) + (I - Z) @ x
        g = penalty_gradient(model10, x)
        assert np.linalg.norm(g - dense) <= 1e-10 * np.linalg.norm(dense)


def test_gradient_k2_symmetric_blocks_cancel():
    g = k2()
    pr = QuadraticProblem.from_arrays(np.stack([np.eye(2), np.eye(2)]), np.ones((2, 2)))
    m = PenaltyModel(pr, g, 0.1)
    x = np.array([1.0, 2.0, 3.0, -1.0])
    grad = penalty_gradient(m, x).reshape(2, 2)
    coupling = grad - 0.1 * pr.gradients(x.reshape(2, 2))
    np.testing.assert_allclose(coupling.sum(axis=0), 0.0, atol=1e-15)


def test_penalty_minimizer_consensus_case(model10):
    b = np.full((model10.n, model10.p), 3.5)
    pr = QuadraticProblem.from_arrays(np.broadcast_to(np.eye(model10.p), (model10.n, model10.p, model10.p)).copy(), b)
    m = PenaltyModel(pr, model10.graph, 0.05)
    np.testing.assert_allclose(m.x_penalty, 3.5, rtol=1e-12)


def test_penalty_gap_shrinks_with_alpha():
    m = small_instance(n=12, p=4, seed=8, alpha_scale=50)
    m2 = PenaltyModel(m.problem, m.graph, m.alpha / 2)

    def gap(model):
        X = model.x_penalty.reshape(model.n, model.p)
        return np.linalg.norm(X - model.problem.x_global, axis=1).max()

    ratio = gap(m2) / gap(m)
    assert 0.25 < ratio < 1.0


def test_problem_json_roundtrip(tmp_path):
    pr = generate_quadratics(5, 3, seed=6)
    path = tmp_path / "p.json"
    pr.save(path)
    back = QuadraticProblem.load(path)
    assert np.array_equal(back.A, pr.A) and np.array_equal(back.b, pr.b)
    assert back.mu == pr.mu and back.L == pr.L and back.seed == 6


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**31 - 1))
def test_strong_convexity_and_lipschitz(seed):
    m = small_instance(n=8, p=3, seed=seed % 50 + 1, alpha_scale=20)
    rng = np.random.default_rng(seed)
    x, y = rng.normal(scale=10, size=(2, m.n * m.p))
    fx, fy = penalty_value(m, x), penalty_value(m, y)
    gx, gy = penalty_gradient(m, x), penalty_gradient(m, y)
    d = y - x
    slack = 1e-9 * (abs(fx) + abs(fy) + 1)
    assert fy >= fx + gx @ d + 0.5 * m.mu_phi * d @ d - slack
    assert np.linalg.norm(gx - gy) <= m.L_phi * np.linalg.norm(d) * (1 + 1e-12)
