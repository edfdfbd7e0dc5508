import numpy as np
import pytest

from stergm.optimize import bfgs, wolfe_line_search


def rosenbrock(x):
    a, b = x
    f = (1 - a) ** 2 + 100 * (b - a * a) ** 2
    g = np.array([-2 * (1 - a) - 400 * a * (b - a * a), 200 * (b - a * a)])
    return f, g


def quadratic(mat, vec):
    def fun(x):
        return 0.5 * x @ mat @ x - vec @ x, mat @ x - vec
    return fun


def test_rosenbrock():
    res = bfgs(rosenbrock, np.array([-1.2, 1.0]), gtol=1e-10)
    assert res.converged
    np.testing.assert_allclose(res.x, [1, 1], atol=1e-8)


def test_quadratic_exact_solution(rng):
    a = rng.normal(size=(6, 6))
    mat = a @ a.T + 6 * np.eye(6)
    vec = rng.normal(size=6)
    res = bfgs(quadratic(mat, vec), np.zeros(6), gtol=1e-12)
    assert res.converged and res.iterations < 50
    np.testing.assert_allclose(res.x, np.linalg.solve(mat, vec), atol=1e-10)
    # inverse Hessian approximation should be close to the true inverse
    np.testing.assert_allclose(res.inv_hessian, np.linalg.inv(mat), atol=0.05)


def test_already_optimal():
    res = bfgs(quadratic(np.eye(2), np.zeros(2)), np.zeros(2))
    assert res.converged and res.iterations == 0


def test_logistic_boundary_hits_cap():
    # f = log(1 + exp(-x)) decreases forever; the cap stops the run
    def fun(x):
        return float(np.logaddexp(0, -x[0])), np.array([-1 / (1 + np.exp(x[0]))])
    res = bfgs(fun, np.zeros(1), gtol=1e-14, x_cap=25)
    assert not res.converged
    assert res.x[0] > 25 and "cap" in res.message


def test_max_iters():
    res = bfgs(rosenbrock, np.array([-1.2, 1.0]), max_iters=3)
    assert not res.converged and res.iterations == 3


def test_line_search_wolfe_conditions():
    x = np.array([-1.2, 1.0])
    f0, g0 = rosenbrock(x)
    p = -g0
    ls = wolfe_line_search(rosenbrock, x, f0, g0, p, alpha0=1e-3)
    f1, g1 = rosenbrock(x + ls.alpha * p)
    assert f1 <= f0 + 1e-4 * ls.alpha * (g0 @ p)
    assert abs(g1 @ p) <= 0.9 * abs(g0 @ p)


def test_line_search_rejects_ascent_direction():
    x = np.array([0.5, 0.5])
    f0, g0 = rosenbrock(x)
    with pytest.raises(Exception):
        wolfe_line_search(rosenbrock, x, f0, g0, g0)
