"""Shared fixtures and independent optimisation oracles."""
import numpy as np
import pytest
from scipy import sparse
from scipy.optimize import linprog


def difference_matrix(shape) -> sparse.csr_matrix:
    """Sparse forward-difference operator built from index pairs, no wrap."""
    n = int(np.prod(shape))
    idx = np.arange(n).reshape(shape)
    blocks = []
    for j in range(len(shape)):
        a = np.take(idx, range(0, shape[j] - 1), axis=j).ravel()
        b = np.take(idx, range(1, shape[j]), axis=j).ravel()
        k = a.size
        rows = np.r_[np.arange(k), np.arange(k)]
        blocks.append(sparse.csr_matrix((np.r_[-np.ones(k), np.ones(k)], (rows, np.r_[a, b])), shape=(k, n)))
    return sparse.vstack(blocks).tocsr()


def lp_min_tv(shape, samples, g) -> float:
    """Minimum anisotropic TV subject to exact interpolation, as a linear program."""
    n = int(np.prod(shape))
    D = difference_matrix(shape)
    E = D.shape[0]
    I = sparse.identity(E)
    A = sparse.vstack([sparse.hstack([D, -I]), sparse.hstack([-D, -I])])
    Aeq = sparse.csr_matrix((np.ones(samples.m), (np.arange(samples.m), samples.indices)), shape=(samples.m, n + E))
    res = linprog(np.r_[np.zeros(n), np.ones(E)], A_ub=A, b_ub=np.zeros(2 * E), A_eq=Aeq, b_eq=g,
                  bounds=[(None, None)] * n + [(0, None)] * E, method="highs")
    assert res.status == 0
    return float(res.fun)


def socp_min_tv(shape, samples, g, eta) -> float:
    """Minimum TV subject to the mean-squared data constraint, via a conic solver."""
    cp = pytest.importorskip("cvxpy")
    u = cp.Variable(int(np.prod(shape)))
    D = difference_matrix(shape)
    prob = cp.Problem(cp.Minimize(cp.norm1(D @ u)),
                      [cp.sum_squares(u[samples.indices] - g) <= samples.m * eta**2])
    prob.solve(solver=cp.CLARABEL)
    return float(prob.value)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
