"""Reference implementations used only by tests.

These never touch the blocked execution path: dense Newton runs on plain
ndarrays, and the random-instance generator pairs every expression with a
loop-nest oracle evaluated on the captured dense inputs.
"""

from __future__ import annotations

import math

import numpy as np

from blocksched import graph as g
from blocksched.blocking import is_valid_grid
from blocksched.cluster import ClusterState, CostParams
from blocksched.executor import (
    ObjectStore,
    oracle_binary,
    oracle_matmul,
    oracle_mttkrp,
    oracle_sum_axis,
    oracle_sum_blocks,
    oracle_tensordot,
    oracle_unary,
    stable_sigmoid,
    to_dense,
)


def newton_dense(x, y, eps=1e-6, max_iter=50):
    """Plain-ndarray Newton logistic fit mirroring the distributed driver."""
    n, d = x.shape
    beta = np.zeros((d, 1))
    history, norms = [], []
    for _ in range(max_iter):
        mu = stable_sigmoid(x @ beta)
        grad = x.T @ (mu - y) / n
        w = mu * (1.0 - mu)
        hess = x.T @ (w * x) / n
        try:
            step = np.linalg.solve(hess, grad)
        except np.linalg.LinAlgError:
            lam = 1e-8 * np.trace(hess) / d
            step = np.linalg.solve(hess + lam * np.eye(d), grad)
        beta = beta - step
        history.append(beta.copy())
        norms.append(float(np.linalg.norm(grad)))
        if norms[-1] <= eps:
            break
    return beta, history, norms


# ---------------------------------------------------------------------------
# random oracle-paired instances


def _rand_grid(rng, shape, cap=4):
    grid = []
    for dim in shape:
        choices = [gg for gg in range(1, min(cap, dim) + 1)
                   if is_valid_grid((dim,), (gg,))]
        grid.append(int(rng.choice(choices)))
    return tuple(grid)


def _rand_cluster(rng, params=None):
    k = int(rng.choice([1, 2, 4]))
    r = int(rng.choice([1, 2, 4]))
    if k == 4 and rng.random() < 0.5:
        node_grid = (2, 2)
    else:
        node_grid = (k,)
    cluster = ClusterState(node_grid, r, params or CostParams())
    return cluster, ObjectStore(cluster.k)


FAMILIES = (
    "unary", "binary", "binary_chain", "sum_axis", "reduce_blocks",
    "matmul", "xty", "xyt", "tensordot", "mttkrp", "einsum_matmul",
)


def random_case(rng, family=None):
    """One random instance: (cluster, store, expr, expected_fn).

    expected_fn computes the dense expected value with loop-nest oracles
    from the dense inputs captured at creation time.
    """
    family = family or rng.choice(FAMILIES)
    cluster, store = _rand_cluster(rng)

    def mk(shape, grid=None, seed=None):
        grid = grid or _rand_grid(rng, shape)
        arr = g.create(shape, grid, "random", cluster, store,
                       seed=int(rng.integers(0, 2**31)) if seed is None else seed)
        return arr, to_dense(arr, store)

    if family == "unary":
        n, d = int(rng.integers(2, 64)), int(rng.integers(1, 17))
        x, xd = mk((n, d))
        return cluster, store, g.ew_unary("neg", x), lambda: oracle_unary("neg", xd)
    if family == "binary":
        op = rng.choice(["add", "sub", "mul"])
        n, d = int(rng.integers(2, 64)), int(rng.integers(1, 17))
        grid = _rand_grid(rng, (n, d))
        x, xd = mk((n, d), grid)
        y, yd = mk((n, d), grid)
        return cluster, store, g.ew_binary(op, x, y), lambda: oracle_binary(op, xd, yd)
    if family == "binary_chain":
        n, d = int(rng.integers(2, 48)), int(rng.integers(1, 9))
        grid = _rand_grid(rng, (n, d))
        x, xd = mk((n, d), grid)
        y, yd = mk((n, d), grid)
        expr = g.ew_unary("neg", g.ew_binary("add", x, y))
        return cluster, store, expr, lambda: oracle_unary("neg", oracle_binary("add", xd, yd))
    if family == "sum_axis":
        shape = (int(rng.integers(2, 33)), int(rng.integers(2, 33)))
        if rng.random() < 0.3:
            shape = shape + (int(rng.integers(2, 9)),)
        axis = int(rng.integers(0, len(shape)))
        x, xd = mk(shape)
        return cluster, store, g.sum_axis(x, axis), lambda: oracle_sum_axis(xd, axis)
    if family == "reduce_blocks":
        q = int(rng.choice([2, 3, 4]))
        b = int(rng.integers(1, 33))
        x, xd = mk((q * b,), (q,))
        blocks = [xd[i * b:(i + 1) * b] for i in range(q)]
        return cluster, store, g.reduce_blocks(x), lambda: oracle_sum_blocks(blocks)
    if family in ("matmul", "einsum_matmul"):
        m, kk, n = (int(rng.integers(2, 33)) for _ in range(3))
        gm, gk, gn = _rand_grid(rng, (m, kk, n))
        x, xd = mk((m, kk), (gm, gk))
        y, yd = mk((kk, n), (gk, gn))
        if family == "matmul":
            expr = g.matmul(x, y)
        else:
            expr = g.einsum("ik,kj->ij", x, y)
        return cluster, store, expr, lambda: oracle_matmul(xd, yd)
    if family == "xty":
        n, d1, d2 = int(rng.integers(2, 49)), int(rng.integers(1, 9)), int(rng.integers(1, 9))
        gn = _rand_grid(rng, (n,))[0]
        x, xd = mk((n, d1), (gn, _rand_grid(rng, (d1,))[0]))
        y, yd = mk((n, d2), (gn, _rand_grid(rng, (d2,))[0]))
        expr = g.matmul(g.transpose(x), y)
        return cluster, store, expr, lambda: oracle_matmul(xd.T, yd)
    if family == "xyt":
        n1, n2, d = int(rng.integers(2, 33)), int(rng.integers(2, 33)), int(rng.integers(1, 9))
        gd = _rand_grid(rng, (d,))[0]
        x, xd = mk((n1, d), (_rand_grid(rng, (n1,))[0], gd))
        y, yd = mk((n2, d), (_rand_grid(rng, (n2,))[0], gd))
        expr = g.matmul(x, g.transpose(y))
        return cluster, store, expr, lambda: oracle_matmul(xd, yd.T)
    if family == "tensordot":
        axes = int(rng.choice([1, 2]))
        core = tuple(int(rng.integers(2, 7)) for _ in range(axes))
        left = tuple(int(rng.integers(2, 9)) for _ in range(int(rng.integers(0, 2)) + 1))
        right = tuple(int(rng.integers(2, 9)) for _ in range(int(rng.integers(0, 2)) + 1))
        core_grid = _rand_grid(rng, core, cap=2)
        x, xd = mk(left + core, _rand_grid(rng, left) + core_grid)
        y, yd = mk(core + right, core_grid + _rand_grid(rng, right))
        expr = g.tensordot(x, y, axes)
        return cluster, store, expr, lambda: oracle_tensordot(xd, yd, axes)
    if family == "mttkrp":
        i, j, kk, f = (int(rng.integers(2, 9)) for _ in range(4))
        gi, gj, gk, gf = (_rand_grid(rng, (v,), cap=2)[0] for v in (i, j, kk, f))
        x, xd = mk((i, j, kk), (gi, gj, gk))
        b, bd = mk((i, f), (gi, gf))
        c, cd = mk((j, f), (gj, gf))
        expr = g.einsum("ijk,if,jf->if", x, b, c)
        return cluster, store, expr, lambda: oracle_mttkrp(xd, bd, cd)
    raise ValueError(family)


def assert_matches_oracle(expr_dense, expected, rtol=1e-9):
    expected = np.asarray(expected, dtype=np.float64)
    if expected.ndim == 0:
        expected = expected.reshape(1)
    scale = 1.0 + np.abs(expected).max()
    err = np.abs(expr_dense - expected).max() / scale
    assert err <= rtol, f"relative error {err} exceeds {rtol}"
    return err


def random_tiny_dag(rng):
    """A small instance (few ops) for the exhaustive-search comparison."""
    cluster = ClusterState((2,), int(rng.choice([1, 2])), CostParams())
    store = ObjectStore(cluster.k)
    kind = rng.choice(["binary", "chain", "matmul", "xty", "reduce"])

    def mk(shape, grid, seed):
        return g.create(shape, grid, "random", cluster, store, seed=seed)

    s = int(rng.integers(0, 2**31))
    if kind == "binary":
        q = int(rng.choice([1, 2]))
        x = mk((4 * q,), (q,), s)
        y = mk((4 * q,), (q,), s + 1)
        return cluster, store, g.ew_binary("add", x, y)
    if kind == "chain":
        q = int(rng.choice([1, 2]))
        x = mk((4 * q,), (q,), s)
        y = mk((4 * q,), (q,), s + 1)
        return cluster, store, g.ew_unary("neg", g.ew_binary("mul", x, y))
    if kind == "matmul":
        x = mk((4, 4), (2, 1), s)
        y = mk((4, 4), (1, 2), s + 1)
        return cluster, store, g.matmul(x, y)  # 4 products, no reduce
    if kind == "xty":
        q = int(rng.choice([2, 3]))
        x = mk((2 * q, 2), (q, 1), s)
        y = mk((2 * q, 2), (q, 1), s + 1)
        return cluster, store, g.matmul(g.transpose(x), y)  # q products + q-1 adds
    q = int(rng.choice([3, 4]))
    x = mk((2 * q,), (q,), s)
    return cluster, store, g.reduce_blocks(x)  # q-1 adds
