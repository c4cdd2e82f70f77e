"""Builders for benchmark operations and the analysis instance families.

The analysis families reproduce the structured layouts the communication
bounds assume: one block per worker, hierarchical placement, and square
node grids where required.  The bench builder maps CLI-style op names and
shape flags onto expression graphs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from . import graph as g
from .analysis import OpProfile
from .cluster import ClusterState, CostParams
from .executor import ObjectStore


@dataclass
class Instance:
    cluster: ClusterState
    store: ObjectStore
    expr: g.GraphArray
    inputs: list[g.GraphArray]
    profile: OpProfile | None
    op: str


def _mk_cluster(node_grid, workers, params):
    cluster = ClusterState(tuple(node_grid), workers, params or CostParams())
    return cluster, ObjectStore(cluster.k)


def elementwise_instance(k, r, n_block, params=None, arity=2, seed=0) -> Instance:
    """p co-located vector blocks of n_block elements; unary or binary."""
    cluster, store = _mk_cluster((k,), r, params)
    p = k * r
    shape, grid = (p * n_block,), (p,)
    x = g.create(shape, grid, "random", cluster, store, seed=seed)
    if arity == 1:
        expr = g.ew_unary("neg", x)
        inputs = [x]
    else:
        y = g.create(shape, grid, "random", cluster, store, seed=seed + 1)
        expr = g.ew_binary("add", x, y)
        inputs = [x, y]
    prof = OpProfile("elementwise", k, r, n_block, cluster.params)
    return Instance(cluster, store, expr, inputs, prof, "add" if arity == 2 else "neg")


def reduce_instance(k, r, n_block, params=None, seed=0) -> Instance:
    """Sum p equally shaped blocks into one block."""
    cluster, store = _mk_cluster((k,), r, params)
    p = k * r
    x = g.create((p * n_block,), (p,), "random", cluster, store, seed=seed)
    expr = g.reduce_blocks(x)
    prof = OpProfile("reduce", k, r, n_block, cluster.params)
    return Instance(cluster, store, expr, [x], prof, "sum")


def inner_instance(k, r, d, params=None, seed=0) -> Instance:
    """x^T y on square d x d blocks, one block pair per worker."""
    cluster, store = _mk_cluster((k, 1), r, params)
    p = k * r
    shape, grid = (p * d, d), (p, 1)
    x = g.create(shape, grid, "random", cluster, store, seed=seed)
    y = g.create(shape, grid, "random", cluster, store, seed=seed + 1)
    expr = g.matmul(g.transpose(x), y)
    prof = OpProfile("inner", k, r, d * d, cluster.params)
    return Instance(cluster, store, expr, [x, y], prof, "xty")


def outer_instance(k, r, d, params=None, seed=0) -> Instance:
    """x y^T over a square node grid; row partitions tile the diagonal."""
    sk = math.isqrt(k)
    if sk * sk != k:
        raise ValueError(f"outer instance needs square k, got {k}")
    cluster, store = _mk_cluster((sk, sk), r, params)
    gridlen = r * sk
    shape, grid = (gridlen * d, d), (gridlen, 1)
    x = g.create(shape, grid, "random", cluster, store, seed=seed)
    y = g.create(shape, grid, "random", cluster, store, seed=seed + 1)
    expr = g.matmul(x, g.transpose(y))
    prof = OpProfile("outer", k, r, d * d, cluster.params)
    return Instance(cluster, store, expr, [x, y], prof, "xyt")


def matmul_instance(k, r, d, params=None, seed=0) -> Instance:
    """Square matrix product on a sqrt(p) x sqrt(p) grid of d x d blocks."""
    sk, sr = math.isqrt(k), math.isqrt(r)
    if sk * sk != k or sr * sr != r:
        raise ValueError(f"matmul instance needs square k and r, got {k}, {r}")
    cluster, store = _mk_cluster((sk, sk), r, params)
    sp = sk * sr
    shape, grid = (sp * d, sp * d), (sp, sp)
    x = g.create(shape, grid, "random", cluster, store, seed=seed)
    y = g.create(shape, grid, "random", cluster, store, seed=seed + 1)
    expr = g.matmul(x, y)
    prof = OpProfile("matmul", k, r, d * d, cluster.params)
    return Instance(cluster, store, expr, [x, y], prof, "matmul")


FAMILY_BUILDERS = {
    "elementwise": elementwise_instance,
    "reduce": reduce_instance,
    "inner": inner_instance,
    "outer": outer_instance,
    "matmul": matmul_instance,
}


# ---------------------------------------------------------------------------
# CLI bench ops


def parse_dims(text: str) -> tuple[int, ...]:
    """Parse '4x2' (or '4') into a tuple of positive ints."""
    try:
        dims = tuple(int(part) for part in text.lower().split("x"))
    except ValueError:
        raise ValueError(f"bad dimension list {text!r}") from None
    if not dims or any(d < 1 for d in dims):
        raise ValueError(f"bad dimension list {text!r}")
    return dims


def build_bench_op(op, n, d, grid, node_grid, workers, params=None, seed=0,
                   layout="hier") -> Instance:
    """Build one named benchmark expression.

    Shapes: neg/add use an n x d matrix; sum reduces the blocks of an
    n-vector; xty/xyt use two n x d matrices (row grid); matmul multiplies
    two n x n matrices; tensordot contracts d x d trailing/leading axes of
    rank-3 operands; mttkrp contracts a rank-3 n-cube against two n x d
    factors.
    """
    cluster, store = _mk_cluster(node_grid, workers, params)

    def mk(shape, gr, s):
        return g.create(shape, gr, "random", cluster, store, seed=s, layout=layout)

    if op == "neg":
        x = mk((n, d), grid if len(grid) == 2 else (grid[0], 1), seed)
        return Instance(cluster, store, g.ew_unary("neg", x), [x], None, op)
    if op == "add":
        gr = grid if len(grid) == 2 else (grid[0], 1)
        x, y = mk((n, d), gr, seed), mk((n, d), gr, seed + 1)
        return Instance(cluster, store, g.ew_binary("add", x, y), [x, y], None, op)
    if op == "sum":
        q = grid[0]
        if n % q:
            raise ValueError("sum needs the vector length divisible by the grid")
        x = mk((n,), (q,), seed)
        return Instance(cluster, store, g.reduce_blocks(x), [x], None, op)
    if op == "sum_axis":
        gr = grid if len(grid) == 2 else (grid[0], 1)
        x = mk((n, d), gr, seed)
        return Instance(cluster, store, g.sum_axis(x, 0), [x], None, op)
    if op == "xty":
        gr = grid if len(grid) == 2 else (grid[0], 1)
        x, y = mk((n, d), gr, seed), mk((n, d), gr, seed + 1)
        return Instance(cluster, store, g.matmul(g.transpose(x), y), [x, y], None, op)
    if op == "xyt":
        gr = grid if len(grid) == 2 else (grid[0], 1)
        x, y = mk((n, d), gr, seed), mk((n, d), gr, seed + 1)
        return Instance(cluster, store, g.matmul(x, g.transpose(y)), [x, y], None, op)
    if op == "matmul":
        gr = grid if len(grid) == 2 else (grid[0], grid[0])
        x, y = mk((n, n), gr, seed), mk((n, n), gr, seed + 1)
        return Instance(cluster, store, g.matmul(x, y), [x, y], None, op)
    if op == "tensordot":
        gr = grid if len(grid) == 3 else (grid[0], 1, 1)
        x = mk((n, d, d), gr, seed)
        y = mk((d, d, n), (gr[1], gr[2], gr[0]), seed + 1)
        return Instance(cluster, store, g.tensordot(x, y, 2), [x, y], None, op)
    if op == "mttkrp":
        gr = grid if len(grid) == 3 else (grid[0], 1, 1)
        x = mk((n, n, n), gr, seed)
        b = mk((n, d), (gr[0], 1), seed + 1)
        c = mk((n, d), (gr[1], 1), seed + 2)
        expr = g.einsum("ijk,if,jf->if", x, b, c)
        return Instance(cluster, store, expr, [x, b, c], None, op)
    raise ValueError(f"unknown op {op!r}")


BENCH_OPS = ("neg", "add", "sum", "sum_axis", "xty", "xyt", "matmul",
             "tensordot", "mttkrp")
