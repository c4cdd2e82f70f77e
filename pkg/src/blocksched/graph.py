"""Computation DAGs over block-partitioned arrays.

A GraphArray is a grid of DAG roots, one per output block.  Creation
operations materialize immediately into the object store and register their
placement with the cluster state; numerical operations only build vertices.
Transpose is a zero-cost view consumed by the next operation.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .blocking import (
    BlockExtent,
    Grid,
    Shape,
    block_extent,
    block_ids,
    validate_grid,
)
from .cluster import ClusterState

LEAF = "leaf"
UNARY = "unary"
BINARY = "binary"
MATMUL = "matmul"
TENSORDOT = "tensordot"
EINSUM = "einsum"
REDUCE = "reduce"
REDUCE_AXIS = "reduce_axis"

EINSUM_MATMUL = "ik,kj->ij"
EINSUM_MTTKRP = "ijk,if,jf->if"


class Vertex:
    """One computation-DAG node producing a single block."""

    __slots__ = ("vid", "kind", "op", "children", "tflags", "extent", "extra", "oid")

    def __init__(self, vid, kind, extent, op=None, children=(), tflags=None,
                 extra=None, oid=None):
        self.vid = vid
        self.kind = kind
        self.op = op
        self.children = tuple(children)
        self.tflags = tuple(tflags) if tflags is not None else (False,) * len(self.children)
        self.extent = extent
        self.extra = extra or {}
        self.oid = oid
        if self.out_size <= 0:
            raise ValueError(f"vertex {vid} has empty output block")
        if kind == LEAF and self.children:
            raise ValueError("leaf vertices have no children")
        if kind == REDUCE and len(self.children) < 2:
            raise ValueError("reduce vertices need at least two children")

    @property
    def out_size(self) -> int:
        return self.extent.size

    def __repr__(self):
        return f"Vertex({self.vid}, {self.kind}, out={self.extent.shape})"


class GraphArray:
    """A grid of computation roots tiling a dense array.

    ``roots`` are stored in base orientation; ``transposed`` marks a lazy
    rank-2 transpose view that the next operation fuses away.  The owning
    cluster is threaded through so derived arrays can mint vertex ids.
    """

    def __init__(self, shape: Shape, grid: Grid, roots, cluster: ClusterState,
                 transposed: bool = False):
        self.base_shape = tuple(shape)
        self.base_grid = tuple(grid)
        self.roots = roots
        self.cluster = cluster
        self.transposed = transposed

    @property
    def shape(self) -> Shape:
        return self.base_shape[::-1] if self.transposed else self.base_shape

    @property
    def grid(self) -> Grid:
        return self.base_grid[::-1] if self.transposed else self.base_grid

    def block(self, bid) -> tuple[Vertex, bool]:
        """Root vertex for a view-coordinate block id, plus transpose flag."""
        if self.transposed:
            return self.roots[bid[::-1]], True
        return self.roots[bid], False

    def block_ids(self):
        return block_ids(self.grid)

    @property
    def T(self) -> "GraphArray":
        return transpose(self)

    def all_vertices(self) -> list[Vertex]:
        """Every distinct vertex reachable from the roots, parents last."""
        seen: dict[int, Vertex] = {}
        order: list[Vertex] = []

        def visit(v: Vertex):
            if v.vid in seen:
                return
            seen[v.vid] = v
            for ch in v.children:
                visit(ch)
            order.append(v)

        for bid in block_ids(self.base_grid):
            visit(self.roots[bid])
        return order

    def is_materialized(self) -> bool:
        return all(v.kind == LEAF for v in self.all_vertices())

    # operator sugar
    def __add__(self, other):
        return ew_binary("add", self, other)

    def __sub__(self, other):
        return ew_binary("sub", self, other)

    def __mul__(self, other):
        return ew_binary("mul", self, other)

    def __neg__(self):
        return ew_unary("neg", self)

    def __matmul__(self, other):
        return matmul(self, other)


def _roots_array(grid: Grid):
    return np.empty(grid, dtype=object)


# ---------------------------------------------------------------------------
# creation


def create(shape, grid, init, cluster: ClusterState, store, seed=None, layout="hier"):
    """Materialize a block-partitioned array and place it on the cluster.

    ``init`` is one of "zeros", "ones", "random".  Placement follows the
    hierarchical layout unless ``layout`` is "roundrobin".
    """
    shape, grid = tuple(shape), tuple(grid)
    validate_grid(shape, grid)
    rng = np.random.default_rng(seed)
    roots = _roots_array(grid)
    for bid in block_ids(grid):
        ext = block_extent(shape, grid, bid)
        if init == "zeros":
            payload = np.zeros(ext.shape)
        elif init == "ones":
            payload = np.ones(ext.shape)
        elif init == "random":
            payload = rng.standard_normal(ext.shape)
        else:
            raise ValueError(f"unknown init {init!r}")
        oid, node, _ = cluster.place_created(bid, grid, ext.size, layout)
        store.put(node, oid, payload)
        roots[bid] = Vertex(cluster.new_vid(), LEAF, ext, oid=oid)
    return GraphArray(shape, grid, roots, cluster)


def from_dense(data, grid, cluster: ClusterState, store, layout="hier"):
    """Partition an in-memory dense array onto the cluster."""
    data = np.asarray(data, dtype=np.float64)
    shape, grid = data.shape, tuple(grid)
    validate_grid(shape, grid)
    roots = _roots_array(grid)
    for bid in block_ids(grid):
        ext = block_extent(shape, grid, bid)
        oid, node, _ = cluster.place_created(bid, grid, ext.size, layout)
        store.put(node, oid, data[ext.slices()].copy())
        roots[bid] = Vertex(cluster.new_vid(), LEAF, ext, oid=oid)
    return GraphArray(shape, grid, roots, cluster)


# ---------------------------------------------------------------------------
# elementwise and reductions


def ew_unary(op: str, x: GraphArray) -> GraphArray:
    """Apply ``op`` to every block; same shape and grid."""
    cl = _cluster_of(x)
    roots = _roots_array(x.grid)
    for bid in block_ids(x.grid):
        child, flag = x.block(bid)
        ext = block_extent(x.shape, x.grid, bid)
        roots[bid] = Vertex(cl.new_vid(), UNARY, ext, op=op, children=[child], tflags=[flag])
    return GraphArray(x.shape, x.grid, roots, cl)


def ew_binary(op: str, x: GraphArray, y: GraphArray) -> GraphArray:
    """Blockwise binary op; grids must match, trailing axes may broadcast.

    An operand axis of extent 1 (with grid 1) broadcasts against the other
    operand, which covers column-vector times matrix scaling.
    """
    if len(x.shape) != len(y.shape):
        raise ValueError(f"rank mismatch {x.shape} vs {y.shape}")
    out_shape, out_grid = [], []
    for a, (sx, sy, gx, gy) in enumerate(zip(x.shape, y.shape, x.grid, y.grid)):
        if sx == sy:
            if gx != gy:
                raise ValueError(f"grid mismatch on axis {a}: {x.grid} vs {y.grid}")
            out_shape.append(sx)
            out_grid.append(gx)
        elif sx == 1 and gx == 1:
            out_shape.append(sy)
            out_grid.append(gy)
        elif sy == 1 and gy == 1:
            out_shape.append(sx)
            out_grid.append(gx)
        else:
            raise ValueError(f"shape mismatch on axis {a}: {x.shape} vs {y.shape}")
    out_shape, out_grid = tuple(out_shape), tuple(out_grid)
    cl = _cluster_of(x)
    roots = _roots_array(out_grid)
    for bid in block_ids(out_grid):
        bx = tuple(min(c, g - 1) for c, g in zip(bid, x.grid))
        by = tuple(min(c, g - 1) for c, g in zip(bid, y.grid))
        cx, fx = x.block(bx)
        cy, fy = y.block(by)
        ext = block_extent(out_shape, out_grid, bid)
        roots[bid] = Vertex(cl.new_vid(), BINARY, ext, op=op, children=[cx, cy], tflags=[fx, fy])
    return GraphArray(out_shape, out_grid, roots, cl)


def sum_axis(x: GraphArray, axis: int) -> GraphArray:
    """Sum along ``axis``: blockwise axis-sum, then add across that axis."""
    rank = len(x.shape)
    if not 0 <= axis < rank:
        raise ValueError(f"axis {axis} invalid for rank {rank}")
    if rank < 2:
        raise ValueError("sum_axis requires rank >= 2")
    out_shape = x.shape[:axis] + x.shape[axis + 1:]
    out_grid = x.grid[:axis] + x.grid[axis + 1:]
    cl = _cluster_of(x)
    roots = _roots_array(out_grid)
    for bid in block_ids(out_grid):
        ext = block_extent(out_shape, out_grid, bid)
        partials = []
        for i in range(x.grid[axis]):
            src = bid[:axis] + (i,) + bid[axis:]
            child, flag = x.block(src)
            partials.append(
                Vertex(cl.new_vid(), REDUCE_AXIS, ext, op="add",
                       children=[child], tflags=[flag], extra={"axis": axis})
            )
        if len(partials) == 1:
            roots[bid] = partials[0]
        else:
            roots[bid] = Vertex(cl.new_vid(), REDUCE, ext, op="add", children=partials)
    return GraphArray(out_shape, out_grid, roots, cl)


def reduce_blocks(x: GraphArray) -> GraphArray:
    """Sum all blocks of ``x`` elementwise into one block.

    All blocks must share a shape.  With a single block this is a no-op and
    ``x`` is returned unchanged.
    """
    ids = x.block_ids()
    shapes = {block_extent(x.shape, x.grid, b).shape for b in ids}
    if len(shapes) != 1:
        raise ValueError("reduce_blocks requires identically shaped blocks")
    if len(ids) == 1:
        return x
    cl = _cluster_of(x)
    out_shape = next(iter(shapes))
    out_grid = (1,) * len(out_shape)
    ext = BlockExtent(tuple((0, s) for s in out_shape))
    children, flags = [], []
    for bid in ids:
        ch, fl = x.block(bid)
        children.append(ch)
        flags.append(fl)
    root = Vertex(cl.new_vid(), REDUCE, ext, op="add", children=children, tflags=flags)
    roots = _roots_array(out_grid)
    roots[tuple([0] * len(out_grid))] = root
    return GraphArray(out_shape, out_grid, roots, cl)


# ---------------------------------------------------------------------------
# contractions


def matmul(x: GraphArray, y: GraphArray) -> GraphArray:
    """Blocked matrix product: out(i,j) = sum_h x(i,h) @ y(h,j)."""
    if len(x.shape) != 2 or len(y.shape) != 2:
        raise ValueError("matmul requires rank-2 operands")
    if x.shape[1] != y.shape[0]:
        raise ValueError(f"inner dims differ: {x.shape} @ {y.shape}")
    if x.grid[1] != y.grid[0]:
        raise ValueError(f"inner grids differ: {x.grid} @ {y.grid}")
    q = x.grid[1]
    out_shape = (x.shape[0], y.shape[1])
    out_grid = (x.grid[0], y.grid[1])
    cl = _cluster_of(x)
    roots = _roots_array(out_grid)
    for i, j in block_ids(out_grid):
        ext = block_extent(out_shape, out_grid, (i, j))
        prods = []
        for h in range(q):
            cx, fx = x.block((i, h))
            cy, fy = y.block((h, j))
            prods.append(
                Vertex(cl.new_vid(), MATMUL, ext, children=[cx, cy], tflags=[fx, fy])
            )
        if q == 1:
            roots[i, j] = prods[0]
        else:
            roots[i, j] = Vertex(cl.new_vid(), REDUCE, ext, op="add", children=prods)
    return GraphArray(out_shape, out_grid, roots, cl)


def transpose(x: GraphArray) -> GraphArray:
    """Lazy transpose: a view with flipped flags, fused by the consumer."""
    if len(x.base_shape) != 2:
        raise ValueError("transpose requires a rank-2 array")
    return GraphArray(x.base_shape, x.base_grid, x.roots, x.cluster,
                      transposed=not x.transposed)


def tensordot(x: GraphArray, y: GraphArray, axes: int) -> GraphArray:
    """Contract the trailing ``axes`` of x with the leading ``axes`` of y."""
    if x.transposed or y.transposed:
        raise ValueError("tensordot does not accept transposed views")
    rx, ry = len(x.shape), len(y.shape)
    if not 1 <= axes <= min(rx, ry):
        raise ValueError(f"axes={axes} invalid for ranks {rx}, {ry}")
    if x.shape[rx - axes:] != y.shape[:axes]:
        raise ValueError(f"contracted dims differ: {x.shape} vs {y.shape}")
    if x.grid[rx - axes:] != y.grid[:axes]:
        raise ValueError(f"contracted grids differ: {x.grid} vs {y.grid}")
    out_shape = x.shape[: rx - axes] + y.shape[axes:]
    out_grid = x.grid[: rx - axes] + y.grid[axes:]
    scalar = len(out_shape) == 0
    if scalar:
        out_shape, out_grid = (1,), (1,)
    nx = rx - axes
    cl = _cluster_of(x)
    roots = _roots_array(out_grid)
    contracted = list(itertools.product(*(range(g) for g in x.grid[rx - axes:])))
    for bid in block_ids(out_grid):
        ox = () if scalar else bid[:nx]
        oy = () if scalar else bid[nx:]
        ext = block_extent(out_shape, out_grid, bid)
        prods = []
        for c in contracted:
            vx = x.roots[ox + c]
            vy = y.roots[c + oy]
            prods.append(
                Vertex(cl.new_vid(), TENSORDOT, ext, children=[vx, vy],
                       extra={"axes": axes})
            )
        if len(prods) == 1:
            roots[bid] = prods[0]
        else:
            roots[bid] = Vertex(cl.new_vid(), REDUCE, ext, op="add", children=prods)
    return GraphArray(out_shape, out_grid, roots, cl)


def einsum(pattern: str, *operands: GraphArray) -> GraphArray:
    """Einstein summation for the two supported patterns.

    "ik,kj->ij" lowers to matmul.  "ijk,if,jf->if" contracts j and k of a
    rank-3 operand against two factor matrices, blockwise with a final sum.
    """
    pattern = pattern.replace(" ", "")
    if pattern == EINSUM_MATMUL:
        if len(operands) != 2:
            raise ValueError("ik,kj->ij takes two operands")
        return matmul(*operands)
    if pattern != EINSUM_MTTKRP:
        raise ValueError(f"unsupported einsum pattern {pattern!r}")
    if len(operands) != 3:
        raise ValueError("ijk,if,jf->if takes three operands")
    x, b, c = operands
    if any(o.transposed for o in operands):
        raise ValueError("einsum does not accept transposed views")
    if len(x.shape) != 3 or len(b.shape) != 2 or len(c.shape) != 2:
        raise ValueError("operand ranks must be 3, 2, 2")
    if x.shape[0] != b.shape[0] or x.grid[0] != b.grid[0]:
        raise ValueError("axis i mismatch between first and second operands")
    if x.shape[1] != c.shape[0] or x.grid[1] != c.grid[0]:
        raise ValueError("axis j mismatch between first and third operands")
    if b.shape[1] != c.shape[1] or b.grid[1] != c.grid[1]:
        raise ValueError("axis f mismatch between factor operands")
    out_shape = (x.shape[0], b.shape[1])
    out_grid = (x.grid[0], b.grid[1])
    cl = _cluster_of(x)
    roots = _roots_array(out_grid)
    for bi, bf in block_ids(out_grid):
        ext = block_extent(out_shape, out_grid, (bi, bf))
        prods = []
        for bj in range(x.grid[1]):
            for bk in range(x.grid[2]):
                prods.append(
                    Vertex(cl.new_vid(), EINSUM, ext,
                           children=[x.roots[bi, bj, bk], b.roots[bi, bf], c.roots[bj, bf]],
                           extra={"pattern": EINSUM_MTTKRP})
                )
        if len(prods) == 1:
            roots[bi, bf] = prods[0]
        else:
            roots[bi, bf] = Vertex(cl.new_vid(), REDUCE, ext, op="add", children=prods)
    return GraphArray(out_shape, out_grid, roots, cl)


# ---------------------------------------------------------------------------
# scheduling support


def frontier(x: GraphArray) -> list[Vertex]:
    """Operation vertices whose children are all leaves; empty if all-leaf."""
    out = []
    for v in x.all_vertices():
        if v.kind != LEAF and all(ch.kind == LEAF for ch in v.children):
            out.append(v)
    return out


def placement_options(kind: str, operand_nodes: list[set[int]]) -> list[int]:
    """Candidate nodes for one operation given its operands' node sets.

    Single-operand ops go where the operand is.  Binary elementwise ops and
    reduce pairs collapse to the co-located nodes when the operands share
    any; contractions offer the union of all operand nodes.
    """
    if not operand_nodes:
        raise ValueError("operation has no operands")
    if kind in (UNARY, REDUCE_AXIS) or len(operand_nodes) == 1:
        return sorted(operand_nodes[0])
    if kind in (BINARY, REDUCE):
        common = set.intersection(*operand_nodes)
        if common:
            return sorted(common)
        return sorted(set.union(*operand_nodes))
    return sorted(set.union(*operand_nodes))


@dataclass(frozen=True)
class PlannedPair:
    """One binary add of a reduce tree; operands reference children or
    earlier pairs of the same plan."""

    left: tuple[str, int]
    right: tuple[str, int]
    tier: str


def _pair_rounds(refs: list, plan: list, tier: str):
    """Balanced pairing: combine adjacent operands round by round."""
    while len(refs) > 1:
        nxt = []
        for i in range(0, len(refs) - 1, 2):
            plan.append(PlannedPair(refs[i], refs[i + 1], tier))
            nxt.append(("partial", len(plan) - 1))
        if len(refs) % 2:
            nxt.append(refs[-1])
        refs = nxt
    return refs[0]


def plan_pairing(items: list) -> list[PlannedPair]:
    """Build the n-1 adds from ((node, worker, pos), ref) operand records.

    Pairing priority is same worker, then same node, then cross node; ties
    break on ascending (node, worker, pos); trees are balanced per tier.
    """
    items = sorted(items, key=lambda it: it[0])
    plan: list[PlannedPair] = []
    node_groups: dict[int, list] = {}
    for (node, worker, _pos), ref in items:
        node_groups.setdefault(node, []).append((worker, ref))
    node_survivors = []
    for node in sorted(node_groups):
        per_worker: dict[int, list] = {}
        for worker, ref in node_groups[node]:
            per_worker.setdefault(worker, []).append(ref)
        survivors = [
            _pair_rounds(per_worker[w], plan, "worker") for w in sorted(per_worker)
        ]
        node_survivors.append(_pair_rounds(survivors, plan, "node"))
    _pair_rounds(node_survivors, plan, "cross")
    assert len(plan) == len(items) - 1
    return plan


def pair_reduce(v: Vertex, cluster: ClusterState, resolved=None) -> list[PlannedPair]:
    """Order the n-1 adds of a reduce by locality: worker, node, then cross.

    Children must be materialized, either as leaves or through the
    ``resolved`` vid-to-oid map a scheduler maintains.
    """
    if v.kind != REDUCE:
        raise ValueError("pair_reduce expects a reduce vertex")
    items = []
    for pos, ch in enumerate(v.children):
        if resolved is not None and ch.vid in resolved:
            oid = resolved[ch.vid]
        elif ch.kind == LEAF and ch.oid is not None:
            oid = ch.oid
        else:
            raise ValueError("pair_reduce requires materialized children")
        info = cluster.objects[oid]
        items.append(((info.home, info.worker, pos), ("child", pos)))
    return plan_pairing(items)


def dump_graph(x: GraphArray, cluster: ClusterState | None = None) -> list[dict]:
    """JSON-ready adjacency list of the DAG, children before parents."""
    rows = []
    for v in x.all_vertices():
        placement = None
        if cluster is not None and v.kind != LEAF:
            sets = []
            ok = True
            for ch in v.children:
                if ch.kind == LEAF and ch.oid in cluster.objects:
                    sets.append(cluster.nodes_of(ch.oid))
                else:
                    ok = False
            if ok and sets:
                placement = placement_options(v.kind, sets)
        elif cluster is not None and v.oid in cluster.objects:
            placement = sorted(cluster.nodes_of(v.oid))
        rows.append(
            {
                "id": v.vid,
                "kind": v.kind,
                "op": v.op,
                "children": [ch.vid for ch in v.children],
                "out_size": v.out_size,
                "placement": placement,
            }
        )
    return rows


def _cluster_of(x: GraphArray) -> ClusterState:
    return x.cluster
