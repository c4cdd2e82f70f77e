"""Schedulers: greedy load-simulated placement and ablation baselines.

A Schedule is an ordered list of placement steps, self-contained enough for
the executor to replay without the graph: each step names its kernel, the
operand objects, the chosen node and worker, the transfers performed, and
the predicted load matrix after the step.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass

import numpy as np

from . import graph as g
from .blocking import block_ids
from .cluster import ClusterState, Transfer, layout_node


class InstanceTooLarge(Exception):
    """Raised when the exhaustive search is asked for too many operations."""


@dataclass
class Action:
    """A placement decision: target node and output size; the exhaustive
    search extends it with the vertex chosen next."""

    node: int
    size: int
    next_vid: int | None = None


@dataclass
class Step:
    index: int
    vid: int
    kind: str
    op: str | None
    node: int
    worker: int
    out_oid: int
    out_size: int
    out_shape: tuple[int, ...]
    operands: list[int]
    tflags: tuple[bool, ...]
    extra: dict
    options: list[int]
    transfers: list[Transfer]
    s_after: list[tuple[int, int, int]]
    depth: int

    def action(self) -> Action:
        return Action(self.node, self.out_size)

    def as_dict(self) -> dict:
        return {
            "vertex": self.vid,
            "node": self.node,
            "worker": self.worker,
            "transfers": [t.as_dict() for t in self.transfers],
            "oid": self.out_oid,
            "kind": self.kind,
            "op": self.op,
            "operands": list(self.operands),
            "out_size": self.out_size,
            "options": list(self.options),
            "depth": self.depth,
        }


@dataclass
class Schedule:
    k: int
    steps: list[Step]
    s_initial: list[tuple[int, int, int]]
    leaf_meta: dict[int, tuple[int, int, int]]
    result: object = None
    final_cost: int = 0

    def inter_node_bytes(self) -> int:
        return sum(t.size for s in self.steps for t in s.transfers)

    def max_mem(self) -> int:
        rows = self.steps[-1].s_after if self.steps else self.s_initial
        return max((m for m, _i, _o in rows), default=0)

    def to_json(self) -> str:
        return json.dumps(
            {
                "k": self.k,
                "s_initial": [list(r) for r in self.s_initial],
                "final_cost": self.final_cost,
                "steps": [s.as_dict() for s in self.steps],
            },
            indent=2,
        )


class _Unit:
    """One schedulable thing: a plain op vertex or one add of a reduce."""

    __slots__ = ("vertex", "pair_index", "operands", "tflags", "kind", "op",
                 "extra", "final")

    def __init__(self, vertex, pair_index, operands, tflags, kind, op, extra, final):
        self.vertex = vertex
        self.pair_index = pair_index
        self.operands = operands
        self.tflags = tflags
        self.kind = kind
        self.op = op
        self.extra = extra
        self.final = final


def count_ops(garr) -> int:
    """Number of schedulable operations (each reduce counts n-1 adds)."""
    n = 0
    for v in garr.all_vertices():
        if v.kind == g.REDUCE:
            n += len(v.children) - 1
        elif v.kind != g.LEAF:
            n += 1
    return n


class _Walk:
    """Dependency bookkeeping over one GraphArray being scheduled."""

    def __init__(self, garr, cluster: ClusterState):
        if garr.transposed:
            raise ValueError("schedule the base array, not a transposed view")
        self.garr = garr
        self.cluster = cluster
        self.vertices = garr.all_vertices()
        self.parents: dict[int, list] = {}
        for v in self.vertices:
            for ch in v.children:
                self.parents.setdefault(ch.vid, []).append(v)
        self.root_bid = {}
        for bid in block_ids(garr.base_grid):
            self.root_bid[garr.roots[bid].vid] = bid
        self.resolved: dict[int, int] = {}
        for v in self.vertices:
            if v.kind == g.LEAF:
                self.resolved[v.vid] = v.oid
        self.reduce_plan: dict[int, list] = {}
        self.reduce_partials: dict[int, list] = {}
        self.reduce_next: dict[int, int] = {}
        self.ready: list = sorted(
            (v for v in self.vertices if self._is_ready(v)), key=lambda v: v.vid
        )

    def _is_ready(self, v) -> bool:
        return (
            v.kind != g.LEAF
            and v.vid not in self.resolved
            and all(ch.vid in self.resolved for ch in v.children)
        )

    def next_unit(self, v) -> _Unit:
        """The schedulable unit for a sampled ready vertex."""
        is_root = v.vid in self.root_bid
        if v.kind != g.REDUCE:
            operands = [self.resolved[ch.vid] for ch in v.children]
            return _Unit(v, None, operands, v.tflags, v.kind, v.op, v.extra, is_root)
        if v.vid not in self.reduce_plan:
            self.reduce_plan[v.vid] = g.pair_reduce(v, self.cluster, self.resolved)
            self.reduce_partials[v.vid] = []
            self.reduce_next[v.vid] = 0
        idx = self.reduce_next[v.vid]
        plan = self.reduce_plan[v.vid]
        pair = plan[idx]
        operands, tflags = [], []
        for ref in (pair.left, pair.right):
            src, i = ref
            if src == "child":
                operands.append(self.resolved[v.children[i].vid])
                tflags.append(v.tflags[i])
            else:
                operands.append(self.reduce_partials[v.vid][i])
                tflags.append(False)
        final = is_root and idx == len(plan) - 1
        return _Unit(v, idx, operands, tuple(tflags), g.REDUCE, v.op, {}, final)

    def options_for(self, unit: _Unit) -> list[int]:
        if unit.final:
            bid = self.root_bid[unit.vertex.vid]
            return [layout_node(bid, self.cluster.node_grid, self.garr.base_grid)]
        sets = [self.cluster.nodes_of(oid) for oid in unit.operands]
        return g.placement_options(unit.kind, sets)

    def commit(self, unit: _Unit, out_oid: int):
        v = unit.vertex
        if unit.pair_index is None:
            self.resolved[v.vid] = out_oid
            self.ready.remove(v)
        else:
            self.reduce_partials[v.vid].append(out_oid)
            self.reduce_next[v.vid] += 1
            if self.reduce_next[v.vid] == len(self.reduce_plan[v.vid]):
                self.resolved[v.vid] = out_oid
                self.ready.remove(v)
        if v.vid in self.resolved:
            for parent in self.parents.get(v.vid, []):
                if parent not in self.ready and self._is_ready(parent):
                    self.ready.append(parent)
            self.ready.sort(key=lambda x: x.vid)


def _materialized(garr, resolved, cluster):
    roots = np.empty(garr.base_grid, dtype=object)
    for bid in block_ids(garr.base_grid):
        old = garr.roots[bid]
        roots[bid] = g.Vertex(cluster.new_vid(), g.LEAF, old.extent,
                              oid=resolved[old.vid])
    return g.GraphArray(garr.base_shape, garr.base_grid, roots, cluster)


def _run(garr, cluster, choose_vertex, choose_node) -> Schedule:
    """Common scheduling loop; strategies pick the vertex and the node."""
    walk = _Walk(garr, cluster)
    s_initial = cluster.snapshot()
    leaf_meta: dict[int, tuple[int, int, int]] = {}
    depths: dict[int, int] = {}
    steps: list[Step] = []
    while walk.ready:
        v = choose_vertex(walk.ready)
        unit = walk.next_unit(v)
        options = walk.options_for(unit)
        node = choose_node(unit, options)
        for oid in unit.operands:
            if oid not in depths and oid not in leaf_meta:
                info = cluster.objects[oid]
                leaf_meta[oid] = (info.home, info.worker, info.size)
        out_size = unit.vertex.out_size
        out_oid, worker, transfers = cluster.transition(unit.operands, out_size, node)
        depth = max((depths.get(oid, -1) + 1 for oid in unit.operands), default=0)
        depths[out_oid] = depth
        steps.append(
            Step(
                index=len(steps),
                vid=unit.vertex.vid,
                kind=unit.kind,
                op=unit.op,
                node=node,
                worker=worker,
                out_oid=out_oid,
                out_size=out_size,
                out_shape=unit.vertex.extent.shape,
                operands=list(unit.operands),
                tflags=tuple(unit.tflags),
                extra=dict(unit.extra),
                options=list(options),
                transfers=transfers,
                s_after=cluster.snapshot(),
                depth=depth,
            )
        )
        walk.commit(unit, out_oid)
    return Schedule(
        k=cluster.k,
        steps=steps,
        s_initial=s_initial,
        leaf_meta=leaf_meta,
        result=_materialized(garr, walk.resolved, cluster),
        final_cost=cluster.cost(),
    )


def lshs(garr, cluster: ClusterState, seed: int = 0) -> Schedule:
    """Greedy scheduler: sample a frontier vertex, place it on the node that
    minimizes max-memory + max-net-in + max-net-out of the simulated state.

    Cost ties break toward the option moving fewer bytes, then the lowest
    node id.  The operation that completes an output root is pinned to the
    hierarchical layout node of its block.
    """
    rng = random.Random(seed)

    def choose_vertex(ready):
        return ready[rng.randrange(len(ready))]

    def choose_node(unit, options):
        best_node, best_key = None, None
        for node in options:
            key = (
                cluster.peek_cost(unit.operands, unit.vertex.out_size, node),
                cluster.pending_transfer_bytes(unit.operands, node),
            )
            if best_key is None or key < best_key:
                best_node, best_key = node, key
        return best_node

    return _run(garr, cluster, choose_vertex, choose_node)


def schedule_roundrobin(garr, cluster: ClusterState) -> Schedule:
    """Topological order, nodes assigned cyclically, locality ignored.

    Root-final operations keep the layout pin so every scheduler leaves
    arrays in the hierarchical layout.
    """
    counter = [0]

    def choose_vertex(ready):
        return ready[0]

    def choose_node(unit, options):
        if unit.final:
            return options[0]
        node = counter[0] % cluster.k
        counter[0] += 1
        return node

    return _run(garr, cluster, choose_vertex, choose_node)


def schedule_random(garr, cluster: ClusterState, seed: int = 0) -> Schedule:
    """Uniform random node per op; root-final ops keep the layout pin."""
    rng = random.Random(seed)

    def choose_vertex(ready):
        return ready[rng.randrange(len(ready))]

    def choose_node(unit, options):
        if unit.final:
            return options[0]
        return rng.randrange(cluster.k)

    return _run(garr, cluster, choose_vertex, choose_node)


# ---------------------------------------------------------------------------
# exhaustive search


class _SimState:
    """Branchable lightweight image of the cluster for the search."""

    __slots__ = ("S", "homes", "sizes", "nodes", "workers", "next_worker", "next_oid")

    def __init__(self, cluster: ClusterState):
        self.S = cluster.S.copy()
        self.homes = {o: i.home for o, i in cluster.objects.items()}
        self.sizes = {o: i.size for o, i in cluster.objects.items()}
        self.nodes = {o: frozenset(i.nodes) for o, i in cluster.objects.items()}
        self.workers = {o: i.worker for o, i in cluster.objects.items()}
        self.next_worker = list(cluster._next_worker)
        self.next_oid = cluster._oid

    def clone(self) -> "_SimState":
        other = object.__new__(_SimState)
        other.S = self.S.copy()
        other.homes = dict(self.homes)
        other.sizes = dict(self.sizes)
        other.nodes = dict(self.nodes)
        other.workers = dict(self.workers)
        other.next_worker = list(self.next_worker)
        other.next_oid = self.next_oid
        return other

    def transition(self, operands, out_size, node, r) -> int:
        for oid in dict.fromkeys(operands):
            if node not in self.nodes[oid]:
                self.S[self.homes[oid], 2] += self.sizes[oid]
                self.S[node, 1] += self.sizes[oid]
                self.S[node, 0] += self.sizes[oid]
                self.nodes[oid] = self.nodes[oid] | {node}
        self.S[node, 0] += out_size
        self.next_oid += 1
        oid = self.next_oid
        self.homes[oid] = node
        self.sizes[oid] = out_size
        self.nodes[oid] = frozenset({node})
        self.workers[oid] = self.next_worker[node] % r
        self.next_worker[node] += 1
        return oid

    def cost(self) -> int:
        return int(self.S[:, 0].max() + self.S[:, 1].max() + self.S[:, 2].max())


class _BranchWalk:
    """Per-branch dependency state for the exhaustive search."""

    __slots__ = ("resolved", "plans", "partials", "nexts")

    def __init__(self, resolved, plans, partials, nexts):
        self.resolved = resolved
        self.plans = plans
        self.partials = partials
        self.nexts = nexts

    def clone(self):
        return _BranchWalk(
            dict(self.resolved),
            dict(self.plans),
            {k: list(v) for k, v in self.partials.items()},
            dict(self.nexts),
        )


def schedule_optimal(garr, cluster: ClusterState, max_ops: int = 8) -> Schedule:
    """Exhaustive minimizer of the terminal objective over all interleavings
    and placements of at most ``max_ops`` operations.

    The action space per vertex is the same option set the greedy scheduler
    sees, including the layout pin on root-final operations.  Branch and
    bound on the monotone objective keeps the search tractable.
    """
    total_ops = count_ops(garr)
    if total_ops > max_ops:
        raise InstanceTooLarge(
            f"instance has {total_ops} operations, limit is {max_ops}"
        )
    if garr.transposed:
        raise ValueError("schedule the base array, not a transposed view")

    vertices = garr.all_vertices()
    op_vertices = [v for v in vertices if v.kind != g.LEAF]
    root_bid = {}
    for bid in block_ids(garr.base_grid):
        root_bid[garr.roots[bid].vid] = bid
    base_resolved = {v.vid: v.oid for v in vertices if v.kind == g.LEAF}

    best: dict = {"cost": None, "seq": None}

    def branch_unit(v, walk: _BranchWalk, sim: _SimState):
        """Operands, kind, finality of v's next unit in this branch."""
        is_root = v.vid in root_bid
        if v.kind != g.REDUCE:
            ops = [walk.resolved[ch.vid] for ch in v.children]
            return ops, v.kind, is_root
        if v.vid not in walk.plans:
            items = []
            for pos, ch in enumerate(v.children):
                oid = walk.resolved[ch.vid]
                items.append(((sim.homes[oid], sim.workers[oid], pos), ("child", pos)))
            walk.plans[v.vid] = g.plan_pairing(items)
            walk.partials[v.vid] = []
            walk.nexts[v.vid] = 0
        pair = walk.plans[v.vid][walk.nexts[v.vid]]
        ops = []
        for ref in (pair.left, pair.right):
            src, i = ref
            if src == "child":
                ops.append(walk.resolved[v.children[i].vid])
            else:
                ops.append(walk.partials[v.vid][i])
        final = is_root and walk.nexts[v.vid] == len(walk.plans[v.vid]) - 1
        return ops, g.REDUCE, final

    def commit(v, walk: _BranchWalk, out_oid):
        if v.kind != g.REDUCE:
            walk.resolved[v.vid] = out_oid
            return
        walk.partials[v.vid].append(out_oid)
        walk.nexts[v.vid] += 1
        if walk.nexts[v.vid] == len(walk.plans[v.vid]):
            walk.resolved[v.vid] = out_oid

    def ready_list(walk: _BranchWalk):
        out = []
        for v in op_vertices:
            if v.vid in walk.resolved:
                continue
            if all(ch.vid in walk.resolved for ch in v.children):
                out.append(v)
        return out

    def search(walk: _BranchWalk, sim: _SimState, seq: list):
        ready = ready_list(walk)
        if not ready:
            c = sim.cost()
            if best["cost"] is None or c < best["cost"]:
                best["cost"], best["seq"] = c, list(seq)
            return
        if best["cost"] is not None and sim.cost() >= best["cost"]:
            return
        for v in ready:
            walk_v = walk.clone()
            sim_probe = sim.clone()
            ops, kind, final = branch_unit(v, walk_v, sim_probe)
            if final:
                options = [layout_node(root_bid[v.vid], cluster.node_grid,
                                       garr.base_grid)]
            else:
                options = g.placement_options(kind, [set(sim_probe.nodes[o]) for o in ops])
            for node in options:
                walk2 = walk_v.clone()
                sim2 = sim_probe.clone()
                out_oid = sim2.transition(ops, v.out_size, node, cluster.r)
                commit(v, walk2, out_oid)
                seq.append((v.vid, node))
                search(walk2, sim2, seq)
                seq.pop()

    init_walk = _BranchWalk(dict(base_resolved), {}, {}, {})
    search(init_walk, _SimState(cluster), [])

    # replay the best action sequence on the real cluster state
    seq = best["seq"] or []
    idx = [0]

    def choose_vertex(ready):
        vid, _node = seq[idx[0]]
        for v in ready:
            if v.vid == vid:
                return v
        raise AssertionError("optimal replay desynchronized")

    def choose_node(unit, options):
        _vid, node = seq[idx[0]]
        idx[0] += 1
        return node

    return _run(garr, cluster, choose_vertex, choose_node)
