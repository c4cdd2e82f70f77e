"""Simulated cluster state: load accounting, data layout, and time model.

Loads are tracked in array-element counts (integers).  The matrix ``S`` has
one row per node and columns (memory, net in, net out).  ``comm_time``
converts a finished schedule into seconds using the latency/bandwidth
parameters; everything before that point is exact integer accounting.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, fields

import numpy as np

from .blocking import BlockId, Grid

MEM, NET_IN, NET_OUT = 0, 1, 2


@dataclass
class CostParams:
    """Latency/bandwidth parameters of the communication time model.

    ``alpha``/``beta`` price an inter-node message, ``alpha_prime`` /
    ``beta_prime`` the implicit shared-store handoff within a node, and
    ``alpha_dprime``/``beta_dprime`` a worker-to-worker copy within a node.
    ``gamma`` is the per-task dispatch latency of the driver.  Expected
    ordering: alpha >> alpha_dprime > alpha_prime (same for the betas).
    """

    alpha: float = 1.0
    beta: float = 0.01
    alpha_prime: float = 0.1
    beta_prime: float = 0.001
    alpha_dprime: float = 0.5
    beta_dprime: float = 0.005
    gamma: float = 0.05
    intranode_discount: float = 1.0

    def c(self, n: float) -> float:
        """Seconds to move n elements between two nodes."""
        return self.alpha + self.beta * n

    def r(self, n: float) -> float:
        """Seconds of shared-store handoff for n elements within a node."""
        return self.alpha_prime + self.beta_prime * n

    def d(self, n: float) -> float:
        """Seconds to copy n elements between workers of one node."""
        return (self.alpha_dprime + self.beta_dprime * n) * self.intranode_discount

    @classmethod
    def from_file(cls, path: str) -> "CostParams":
        """Read ``key = value`` lines; '#' starts a comment; keys optional."""
        values: dict[str, float] = {}
        names = {f.name for f in fields(cls)}
        with open(path, "r", encoding="utf-8") as fh:
            for lineno, raw in enumerate(fh, start=1):
                line = raw.split("#", 1)[0].strip()
                if not line:
                    continue
                if "=" not in line:
                    raise ValueError(f"{path}:{lineno}: expected 'key = value'")
                key, _, val = line.partition("=")
                key = key.strip()
                if key not in names:
                    raise ValueError(f"{path}:{lineno}: unknown key {key!r}")
                values[key] = float(val.strip())
        return cls(**values)

    def as_dict(self) -> dict[str, float]:
        return {f.name: getattr(self, f.name) for f in fields(self)}


def _folded_coords(block_id: BlockId, node_grid: Grid) -> tuple[int, ...]:
    """Fold a block id onto the rank of the node grid.

    Singleton grid axes carry no placement information, so a block id is
    first reduced to its non-degenerate coordinates (the owning grid is
    implied by the caller dropping coords of extent-1 axes beforehand; here
    we only adapt rank).  A single coordinate is repeated across all node
    grid axes so 1-D partitions tile an n-D node grid along its diagonal;
    longer ids are truncated.
    """
    rank = len(node_grid)
    if len(block_id) == 1:
        return block_id * rank
    if len(block_id) >= rank:
        return block_id[:rank]
    return block_id + (block_id[-1],) * (rank - len(block_id))


def layout_node(block_id: BlockId, node_grid: Grid, grid: Grid | None = None) -> int:
    """Cyclic block-to-node mapping: ell = (i % g1)*g2 + (j % g2) in 2-D.

    If the partition ``grid`` is given, its singleton axes are dropped from
    the block id first, so e.g. a (q, 1) column partition distributes like a
    1-D partition.
    """
    if grid is not None:
        kept = tuple(c for c, g in zip(block_id, grid) if g > 1)
        block_id = kept if kept else (0,)
    coords = _folded_coords(block_id, node_grid)
    node = 0
    for c, g in zip(coords, node_grid):
        node = node * g + (c % g)
    return node


def layout_worker(
    block_id: BlockId, grid: Grid, node_grid: Grid, workers_per_node: int
) -> int:
    """Round-robin worker for a created block, in row-major block order."""
    target = layout_node(block_id, node_grid, grid)
    seen = 0
    from .blocking import block_ids as _bids

    for bid in _bids(grid):
        if bid == block_id:
            return seen % workers_per_node
        if layout_node(bid, node_grid, grid) == target:
            seen += 1
    raise ValueError(f"block id {block_id} not in grid {grid}")


@dataclass
class ObjInfo:
    """Placement record for one stored object."""

    size: int
    home: int
    worker: int
    nodes: set[int] = field(default_factory=set)


@dataclass
class Transfer:
    obj: int
    src: int
    dst: int
    size: int

    def as_dict(self) -> dict[str, int]:
        return {"object": self.obj, "src": self.src, "dst": self.dst, "size": self.size}


class ClusterState:
    """Node grid, per-node load matrix, and the object-to-node map.

    The state is single-owner: the scheduling loop mutates it, nothing else.
    Objects are never evicted; a transferred object stays cached on the
    receiving node.
    """

    def __init__(
        self,
        node_grid: Grid,
        workers_per_node: int,
        params: CostParams | None = None,
    ):
        if len(node_grid) == 0 or any(g < 1 for g in node_grid):
            raise ValueError(f"bad node grid {node_grid}")
        if workers_per_node < 1:
            raise ValueError("workers_per_node must be >= 1")
        self.node_grid = tuple(node_grid)
        self.r = int(workers_per_node)
        self.k = math.prod(self.node_grid)
        self.params = params or CostParams()
        self.S = np.zeros((self.k, 3), dtype=np.int64)
        self.objects: dict[int, ObjInfo] = {}
        self._next_worker = [0] * self.k
        self._flat_rr = 0
        self._oid = 0
        self._vid = 0

    # -- id minting -------------------------------------------------------

    def new_oid(self) -> int:
        self._oid += 1
        return self._oid

    def new_vid(self) -> int:
        self._vid += 1
        return self._vid

    # -- object placement --------------------------------------------------

    def register_object(self, size: int, node: int, worker: int | None = None) -> int:
        """Record a freshly created object of ``size`` elements on ``node``."""
        if not 0 <= node < self.k:
            raise ValueError(f"node {node} out of range")
        if size < 1:
            raise ValueError("object size must be positive")
        if worker is None:
            worker = self._next_worker[node] % self.r
        self._next_worker[node] += 1
        oid = self.new_oid()
        self.objects[oid] = ObjInfo(size=size, home=node, worker=worker, nodes={node})
        self.S[node, MEM] += size
        return oid

    def place_created(self, block_id: BlockId, grid: Grid, size: int, layout: str) -> tuple[int, int, int]:
        """Place one created block; returns (oid, node, worker).

        ``layout`` is "hier" for the cyclic hierarchical mapping or
        "roundrobin" for flat round-robin over all workers in creation order.
        """
        if layout == "hier":
            node = layout_node(block_id, self.node_grid, grid)
        elif layout == "roundrobin":
            w = self._flat_rr % (self.k * self.r)
            self._flat_rr += 1
            node = w // self.r
        else:
            raise ValueError(f"unknown layout {layout!r}")
        oid = self.register_object(size, node)
        info = self.objects[oid]
        return oid, node, info.worker

    def nodes_of(self, oid: int) -> set[int]:
        return self.objects[oid].nodes

    # -- transitions -------------------------------------------------------

    def peek_cost(self, operands: list[int], out_size: int, node: int) -> int:
        """Objective value after hypothetically placing the op on ``node``."""
        S = self.S.copy()
        for oid in dict.fromkeys(operands):
            info = self.objects[oid]
            if node not in info.nodes:
                S[info.home, NET_OUT] += info.size
                S[node, NET_IN] += info.size
                S[node, MEM] += info.size
        S[node, MEM] += out_size
        return int(S[:, MEM].max() + S[:, NET_IN].max() + S[:, NET_OUT].max())

    def pending_transfer_bytes(self, operands: list[int], node: int) -> int:
        """Elements that placing on ``node`` would move between nodes."""
        return sum(
            self.objects[oid].size
            for oid in dict.fromkeys(operands)
            if node not in self.objects[oid].nodes
        )

    def transition(self, operands: list[int], out_size: int, node: int) -> tuple[int, int, list[Transfer]]:
        """Apply one placement: pull missing operands, store the output.

        Returns (output oid, output worker, transfers performed).  Each
        missing operand is shipped from its home node and stays cached on
        the destination.
        """
        if not 0 <= node < self.k:
            raise ValueError(f"node {node} out of range")
        transfers = []
        for oid in dict.fromkeys(operands):
            info = self.objects[oid]
            if node not in info.nodes:
                self.S[info.home, NET_OUT] += info.size
                self.S[node, NET_IN] += info.size
                self.S[node, MEM] += info.size
                info.nodes.add(node)
                transfers.append(Transfer(obj=oid, src=info.home, dst=node, size=info.size))
        out_oid = self.register_object(out_size, node)
        return out_oid, self.objects[out_oid].worker, transfers

    # -- objective ----------------------------------------------------------

    def cost(self) -> int:
        """max memory + max net-in + max net-out over all nodes."""
        return int(
            self.S[:, MEM].max() + self.S[:, NET_IN].max() + self.S[:, NET_OUT].max()
        )

    def snapshot(self) -> list[tuple[int, int, int]]:
        return [tuple(int(x) for x in row) for row in self.S]


def comm_time(schedule, params: CostParams, mode: str = "ray") -> float:
    """Seconds of dispatch plus communication for a finished schedule.

    gamma is paid serially per dispatched task.  Steps are grouped into
    rounds by dependency depth; within a round, each node sends and receives
    in parallel with other nodes (its own messages serialize), store
    handoffs on distinct workers overlap, and network time overlaps handoff
    time.  In "ray" mode every task pays a shared-store write of its output;
    in "dask" mode a task pays a worker-to-worker copy for each co-resident
    operand held by a different worker.
    """
    if mode not in ("ray", "dask"):
        raise ValueError(f"unknown mode {mode!r}")
    steps = schedule.steps
    total = params.gamma * len(steps)
    by_round: dict[int, list] = {}
    for step in steps:
        by_round.setdefault(step.depth, []).append(step)
    producers = {s.out_oid: s for s in steps}
    for depth in sorted(by_round):
        send: dict[int, float] = {}
        recv: dict[int, float] = {}
        intra: dict[tuple[int, int], float] = {}
        for step in by_round[depth]:
            for t in step.transfers:
                send[t.src] = send.get(t.src, 0.0) + params.c(t.size)
                recv[t.dst] = recv.get(t.dst, 0.0) + params.c(t.size)
            key = (step.node, step.worker)
            if mode == "ray":
                intra[key] = intra.get(key, 0.0) + params.r(step.out_size)
            else:
                moved = {t.obj for t in step.transfers}
                for oid in dict.fromkeys(step.operands):
                    if oid in moved:
                        continue
                    prod = producers.get(oid)
                    if prod is not None:
                        home, worker, size = prod.node, prod.worker, prod.out_size
                    else:
                        home, worker, size = schedule.leaf_meta[oid]
                    if home == step.node and worker != step.worker:
                        intra[key] = intra.get(key, 0.0) + params.d(size)
        inter_t = max(list(send.values()) + list(recv.values()), default=0.0)
        intra_t = max(intra.values(), default=0.0)
        total += max(inter_t, intra_t)
    return total
