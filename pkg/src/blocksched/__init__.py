"""Block-partitioned array engine with load-simulated greedy scheduling.

The engine builds computation DAGs over block-partitioned dense arrays,
places every operation on a simulated multi-node cluster with an explicit
communication and memory cost model, and executes the resulting schedule
with real float64 kernels.  A companion mini-language subsystem translates
a serial imperative language into a futures-based process calculus and
checks the translation's correctness executably.
"""

__version__ = "0.1.0"

from .blocking import auto_grid, block_extent, divup
from .cluster import ClusterState, CostParams, comm_time, layout_node, layout_worker
from .executor import ObjectStore, execute, to_dense
from .graph import (
    GraphArray,
    create,
    einsum,
    ew_binary,
    ew_unary,
    from_dense,
    frontier,
    matmul,
    pair_reduce,
    reduce_blocks,
    sum_axis,
    tensordot,
    transpose,
)
from .scheduler import (
    Schedule,
    lshs,
    schedule_optimal,
    schedule_random,
    schedule_roundrobin,
)

__all__ = [
    "ClusterState",
    "CostParams",
    "GraphArray",
    "ObjectStore",
    "Schedule",
    "auto_grid",
    "block_extent",
    "comm_time",
    "create",
    "divup",
    "einsum",
    "ew_binary",
    "ew_unary",
    "execute",
    "from_dense",
    "frontier",
    "layout_node",
    "layout_worker",
    "lshs",
    "matmul",
    "pair_reduce",
    "reduce_blocks",
    "schedule_optimal",
    "schedule_random",
    "schedule_roundrobin",
    "sum_axis",
    "tensordot",
    "to_dense",
    "transpose",
]
