"""Deterministic executor: runs a Schedule with dense float64 kernels.

Execution is logical-time: one step is one scheduled operation plus its
transfers.  The observed per-node load is re-derived from the same rules the
scheduler simulated and must match its prediction exactly, integer for
integer.  Serial loop-nest oracles for every operation family live here too;
they never touch the blocked path.
"""

from __future__ import annotations

import itertools
import math

import numpy as np

MEM, NET_IN, NET_OUT = 0, 1, 2


class MissingObject(KeyError):
    pass


class ObjectStore:
    """Per-node object payloads; append-only, cached copies share payloads."""

    def __init__(self, k: int):
        self.k = k
        self.per_node: list[dict[int, np.ndarray]] = [dict() for _ in range(k)]
        self._payloads: dict[int, np.ndarray] = {}

    def put(self, node: int, oid: int, payload: np.ndarray):
        existing = self._payloads.get(oid)
        if existing is not None and existing is not payload:
            if not np.array_equal(existing, payload):
                raise ValueError(f"object {oid} rebound to a different payload")
            payload = existing
        self._payloads[oid] = payload
        self.per_node[node][oid] = payload

    def get(self, node: int, oid: int) -> np.ndarray:
        try:
            return self.per_node[node][oid]
        except KeyError:
            raise MissingObject(f"object {oid} not present on node {node}") from None

    def payload(self, oid: int) -> np.ndarray:
        try:
            return self._payloads[oid]
        except KeyError:
            raise MissingObject(f"object {oid} never stored") from None

    def copy_between(self, oid: int, src: int, dst: int):
        self.per_node[dst][oid] = self.get(src, oid)


# ---------------------------------------------------------------------------
# kernels


def stable_sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z, dtype=np.float64)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


UNARY_KERNELS = {
    "neg": np.negative,
    "sigmoid": stable_sigmoid,
    "logistic_weight": lambda x: x * (1.0 - x),
}

BINARY_KERNELS = {
    "add": np.add,
    "sub": np.subtract,
    "mul": np.multiply,
}


def apply_kernel(kind, op, blocks, tflags, extra, out_shape):
    args = [b.T if f else b for b, f in zip(blocks, tflags)]
    if kind == "unary":
        out = UNARY_KERNELS[op](args[0])
    elif kind == "binary":
        out = BINARY_KERNELS[op](args[0], args[1])
    elif kind == "reduce":
        out = BINARY_KERNELS[op](args[0], args[1])
    elif kind == "reduce_axis":
        out = np.sum(args[0], axis=extra["axis"])
    elif kind == "matmul":
        out = args[0] @ args[1]
    elif kind == "tensordot":
        out = np.tensordot(args[0], args[1], axes=extra["axes"])
    elif kind == "einsum":
        out = np.einsum(extra["pattern"], *args)
    else:
        raise ValueError(f"unknown kernel kind {kind!r}")
    if out.shape != tuple(out_shape):
        if out.size == math.prod(out_shape):
            out = out.reshape(out_shape)
        else:
            raise ValueError(
                f"kernel shape mismatch: produced {out.shape}, expected {out_shape}"
            )
    return np.asarray(out, dtype=np.float64)


# ---------------------------------------------------------------------------
# trace and execution


class LoadTrace:
    """Per-step, per-node (memory, net in, net out) snapshots."""

    HEADER = "step,node,mem,net_in,net_out"

    def __init__(self):
        self.rows: list[tuple[int, int, int, int, int]] = []

    def record(self, step: int, snapshot):
        for node, (mem, net_in, net_out) in enumerate(snapshot):
            self.rows.append((step, node, mem, net_in, net_out))

    def to_csv(self, path, provenance: dict | None = None):
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            for key, val in (provenance or {}).items():
                fh.write(f"# {key}={val}\n")
            fh.write(self.HEADER + "\n")
            for row in self.rows:
                fh.write(",".join(str(x) for x in row) + "\n")

    def node_series(self, node: int):
        return [(r[2], r[3], r[4]) for r in self.rows if r[1] == node]


class SimulationMismatch(AssertionError):
    """The executed loads diverged from the scheduler's prediction."""


def execute(schedule, store: ObjectStore) -> LoadTrace:
    """Run every step's transfers and kernel; verify predicted loads.

    The store must already hold the schedule's input blocks on their home
    nodes.  Outputs land on the chosen node; transferred operands stay
    cached on the destination, mirroring the cluster-state rule.
    """
    S = np.array(schedule.s_initial, dtype=np.int64).reshape(schedule.k, 3)
    trace = LoadTrace()
    for step in schedule.steps:
        for t in step.transfers:
            store.copy_between(t.obj, t.src, t.dst)
            S[t.src, NET_OUT] += t.size
            S[t.dst, NET_IN] += t.size
            S[t.dst, MEM] += t.size
        blocks = [store.get(step.node, oid) for oid in step.operands]
        out = apply_kernel(step.kind, step.op, blocks, step.tflags, step.extra,
                           step.out_shape)
        S[step.node, MEM] += step.out_size
        store.put(step.node, step.out_oid, out)
        predicted = np.array(step.s_after, dtype=np.int64).reshape(schedule.k, 3)
        if not np.array_equal(S, predicted):
            raise SimulationMismatch(
                f"step {step.index}: observed loads {S.tolist()} != "
                f"predicted {predicted.tolist()}"
            )
        trace.record(step.index, [tuple(int(x) for x in row) for row in S])
    return trace


def to_dense(garr, store: ObjectStore) -> np.ndarray:
    """Assemble a materialized GraphArray into one dense ndarray."""
    from .blocking import block_extent, block_ids

    out = np.zeros(garr.base_shape)
    for bid in block_ids(garr.base_grid):
        v = garr.roots[bid]
        if v.kind != "leaf":
            raise ValueError("array is not materialized")
        ext = block_extent(garr.base_shape, garr.base_grid, bid)
        out[ext.slices()] = store.payload(v.oid)
    return out.T if garr.transposed else out


# ---------------------------------------------------------------------------
# serial oracles (loop-nest over contraction indices, no partitioning)


def oracle_unary(op: str, x) -> np.ndarray:
    return UNARY_KERNELS[op](np.asarray(x, dtype=np.float64))


def oracle_binary(op: str, x, y) -> np.ndarray:
    return BINARY_KERNELS[op](np.asarray(x, dtype=np.float64),
                              np.asarray(y, dtype=np.float64))


def oracle_matmul(a, b) -> np.ndarray:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape[1] != b.shape[0]:
        raise ValueError(f"shape mismatch {a.shape} @ {b.shape}")
    out = np.zeros((a.shape[0], b.shape[1]))
    for h in range(a.shape[1]):
        out += np.multiply.outer(a[:, h], b[h, :])
    return out


def oracle_sum_axis(x, axis: int) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    out = np.zeros(x.shape[:axis] + x.shape[axis + 1:])
    for i in range(x.shape[axis]):
        out += np.take(x, i, axis=axis)
    return out


def oracle_sum_blocks(blocks) -> np.ndarray:
    out = np.zeros_like(np.asarray(blocks[0], dtype=np.float64))
    for b in blocks:
        out += b
    return out


def oracle_tensordot(a, b, axes: int) -> np.ndarray:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    na = a.ndim - axes
    if a.shape[na:] != b.shape[:axes]:
        raise ValueError(f"contracted dims differ: {a.shape} vs {b.shape}")
    out = np.zeros(a.shape[:na] + b.shape[axes:])
    for idx in itertools.product(*(range(d) for d in a.shape[na:])):
        left = a[(slice(None),) * na + idx]
        right = b[idx]
        out += np.multiply.outer(left, right)
    return out


def oracle_mttkrp(x, b, c) -> np.ndarray:
    """out[i, f] = sum_{j,k} x[i,j,k] * b[i,f] * c[j,f]."""
    x = np.asarray(x, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    c = np.asarray(c, dtype=np.float64)
    out = np.zeros((x.shape[0], b.shape[1]))
    for j in range(x.shape[1]):
        for k in range(x.shape[2]):
            out += x[:, j, k][:, None] * b * c[j][None, :]
    return out


# ---------------------------------------------------------------------------
# flat binary array dump


def write_array_binary(path, arr: np.ndarray):
    """Row-major float64 dump with a one-line text header ``shape=AxB``."""
    arr = np.ascontiguousarray(arr, dtype="<f8")
    header = "shape=" + "x".join(str(d) for d in arr.shape) + "\n"
    with open(path, "wb") as fh:
        fh.write(header.encode("ascii"))
        fh.write(arr.tobytes(order="C"))


def read_array_binary(path) -> np.ndarray:
    with open(path, "rb") as fh:
        header = fh.readline().decode("ascii").strip()
        if not header.startswith("shape="):
            raise ValueError(f"bad header {header!r}")
        shape = tuple(int(d) for d in header[len("shape="):].split("x"))
        data = np.frombuffer(fh.read(), dtype="<f8")
    return data.reshape(shape)
