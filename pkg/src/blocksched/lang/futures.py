"""Deterministic simulator for the futures process system.

One driver runs the translated program; k workers execute remote calls; a
write process serializes store writes and one read process per requester
serves gets.  Processes communicate over unbounded FIFO channels; each
simulator step fires one enabled process transition, chosen by a seeded
RNG, so a seed fixes one interleaving.

The store only grows.  A task evaluating to the error value poisons the
store (bottom), after which reads return error and the driver state
follows to bottom.
"""

from __future__ import annotations

import hashlib
import random
from collections import deque

from .astnodes import (
    Assign,
    Bool,
    FuncDef,
    Get,
    If,
    Null,
    Num,
    Put,
    RemoteCall,
    RemoteDef,
    RemoteOp,
    Seq,
    Skip,
    Var,
    While,
    print_expr,
)
from .serial import (
    BOTTOM,
    DEFAULT_FUEL,
    ERROR,
    FuncValue,
    apply_binop,
    apply_unop,
    apply_function,
)


class DeadlockError(RuntimeError):
    pass


class _WorldBottom(Exception):
    pass


# -- object ids -------------------------------------------------------------


def _canon_value(v) -> str:
    if v is None:
        return "null"
    if type(v) is bool:
        return f"bool:{v}"
    if type(v) is int:
        return f"int:{v}"
    if isinstance(v, FuncValue):
        env = ",".join(f"{k}={_canon_value(x)}" for k, x in v.captured)
        return f"fn:{print_expr(v.func)}|{env}"
    if isinstance(v, FuncDef):
        return "fn:" + print_expr(v)
    raise TypeError(f"cannot hash value {v!r}")


def _canon_fdesc(fdesc) -> str:
    if isinstance(fdesc, RemoteOp):
        return f"op:{fdesc.op}/{fdesc.arity}"
    if isinstance(fdesc, FuncDef):
        return "fn:" + print_expr(fdesc)
    raise TypeError(f"cannot hash callee {fdesc!r}")


def oid_of(x) -> str:
    """Stable 64-bit content hash of a value or of (callee, arg oids)."""
    if isinstance(x, tuple) and len(x) == 2 and isinstance(x[1], (list, tuple)):
        fname, arg_oids = x
        key = fname if isinstance(fname, str) else _canon_fdesc(fname)
        canon = "call:" + key + ":" + ",".join(arg_oids)
    else:
        canon = "val:" + _canon_value(x)
    return hashlib.blake2b(canon.encode("utf-8"), digest_size=8).hexdigest()


# -- channels ----------------------------------------------------------------


class Chan:
    """FIFO with an allowed-writer check (runtime channel discipline)."""

    __slots__ = ("name", "writers", "items")

    def __init__(self, name: str, writers: set[str]):
        self.name = name
        self.writers = writers
        self.items = deque()

    def push(self, writer: str, item):
        if writer not in self.writers:
            raise AssertionError(
                f"process {writer} may not write channel {self.name}"
            )
        self.items.append(item)

    def pop(self):
        return self.items.popleft()

    def __len__(self):
        return len(self.items)


# -- remote values -----------------------------------------------------------


class RemoteValue:
    """A remote function bound in the driver store."""

    __slots__ = ("desc",)

    def __init__(self, desc):
        self.desc = desc  # FuncDef or RemoteOp

    def __eq__(self, other):
        return isinstance(other, RemoteValue) and self.desc == other.desc

    def __repr__(self):
        return f"RemoteValue({_canon_fdesc(self.desc)})"


# -- worker-side evaluation ---------------------------------------------------


def _worker_eval(fdesc, o_ret, arg_oids, fuel):
    """Generator: fetch args with gets, apply the function, return result."""
    args = []
    failed = False
    for oid in arg_oids:
        v = yield ("get", oid)
        if v is ERROR:
            failed = True
        args.append(v)
    if failed:
        return (o_ret, ERROR)
    if isinstance(fdesc, RemoteOp):
        if len(args) != fdesc.arity:
            return (o_ret, ERROR)
        if fdesc.arity == 1:
            return (o_ret, apply_unop(fdesc.op, args[0]))
        return (o_ret, apply_binop(fdesc.op, args[0], args[1]))
    result = apply_function(FuncValue(fdesc), args, {}, fuel, 1)
    return (o_ret, result)


class _Worker:
    def __init__(self, index: int):
        self.index = index
        self.gen = None
        self.started = False
        self.waiting = False

    @property
    def idle(self) -> bool:
        return self.gen is None


class _Reader:
    def __init__(self, index: int):
        self.index = index
        self.waiting_oid = None


# -- the world ----------------------------------------------------------------


class FuturesWorld:
    """One program execution: processes, channels, store, and statistics."""

    def __init__(self, program, k: int = 1, seed: int = 0, fuel: int = DEFAULT_FUEL):
        if k < 1:
            raise ValueError("need at least one worker")
        self.k = k
        self.fuel = fuel
        self.rng = random.Random(seed)
        self.mu: dict | object = {}
        self.sigma: dict | object = {}
        self.alpha = [Chan(f"alpha_{i}", {"driver" if i == 0 else f"w{i}"})
                      for i in range(k + 1)]
        self.beta = [None] + [Chan(f"beta_{i}", {"driver"}) for i in range(1, k + 1)]
        self.gamma_req = [
            Chan(f"gamma_req_{i}", {"driver" if i == 0 else f"w{i}"})
            for i in range(k + 1)
        ]
        self.gamma_resp = [Chan(f"gamma_resp_{i}", {f"sr{i}"}) for i in range(k + 1)]
        self.workers = [_Worker(i) for i in range(1, k + 1)]
        self.readers = [_Reader(i) for i in range(k + 1)]
        self.driver_gen = self._drive_program(program)
        self.driver_started = False
        self.driver_done = False
        self.driver_waiting = False
        self.driver_pending = None
        self.steps = 0
        self.store_writes = 0
        self.max_store_size = 0
        self.violations: list[str] = []

    # -- driver program --

    def _drive_program(self, program):
        yield from self._drive_cmd(program)

    def _drive_cmd(self, c):
        if isinstance(c, Skip):
            return
        elif isinstance(c, Seq):
            yield from self._drive_cmd(c.first)
            yield from self._drive_cmd(c.second)
        elif isinstance(c, Assign):
            v = yield from self._drive_expr(c.expr)
            if v is ERROR:
                raise _WorldBottom()
            self.sigma[c.name] = v
        elif isinstance(c, If):
            b = yield from self._drive_expr(c.cond)
            if type(b) is not bool:
                raise _WorldBottom()
            yield from self._drive_cmd(c.then if b else c.els)
        elif isinstance(c, While):
            iters = 0
            while True:
                b = yield from self._drive_expr(c.cond)
                if type(b) is not bool:
                    raise _WorldBottom()
                if not b:
                    return
                if iters >= self.fuel:
                    raise _WorldBottom()
                iters += 1
                yield from self._drive_cmd(c.body)
        else:
            raise TypeError(f"driver cannot execute {c!r}")

    def _drive_expr(self, e):
        """Evaluate a futures expression on the driver; yields effects.

        Results are object ids for store-producing forms, plain values for
        gets, and remote values for remote definitions.
        """
        if isinstance(e, Var):
            if isinstance(self.sigma, dict) and e.name in self.sigma:
                return self.sigma[e.name]
            return ERROR
        if isinstance(e, Put):
            v = _literal_value(e.expr)
            oid = oid_of(v)
            result = yield ("put", oid, v)
            return result
        if isinstance(e, Get):
            target = yield from self._drive_expr(e.expr)
            if not isinstance(target, str):
                return ERROR
            value = yield ("get", target)
            return value
        if isinstance(e, RemoteDef):
            return RemoteValue(e.func)
        if isinstance(e, RemoteOp):
            return RemoteValue(e)
        if isinstance(e, RemoteCall):
            target = yield from self._drive_expr(e.target)
            if isinstance(target, RemoteValue):
                fdesc = target.desc
            else:
                return ERROR
            arg_oids = []
            for a in e.args:
                r = yield from self._drive_expr(a)
                if not isinstance(r, str):
                    return ERROR
                arg_oids.append(r)
            o_ret = oid_of((fdesc, arg_oids))
            result = yield ("rcall", fdesc, o_ret, arg_oids)
            return result
        raise TypeError(f"driver cannot evaluate {e!r}")

    # -- process transitions --

    def _driver_enabled(self) -> bool:
        if self.driver_done:
            return False
        if self.driver_waiting:
            return len(self.gamma_resp[0]) > 0
        return True

    def _step_driver(self):
        send_value = None
        if self.driver_waiting:
            send_value = self.gamma_resp[0].pop()
            self.driver_waiting = False
        else:
            send_value = self.driver_pending
        self.driver_pending = None
        try:
            if not self.driver_started:
                self.driver_started = True
                effect = next(self.driver_gen)
            else:
                effect = self.driver_gen.send(send_value)
        except StopIteration:
            self.driver_done = True
            return
        except _WorldBottom:
            self.sigma = BOTTOM
            self.mu = BOTTOM
            self.driver_done = True
            return
        kind = effect[0]
        if kind == "put":
            _k, oid, value = effect
            self.alpha[0].push("driver", (oid, value))
            self.driver_pending = oid
        elif kind == "rcall":
            _k, fdesc, o_ret, arg_oids = effect
            i = 1 + self.rng.randrange(self.k)
            self.beta[i].push("driver", (fdesc, o_ret, tuple(arg_oids)))
            self.driver_pending = o_ret
        elif kind == "get":
            _k, oid = effect
            self.gamma_req[0].push("driver", oid)
            self.driver_waiting = True
        else:
            raise AssertionError(f"unknown driver effect {effect!r}")

    def _worker_enabled(self, w: _Worker) -> bool:
        if w.idle:
            return len(self.beta[w.index]) > 0
        if w.waiting:
            return len(self.gamma_resp[w.index]) > 0
        return True

    def _step_worker(self, w: _Worker):
        name = f"w{w.index}"
        if w.idle:
            fdesc, o_ret, arg_oids = self.beta[w.index].pop()
            w.gen = _worker_eval(fdesc, o_ret, arg_oids, self.fuel)
            w.started = False
            w.waiting = False
            return
        try:
            if not w.started:
                w.started = True
                effect = next(w.gen)
            else:
                value = self.gamma_resp[w.index].pop()
                w.waiting = False
                effect = w.gen.send(value)
        except StopIteration as stop:
            o_ret, result = stop.value
            self.alpha[w.index].push(name, (o_ret, result))
            w.gen = None
            return
        kind, oid = effect
        assert kind == "get"
        self.gamma_req[w.index].push(name, oid)
        w.waiting = True

    def _reader_enabled(self, r: _Reader) -> bool:
        if r.waiting_oid is None:
            return len(self.gamma_req[r.index]) > 0
        return self.mu is BOTTOM or r.waiting_oid in self.mu

    def _step_reader(self, r: _Reader):
        if r.waiting_oid is None:
            r.waiting_oid = self.gamma_req[r.index].pop()
            return
        if self.mu is BOTTOM:
            value = ERROR
        else:
            value = self.mu[r.waiting_oid]
        self.gamma_resp[r.index].push(f"sr{r.index}", value)
        r.waiting_oid = None

    def _writer_enabled(self) -> bool:
        return any(len(ch) > 0 for ch in self.alpha)

    def _step_writer(self):
        ready = [i for i, ch in enumerate(self.alpha) if len(ch) > 0]
        i = ready[self.rng.randrange(len(ready))]
        oid, value = self.alpha[i].pop()
        if self.mu is BOTTOM:
            return
        if value is ERROR:
            self.mu = BOTTOM
            return
        if oid in self.mu:
            if self.mu[oid] != value:
                self.violations.append(f"object {oid} rebound")
            return
        self.mu[oid] = value
        self.store_writes += 1
        if len(self.mu) < self.max_store_size:
            self.violations.append("store shrank")
        self.max_store_size = max(self.max_store_size, len(self.mu))

    # -- scheduling loop --

    def enabled_processes(self) -> list[str]:
        out = []
        if self._driver_enabled():
            out.append("driver")
        for w in self.workers:
            if self._worker_enabled(w):
                out.append(f"w{w.index}")
        for r in self.readers:
            if self._reader_enabled(r):
                out.append(f"sr{r.index}")
        if self._writer_enabled():
            out.append("sw")
        return out

    def quiescent(self) -> bool:
        if not self.driver_done:
            return False
        if self.sigma is BOTTOM:
            return True
        if any(len(ch) for ch in self.alpha):
            return False
        if any(ch is not None and len(ch) for ch in self.beta):
            return False
        if any(len(ch) for ch in self.gamma_req + self.gamma_resp):
            return False
        if any(not w.idle for w in self.workers):
            return False
        if any(r.waiting_oid is not None for r in self.readers):
            return False
        return True

    def step(self):
        names = self.enabled_processes()
        if not names:
            raise DeadlockError("no process can make progress")
        name = names[self.rng.randrange(len(names))]
        if name == "driver":
            self._step_driver()
        elif name == "sw":
            self._step_writer()
        elif name.startswith("sr"):
            self._step_reader(self.readers[int(name[2:])])
        else:
            self._step_worker(self.workers[int(name[1:]) - 1])
        self.steps += 1

    def run(self, max_steps: int = 10_000_000):
        while not self.quiescent():
            if self.steps >= max_steps:
                raise RuntimeError("simulation exceeded the step budget")
            self.step()
        if self.mu is BOTTOM:
            self.sigma = BOTTOM
        return self.sigma, self.mu


def _literal_value(e):
    if isinstance(e, Num):
        return e.value
    if isinstance(e, Bool):
        return e.value
    if isinstance(e, Null):
        return None
    if isinstance(e, FuncDef):
        return FuncValue(e)
    raise TypeError(f"put expects a literal, got {e!r}")


def eval_futures(program, k: int = 1, seed: int = 0, fuel: int = DEFAULT_FUEL):
    """Run a translated program to quiescence; returns (sigma, mu)."""
    world = FuturesWorld(program, k=k, seed=seed, fuel=fuel)
    return world.run()


def check_equivalence(sigma_serial, sigma_fut, mu) -> bool:
    """Serial and futures outcomes agree: both diverged, or every serial
    binding is reachable through the driver store and the object store."""
    if sigma_serial is BOTTOM or sigma_fut is BOTTOM or mu is BOTTOM:
        return sigma_serial is BOTTOM and sigma_fut is BOTTOM and mu is BOTTOM
    for name, value in sigma_serial.items():
        if name not in sigma_fut:
            return False
        bound = sigma_fut[name]
        if isinstance(value, FuncValue):
            if isinstance(bound, RemoteValue):
                if not (
                    isinstance(bound.desc, FuncDef)
                    and bound.desc == value.func
                    and not value.captured
                ):
                    return False
                continue
        if isinstance(bound, str):
            if bound not in mu or mu[bound] != value:
                return False
            continue
        return False
    return True
