"""Serial interpreter with a divergence budget.

Evaluation follows small-step intuition but is implemented recursively.
``fuel`` bounds the iterations of each while-loop activation and the depth
of nested function applications; exceeding either sends the program state
to bottom (the divergent state), exactly like a bounded-loop semantics.
Both bounds are preserved verbatim by the futures translation, so the two
worlds agree on which programs diverge.

Errors are values: reading an unbound variable or misapplying an operator
yields the error value, and a command consuming an error value drives the
state to bottom.
"""

from __future__ import annotations

from dataclasses import dataclass

from .astnodes import (
    Assign,
    BinOp,
    Bool,
    Call,
    FuncDef,
    If,
    Neg,
    Not,
    Null,
    Num,
    Seq,
    Skip,
    Var,
    While,
)


class _Sentinel:
    def __init__(self, name):
        self._name = name

    def __repr__(self):
        return self._name


ERROR = _Sentinel("error")
BOTTOM = _Sentinel("bottom")

DEFAULT_FUEL = 100_000


@dataclass(frozen=True)
class FuncValue:
    """A function literal closed over the parameter bindings in scope where
    it was evaluated (substitution semantics); globals stay dynamic."""

    func: FuncDef
    captured: tuple[tuple[str, object], ...] = ()


def apply_unop(op: str, v):
    if v is ERROR:
        return ERROR
    if op == "-":
        return -v if type(v) is int else ERROR
    if op == "not":
        return (not v) if type(v) is bool else ERROR
    return ERROR


def apply_binop(op: str, a, b):
    if a is ERROR or b is ERROR:
        return ERROR
    if op in ("+", "-", "*"):
        if type(a) is int and type(b) is int:
            return a + b if op == "+" else a - b if op == "-" else a * b
        return ERROR
    if op == "<":
        return a < b if type(a) is int and type(b) is int else ERROR
    if op == "==":
        if type(a) is type(b) and type(a) in (int, bool):
            return a == b
        if a is None and b is None:
            return True
        return ERROR
    if op in ("and", "or"):
        if type(a) is bool and type(b) is bool:
            return (a and b) if op == "and" else (a or b)
        return ERROR
    return ERROR


class _Bottom(Exception):
    pass


def eval_serial(program, fuel: int = DEFAULT_FUEL):
    """Run a command; returns the final variable store, or BOTTOM."""
    sigma: dict[str, object] = {}
    try:
        _exec(program, sigma, fuel)
    except _Bottom:
        return BOTTOM
    return sigma


def eval_expression(expr, sigma=None, fuel: int = DEFAULT_FUEL):
    """Evaluate one expression against a store; value or ERROR."""
    return _eval(expr, sigma or {}, {}, fuel, 0)


def _exec(c, sigma, fuel):
    if isinstance(c, Skip):
        return
    if isinstance(c, Seq):
        _exec(c.first, sigma, fuel)
        _exec(c.second, sigma, fuel)
        return
    if isinstance(c, Assign):
        v = _eval(c.expr, sigma, {}, fuel, 0)
        if v is ERROR:
            raise _Bottom()
        sigma[c.name] = v
        return
    if isinstance(c, If):
        b = _eval(c.cond, sigma, {}, fuel, 0)
        if type(b) is not bool:
            raise _Bottom()
        _exec(c.then if b else c.els, sigma, fuel)
        return
    if isinstance(c, While):
        iters = 0
        while True:
            b = _eval(c.cond, sigma, {}, fuel, 0)
            if type(b) is not bool:
                raise _Bottom()
            if not b:
                return
            if iters >= fuel:
                raise _Bottom()
            iters += 1
            _exec(c.body, sigma, fuel)
    raise TypeError(f"cannot execute {c!r}")


def _eval(e, sigma, env, fuel, depth):
    if isinstance(e, Num):
        return e.value
    if isinstance(e, Bool):
        return e.value
    if isinstance(e, Null):
        return None
    if isinstance(e, Var):
        if e.name in env:
            return env[e.name]
        if e.name in sigma:
            return sigma[e.name]
        return ERROR
    if isinstance(e, Neg):
        return apply_unop("-", _eval(e.operand, sigma, env, fuel, depth))
    if isinstance(e, Not):
        return apply_unop("not", _eval(e.operand, sigma, env, fuel, depth))
    if isinstance(e, BinOp):
        left = _eval(e.left, sigma, env, fuel, depth)
        if left is ERROR:
            return ERROR
        right = _eval(e.right, sigma, env, fuel, depth)
        return apply_binop(e.op, left, right)
    if isinstance(e, FuncDef):
        return FuncValue(e, tuple(sorted(env.items(), key=lambda kv: kv[0])))
    if isinstance(e, Call):
        target = _eval(e.target, sigma, env, fuel, depth)
        if not isinstance(target, FuncValue):
            return ERROR
        args = []
        for a in e.args:
            v = _eval(a, sigma, env, fuel, depth)
            if v is ERROR:
                return ERROR
            args.append(v)
        return apply_function(target, args, sigma, fuel, depth + 1)
    raise TypeError(f"cannot evaluate {e!r}")


def apply_function(fv: FuncValue, args, sigma, fuel, depth):
    """Apply a function value; exceeding the depth budget is divergence."""
    if depth > fuel:
        return ERROR
    func = fv.func
    if len(args) != len(func.params):
        return ERROR
    env = dict(fv.captured)
    env.update(zip(func.params, args))
    return _eval(func.body, sigma, env, fuel, depth)
