"""Structural translation from the serial language to the futures language.

Commands keep their shape (conditions are wrapped in a get); literals become
puts, operators and calls become remote calls, and function definitions
become remote definitions with their bodies untouched.
"""

from __future__ import annotations

from .astnodes import (
    Assign,
    BinOp,
    Bool,
    Call,
    Cmd,
    FuncDef,
    Get,
    If,
    Neg,
    Not,
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
)


def translate(node):
    if isinstance(node, Cmd):
        return _cmd(node)
    return _expr(node)


def _cmd(c):
    if isinstance(c, Skip):
        return Skip()
    if isinstance(c, Seq):
        return Seq(_cmd(c.first), _cmd(c.second))
    if isinstance(c, Assign):
        return Assign(c.name, _expr(c.expr))
    if isinstance(c, If):
        return If(Get(_expr(c.cond)), _cmd(c.then), _cmd(c.els))
    if isinstance(c, While):
        return While(Get(_expr(c.cond)), _cmd(c.body))
    raise TypeError(f"cannot translate {c!r}")


def _expr(e):
    if isinstance(e, (Num, Bool, Null)):
        return Put(e)
    if isinstance(e, Var):
        return e
    if isinstance(e, FuncDef):
        return RemoteDef(e)
    if isinstance(e, Neg):
        return RemoteCall(RemoteOp("-", 1), (_expr(e.operand),))
    if isinstance(e, Not):
        return RemoteCall(RemoteOp("not", 1), (_expr(e.operand),))
    if isinstance(e, BinOp):
        return RemoteCall(RemoteOp(e.op, 2), (_expr(e.left), _expr(e.right)))
    if isinstance(e, Call):
        return RemoteCall(_expr(e.target), tuple(_expr(a) for a in e.args))
    # already-futures forms are fixed points
    if isinstance(e, (Put, Get, RemoteDef, RemoteOp, RemoteCall)):
        return e
    raise TypeError(f"cannot translate {e!r}")
