"""AST nodes for the serial language and its futures extension, plus the
canonical printer (parse of printed source is a fixed point)."""

from __future__ import annotations

from dataclasses import dataclass


# -- commands ---------------------------------------------------------------


class Cmd:
    pass


@dataclass(frozen=True)
class Skip(Cmd):
    pass


@dataclass(frozen=True)
class Seq(Cmd):
    first: Cmd
    second: Cmd


@dataclass(frozen=True)
class Assign(Cmd):
    name: str
    expr: "Expr"


@dataclass(frozen=True)
class If(Cmd):
    cond: "Expr"
    then: Cmd
    els: Cmd


@dataclass(frozen=True)
class While(Cmd):
    cond: "Expr"
    body: Cmd


# -- expressions ------------------------------------------------------------


class Expr:
    pass


@dataclass(frozen=True)
class Num(Expr):
    value: int


@dataclass(frozen=True)
class Bool(Expr):
    value: bool


@dataclass(frozen=True)
class Null(Expr):
    pass


@dataclass(frozen=True)
class Var(Expr):
    name: str


@dataclass(frozen=True)
class Neg(Expr):
    operand: Expr


@dataclass(frozen=True)
class Not(Expr):
    operand: Expr


@dataclass(frozen=True)
class BinOp(Expr):
    op: str  # one of + - * == < and or
    left: Expr
    right: Expr


@dataclass(frozen=True)
class FuncDef(Expr):
    name: str
    params: tuple[str, ...]
    body: Expr


@dataclass(frozen=True)
class Call(Expr):
    target: Expr  # Var or FuncDef
    args: tuple[Expr, ...]


# -- futures extension ------------------------------------------------------


@dataclass(frozen=True)
class Put(Expr):
    expr: Expr


@dataclass(frozen=True)
class Get(Expr):
    expr: Expr


@dataclass(frozen=True)
class RemoteDef(Expr):
    func: FuncDef


@dataclass(frozen=True)
class RemoteOp(Expr):
    """A remote builtin such as R(+); applies the operator to its args."""

    op: str
    arity: int


@dataclass(frozen=True)
class RemoteCall(Expr):
    target: Expr  # Var, RemoteDef, or RemoteOp
    args: tuple[Expr, ...]


# -- printer ----------------------------------------------------------------

# binding strength; higher binds tighter
_LEVEL = {"or": 1, "and": 2, "==": 4, "<": 4, "+": 5, "-": 5, "*": 6}
_NOT_LEVEL = 3
_NEG_LEVEL = 7
_ATOM_LEVEL = 9


def _expr_level(e: Expr) -> int:
    if isinstance(e, BinOp):
        return _LEVEL[e.op]
    if isinstance(e, Not):
        return _NOT_LEVEL
    if isinstance(e, Neg):
        return _NEG_LEVEL
    return _ATOM_LEVEL


def _wrap(e: Expr, minimum: int) -> str:
    s = print_expr(e)
    if _expr_level(e) < minimum:
        return f"({s})"
    return s


def print_expr(e: Expr) -> str:
    if isinstance(e, Num):
        return str(e.value)
    if isinstance(e, Bool):
        return "True" if e.value else "False"
    if isinstance(e, Null):
        return "null"
    if isinstance(e, Var):
        return e.name
    if isinstance(e, Neg):
        return "-" + _wrap(e.operand, _NEG_LEVEL)
    if isinstance(e, Not):
        return "not " + _wrap(e.operand, _NOT_LEVEL)
    if isinstance(e, BinOp):
        lvl = _LEVEL[e.op]
        # left associative: the right child needs strictly tighter binding
        return f"{_wrap(e.left, lvl)} {e.op} {_wrap(e.right, lvl + 1)}"
    if isinstance(e, FuncDef):
        return f"{e.name}({', '.join(e.params)}){{{print_expr(e.body)}}}"
    if isinstance(e, Call):
        args = ", ".join(print_expr(a) for a in e.args)
        return f"{_wrap(e.target, _ATOM_LEVEL)}({args})"
    if isinstance(e, Put):
        return f"put({print_expr(e.expr)})"
    if isinstance(e, Get):
        return f"get({print_expr(e.expr)})"
    if isinstance(e, RemoteDef):
        return f"R({print_expr(e.func)})"
    if isinstance(e, RemoteOp):
        return f"R({e.op})"
    if isinstance(e, RemoteCall):
        args = ", ".join(print_expr(a) for a in e.args)
        return f"{_wrap(e.target, _ATOM_LEVEL)}({args})"
    raise TypeError(f"cannot print {e!r}")


def print_cmd(c: Cmd) -> str:
    if isinstance(c, Skip):
        return "skip"
    if isinstance(c, Seq):
        return f"{print_cmd(c.first)}; {print_cmd(c.second)}"
    if isinstance(c, Assign):
        return f"{c.name} = {print_expr(c.expr)}"
    if isinstance(c, If):
        return (
            f"if {print_expr(c.cond)} then {{ {print_cmd(c.then)} }}"
            f" else {{ {print_cmd(c.els)} }}"
        )
    if isinstance(c, While):
        return f"while {print_expr(c.cond)} do {{ {print_cmd(c.body)} }}"
    raise TypeError(f"cannot print {c!r}")


def to_source(node) -> str:
    if isinstance(node, Cmd):
        return print_cmd(node)
    return print_expr(node)
