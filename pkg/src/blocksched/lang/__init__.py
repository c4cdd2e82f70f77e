"""A small imperative language, its serial interpreter, a translation into
a futures-based process calculus, and a deterministic simulator for the
resulting process system."""

from .astnodes import to_source
from .futures import DeadlockError, FuturesWorld, check_equivalence, eval_futures, oid_of
from .parser import LangSyntaxError, parse
from .serial import BOTTOM, ERROR, eval_serial
from .translate import translate

__all__ = [
    "BOTTOM",
    "DeadlockError",
    "ERROR",
    "FuturesWorld",
    "LangSyntaxError",
    "check_equivalence",
    "eval_futures",
    "oid_of",
    "parse",
    "to_source",
    "translate",
]
