"""Closed-form communication-time formulas and simulation comparison.

Formulas take an OpProfile describing the instance family: p = k*r worker
blocks of n elements on k nodes with r workers each.  All logs are base 2
(tree broadcast/reduce).  `compare` tabulates a simulated schedule against
its family's bound and flags any simulation that beats the bound, which
would indicate a modeling bug.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .cluster import CostParams, comm_time


@dataclass
class OpProfile:
    family: str
    k: int
    r: int
    n: int
    params: CostParams

    def __post_init__(self):
        if self.k < 1 or self.r < 1 or self.n < 1:
            raise ValueError("k, r, n must be positive")

    @property
    def p(self) -> int:
        return self.k * self.r


def _log2(x: float) -> float:
    return math.log2(x)


def lb_elementwise(profile: OpProfile, arity: int = 2, mode: str = "bound") -> float:
    """gamma*p dispatches, zero transfer; ray mode adds one store handoff."""
    del arity  # unary and binary share the bound
    t = profile.params.gamma * profile.p
    if mode == "ray":
        t += profile.params.r(profile.n)
    return t


def lb_reduce(profile: OpProfile) -> float:
    """gamma*(p-1) + log2(r)*R(n) + log2(k)*C(n)."""
    pa = profile.params
    return (
        pa.gamma * (profile.p - 1)
        + _log2(profile.r) * pa.r(profile.n)
        + _log2(profile.k) * pa.c(profile.n)
    )


def lb_inner(profile: OpProfile) -> float:
    """gamma*(2p-1) + log2(k)*C(n) + (1+log2(r))*R(n)."""
    pa = profile.params
    return (
        pa.gamma * (2 * profile.p - 1)
        + _log2(profile.k) * pa.c(profile.n)
        + (1 + _log2(profile.r)) * pa.r(profile.n)
    )


def lb_outer(profile: OpProfile) -> float:
    """gamma*p + 2*(sqrt(k)-1)*r*C(n); requires square k."""
    sk = math.isqrt(profile.k)
    if sk * sk != profile.k:
        raise ValueError(f"outer-product bound needs square k, got {profile.k}")
    pa = profile.params
    return pa.gamma * profile.p + 2 * (sk - 1) * profile.r * pa.c(profile.n)


def lb_matmul(profile: OpProfile) -> float:
    """(sqrt(k) + log2(sqrt(k)))*r*C(n) + log2(sqrt(r))*R(n).

    The first factor is the diagonal-simplified form of (k-1)/sqrt(k) +
    log2(sqrt(k)); at k=1 the exact form is zero (no inter-node traffic),
    so the simplification is not applied there.
    """
    pa = profile.params
    sk = math.sqrt(profile.k)
    sr = math.sqrt(profile.r)
    inter = (sk + _log2(sk)) if profile.k > 1 else 0.0
    return inter * profile.r * pa.c(profile.n) + _log2(sr) * pa.r(profile.n)


def summa_cost(profile: OpProfile) -> float:
    """2*sqrt(kr)*log2(sqrt(kr))*C(n): two tree broadcasts per step."""
    pa = profile.params
    sp = math.sqrt(profile.p)
    return 2 * sp * _log2(sp) * pa.c(profile.n)


BOUNDS = {
    "elementwise": lb_elementwise,
    "reduce": lb_reduce,
    "inner": lb_inner,
    "outer": lb_outer,
    "matmul": lb_matmul,
}

# families where the greedy scheduler attains the bound exactly
ATTAINED = ("elementwise", "reduce", "inner", "outer")

_REL_EPS = 1e-9


@dataclass
class CompareRow:
    op: str
    family: str
    k: int
    r: int
    n: int
    bound_s: float
    sim_s: float

    @property
    def ratio(self) -> float:
        return self.sim_s / self.bound_s if self.bound_s > 0 else math.inf

    @property
    def below_bound(self) -> bool:
        return self.sim_s < self.bound_s * (1 - _REL_EPS)

    def csv(self) -> str:
        return (
            f"{self.op},{self.family},{self.k},{self.r},{self.n},"
            f"{self.bound_s:.9g},{self.sim_s:.9g},{self.ratio:.9g}"
        )


CSV_HEADER = "op,family,k,r,n,bound_s,sim_s,ratio"


def compare(schedule, profile: OpProfile, op: str | None = None,
            mode: str = "ray") -> CompareRow:
    """One comparison row: simulated communication time vs the bound."""
    if profile.family not in BOUNDS:
        raise ValueError(f"unknown family {profile.family!r}")
    if profile.family == "elementwise":
        bound = lb_elementwise(profile, mode=mode)
    else:
        bound = BOUNDS[profile.family](profile)
    sim = comm_time(schedule, profile.params, mode=mode)
    return CompareRow(
        op=op or profile.family,
        family=profile.family,
        k=profile.k,
        r=profile.r,
        n=profile.n,
        bound_s=bound,
        sim_s=sim,
    )
