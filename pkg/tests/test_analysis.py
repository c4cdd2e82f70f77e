import math

import pytest

from blocksched.analysis import (
    CompareRow,
    OpProfile,
    compare,
    lb_elementwise,
    lb_inner,
    lb_matmul,
    lb_outer,
    lb_reduce,
    summa_cost,
)
from blocksched.cluster import CostParams, comm_time
from blocksched.executor import execute
from blocksched.instances import (
    elementwise_instance,
    inner_instance,
    matmul_instance,
    outer_instance,
    reduce_instance,
)
from blocksched.scheduler import lshs

PARAMS = CostParams()  # alpha=1, beta=.01, alpha'=.1, beta'=.001, gamma=.05


def prof(family, k, r, n, params=PARAMS):
    return OpProfile(family, k, r, n, params)


class TestFormulas:
    def test_elementwise(self):
        assert lb_elementwise(prof("elementwise", 4, 4, 64)) == pytest.approx(0.8)
        zero = CostParams(gamma=0.0)
        assert lb_elementwise(prof("elementwise", 4, 4, 64, zero)) == 0.0

    def test_reduce(self):
        assert lb_reduce(prof("reduce", 2, 4, 100)) == pytest.approx(2.75)
        assert lb_reduce(prof("reduce", 1, 1, 100)) == pytest.approx(0.0)

    def test_inner(self):
        assert lb_inner(prof("inner", 2, 4, 100)) == pytest.approx(3.35)
        p = prof("inner", 1, 1, 100)
        expected = PARAMS.gamma * (2 * 1 - 1) + PARAMS.r(100)
        assert lb_inner(p) == pytest.approx(expected)

    def test_outer(self):
        assert lb_outer(prof("outer", 4, 4, 100)) == pytest.approx(16.8)
        assert lb_outer(prof("outer", 1, 4, 100)) == pytest.approx(
            PARAMS.gamma * 4
        )
        with pytest.raises(ValueError):
            lb_outer(prof("outer", 2, 1, 10))

    def test_matmul(self):
        assert lb_matmul(prof("matmul", 4, 4, 100)) == pytest.approx(24.2)
        assert lb_matmul(prof("matmul", 1, 1, 100)) == 0.0

    def test_summa(self):
        p = prof("matmul", 4, 4, 100)
        assert summa_cost(p) == pytest.approx(16 * PARAMS.c(100))
        assert summa_cost(prof("matmul", 1, 1, 100)) == 0.0

    def test_summa_vs_matmul_bound_regime(self):
        p = prof("matmul", 16, 32, 10**6)
        assert lb_matmul(p) < summa_cost(p)

    def test_ratio_grows_with_k(self):
        ratios = []
        for k in (4, 16, 64, 256):
            p = prof("matmul", k, 32, 10**6)
            ratios.append(summa_cost(p) / lb_matmul(p))
        assert all(a < b for a, b in zip(ratios, ratios[1:]))


def _simulate(inst, seed=0):
    sched = lshs(inst.expr, inst.cluster, seed=seed)
    execute(sched, inst.store)
    return sched


class TestAttainment:
    @pytest.mark.parametrize("k,r", [(1, 2), (2, 2), (2, 4), (4, 4)])
    def test_elementwise_exact(self, k, r):
        inst = elementwise_instance(k, r, 64)
        sched = _simulate(inst)
        assert sched.inter_node_bytes() == 0
        sim = comm_time(sched, PARAMS, "ray")
        assert sim == pytest.approx(lb_elementwise(inst.profile, mode="ray"))

    @pytest.mark.parametrize("k,r", [(2, 2), (2, 4), (4, 4), (4, 8)])
    def test_reduce_exact(self, k, r):
        inst = reduce_instance(k, r, 100)
        sim = comm_time(_simulate(inst), PARAMS, "ray")
        assert sim == pytest.approx(lb_reduce(inst.profile))

    @pytest.mark.parametrize("k,r", [(2, 2), (2, 4), (4, 4)])
    def test_inner_exact(self, k, r):
        inst = inner_instance(k, r, 8)
        sim = comm_time(_simulate(inst), PARAMS, "ray")
        assert sim == pytest.approx(lb_inner(inst.profile))

    @pytest.mark.parametrize("k", [4, 16])
    def test_outer_exact_one_worker(self, k):
        inst = outer_instance(k, 1, 8)
        sim = comm_time(_simulate(inst), PARAMS, "ray")
        assert sim == pytest.approx(lb_outer(inst.profile))

    @pytest.mark.parametrize("k,r", [(4, 2), (4, 4)])
    def test_outer_transfer_counts(self, k, r):
        inst = outer_instance(k, r, 4)
        sched = _simulate(inst)
        sk = math.isqrt(k)
        sends = {}
        for s in sched.steps:
            for t in s.transfers:
                sends[t.src] = sends.get(t.src, 0) + 1
        diagonal = {(d % sk) * sk + (d % sk) for d in range(sk)}
        for node, count in sends.items():
            assert node in diagonal
            assert count == 2 * (sk - 1) * r
        # the pure communication component matches the bound exactly
        zero_gamma = CostParams(gamma=0.0)
        sim = comm_time(sched, zero_gamma, "ray")
        bound = 2 * (sk - 1) * r * zero_gamma.c(inst.profile.n)
        assert sim == pytest.approx(bound)


class TestNeverBelowBound:
    @pytest.mark.parametrize("k,r", [(1, 1), (2, 2), (4, 2), (4, 4)])
    def test_all_families(self, k, r):
        builders = [
            ("elementwise", elementwise_instance),
            ("reduce", reduce_instance),
            ("inner", inner_instance),
            ("outer", outer_instance),
            ("matmul", matmul_instance),
        ]
        for family, build in builders:
            try:
                inst = build(k, r, 8)
            except ValueError:
                continue
            sched = _simulate(inst)
            row = compare(sched, inst.profile, op=inst.op)
            assert not row.below_bound, f"{family} k={k} r={r} beats its bound"


class TestCompare:
    def test_csv_row(self):
        row = CompareRow("add", "elementwise", 2, 2, 64, 1.0, 1.5)
        assert row.csv() == "add,elementwise,2,2,64,1,1.5,1.5"
        assert not row.below_bound
        assert CompareRow("x", "reduce", 2, 2, 4, 2.0, 1.0).below_bound
