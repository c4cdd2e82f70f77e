import pytest

from _langgen import random_diverging_program, random_expression, random_program
from blocksched.lang.astnodes import Assign, Get, Num, Put, Var
from blocksched.lang.futures import (
    Chan,
    DeadlockError,
    FuturesWorld,
    check_equivalence,
    eval_futures,
    oid_of,
)
from blocksched.lang.parser import parse
from blocksched.lang.serial import BOTTOM, eval_serial
from blocksched.lang.translate import translate


class TestOids:
    def test_value_hash_stable(self):
        assert oid_of(5) == oid_of(5)
        assert oid_of(5) != oid_of(6)
        assert oid_of(True) != oid_of(1)

    def test_call_hash_distinguishes_function(self):
        a = oid_of(("f", [oid_of(1)]))
        b = oid_of(("g", [oid_of(1)]))
        assert a != b

    def test_memoized_calls_share_store_entry(self):
        sigma, mu = eval_futures(translate(parse("x = 1 + 2; y = 1 + 2")), k=2, seed=0)
        assert sigma["x"] == sigma["y"]
        assert len(mu) == 3  # the two literals and one sum

    def test_identical_puts_share_entry(self):
        sigma, mu = eval_futures(translate(parse("x = 4 + 4")), k=1, seed=0)
        assert len(mu) == 2  # put(4) stored once, plus the sum


class TestBasicPrograms:
    def test_remote_add(self):
        prog = parse("x = 1 + 2")
        sigma_s = eval_serial(prog)
        sigma_f, mu = eval_futures(translate(prog), k=1, seed=0)
        assert mu[sigma_f["x"]] == 3
        assert check_equivalence(sigma_s, sigma_f, mu)

    def test_get_of_put_is_identity(self):
        world = FuturesWorld(Assign("x", Get(Put(Num(5)))), k=1, seed=0)
        sigma, _mu = world.run()
        assert sigma["x"] == 5

    def test_nonterminating_loop_bottoms_both_stores(self):
        prog = translate(parse("while True do { skip }"))
        sigma, mu = eval_futures(prog, k=1, seed=3, fuel=40)
        assert sigma is BOTTOM and mu is BOTTOM

    def test_worker_error_poisons_store(self):
        # infinite recursion inside a task seals the error value
        prog = translate(parse("f0 = f(n){f0(n)}; x = f0(1)"))
        sigma, mu = eval_futures(prog, k=2, seed=1, fuel=30)
        assert sigma is BOTTOM and mu is BOTTOM

    def test_branching(self):
        prog = parse("if 1 < 2 then x = 1 else x = 2; y = x + 1")
        sigma_s = eval_serial(prog)
        for k in (1, 2, 4):
            sigma_f, mu = eval_futures(translate(prog), k=k, seed=k)
            assert check_equivalence(sigma_s, sigma_f, mu)

    def test_deterministic_per_seed(self):
        prog = translate(parse("x = 0; while x < 3 do { x = x + 1 }"))
        a = eval_futures(prog, k=3, seed=9)
        b = eval_futures(prog, k=3, seed=9)
        assert a == b


class TestInstrumentation:
    def test_channel_writer_discipline(self):
        ch = Chan("beta_1", {"driver"})
        ch.push("driver", 1)
        with pytest.raises(AssertionError):
            ch.push("w1", 2)

    def test_no_violations_on_random_runs(self):
        for seed in range(10):
            prog = translate(random_program(seed))
            world = FuturesWorld(prog, k=2, seed=seed, fuel=100)
            world.run()
            assert world.violations == []
            if world.mu is not BOTTOM:
                assert world.max_store_size == len(world.mu)

    def test_deadlock_detected(self):
        # a get on an object id nobody seals can never progress
        world = FuturesWorld(Assign("x", Get(Put(Num(1)))), k=1, seed=0)
        world.gamma_req[0].push("driver", "never-sealed")
        with pytest.raises(DeadlockError):
            world.run()


class TestEquivalenceChecker:
    def test_example_binding(self):
        assert check_equivalence({"x": 3}, {"x": "o"}, {"o": 3})

    def test_empty_program_vacuous(self):
        assert check_equivalence({}, {}, {})

    def test_bottom_mismatch(self):
        assert not check_equivalence(BOTTOM, {}, {})
        assert not check_equivalence({}, BOTTOM, BOTTOM)
        assert check_equivalence(BOTTOM, BOTTOM, BOTTOM)

    def test_missing_binding(self):
        assert not check_equivalence({"x": 3}, {}, {})

    def test_wrong_value(self):
        assert not check_equivalence({"x": 3}, {"x": "o"}, {"o": 4})


class TestGetCorrectnessLemma:
    @pytest.mark.parametrize("seed", range(60))
    def test_expression_values_roundtrip(self, seed):
        expr = random_expression(seed)
        value = eval_serial(Assign("out", expr), fuel=200)
        if value is BOTTOM:
            return
        prog = Assign("probe", Get(translate(expr)))
        for world_seed in (0, 1):
            world = FuturesWorld(prog, k=2, seed=world_seed, fuel=200)
            sigma, _mu = world.run()
            assert sigma["probe"] == value["out"]


class TestDifferentialSmall:
    @pytest.mark.parametrize("seed", range(30))
    def test_translation_equivalence(self, seed):
        prog = random_program(seed, size=4)
        sigma_s = eval_serial(prog, fuel=50)
        translated = translate(prog)
        for k in (1, 2):
            sigma_f, mu = eval_futures(translated, k=k, seed=seed + k, fuel=50)
            assert check_equivalence(sigma_s, sigma_f, mu)

    @pytest.mark.parametrize("seed", range(10))
    def test_divergent_programs_bottom_everywhere(self, seed):
        prog = random_diverging_program(seed)
        assert eval_serial(prog, fuel=20) is BOTTOM
        sigma, mu = eval_futures(translate(prog), k=2, seed=seed, fuel=20)
        assert sigma is BOTTOM and mu is BOTTOM
