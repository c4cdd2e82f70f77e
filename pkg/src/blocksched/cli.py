"""Command-line entry point.

Subcommands: bench (schedule and execute one operation), analyze (compare
simulated communication time against the closed-form bounds), translate and
run (mini-language tools), glm (Newton logistic regression).  Outputs are
CSV and JSON with a provenance header; --plot-dir additionally renders PNG
figures next to them.

Exit codes: 0 success, 1 usage error, 2 invariant violation.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__, analysis, instances
from . import glm as glm_mod
from . import graph as graph_mod
from . import scheduler as sched_mod
from .cluster import CostParams, comm_time
from .executor import execute, to_dense, write_array_binary
from .lang import (
    DeadlockError,
    LangSyntaxError,
    check_equivalence,
    eval_futures,
    eval_serial,
    parse as lang_parse,
    to_source,
    translate as lang_translate,
)
from .lang.serial import BOTTOM, DEFAULT_FUEL

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_VIOLATION = 2

SCHEDULER_NAMES = ("lshs", "rr", "random")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _provenance(config: dict, seed) -> dict:
    canon = json.dumps(config, sort_keys=True, default=str)
    digest = hashlib.sha256(canon.encode()).hexdigest()[:16]
    return {"config_hash": digest, "seed": seed, "version": __version__}


def _write_text(path: Path, text: str, provenance: dict):
    header = "".join(f"# {k}={v}\n" for k, v in provenance.items())
    path.write_text(header + text, encoding="utf-8")


def _load_params(path: str | None) -> CostParams:
    if path is None:
        return CostParams()
    return CostParams.from_file(path)


def _run_scheduler(name, expr, cluster, seed):
    if name == "lshs":
        return sched_mod.lshs(expr, cluster, seed)
    if name == "rr":
        return sched_mod.schedule_roundrobin(expr, cluster)
    if name == "random":
        return sched_mod.schedule_random(expr, cluster, seed)
    raise UsageError(f"unknown scheduler {name!r}")


# ---------------------------------------------------------------------------
# bench


def cmd_bench(args) -> int:
    grid = instances.parse_dims(args.grid)
    nodes = instances.parse_dims(args.nodes)
    params = _load_params(args.params)
    schedulers = [s.strip() for s in args.scheduler.split(",") if s.strip()]
    for s in schedulers:
        if s not in SCHEDULER_NAMES:
            raise UsageError(f"unknown scheduler {s!r}")
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    config = dict(op=args.op, n=args.n, d=args.d, grid=args.grid,
                  nodes=args.nodes, workers=args.workers, layout=args.layout,
                  schedulers=schedulers, params=params.as_dict())
    prov = _provenance(config, args.seed)
    for name in schedulers:
        inst = instances.build_bench_op(
            args.op, args.n, args.d, grid, nodes, args.workers,
            params=params, seed=args.seed, layout=args.layout,
        )
        if args.dump_graph:
            rows = graph_mod.dump_graph(inst.expr, inst.cluster)
            _write_text(Path(args.dump_graph), json.dumps(rows, indent=2) + "\n", prov)
        schedule = _run_scheduler(name, inst.expr, inst.cluster, args.seed)
        trace = execute(schedule, inst.store)
        seconds = comm_time(schedule, params, mode=args.mode)
        stem = f"{args.op}_{name}"
        trace.to_csv(out_dir / f"{stem}_trace.csv", prov)
        _write_text(out_dir / f"{stem}_schedule.json", schedule.to_json() + "\n", prov)
        if args.dump_result:
            write_array_binary(out_dir / f"{stem}_result.bin",
                               to_dense(schedule.result, inst.store))
        if args.plot_dir:
            from . import plotting

            plot_dir = Path(args.plot_dir)
            plot_dir.mkdir(parents=True, exist_ok=True)
            plotting.plot_trace(trace, plot_dir / f"{stem}_trace.png",
                                title=f"{args.op} under {name}")
        print(
            f"op={args.op} scheduler={name} "
            f"inter_node_elements={schedule.inter_node_bytes()} "
            f"comm_time_s={seconds:.6f} max_mem={schedule.max_mem()}"
        )
    return EXIT_OK


# ---------------------------------------------------------------------------
# analyze


def cmd_analyze(args) -> int:
    params = _load_params(args.params)
    families = [f.strip() for f in args.families.split(",") if f.strip()]
    ks = [int(x) for x in args.k.split(",")]
    rs = [int(x) for x in args.r.split(",")]
    rows = []
    for family in families:
        if family not in instances.FAMILY_BUILDERS:
            raise UsageError(f"unknown family {family!r}")
        build = instances.FAMILY_BUILDERS[family]
        for k in ks:
            for r in rs:
                try:
                    inst = build(k, r, args.n_block, params=params, seed=args.seed)
                except ValueError:
                    continue  # family constraint (square k etc.)
                schedule = sched_mod.lshs(inst.expr, inst.cluster, args.seed)
                execute(schedule, inst.store)
                rows.append(analysis.compare(schedule, inst.profile, op=inst.op))
    config = dict(families=families, k=ks, r=rs, n_block=args.n_block,
                  params=params.as_dict())
    prov = _provenance(config, args.seed)
    text = analysis.CSV_HEADER + "\n" + "".join(r.csv() + "\n" for r in rows)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    _write_text(out, text, prov)
    if args.plot_dir:
        from . import plotting

        plot_dir = Path(args.plot_dir)
        plot_dir.mkdir(parents=True, exist_ok=True)
        plotting.plot_bounds(rows, plot_dir / "bounds.png")
    bad = [r for r in rows if r.below_bound]
    for r in bad:
        print(f"VIOLATION: {r.family} k={r.k} r={r.r}: "
              f"simulated {r.sim_s:.6g}s beats bound {r.bound_s:.6g}s",
              file=sys.stderr)
    print(f"analyzed {len(rows)} instances, {len(bad)} below bound -> {out}")
    return EXIT_VIOLATION if bad else EXIT_OK


# ---------------------------------------------------------------------------
# language tools


def cmd_translate(args) -> int:
    source = Path(args.file).read_text(encoding="utf-8")
    program = lang_parse(source)
    print(to_source(lang_translate(program)))
    return EXIT_OK


def _format_state(sigma) -> str:
    if sigma is BOTTOM:
        return "bottom"
    return "{" + ", ".join(f"{k}={v!r}" for k, v in sorted(sigma.items())) + "}"


def cmd_run(args) -> int:
    source = Path(args.file).read_text(encoding="utf-8")
    program = lang_parse(source)
    if args.mode in ("serial", "both"):
        sigma = eval_serial(program, fuel=args.fuel)
        print(f"serial: {_format_state(sigma)}")
    if args.mode in ("futures", "both"):
        translated = lang_translate(program)
        sigma_f, mu = eval_futures(translated, k=args.workers, seed=args.seed,
                                   fuel=args.fuel)
        size = "bottom" if mu is BOTTOM else len(mu)
        print(f"futures: {_format_state(sigma_f)} (store entries: {size})")
    if args.mode == "both":
        ok = check_equivalence(sigma, sigma_f, mu)
        print(f"equivalent: {ok}")
        return EXIT_OK if ok else EXIT_VIOLATION
    return EXIT_OK


# ---------------------------------------------------------------------------
# glm


def cmd_glm(args) -> int:
    from .cluster import ClusterState
    from .executor import ObjectStore

    params = _load_params(args.params)
    nodes = instances.parse_dims(args.nodes)
    cluster = ClusterState(nodes, args.workers, params)
    store = ObjectStore(cluster.k)
    if args.data.startswith("synth:"):
        try:
            n, d, seed = (int(x) for x in args.data[len("synth:"):].split(","))
        except ValueError:
            raise UsageError("synth data spec is synth:n,d,seed")
        x_dense, y_dense = glm_mod.synth_bimodal(n, d, seed)
    else:
        tmp_cluster = ClusterState((1,), 1, params)
        tmp_store = ObjectStore(tmp_cluster.k)
        arr = glm_mod.read_csv(args.data, (1,), tmp_cluster, tmp_store)
        dense = to_dense(arr, tmp_store)
        if dense.shape[1] < 2:
            raise UsageError("CSV needs feature columns plus a label column")
        x_dense, y_dense = dense[:, :-1], dense[:, -1:]
    if not args.no_intercept:
        x_dense = glm_mod.add_intercept(x_dense)
    q = args.grid if args.grid else cluster.k * args.workers
    x = graph_mod.from_dense(x_dense, (q, 1), cluster, store)
    y = graph_mod.from_dense(y_dense, (q, 1), cluster, store)
    problem = glm_mod.GlmProblem(x, y, eps=args.eps, max_iter=args.max_iter)
    result = glm_mod.newton(problem, cluster, store, scheduler=args.scheduler,
                            seed=args.seed)
    per_iter = _per_iteration_transfers(result)
    for it, (gnorm, moved) in enumerate(zip(result.grad_norms, per_iter), start=1):
        print(f"iter={it} grad_norm={gnorm:.6e} inter_node_elements={moved}")
    acc = glm_mod.accuracy(x_dense, y_dense, result.beta)
    print(
        f"converged={result.converged} iterations={result.iterations} "
        f"final_grad_norm={result.grad_norm:.6e} accuracy={acc:.4f}"
    )
    config = dict(data=args.data, nodes=args.nodes, workers=args.workers,
                  scheduler=args.scheduler, eps=args.eps,
                  max_iter=args.max_iter, grid=q, params=params.as_dict())
    prov = _provenance(config, args.seed)
    if args.out:
        out_dir = Path(args.out)
        out_dir.mkdir(parents=True, exist_ok=True)
        merged = _merged_trace(result)
        merged.to_csv(out_dir / "glm_trace.csv", prov)
        np.savetxt(out_dir / "beta.csv", result.beta, delimiter=",")
    if args.plot_dir:
        from . import plotting

        plot_dir = Path(args.plot_dir)
        plot_dir.mkdir(parents=True, exist_ok=True)
        plotting.plot_convergence(result.grad_norms, plot_dir / "glm_convergence.png")
        plotting.plot_trace(_merged_trace(result), plot_dir / "glm_trace.png",
                            title="newton iteration loads")
    return EXIT_OK


def _per_iteration_transfers(result) -> list[int]:
    rounds_per_iter = 3  # mu, grad, hess
    moved = []
    for i in range(0, len(result.rounds), rounds_per_iter):
        chunk = result.rounds[i:i + rounds_per_iter]
        moved.append(sum(s.inter_node_bytes() for _tag, s, _tr in chunk))
    return moved


def _merged_trace(result):
    from .executor import LoadTrace

    merged = LoadTrace()
    offset = 0
    for _tag, schedule, trace in result.rounds:
        last = -1
        for row in trace.rows:
            merged.rows.append((row[0] + offset,) + row[1:])
            last = max(last, row[0])
        offset += last + 1
    return merged


# ---------------------------------------------------------------------------


def build_parser() -> _Parser:
    parser = _Parser(prog="blocksched", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    b = sub.add_parser("bench", help="schedule and execute one operation")
    b.add_argument("--op", required=True, choices=instances.BENCH_OPS)
    b.add_argument("--n", type=int, default=64, help="rows (or vector length)")
    b.add_argument("--d", type=int, default=8, help="columns / small dim")
    b.add_argument("--grid", default="4x1", help="array grid, e.g. 4x1")
    b.add_argument("--nodes", default="2x1", help="node grid, e.g. 2x1")
    b.add_argument("--workers", type=int, default=4, help="workers per node")
    b.add_argument("--scheduler", default="lshs", help="comma list: lshs,rr,random")
    b.add_argument("--layout", default="hier", choices=("hier", "roundrobin"))
    b.add_argument("--seed", type=int, default=0)
    b.add_argument("--params", default=None, help="cost parameter file")
    b.add_argument("--mode", default="ray", choices=("ray", "dask"))
    b.add_argument("--out", default="bench_out")
    b.add_argument("--plot-dir", default=None)
    b.add_argument("--dump-graph", default=None, help="write graph JSON here")
    b.add_argument("--dump-result", action="store_true",
                   help="write the dense result as flat binary")
    b.set_defaults(func=cmd_bench)

    a = sub.add_parser("analyze", help="bounds vs simulated communication time")
    a.add_argument("--families", default="elementwise,reduce,inner,outer,matmul")
    a.add_argument("--k", default="4", help="comma list of node counts")
    a.add_argument("--r", default="4", help="comma list of workers per node")
    a.add_argument("--n-block", type=int, default=64, dest="n_block")
    a.add_argument("--seed", type=int, default=0)
    a.add_argument("--params", default=None)
    a.add_argument("--out", default="analysis.csv")
    a.add_argument("--plot-dir", default=None)
    a.set_defaults(func=cmd_analyze)

    t = sub.add_parser("translate", help="print the futures translation")
    t.add_argument("file")
    t.set_defaults(func=cmd_translate)

    r = sub.add_parser("run", help="run a program serially and/or as futures")
    r.add_argument("file")
    r.add_argument("--workers", type=int, default=2)
    r.add_argument("--seed", type=int, default=0)
    r.add_argument("--fuel", type=int, default=DEFAULT_FUEL)
    r.add_argument("--mode", default="both", choices=("serial", "futures", "both"))
    r.set_defaults(func=cmd_run)

    gl = sub.add_parser("glm", help="Newton logistic regression")
    gl.add_argument("--data", required=True,
                    help="synth:n,d,seed or a CSV path (last column = label)")
    gl.add_argument("--nodes", default="2x1")
    gl.add_argument("--workers", type=int, default=4)
    gl.add_argument("--grid", type=int, default=None, help="row blocks")
    gl.add_argument("--scheduler", default="lshs", choices=SCHEDULER_NAMES)
    gl.add_argument("--eps", type=float, default=1e-6)
    gl.add_argument("--max-iter", type=int, default=20, dest="max_iter")
    gl.add_argument("--no-intercept", action="store_true")
    gl.add_argument("--seed", type=int, default=0)
    gl.add_argument("--params", default=None)
    gl.add_argument("--out", default=None)
    gl.add_argument("--plot-dir", default=None)
    gl.set_defaults(func=cmd_glm)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (LangSyntaxError, glm_mod.CsvError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DeadlockError as exc:
        print(f"deadlock: {exc}", file=sys.stderr)
        return EXIT_VIOLATION


if __name__ == "__main__":
    sys.exit(main())
