"""Logistic regression by Newton's method on block-partitioned arrays.

The design matrix is row-partitioned into a (q, 1) grid; coefficients,
gradient, and Hessian are single blocks.  Each Newton iteration schedules
and executes three expression rounds (model, gradient, Hessian), then the
driver solves the d x d system and re-creates the coefficient block, which
lands on node 0 under the hierarchical layout.
"""

from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from . import graph as g
from . import scheduler as sch
from .cluster import ClusterState
from .executor import ObjectStore, execute, stable_sigmoid, to_dense

SCHEDULERS = {
    "lshs": lambda garr, cluster, seed: sch.lshs(garr, cluster, seed),
    "rr": lambda garr, cluster, seed: sch.schedule_roundrobin(garr, cluster),
    "random": lambda garr, cluster, seed: sch.schedule_random(garr, cluster, seed),
}


@dataclass
class GlmProblem:
    """Row-partitioned design matrix and targets plus stopping controls.

    ``x`` must already carry the intercept column if one is wanted; its row
    grid must match ``y``'s.
    """

    x: g.GraphArray
    y: g.GraphArray
    eps: float = 1e-6
    max_iter: int = 50

    def __post_init__(self):
        if len(self.x.shape) != 2 or len(self.y.shape) != 2:
            raise ValueError("x and y must be rank-2")
        if self.x.shape[0] != self.y.shape[0] or self.x.grid[0] != self.y.grid[0]:
            raise ValueError("x and y must share rows and row grid")
        if self.y.shape[1] != 1:
            raise ValueError("y must be a column")


@dataclass
class NewtonResult:
    beta: np.ndarray
    iterations: int
    grad_norm: float
    grad_norms: list[float] = field(default_factory=list)
    beta_history: list[np.ndarray] = field(default_factory=list)
    converged: bool = False
    rounds: list[tuple[str, object, object]] = field(default_factory=list)


def logistic_mu(x: g.GraphArray, beta: g.GraphArray) -> g.GraphArray:
    """sigmoid(x @ beta), blockwise; the coefficient block is broadcast."""
    if beta.grid != (1, 1):
        raise ValueError("beta must be a single block")
    return g.ew_unary("sigmoid", g.matmul(x, beta))


def logistic_grad(x: g.GraphArray, y: g.GraphArray, mu: g.GraphArray) -> g.GraphArray:
    """x^T (mu - y): local subtract, fused-transpose products, one reduce."""
    return g.matmul(g.transpose(x), g.ew_binary("sub", mu, y))


def logistic_hess(x: g.GraphArray, mu: g.GraphArray) -> g.GraphArray:
    """x^T ((mu*(1-mu)) column-scaled x): all products local, one reduce."""
    w = g.ew_unary("logistic_weight", mu)
    return g.matmul(g.transpose(x), g.ew_binary("mul", w, x))


def _solve_newton_step(h: np.ndarray, grad: np.ndarray) -> np.ndarray:
    try:
        step = np.linalg.solve(h, grad)
        if np.all(np.isfinite(step)):
            return step
    except np.linalg.LinAlgError:
        pass
    lam = 1e-8 * np.trace(h) / h.shape[0]
    warnings.warn(f"singular Hessian, damping with lambda={lam:.3e}")
    return np.linalg.solve(h + lam * np.eye(h.shape[0]), grad)


def newton(
    problem: GlmProblem,
    cluster: ClusterState,
    store: ObjectStore,
    scheduler: str = "lshs",
    seed: int = 0,
) -> NewtonResult:
    """Fit coefficients; returns them with the iteration count and the
    gradient norm that triggered the stop.

    The convergence test runs on the driver after the update, using the
    gradient computed before it.
    """
    if scheduler not in SCHEDULERS:
        raise ValueError(f"unknown scheduler {scheduler!r}")
    run = SCHEDULERS[scheduler]
    d = problem.x.shape[1]
    beta_dense = np.zeros((d, 1))
    beta = g.from_dense(beta_dense, (1, 1), cluster, store)
    result = NewtonResult(beta=beta_dense, iterations=0, grad_norm=math.inf)
    round_seed = seed

    def evaluate(tag, expr):
        nonlocal round_seed
        round_seed += 1
        schedule = run(expr, cluster, round_seed)
        trace = execute(schedule, store)
        result.rounds.append((tag, schedule, trace))
        return schedule.result

    n_rows = problem.x.shape[0]
    for it in range(1, problem.max_iter + 1):
        mu = evaluate("mu", logistic_mu(problem.x, beta))
        grad_arr = evaluate("grad", logistic_grad(problem.x, problem.y, mu))
        hess_arr = evaluate("hess", logistic_hess(problem.x, mu))
        # mean-loss scaling on the driver; the Newton step H^-1 g is
        # scale-invariant, only the stopping metric changes
        grad = to_dense(grad_arr, store) / n_rows
        hess = to_dense(hess_arr, store) / n_rows
        beta_dense = beta_dense - _solve_newton_step(hess, grad)
        beta = g.from_dense(beta_dense, (1, 1), cluster, store)
        gnorm = float(np.linalg.norm(grad))
        result.grad_norms.append(gnorm)
        result.beta_history.append(beta_dense.copy())
        result.iterations = it
        result.beta = beta_dense
        result.grad_norm = gnorm
        if gnorm <= problem.eps:
            result.converged = True
            break
    return result


def predict_proba(x_dense: np.ndarray, beta: np.ndarray) -> np.ndarray:
    return stable_sigmoid(x_dense @ beta)


def accuracy(x_dense: np.ndarray, y_dense: np.ndarray, beta: np.ndarray) -> float:
    pred = predict_proba(x_dense, beta) >= 0.5
    return float(np.mean(pred == (y_dense >= 0.5)))


def add_intercept(x_dense: np.ndarray) -> np.ndarray:
    return np.hstack([x_dense, np.ones((x_dense.shape[0], 1))])


def synth_bimodal(n: int, d: int, seed: int) -> tuple[np.ndarray, np.ndarray]:
    """Two Gaussian clusters: 75% negatives at mean 10 (variance 2) and 25%
    positives at mean 30 (variance 4), features independent per axis."""
    rng = np.random.default_rng(seed)
    labels = (rng.random(n) < 0.25).astype(np.float64)
    x = np.empty((n, d))
    neg = labels == 0.0
    x[neg] = rng.normal(10.0, math.sqrt(2.0), size=(int(neg.sum()), d))
    x[~neg] = rng.normal(30.0, 2.0, size=(int((~neg).sum()), d))
    return x, labels.reshape(-1, 1)


class CsvError(ValueError):
    pass


def read_csv(path, grid, cluster: ClusterState, store: ObjectStore,
             layout: str = "hier") -> g.GraphArray:
    """Parse a numeric CSV (optional header) into a row-partitioned array.

    ``grid`` may be an int or 1-tuple (rows only) or a full 2-tuple.  Bad
    cells and ragged rows raise CsvError naming the offending position.
    """
    rows: list[list[float]] = []
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        width = None
        for lineno, row in enumerate(reader, start=1):
            if not row or (len(row) == 1 and not row[0].strip()):
                continue
            if lineno == 1 and not _all_numeric(row):
                continue  # header
            if width is None:
                width = len(row)
            elif len(row) != width:
                raise CsvError(
                    f"{path}:{lineno}: expected {width} columns, got {len(row)}"
                )
            parsed = []
            for col, cell in enumerate(row, start=1):
                try:
                    parsed.append(float(cell))
                except ValueError:
                    raise CsvError(
                        f"{path}:{lineno}:{col}: not a number: {cell.strip()!r}"
                    ) from None
            rows.append(parsed)
    if not rows:
        raise CsvError(f"{path}: no data rows")
    data = np.asarray(rows, dtype=np.float64)
    if isinstance(grid, int):
        grid = (grid, 1)
    elif len(grid) == 1:
        grid = (grid[0], 1)
    return g.from_dense(data, grid, cluster, store, layout=layout)


def _all_numeric(row) -> bool:
    for cell in row:
        try:
            float(cell)
        except ValueError:
            return False
    return True
