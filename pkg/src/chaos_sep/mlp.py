"""One-dimensional ReLU regression networks, trained with full-batch Adam."""

from __future__ import annotations

import csv
import io
import json
import logging
import math
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence, Union

import numpy as np

from .pl import BudgetError, IteratedMap, PLFunction, l1_distance, piece_budget
from .rates import rho as growth_rate
from .separation import SeparationConfig, default_levels, hard_family, theory_bound

log = logging.getLogger(__name__)

Target = Union[PLFunction, IteratedMap]

TASK_COMPOSITIONS = {"hard": 40, "easy": 8}
QUAD_POINTS = 2**20


class DivergenceError(ArithmeticError):
    pass


@dataclass
class MlpModel:
    """Hidden layers of equal width with ReLU, then a scalar linear output."""

    weights: list[np.ndarray]
    biases: list[np.ndarray]
    seed: int | None = None

    @property
    def depth(self) -> int:
        return len(self.weights) - 1

    @property
    def width(self) -> int:
        return self.weights[0].shape[1]

    @property
    def dims(self) -> list[int]:
        return [self.weights[0].shape[0]] + [w.shape[1] for w in self.weights]

    @property
    def n_params(self) -> int:
        return sum(w.size + b.size for w, b in zip(self.weights, self.biases))

    def flat(self) -> np.ndarray:
        return np.concatenate([a.ravel() for w, b in zip(self.weights, self.biases) for a in (w, b)])

    def with_flat(self, theta: np.ndarray) -> "MlpModel":
        ws, bs = [], []
        i = 0
        for w, b in zip(self.weights, self.biases):
            ws.append(theta[i:i + w.size].reshape(w.shape).copy())
            i += w.size
            bs.append(theta[i:i + b.size].reshape(b.shape).copy())
            i += b.size
        return MlpModel(ws, bs, self.seed)

    def is_finite(self) -> bool:
        return bool(np.all(np.isfinite(self.flat())))

    def to_json(self) -> dict:
        return {"dims": self.dims, "seed": self.seed, "params": self.flat().tolist()}

    @classmethod
    def from_json(cls, obj: dict) -> "MlpModel":
        dims = [int(d) for d in obj["dims"]]
        shell = cls([np.zeros((a, b)) for a, b in zip(dims, dims[1:])], [np.zeros(b) for b in dims[1:]], obj.get("seed"))
        theta = np.asarray(obj["params"], dtype=float)
        if theta.size != shell.n_params:
            raise ValueError(f"expected {shell.n_params} parameters, got {theta.size}")
        return shell.with_flat(theta)

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_json()))


def init(l: int, u: int, seed: int) -> MlpModel:
    """Glorot-uniform weights, zero biases, deterministic in ``seed``."""
    if l < 1 or u < 1:
        raise ValueError("depth and width must be >= 1")
    rng = np.random.default_rng(seed)
    dims = [1] + [u] * l + [1]
    ws, bs = [], []
    for fan_in, fan_out in zip(dims, dims[1:]):
        lim = math.sqrt(6.0 / (fan_in + fan_out))
        ws.append(rng.uniform(-lim, lim, size=(fan_in, fan_out)))
        bs.append(np.zeros(fan_out))
    return MlpModel(ws, bs, seed)


def forward(m: MlpModel, x):
    """Network output at scalar or array ``x``."""
    xa = np.asarray(x, dtype=float)
    h = xa.reshape(-1, 1)
    for w, b in zip(m.weights[:-1], m.biases[:-1]):
        h = np.maximum(h @ w + b, 0.0)
    out = (h @ m.weights[-1] + m.biases[-1]).ravel()
    return float(out[0]) if xa.ndim == 0 else out.reshape(xa.shape)


def loss_and_grad(m: MlpModel, X: np.ndarray, Y: np.ndarray) -> tuple[float, list[np.ndarray], list[np.ndarray]]:
    """Mean squared error and its gradients with respect to weights and biases."""
    acts = [X.reshape(-1, 1)]
    pre = []
    for w, b in zip(m.weights[:-1], m.biases[:-1]):
        z = acts[-1] @ w + b
        pre.append(z)
        acts.append(np.maximum(z, 0.0))
    out = (acts[-1] @ m.weights[-1] + m.biases[-1]).ravel()
    r = out - Y
    n = len(Y)
    loss = float(np.mean(r * r))
    g = (2.0 / n) * r.reshape(-1, 1)
    gw = [None] * len(m.weights)
    gb = [None] * len(m.biases)
    gw[-1] = acts[-1].T @ g
    gb[-1] = g.sum(axis=0)
    for k in range(len(pre) - 1, -1, -1):
        g = (g @ m.weights[k + 1].T) * (pre[k] > 0)
        gw[k] = acts[k].T @ g
        gb[k] = g.sum(axis=0)
    return loss, gw, gb


def model_to_pl(m: MlpModel, lo: float = -1.0, hi: float = 1.0, piece_budget_: int | None = None) -> PLFunction:
    """Exact PL form of the network on ``[lo, hi]``.

    Each hidden layer is linear between the current knots, so new knots are
    exactly the zero crossings of its pre-activations.
    """
    budget = piece_budget(piece_budget_)
    xs = np.array([lo, hi], dtype=float)
    h = xs.reshape(-1, 1)
    for w, b in zip(m.weights[:-1], m.biases[:-1]):
        z = h @ w + b
        z0, z1 = z[:-1], z[1:]
        seg, unit = np.nonzero((z0 > 0) != (z1 > 0))
        a, c = z0[seg, unit], z1[seg, unit]
        s = a / (a - c)
        xn = xs[seg] + s * (xs[seg + 1] - xs[seg])
        new_xs = np.unique(np.concatenate([xs, xn]))
        if len(new_xs) > budget:
            raise BudgetError(f"network needs {len(new_xs)} knots, budget is {budget}", knots=len(new_xs))
        idx = np.clip(np.searchsorted(xs, new_xs, side="right") - 1, 0, len(xs) - 2)
        wgt = ((new_xs - xs[idx]) / (xs[idx + 1] - xs[idx])).reshape(-1, 1)
        z = z[idx] * (1 - wgt) + z[idx + 1] * wgt
        xs = new_xs
        h = np.maximum(z, 0.0)
    ys = (h @ m.weights[-1] + m.biases[-1]).ravel()
    return PLFunction(xs, ys)


# --- training ----------------------------------------------------------------


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 1500
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    batch: str = "full"
    samples: int = 4096
    seed: int = 0

    def __post_init__(self):
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if self.lr <= 0:
            raise ValueError("learning rate must be positive")
        if self.samples < 2:
            raise ValueError("need at least 2 samples")
        if self.batch != "full":
            raise ValueError("only full-batch training is supported")


@dataclass
class TrainResult:
    model: MlpModel
    mse: float
    l1: float
    l1_method: str  # "exact" | "quadrature"
    l1_error_estimate: float
    losses: np.ndarray
    wall_time: float
    saturated: bool

    def loss_curve_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["epoch", "loss"])
        for i, v in enumerate(self.losses.tolist(), start=1):
            w.writerow([i, repr(v)])
        return buf.getvalue()


def _grid(lo: float, hi: float, n: int) -> np.ndarray:
    return np.linspace(lo, hi, n)


def quadrature_l1(target, m: MlpModel, lo: float = -1.0, hi: float = 1.0, n: int = QUAD_POINTS,
                  chunk: int = 1 << 16) -> tuple[float, float]:
    """Midpoint-rule L1 error at n and n/2 points; returns (value, |difference|)."""
    def midpoint(k: int) -> float:
        h = (hi - lo) / k
        total = 0.0
        for s in range(0, k, chunk):
            z = lo + (np.arange(s, min(s + chunk, k)) + 0.5) * h
            total += float(np.abs(target(z) - forward(m, z)).sum())
        return total * h

    fine = midpoint(n)
    coarse = midpoint(n // 2)
    return fine, abs(fine - coarse)


def l1_error(target: Target, m: MlpModel, piece_budget_: int | None = None) -> tuple[float, str, float]:
    exact_target = target if isinstance(target, PLFunction) else target.exact(piece_budget_)
    if exact_target is not None:
        try:
            g = model_to_pl(m, exact_target.lo, exact_target.hi, piece_budget_)
            return l1_distance(exact_target, g), "exact", 0.0
        except BudgetError:
            pass
    val, err = quadrature_l1(target, m, target.lo, target.hi)
    return val, "quadrature", err


def train(m: MlpModel, target: Target, cfg: TrainConfig = TrainConfig(),
          piece_budget_: int | None = None) -> TrainResult:
    """Full-batch Adam on the MSE over a uniform grid; returns a new model."""
    if (target.lo, target.hi) != (-1.0, 1.0):
        raise ValueError("targets must live on [-1, 1]")
    t0 = time.perf_counter()
    X = _grid(target.lo, target.hi, cfg.samples)
    Y = np.asarray(target(X), dtype=float)
    params = [a.copy() for w, b in zip(m.weights, m.biases) for a in (w, b)]
    mom = [np.zeros_like(p) for p in params]
    vel = [np.zeros_like(p) for p in params]
    cur = MlpModel(params[0::2], params[1::2], m.seed)
    losses = np.empty(cfg.epochs)
    for ep in range(cfg.epochs):
        loss, gw, gb = loss_and_grad(cur, X, Y)
        if not math.isfinite(loss):
            raise DivergenceError(f"loss became {loss} at epoch {ep + 1}")
        losses[ep] = loss
        grads = [g for pair in zip(gw, gb) for g in pair]
        k = ep + 1
        c1 = 1 - cfg.beta1**k
        c2 = 1 - cfg.beta2**k
        for p, g, mm, vv in zip(params, grads, mom, vel):
            mm *= cfg.beta1
            mm += (1 - cfg.beta1) * g
            vv *= cfg.beta2
            vv += (1 - cfg.beta2) * g * g
            p -= cfg.lr * (mm / c1) / (np.sqrt(vv / c2) + cfg.eps)
    final = MlpModel([p.copy() for p in params[0::2]], [p.copy() for p in params[1::2]], m.seed)
    mse = float(np.mean((forward(final, X) - Y) ** 2))
    l1, method, err = l1_error(target, final, piece_budget_)
    tail = losses[-100:] if len(losses) >= 100 else losses
    saturated = bool(abs(tail[0] - tail[-1]) <= 1e-5 * max(abs(tail[0]), 1e-300))
    return TrainResult(final, mse, l1, method, err, losses, time.perf_counter() - t0, saturated)


# --- experiments ---------------------------------------------------------------


@dataclass
class ExperimentRow:
    task: str
    depth: int
    width: int
    seed: int
    epochs: int
    mse: float
    l1: float
    floor: float
    l1_method: str = "exact"
    l1_error_estimate: float = 0.0
    condition_met: bool = False

    CSV_HEADER = ["task", "depth", "width", "seed", "epochs", "mse", "l1", "floor"]

    def csv_row(self) -> list[str]:
        return [self.task, str(self.depth), str(self.width), str(self.seed), str(self.epochs),
                repr(self.mse), repr(self.l1), repr(self.floor)]


@dataclass
class ExperimentResult:
    task: str
    t: int
    rows: list[ExperimentRow] = field(default_factory=list)
    curves: dict[tuple[int, int], np.ndarray] = field(default_factory=dict)
    models: dict[tuple[int, int], MlpModel] = field(default_factory=dict)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(ExperimentRow.CSV_HEADER)
        for r in self.rows:
            w.writerow(r.csv_row())
        return buf.getvalue()

    def median_l1(self) -> dict[int, float]:
        by_depth: dict[int, list[float]] = {}
        for r in self.rows:
            by_depth.setdefault(r.depth, []).append(r.l1)
        return {d: float(np.median(v)) for d, v in sorted(by_depth.items())}

    def floors(self) -> dict[int, float]:
        return {r.depth: r.floor for r in self.rows}

    def condition(self) -> dict[int, bool]:
        return {r.depth: r.condition_met for r in self.rows}

    def summary_csv(self) -> str:
        """Plot data: one row per depth with the median L1 and the theoretical floor."""
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["depth", "median_l1", "min_l1", "max_l1", "floor", "condition"])
        per: dict[int, list[float]] = {}
        for r in self.rows:
            per.setdefault(r.depth, []).append(r.l1)
        floors, cond = self.floors(), self.condition()
        for d, v in sorted(per.items()):
            w.writerow([d, repr(float(np.median(v))), repr(min(v)), repr(max(v)), repr(floors[d]), str(cond[d]).lower()])
        return buf.getvalue()


def task_target(task: str, t: int | None = None) -> tuple[IteratedMap, int]:
    if task not in TASK_COMPOSITIONS:
        raise ValueError(f"unknown task {task!r}; expected one of {sorted(TASK_COMPOSITIONS)}")
    t = TASK_COMPOSITIONS[task] if t is None else t
    return IteratedMap(hard_family(3), t), t


def _run_one(args):
    task, t, depth, width, seed, cfg, budget = args
    target, _ = task_target(task, t)
    res = train(init(depth, width, seed), target, cfg, budget)
    return depth, seed, res


def run_experiment(task: str, depths: Sequence[int], cfg: TrainConfig = TrainConfig(), width: int = 20,
                   seeds: Sequence[int] = (0, 1, 2), t: int | None = None, jobs: int = 1,
                   piece_budget_: int | None = None) -> ExperimentResult:
    """Train one model per (depth, seed) on ``f^t`` with f = rho_3*|x| - 1."""
    _, t = task_target(task, t)
    out = ExperimentResult(task, t)
    if not depths:
        return out
    x, y = default_levels(3)
    rho = growth_rate(3).rho
    jobs_list = [(task, t, d, width, cfg.seed + s, cfg, piece_budget_) for d in depths for s in seeds]
    if jobs > 1:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(jobs) as ex:
            results = list(ex.map(_run_one, jobs_list))
    else:
        results = [_run_one(a) for a in jobs_list]
    for depth, seed, res in results:
        rep = theory_bound(SeparationConfig(rho, rho, t, width, depth, x, y))
        out.rows.append(ExperimentRow(task, depth, width, seed, cfg.epochs, res.mse, res.l1, rep.floor_headline,
                                      res.l1_method, res.l1_error_estimate, rep.condition_met))
        out.curves[(depth, seed)] = res.losses
        out.models[(depth, seed)] = res.model
        log.info("%s depth=%d seed=%d mse=%.4g l1=%.4g (%s) %.1fs", task, depth, seed, res.mse, res.l1,
                 res.l1_method, res.wall_time)
    return out
