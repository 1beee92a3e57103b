"""End-to-end runs on the circle task: train, sparsify, certify, report.

Random streams are derived from the run seed (see :mod:`lipspline.rng`):
training data, test data, initialization, batch shuffling and the empirical
Lipschitz probe each get their own child stream, so changing one part of a
run leaves the others untouched.
"""
from __future__ import annotations

import csv
import io
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

from .data import error_rate, gen_circle
from .lipschitz import bound_euclidean, bound_general, empirical_lipschitz
from .network import Network, nnz_coeffs, param_count
from .optim import TrainConfig, TrainHistory, build_network, resolve_lambda, train
from .rng import INIT, PROBE, SHUFFLE, TEST_DATA, TRAIN_DATA, make_rng

EMPIRICAL_PAIRS = 10_000


@dataclass
class RunResult:
    config: TrainConfig
    network: Network
    history: TrainHistory
    train_error: float
    test_error: float
    bound_general: float
    bound_euclidean: float
    empirical_lipschitz: float
    wall_clock: float
    resolved_lambda: list

    @property
    def param_count(self) -> int:
        return param_count(self.network)

    @property
    def nnz_coeffs(self) -> int:
        return nnz_coeffs(self.network)

    def report(self) -> dict:
        return {
            "config": self.config.to_dict(),
            "seed": self.config.seed,
            "resolved_lambda": self.resolved_lambda,
            "descriptor": list(self.network.descriptor),
            "train_error": self.train_error,
            "test_error": self.test_error,
            "test_accuracy": 100.0 - self.test_error,
            "param_count": self.param_count,
            "nnz_coeffs": self.nnz_coeffs,
            "bound_general_p2": self.bound_general,
            "bound_euclidean": self.bound_euclidean,
            "empirical_lipschitz": self.empirical_lipschitz,
            "wall_clock_seconds": self.wall_clock,
        }


def datasets(cfg: TrainConfig):
    train_set = gen_circle(cfg.n_train, make_rng(cfg.seed, TRAIN_DATA), "train")
    test_set = gen_circle(cfg.n_test, make_rng(cfg.seed, TEST_DATA), "test")
    return train_set, test_set


def run(cfg: TrainConfig) -> RunResult:
    t0 = time.perf_counter()
    train_set, test_set = datasets(cfg)
    net = build_network(cfg, train_set.X.shape[1], make_rng(cfg.seed, INIT))
    lam = [float(v) for v in resolve_lambda(cfg, net)]
    net, history = train(net, train_set, cfg, make_rng(cfg.seed, SHUFFLE))
    return RunResult(
        config=cfg,
        network=net,
        history=history,
        train_error=error_rate(net, train_set),
        test_error=error_rate(net, test_set),
        bound_general=bound_general(net, 2).bound,
        bound_euclidean=bound_euclidean(net, cfg.outer_norm).bound,
        empirical_lipschitz=empirical_lipschitz(net, EMPIRICAL_PAIRS, make_rng(cfg.seed, PROBE)),
        wall_clock=time.perf_counter() - t0,
        resolved_lambda=lam,
    )


SWEEP_PARAMS = {"lambda": "lam", "K": "n_knots"}
SWEEP_FIELDS = ("value", "test_error", "bound", "nnz_coeffs", "param_count")


def _sweep_row(args):
    cfg, value = args
    res = run(cfg)
    return {
        "value": value,
        "test_error": res.test_error,
        "bound": res.bound_euclidean,
        "nnz_coeffs": res.nnz_coeffs,
        "param_count": res.param_count,
    }


def sweep(cfg: TrainConfig, param: str, values, jobs: int = 1) -> list[dict]:
    """One run per value; all rows share the seed, so only ``param`` differs."""
    if param not in SWEEP_PARAMS:
        raise ValueError(f"sweep parameter must be one of {sorted(SWEEP_PARAMS)}")
    values = list(values)
    if len(values) < 2:
        raise ValueError("a sweep needs at least two values")
    field = SWEEP_PARAMS[param]
    tasks = [(cfg.replace(**{field: int(v) if field == "n_knots" else v}), v) for v in values]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(_sweep_row, tasks))
    return [_sweep_row(t) for t in tasks]


COMPARE_FIELDS = ("scheme", "architecture", "outer_norm", "lam", "param_count", "performance",
                  "test_error", "source")

# baselines on (2,10,1) against deep splines on (2,2,1)
COMPARE_RUNS = (
    ("ReLU", {"activation": "relu", "hidden": [10]}),
    ("LeakyReLU", {"activation": "leaky_relu", "hidden": [10]}),
    ("PReLU", {"activation": "prelu", "hidden": [10]}),
    ("DeepSpline", {"activation": "spline", "hidden": [2]}),
)
# outer-norm comparison on (2,10,1); lambda large enough for the norm to matter
OUTER_NORM_LAM = 1e-3


def compare(cfg: TrainConfig, jobs: int = 1) -> list[dict]:
    tasks = [(name, cfg.replace(**over)) for name, over in COMPARE_RUNS]
    for outer in ("l1", "l2"):
        tasks.append((f"DeepSpline-{outer}", cfg.replace(
            activation="spline", hidden=[10], outer_norm=outer, lam=OUTER_NORM_LAM)))
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(run, [c for _, c in tasks]))
    else:
        results = [run(c) for _, c in tasks]
    rows = []
    for (name, c), res in zip(tasks, results):
        rows.append({
            "scheme": name,
            "architecture": "(" + ",".join(map(str, res.network.descriptor)) + ")",
            "outer_norm": c.outer_norm if c.activation == "spline" else "",
            "lam": c.lam if c.activation == "spline" else "",
            "param_count": res.param_count,
            "performance": 100.0 - res.test_error,
            "test_error": res.test_error,
            "source": "reimplementation",
        })
    return rows


def rows_to_csv(rows, fieldnames) -> str:
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=fieldnames, lineterminator="\n")
    writer.writeheader()
    for row in rows:
        writer.writerow({k: repr(v) if isinstance(v, float) else v for k, v in row.items()})
    return buf.getvalue()
