"""End-to-end acceptance checks, one test (or parametrized group) per criterion.

Each check prints a ``[PASS]``/``[FAIL]`` line; the lines are repeated in the
pytest terminal summary under "acceptance criteria".
"""
import json
import math
import subprocess
import sys
import time

import numpy as np
import pytest

from lipspline import experiment
from lipspline.activations import SplineActivation
from lipspline.data import error_rate
from lipspline.lipschitz import bound_euclidean, bound_general, empirical_lipschitz, mean_balance
from lipspline.network import backward, forward, nnz_coeffs, params_equal, sparsify
from lipspline.optim import TrainConfig, auto_lambda, build_network, train
from lipspline.rng import INIT, SHUFFLE, make_rng
from lipspline.splines import bv2_norm, init_abs, init_soft, uniform_knots

from conftest import central_difference, kink_distance, random_net, record, rel_err

pytestmark = pytest.mark.slow

REFERENCE = TrainConfig()  # deep spline (2,2,1), K=21, mu=1e-4, lambda=auto, seed 0
RELU = REFERENCE.replace(activation="relu", hidden=[10])


@pytest.fixture(scope="module")
def spline_run():
    return experiment.run(REFERENCE)


@pytest.fixture(scope="module")
def relu_run():
    return experiment.run(RELU)


@pytest.fixture(scope="module")
def second_spline_run():
    return experiment.run(REFERENCE.replace(seed=1))


@pytest.fixture(scope="module")
def random_nets():
    rng = np.random.default_rng(20240)
    nets = []
    for i in range(20):
        depth = int(rng.integers(1, 3))
        desc = (int(rng.integers(1, 4)),) + tuple(int(rng.integers(1, 6)) for _ in range(depth)) + (1,)
        nets.append(random_net(rng, desc, "mixed", sigmoid_head=bool(i % 2)))
    return nets


def test_c1_canonical_init_norms():
    grid = uniform_knots(21)
    a, s = bv2_norm(init_abs(grid)), bv2_norm(init_soft(grid))
    ok = a == 3.0 and s == 2.5
    record("1 BV2 norms of canonical inits", ok, f"abs={a!r} soft={s!r}")
    assert ok


def test_c2_circle_reproduction(spline_run, relu_run):
    acc_s = 100.0 - spline_run.test_error
    acc_r = 100.0 - relu_run.test_error
    pc_s, pc_r = spline_run.param_count, relu_run.param_count
    slowest = max(spline_run.wall_clock, relu_run.wall_clock)
    ok = acc_s >= 97.5 and acc_r >= 97.0 and pc_s < pc_r and slowest <= 120
    record("2 circle reproduction", ok,
           f"spline acc {acc_s:.2f}% ({pc_s} params), ReLU acc {acc_r:.2f}% ({pc_r} params), "
           f"slowest run {slowest:.1f}s")
    assert ok


def test_c3_gradient_oracle():
    t0 = time.perf_counter()
    rng = np.random.default_rng(3)
    worst = 0.0
    descs = []
    for i in range(20):
        depth = int(rng.integers(1, 3))
        widths = [int(rng.integers(1, 6)), int(rng.integers(1, 5))][:depth]
        desc = (int(rng.integers(1, 4)), *widths, 1)
        descs.append(desc)
        net = random_net(rng, desc, "spline" if i < 12 else "mixed", sigmoid_head=bool(i % 2))
        X = []
        while len(X) < 3:
            x = rng.uniform(-1.5, 1.5, size=desc[0])
            if kink_distance(net, forward(net, x[None, :])[1]) >= 1e-3:
                X.append(x)
        X = np.array(X)
        c = rng.normal(size=1)
        _, cache = forward(net, X)
        grads = backward(net, cache, np.broadcast_to(c, (len(X), 1)))
        loss = lambda: float(np.sum(c * forward(net, X)[0]))
        for layer, g in zip(net.layers, grads):
            for name, arr in layer.params().items():
                fd = central_difference(loss, arr)
                worst = max(worst, float(np.max(rel_err(g[name], fd, floor=1e-4))))
    elapsed = time.perf_counter() - t0
    ok = worst < 1e-5 and elapsed < 30 and max(descs) <= (3, 5, 4, 1)
    record("3 gradient oracle", ok, f"worst relative error {worst:.2e} over 20 nets in {elapsed:.1f}s")
    assert ok


def _dominance(net, seed):
    out = []
    for p in (1, 2, math.inf):
        est = empirical_lipschitz(net, 10_000, make_rng(seed), p=p)
        out.append((f"p={p}", est, bound_general(net, p).bound))
    est2 = empirical_lipschitz(net, 10_000, make_rng(seed), p=2)
    for outer in ("l1", "l2"):
        out.append((outer, est2, bound_euclidean(net, outer).bound))
    return out


def test_c4_bound_dominance(random_nets, spline_run, relu_run, second_spline_run):
    t0 = time.perf_counter()
    nets = random_nets + [spline_run.network, relu_run.network, second_spline_run.network]
    violations, checks, tightest = [], 0, 0.0
    for i, net in enumerate(nets):
        for label, est, bound in _dominance(net, i):
            checks += 1
            tightest = max(tightest, est / bound)
            if est > bound:
                violations.append((i, label, est, bound))
    elapsed = time.perf_counter() - t0
    ok = not violations and elapsed < 60
    record("4 bound dominance", ok,
           f"{len(violations)} violations in {checks} checks, max ratio empirical/bound "
           f"{tightest:.3f}, {elapsed:.1f}s")
    assert ok, violations


def test_c5_outer_norm_ordering(random_nets, spline_run, relu_run, second_spline_run):
    rng = np.random.default_rng(5)
    extra = [random_net(rng, (2, int(rng.integers(1, 8)), int(rng.integers(1, 8)), 1), "mixed", True)
             for _ in range(200)]
    nets = random_nets + extra + [spline_run.network, relu_run.network, second_spline_run.network]
    bad = [i for i, n in enumerate(nets)
           if bound_euclidean(n, "l2").bound > bound_euclidean(n, "l1").bound]
    ok = not bad
    record("5 l2 Euclidean bound <= l1 Euclidean bound", ok, f"{len(bad)} violations on {len(nets)} nets")
    assert ok


@pytest.mark.parametrize("W", [1, 2, 5])
def test_c6_balance_at_init(W):
    t0 = time.perf_counter()
    mu = REFERENCE.mu
    cfg = REFERENCE.replace(hidden=[2 * W])
    nets = [build_network(cfg, 2, make_rng(seed, INIT)) for seed in range(200)]
    ratio = mean_balance(nets, mu, auto_lambda(mu, W))[0]
    elapsed = time.perf_counter() - t0
    ok = 0.9 <= ratio <= 1.1 and elapsed < 10
    record(f"6 balance at init, W={W}", ok, f"mean ratio {ratio:.4f} over seeds 0-199, {elapsed:.1f}s")
    assert ok


def test_c7_sparsify_contract(spline_run):
    cfg = REFERENCE
    train_set, _ = experiment.datasets(cfg)
    net0 = build_network(cfg, 2, make_rng(cfg.seed, INIT))
    dense, _ = train(net0, train_set, cfg, make_rng(cfg.seed, SHUFFLE), finish_sparse=False)
    sparse = sparsify(dense, train_set.X, train_set.y, cfg.sparsify_budget)
    same_as_pipeline = params_equal(sparse, spline_run.network)
    err_pre, err_post = error_rate(dense, train_set), error_rate(sparse, train_set)
    nnz_pre, nnz_post = nnz_coeffs(dense), nnz_coeffs(sparse)
    tiny = any(np.any((a.coeffs != 0) & (np.abs(a.coeffs) < 1e-8)) for _, a in dense.spline_layers())
    # inject a negligible coefficient so the strict-decrease clause is exercised
    probe = dense.copy()
    act: SplineActivation = probe.layers[0].activation
    n, k = np.argwhere(act.coeffs == 0)[0] if np.any(act.coeffs == 0) else (0, 0)
    act.coeffs[n, k] = 1e-9
    probe_post = sparsify(probe, train_set.X, train_set.y, cfg.sparsify_budget)
    ok = (err_post <= 1.01 * err_pre and nnz_post <= nnz_pre and (not tiny or nnz_post < nnz_pre)
          and nnz_coeffs(probe_post) < nnz_coeffs(probe) and same_as_pipeline)
    record("7 sparsification contract", ok,
           f"train error {err_pre:.2f}% -> {err_post:.2f}%, nnz {nnz_pre} -> {nnz_post}; "
           f"injected 1e-9 coefficient: nnz {nnz_coeffs(probe)} -> {nnz_coeffs(probe_post)}")
    assert ok


def test_c8_lambda_sweep_trends():
    values = [1e-6, 1e-5, 1e-4, 1e-3, 1e-2, 1e-1]
    rows = {r["value"]: r for r in experiment.sweep(REFERENCE, "lambda", values)}
    nnz_ok = rows[1e-2]["nnz_coeffs"] < rows[1e-6]["nnz_coeffs"]
    bound_ok = rows[1e-1]["bound"] < rows[1e-6]["bound"]
    summary = ", ".join(f"{v:g}: nnz {rows[v]['nnz_coeffs']} bound {rows[v]['bound']:.4g} "
                        f"err {rows[v]['test_error']:.2f}%" for v in values)
    record("8a lambda sweep: nnz(1e-2) < nnz(1e-6)", nnz_ok, summary)
    record("8b lambda sweep: bound(1e-1) < bound(1e-6)", bound_ok)
    assert nnz_ok and bound_ok


def test_c9_knot_sweep_trend():
    values = [1, 3, 5, 11, 21]
    rows = {r["value"]: r for r in experiment.sweep(REFERENCE, "K", values)}
    acc = {k: 100.0 - rows[k]["test_error"] for k in values}
    ok = acc[21] >= acc[1] - 0.5
    record("9 K sweep: acc(21) >= acc(1) - 0.5", ok,
           ", ".join(f"K={k}: {acc[k]:.2f}%" for k in values))
    assert ok


def _cli(*args):
    res = subprocess.run([sys.executable, "-m", "lipspline.cli", *args],
                         capture_output=True, text=True)
    assert res.returncode == 0, res.stderr
    return res


def test_c10_determinism(tmp_path):
    small = tmp_path / "small.json"
    small.write_text(json.dumps({"epochs": 40, "n_test": 2000}))
    produced = {}
    for rep in ("a", "b"):
        root = tmp_path / rep
        _cli("train", "--out", str(root / "train"))
        _cli("sweep", "--config", str(small), "--param", "lambda", "--values", "1e-6,1e-3,1e-1",
             "--out", str(root / "sweep"))
        _cli("compare", "--config", str(small), "--out", str(root / "compare"))
        _cli("certify", "--model", str(root / "train" / "model.json"), "--p", "1", "--p", "inf",
             "--outer", "l2")
        produced[rep] = {name: (root / name).read_bytes() for name in (
            "train/history.csv", "train/model.json", "train/bounds.json",
            "sweep/sweep.csv", "compare/compare.csv")}
    diffs = [k for k in produced["a"] if produced["a"][k] != produced["b"][k]]
    ok = not diffs
    record("10 byte-identical reruns", ok,
           f"{len(produced['a'])} files compared across two process runs, differing: {diffs or 'none'}")
    assert ok
