import numpy as np
import pytest

from lipspline.activations import LeakyReLU, PReLU, ReLU, Sigmoid, SplineActivation
from lipspline.network import DenseLayer, Network
from lipspline.splines import DeepSpline

ACCEPTANCE_LINES = []


def record(criterion: str, ok: bool, detail: str = "") -> None:
    line = f"[{'PASS' if ok else 'FAIL'}] {criterion}" + (f" -- {detail}" if detail else "")
    ACCEPTANCE_LINES.append(line)
    print(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture
def f_abs():
    return DeepSpline([0.0], [2.0], b1=-1.0, b2=0.0)


@pytest.fixture
def f_soft():
    return DeepSpline([-0.5, 0.5], [-1.0, 1.0], b1=1.0, b2=0.5)


def random_spline_layer(rng, width, n_knots=None):
    K = int(rng.integers(1, 9)) if n_knots is None else n_knots
    knots = np.sort(rng.uniform(-1.5, 1.5, size=K))
    while K > 1 and np.min(np.diff(knots)) < 1e-2:
        knots = np.sort(rng.uniform(-1.5, 1.5, size=K))
    return SplineActivation(
        np.tile(knots, (width, 1)),
        rng.normal(0.0, 1.0, size=(width, K)),
        rng.normal(0.0, 1.0, size=width),
        rng.normal(0.0, 0.5, size=width),
    )


def random_net(rng, descriptor, kind="spline", sigmoid_head=False):
    """Random weights and activations; ``kind`` may be 'mixed' to vary per layer."""
    layers = []
    n_layers = len(descriptor) - 1
    kinds = ["spline", "relu", "leaky_relu", "prelu"]
    for l in range(n_layers):
        n_in, n_out = descriptor[l], descriptor[l + 1]
        W = rng.normal(0.0, 1.0 / np.sqrt(n_in), size=(n_out, n_in))
        k = kinds[int(rng.integers(len(kinds)))] if kind == "mixed" else kind
        if sigmoid_head and l == n_layers - 1:
            act = Sigmoid(n_out)
        elif k == "spline":
            act = random_spline_layer(rng, n_out)
        elif k == "relu":
            act = ReLU(n_out)
        elif k == "leaky_relu":
            act = LeakyReLU(n_out, float(rng.uniform(0.01, 0.5)))
        else:
            act = PReLU(n_out, rng.uniform(-0.5, 1.5, size=n_out))
        bias = rng.normal(0.0, 0.3, size=n_out) if act.uses_bias else None
        layers.append(DenseLayer(W, act, bias))
    return Network(layers)


def kink_distance(net, cache):
    """Smallest distance of any pre-activation to a kink of its activation."""
    best = np.inf
    for layer, s in zip(net.layers, cache.pre):
        act = layer.activation
        if isinstance(act, SplineActivation):
            best = min(best, np.min(np.abs(s[..., None] - act.knots)))
        elif isinstance(act, (ReLU, LeakyReLU, PReLU)):
            best = min(best, np.min(np.abs(s)))
    return best


def central_difference(f, arr, h=1e-6):
    """Central differences of scalar ``f()`` w.r.t. every entry of ``arr`` (mutated in place)."""
    out = np.zeros_like(arr, dtype=float)
    for idx in np.ndindex(arr.shape):
        old = arr[idx]
        arr[idx] = old + h
        up = f()
        arr[idx] = old - h
        down = f()
        arr[idx] = old
        out[idx] = (up - down) / (2 * h)
    return out


def rel_err(a, b, floor=1e-6):
    a, b = np.asarray(a, float), np.asarray(b, float)
    return np.abs(a - b) / np.maximum(np.maximum(np.abs(a), np.abs(b)), floor)
