"""Seeded initialization and first-order training of the regularized objective."""
from __future__ import annotations

import csv
import io
import logging
import math
from dataclasses import asdict, dataclass, field, fields

import numpy as np

from .activations import LeakyReLU, PReLU, ReLU, Sigmoid, SplineActivation
from .data import Dataset, error_rate
from .lipschitz import bound_euclidean
from .network import (
    DenseLayer, Network, backward, bce_grad, data_loss, forward, nnz_coeffs,
    regularization, regularization_gradients, sparsify,
)
from .rng import as_rng
from .splines import init_abs, init_soft, uniform_knots

log = logging.getLogger(__name__)

ACTIVATIONS = ("spline", "relu", "leaky_relu", "prelu")


class ConfigError(ValueError):
    pass


class NumericalError(RuntimeError):
    """Training produced a non-finite objective or gradient."""


@dataclass
class TrainConfig:
    activation: str = "spline"
    hidden: list = field(default_factory=lambda: [2])
    n_knots: int = 21
    knot_range: list = field(default_factory=lambda: [-1.0, 1.0])
    optimizer: str = "adam"
    learning_rate: float = 3e-3
    epochs: int = 500
    batch_size: int = 32
    mu: float = 1e-4
    lam: object = "auto"
    outer_norm: str = "l1"
    loss_reduction: str = "mean"
    seed: int = 0
    sparsify_budget: float = 0.01
    n_train: int = 1000
    n_test: int = 10_000
    leaky_slope: float = 0.01
    prelu_slope: float = 0.25

    def __post_init__(self):
        self.hidden = [int(h) for h in self.hidden]
        self.knot_range = [float(v) for v in self.knot_range]
        if isinstance(self.lam, str):
            if self.lam.lower() != "auto":
                raise ConfigError(f"lam must be a number or 'auto', got {self.lam!r}")
            self.lam = "auto"
        else:
            self.lam = float(self.lam)
            if not self.lam >= 0:
                raise ConfigError("lam must be non-negative")
        checks = [
            (self.activation in ACTIVATIONS, f"activation must be one of {ACTIVATIONS}"),
            (len(self.hidden) >= 1 and min(self.hidden) >= 1, "hidden widths must be >= 1"),
            (self.n_knots >= 1, "n_knots must be >= 1"),
            (len(self.knot_range) == 2 and self.knot_range[0] < self.knot_range[1],
             "knot_range must be [low, high] with low < high"),
            (self.optimizer in ("sgd", "adam"), "optimizer must be 'sgd' or 'adam'"),
            (self.learning_rate > 0, "learning_rate must be positive"),
            (self.epochs >= 0, "epochs must be >= 0"),
            (self.batch_size >= 1, "batch_size must be >= 1"),
            (self.mu >= 0, "mu must be non-negative"),
            (self.outer_norm in ("l1", "l2"), "outer_norm must be 'l1' or 'l2'"),
            (self.loss_reduction in ("sum", "mean"), "loss_reduction must be 'sum' or 'mean'"),
            (self.sparsify_budget >= 0, "sparsify_budget must be non-negative"),
            (self.n_train >= 1 and self.n_test >= 1, "n_train and n_test must be >= 1"),
            (0 < self.leaky_slope < 1, "leaky_slope must lie in (0, 1)"),
        ]
        for ok, msg in checks:
            if not ok:
                raise ConfigError(msg)

    @classmethod
    def from_dict(cls, doc: dict) -> "TrainConfig":
        if not isinstance(doc, dict):
            raise ConfigError("config must be a JSON object")
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(doc) - known)
        if unknown:
            raise ConfigError(f"unknown config fields: {', '.join(unknown)}")
        try:
            return cls(**doc)
        except (TypeError, ValueError) as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(str(exc)) from exc

    def to_dict(self) -> dict:
        return asdict(self)

    def replace(self, **changes) -> "TrainConfig":
        doc = self.to_dict()
        doc.update(changes)
        return TrainConfig.from_dict(doc)


HISTORY_FIELDS = ("epoch", "objective", "loss", "error_rate", "lipschitz_bound", "nnz_coeffs")


@dataclass
class TrainHistory:
    objective: list = field(default_factory=list)
    loss: list = field(default_factory=list)
    error_rate: list = field(default_factory=list)
    lipschitz_bound: list = field(default_factory=list)
    nnz_coeffs: list = field(default_factory=list)

    def __len__(self):
        return len(self.objective)

    def rows(self):
        for i in range(len(self)):
            yield {
                "epoch": i + 1,
                "objective": self.objective[i],
                "loss": self.loss[i],
                "error_rate": self.error_rate[i],
                "lipschitz_bound": self.lipschitz_bound[i],
                "nnz_coeffs": self.nnz_coeffs[i],
            }

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.DictWriter(buf, fieldnames=HISTORY_FIELDS, lineterminator="\n")
        writer.writeheader()
        for row in self.rows():
            writer.writerow({k: repr(v) if isinstance(v, float) else v for k, v in row.items()})
        return buf.getvalue()


def xavier_init(fan_in: int, fan_out: int, rng=None) -> np.ndarray:
    """Gaussian ``(fan_out, fan_in)`` matrix with variance ``2 / (fan_in + fan_out)``."""
    if fan_in < 1 or fan_out < 1:
        raise ValueError("fan_in and fan_out must be >= 1")
    rng = as_rng(rng)
    return rng.normal(0.0, math.sqrt(2.0 / (fan_in + fan_out)), size=(fan_out, fan_in))


def auto_lambda(mu: float, W: int) -> float:
    """lambda balancing a (2, 2W, 1) abs/soft-initialized net at Xavier init."""
    if W < 1:
        raise ValueError("width parameter W must be >= 1")
    if mu < 0:
        raise ValueError("mu must be non-negative")
    return 16.0 * mu / (11.0 * (2 * W + 1))


def spline_layer(width: int, knots) -> SplineActivation:
    # alternate |x| and soft-threshold; an odd width gives the extra neuron to |x|
    return SplineActivation.from_splines(
        init_abs(knots) if n % 2 == 0 else init_soft(knots) for n in range(width)
    )


def build_network(cfg: TrainConfig, n_in: int = 2, rng=None) -> Network:
    """Xavier weights, canonical activations and a sigmoid output neuron."""
    rng = as_rng(rng)
    knots = uniform_knots(cfg.n_knots, cfg.knot_range)
    layers = []
    fan_in = n_in
    for width in cfg.hidden:
        W = xavier_init(fan_in, width, rng)
        if cfg.activation == "spline":
            act = spline_layer(width, knots)
        elif cfg.activation == "relu":
            act = ReLU(width)
        elif cfg.activation == "leaky_relu":
            act = LeakyReLU(width, cfg.leaky_slope)
        else:
            act = PReLU(width, cfg.prelu_slope)
        layers.append(DenseLayer(W, act))
        fan_in = width
    layers.append(DenseLayer(xavier_init(fan_in, 1, rng), Sigmoid(1)))
    return Network(layers)


def resolve_lambda(cfg: TrainConfig, net: Network) -> np.ndarray:
    """Per-layer lambda. ``auto`` balances each spline layer against the
    expected Frobenius energy of the next linear layer at Xavier init; for a
    single hidden layer of even width 2W this is :func:`auto_lambda`."""
    L = len(net.layers)
    if cfg.lam != "auto":
        return np.full(L, cfg.lam)
    lam = np.zeros(L)
    for i, layer in enumerate(net.layers[:-1]):
        if not isinstance(layer.activation, SplineActivation):
            continue
        nxt = net.layers[i + 1]
        expected_energy = nxt.n_out * nxt.n_in * 2.0 / (nxt.n_in + nxt.n_out)
        act_norm = float(layer.activation.bv2_norms().sum())
        lam[i] = 2.0 * cfg.mu * expected_energy / act_norm if act_norm > 0 else 0.0
    # the output nonlinearity is fixed; give it the preceding value for reporting
    lam[-1] = lam[-2] if L > 1 else 0.0
    return lam


@dataclass
class AdamState:
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    t: int = 0
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)


def _check_shapes(params: dict, grads: dict):
    for k, g in grads.items():
        if k not in params:
            raise ValueError(f"gradient for unknown parameter {k!r}")
        if np.shape(params[k]) != np.shape(g):
            raise ValueError(f"shape mismatch for {k!r}: {np.shape(params[k])} vs {np.shape(g)}")


def sgd_step(params: dict, grads: dict, lr: float) -> dict:
    _check_shapes(params, grads)
    for k, g in grads.items():
        params[k] -= lr * g
    return params


def adam_step(params: dict, grads: dict, state: AdamState, lr: float):
    """One bias-corrected Adam update, in place; keys of ``grads`` drive it."""
    _check_shapes(params, grads)
    state.t += 1
    c1 = 1.0 - state.beta1**state.t
    c2 = 1.0 - state.beta2**state.t
    for k, g in grads.items():
        m = state.m.get(k)
        if m is None:
            m = state.m[k] = np.zeros_like(params[k], dtype=float)
            state.v[k] = np.zeros_like(params[k], dtype=float)
        v = state.v[k]
        m *= state.beta1
        m += (1.0 - state.beta1) * g
        v *= state.beta2
        v += (1.0 - state.beta2) * g * g
        params[k] -= lr * (m / c1) / (np.sqrt(v / c2) + state.eps)
    return params, state


def _flat_params(net: Network) -> dict:
    return {
        (i, name): arr
        for i, layer in enumerate(net.layers)
        for name, arr in layer.params().items()
    }


def objective(net: Network, ds: Dataset, mu, lam, outer: str, reduction: str) -> float:
    return data_loss(net, ds.X, ds.y, reduction) + regularization(net, mu, lam, outer)


def train(net: Network, ds: Dataset, cfg: TrainConfig, rng=None, finish_sparse: bool = True):
    """Mini-batch training of data loss + weight decay + BV2 penalty.

    Regularizer subgradients are added to the data gradient at every step.
    A final sparsification pass removes spline coefficients within
    ``cfg.sparsify_budget`` unless ``finish_sparse`` is off. ``net`` is left
    untouched; returns ``(trained_net, history)``.
    """
    if len(ds) == 0:
        raise ValueError("cannot train on an empty dataset")
    if ds.X.shape[1] != net.descriptor[0] or net.descriptor[-1] != 1:
        raise ValueError(f"network {net.descriptor} does not fit data of dimension {ds.X.shape[1]}")
    rng = as_rng(rng)
    net = net.copy()
    L = len(net.layers)
    mu = np.full(L, cfg.mu)
    lam = resolve_lambda(cfg, net)
    params = _flat_params(net)
    state = AdamState()
    history = TrainHistory()
    M = len(ds)
    bs = min(cfg.batch_size, M)

    for epoch in range(cfg.epochs):
        order = rng.permutation(M)
        for start in range(0, M, bs):
            idx = order[start:start + bs]
            X, y = ds.X[idx], ds.y[idx]
            yhat, cache = forward(net, X)
            scale = 1.0 / len(idx) if cfg.loss_reduction == "mean" else M / len(idx)
            g_out = scale * bce_grad(y, yhat[:, 0])[:, None]
            data_g = backward(net, cache, g_out)
            reg_g = regularization_gradients(net, mu, lam, cfg.outer_norm)
            grads = {}
            for i in range(L):
                for name, g in data_g[i].items():
                    grads[(i, name)] = g + reg_g[i][name] if name in reg_g[i] else g
                for name, g in reg_g[i].items():
                    grads.setdefault((i, name), g)
            if cfg.optimizer == "adam":
                adam_step(params, grads, state, cfg.learning_rate)
            else:
                sgd_step(params, grads, cfg.learning_rate)

        obj = objective(net, ds, mu, lam, cfg.outer_norm, cfg.loss_reduction)
        if not math.isfinite(obj):
            raise NumericalError(f"objective became {obj} at epoch {epoch + 1}")
        history.objective.append(obj)
        history.loss.append(data_loss(net, ds.X, ds.y, "mean"))
        history.error_rate.append(error_rate(net, ds))
        history.lipschitz_bound.append(bound_euclidean(net, cfg.outer_norm).bound)
        history.nnz_coeffs.append(nnz_coeffs(net))
        if (epoch + 1) % 100 == 0:
            log.debug("epoch %d objective %.6g error %.2f%%", epoch + 1, obj, history.error_rate[-1])

    if finish_sparse:
        net = sparsify(net, ds.X, ds.y, cfg.sparsify_budget)
    return net, history
