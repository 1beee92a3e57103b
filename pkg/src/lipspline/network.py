"""Fully connected networks with per-neuron activations.

Layer ``l`` maps ``z -> sigma_l(W_l z + b_l)``. Layers whose activations are
splines carry no bias: the knots absorb input shifts and ``b2`` the output
offset.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .activations import Activation, SplineActivation, from_neuron_dicts
from .norms import outer_norm

FORMAT_VERSION = 1
BCE_EPS = 1e-12


class ModelFormatError(ValueError):
    """Raised when a serialized model cannot be parsed."""


class UnsupportedVersionError(ModelFormatError):
    pass


class DenseLayer:
    def __init__(self, W, activation: Activation, bias=None):
        W = np.array(W, dtype=float)
        if W.ndim != 2:
            raise ValueError(f"weight matrix must be 2-D, got shape {W.shape}")
        if W.shape[0] != activation.width:
            raise ValueError(
                f"{W.shape[0]} rows but {activation.width} activations"
            )
        if not np.all(np.isfinite(W)):
            raise ValueError("weights must be finite")
        if activation.uses_bias:
            bias = np.zeros(W.shape[0]) if bias is None else np.array(bias, dtype=float)
            if bias.shape != (W.shape[0],) or not np.all(np.isfinite(bias)):
                raise ValueError("bias must be a finite vector with one entry per row")
        elif bias is not None:
            raise ValueError("layers with spline activations carry no bias")
        self.W = W
        self.bias = bias
        self.activation = activation

    @property
    def n_in(self) -> int:
        return self.W.shape[1]

    @property
    def n_out(self) -> int:
        return self.W.shape[0]

    def params(self) -> dict:
        p = {"W": self.W}
        if self.bias is not None:
            p["bias"] = self.bias
        p.update(self.activation.params())
        return p

    def pre_activation(self, z):
        s = z @ self.W.T
        if self.bias is not None:
            s = s + self.bias
        return s

    def copy(self) -> "DenseLayer":
        bias = None if self.bias is None else self.bias.copy()
        return DenseLayer(self.W.copy(), self.activation.copy(), bias)


class Network:
    def __init__(self, layers):
        self.layers = list(layers)
        if not self.layers:
            raise ValueError("a network needs at least one layer")
        for prev, nxt in zip(self.layers, self.layers[1:]):
            if prev.n_out != nxt.n_in:
                raise ValueError(
                    f"layer widths do not chain: {prev.n_out} -> {nxt.n_in}"
                )

    @property
    def descriptor(self) -> tuple:
        return (self.layers[0].n_in,) + tuple(layer.n_out for layer in self.layers)

    def __call__(self, x):
        return forward(self, x)[0]

    def copy(self) -> "Network":
        return Network([layer.copy() for layer in self.layers])

    def spline_layers(self):
        return [
            (i, layer.activation)
            for i, layer in enumerate(self.layers)
            if isinstance(layer.activation, SplineActivation)
        ]

    def __repr__(self):
        kinds = ",".join(layer.activation.kind for layer in self.layers)
        return f"Network(descriptor={self.descriptor}, activations=[{kinds}])"


@dataclass
class ForwardCache:
    inputs: list = field(default_factory=list)  # z_{l-1}, fed into layer l
    pre: list = field(default_factory=list)  # s_l
    post: list = field(default_factory=list)  # z_l


def forward(net: Network, x, skip_last_activation: bool = False):
    """Run ``x`` (one sample or a batch of rows) through ``net``.

    With ``skip_last_activation`` the final nonlinearity is dropped, which
    yields the logits of a sigmoid head.
    """
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    z = np.atleast_2d(x)
    if z.shape[1] != net.descriptor[0]:
        raise ValueError(f"expected inputs of dimension {net.descriptor[0]}, got {z.shape[1]}")
    cache = ForwardCache()
    last = len(net.layers) - 1
    for i, layer in enumerate(net.layers):
        cache.inputs.append(z)
        s = layer.pre_activation(z)
        z = s if (skip_last_activation and i == last) else layer.activation(s)
        cache.pre.append(s)
        cache.post.append(z)
    return (z[0] if single else z), cache


def backward(net: Network, cache: ForwardCache, dL_dy) -> list[dict]:
    """Reverse-mode gradients; one dict per layer keyed like ``layer.params()``."""
    g = np.atleast_2d(np.asarray(dL_dy, dtype=float))
    if len(cache.pre) != len(net.layers):
        raise ValueError("cache does not belong to this network")
    for layer, s in zip(net.layers, cache.pre):
        if s.shape[1] != layer.n_out:
            raise ValueError("stale forward cache: shapes do not match the network")
    if g.shape != cache.post[-1].shape:
        raise ValueError(f"dL_dy has shape {g.shape}, expected {cache.post[-1].shape}")

    grads = [None] * len(net.layers)
    for i in reversed(range(len(net.layers))):
        layer = net.layers[i]
        s, z_in = cache.pre[i], cache.inputs[i]
        act = layer.activation
        layer_grads = dict(act.grads(s, g))
        g_s = g * act.derivative(s)
        layer_grads["W"] = g_s.T @ z_in
        if layer.bias is not None:
            layer_grads["bias"] = g_s.sum(axis=0)
        grads[i] = layer_grads
        g = g_s @ layer.W
    return grads


def bce_loss(y, yhat):
    """Binary cross-entropy with ``yhat`` clamped to ``[eps, 1 - eps]``."""
    y = np.asarray(y, dtype=float)
    yhat = np.asarray(yhat, dtype=float)
    p = np.clip(yhat, BCE_EPS, 1.0 - BCE_EPS)
    out = -(y * np.log(p) + (1.0 - y) * np.log1p(-p))
    # the clamp would otherwise leave ~1e-12 on a perfect prediction
    out = np.where(yhat == y, 0.0, out)
    return float(out) if out.ndim == 0 else out


def bce_grad(y, yhat):
    y = np.asarray(y, dtype=float)
    p = np.clip(np.asarray(yhat, dtype=float), BCE_EPS, 1.0 - BCE_EPS)
    return -y / p + (1.0 - y) / (1.0 - p)


def _per_layer(values, n_layers: int, name: str) -> np.ndarray:
    arr = np.asarray(values, dtype=float)
    if arr.ndim == 0:
        return np.full(n_layers, float(arr))
    if arr.shape != (n_layers,):
        raise ValueError(f"{name} needs one value per layer ({n_layers}), got {arr.shape}")
    return arr


def data_loss(net: Network, X, y, reduction: str = "sum") -> float:
    yhat = forward(net, np.atleast_2d(X))[0][:, 0]
    losses = bce_loss(np.asarray(y, dtype=float).reshape(-1), yhat)
    if reduction == "sum":
        return float(np.sum(losses))
    if reduction == "mean":
        return float(np.mean(losses))
    raise ValueError(f"reduction must be 'sum' or 'mean', got {reduction!r}")


def regularization(net: Network, mu, lam, outer: str = "l1") -> float:
    """``sum_l mu_l ||W_l||_F^2 + lam_l ||sigma_l||_{BV2, outer}``."""
    L = len(net.layers)
    mu, lam = _per_layer(mu, L, "mu"), _per_layer(lam, L, "lam")
    total = 0.0
    for layer, m, lm in zip(net.layers, mu, lam):
        if m:
            total += m * float(np.sum(layer.W**2))
        if lm:
            total += lm * outer_norm(layer.activation.bv2_norms(), outer)
    return total


def regularization_gradients(net: Network, mu, lam, outer: str = "l1") -> list[dict]:
    """(Sub)gradient of :func:`regularization`, keyed like ``layer.params()``."""
    L = len(net.layers)
    mu, lam = _per_layer(mu, L, "mu"), _per_layer(lam, L, "lam")
    out = []
    for layer, m, lm in zip(net.layers, mu, lam):
        g = {"W": 2.0 * m * layer.W}
        if lm:
            norms = layer.activation.bv2_norms()
            if outer == "l1":
                weights = np.full_like(norms, lm)
            elif outer == "l2":
                total = outer_norm(norms, "l2")
                weights = lm * norms / total if total > 0 else np.zeros_like(norms)
            else:
                raise ValueError(f"outer norm must be 'l1' or 'l2', got {outer!r}")
            g.update(layer.activation.bv2_subgradient(weights))
        out.append(g)
    return out


def regularized_cost(net: Network, X, y, mu, lam, outer: str = "l1",
                     reduction: str = "sum") -> float:
    X = np.asarray(X, dtype=float)
    fidelity = data_loss(net, X, y, reduction) if len(X) else 0.0
    return fidelity + regularization(net, mu, lam, outer)


def param_count(net: Network) -> int:
    """Weights plus activation parameters (biases, slopes, active ReLU terms)."""
    return sum(layer.W.size + layer.activation.n_params() for layer in net.layers)


def nnz_coeffs(net: Network) -> int:
    return sum(act.nnz() for _, act in net.spline_layers())


def remove_knot(coeffs, knots, k: int) -> None:
    """Zero ``coeffs[k]`` in place, folding it into the nearest active knots.

    With active knots ``j < k < m`` on both sides, ``a_k`` is split between
    them so that slope and value beyond ``tau_m`` (and below ``tau_j``) are
    unchanged; the spline then only moves on ``(tau_j, tau_m)``, where it
    becomes the chord between its values at the two neighbours. Without an
    active knot on both sides the coefficient is simply dropped.
    """
    a = coeffs[k]
    coeffs[k] = 0.0
    active = np.flatnonzero(coeffs)
    left, right = active[active < k], active[active > k]
    if left.size and right.size:
        j, m = left[-1], right[0]
        span = knots[m] - knots[j]
        coeffs[j] += a * (knots[m] - knots[k]) / span
        coeffs[m] += a * (knots[k] - knots[j]) / span


def _misclassified(net: Network, X, y) -> float:
    yhat = forward(net, X)[0][:, 0]
    return float(np.mean((yhat >= 0.5) != (np.asarray(y) >= 0.5)))


def sparsify(net: Network, X, y, rel_budget: float = 0.01) -> Network:
    """Greedy removal of spline coefficients, smallest ``|a_k|`` first.

    Each candidate is removed with :func:`remove_knot` and kept removed only
    if both the mean training loss and the training error rate stay within
    ``(1 + rel_budget)`` times their starting values; otherwise it is restored
    and the next candidate is tried. Returns a modified copy.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    y = np.asarray(y, dtype=float).reshape(-1)
    if len(X) == 0:
        raise ValueError("sparsify needs a non-empty training set")
    if rel_budget < 0:
        raise ValueError("rel_budget must be non-negative")
    out = net.copy()
    loss_limit = data_loss(out, X, y, "mean") * (1.0 + rel_budget)
    err_limit = _misclassified(out, X, y) * (1.0 + rel_budget)
    rejected = set()
    while True:
        candidates = [
            (abs(act.coeffs[n, k]), i, int(n), int(k))
            for i, act in out.spline_layers()
            for n, k in zip(*np.nonzero(act.coeffs))
            if (i, int(n), int(k)) not in rejected
        ]
        if not candidates:
            break
        _, i, n, k = min(candidates)
        act = out.layers[i].activation
        saved = act.coeffs[n].copy()
        remove_knot(act.coeffs[n], act.knots[n], k)
        if data_loss(out, X, y, "mean") > loss_limit or _misclassified(out, X, y) > err_limit:
            act.coeffs[n] = saved
            rejected.add((i, n, k))
    return out


def to_dict(net: Network) -> dict:
    return {
        "version": FORMAT_VERSION,
        "descriptor": list(net.descriptor),
        "layers": [
            {
                "W": layer.W.tolist(),
                "bias": None if layer.bias is None else layer.bias.tolist(),
                "activations": layer.activation.neuron_dicts(),
            }
            for layer in net.layers
        ],
    }


def from_dict(doc) -> Network:
    if not isinstance(doc, dict):
        raise ModelFormatError("model document must be a JSON object")
    if "version" not in doc:
        raise ModelFormatError("model document has no version field")
    if doc["version"] != FORMAT_VERSION:
        raise UnsupportedVersionError(
            f"unsupported model version {doc['version']!r} (expected {FORMAT_VERSION})"
        )
    try:
        layers = [
            DenseLayer(entry["W"], from_neuron_dicts(entry["activations"]), entry.get("bias"))
            for entry in doc["layers"]
        ]
        net = Network(layers)
    except (KeyError, TypeError, ValueError) as exc:
        raise ModelFormatError(f"invalid model: {exc}") from exc
    if list(net.descriptor) != list(doc.get("descriptor", net.descriptor)):
        raise ModelFormatError(
            f"descriptor {doc['descriptor']} does not match layers {list(net.descriptor)}"
        )
    return net


def serialize(net: Network) -> bytes:
    # json writes floats with repr(), which round-trips float64 exactly
    return json.dumps(to_dict(net), indent=1).encode("utf-8")


def deserialize(data) -> Network:
    if isinstance(data, (bytes, bytearray)):
        data = data.decode("utf-8", errors="strict")
    try:
        doc = json.loads(data)
    except json.JSONDecodeError as exc:
        raise ModelFormatError(f"malformed model file: {exc}") from exc
    return from_dict(doc)


def save(net: Network, path) -> None:
    with open(path, "wb") as fh:
        fh.write(serialize(net))


def load(path) -> Network:
    with open(path, "rb") as fh:
        return deserialize(fh.read())


def params_equal(a: Network, b: Network) -> bool:
    if a.descriptor != b.descriptor:
        return False
    for la, lb in zip(a.layers, b.layers):
        if la.activation.kind != lb.activation.kind:
            return False
        pa, pb = la.params(), lb.params()
        if pa.keys() != pb.keys():
            return False
        if any(not np.array_equal(pa[k], pb[k]) for k in pa):
            return False
        if getattr(la.activation, "knots", None) is not None and not np.array_equal(
            la.activation.knots, lb.activation.knots
        ):
            return False
    return True


__all__ = [
    "DenseLayer", "Network", "ForwardCache", "ModelFormatError", "UnsupportedVersionError",
    "forward", "backward", "bce_loss", "bce_grad", "data_loss", "regularization",
    "regularization_gradients", "regularized_cost", "param_count", "nnz_coeffs",
    "sparsify", "remove_knot", "serialize", "deserialize", "save", "load", "to_dict", "from_dict",
    "params_equal",
]

