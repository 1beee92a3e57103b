"""Per-layer activation blocks.

Each block acts coordinate-wise on the pre-activations of one layer, shape
``(batch, width)``. Besides evaluation it exposes what the training loop and
the Lipschitz bounds need: right derivatives, parameter gradients, per-neuron
BV(2) norms and a subgradient of those norms.
"""
from __future__ import annotations

import math

import numpy as np
from scipy.special import expit

from .splines import DeepSpline, relu_basis

# TV2 = 1/2 (twice the peak slope 1/4), sigma(0) = 1/2, sigma(1) = 1/(1+e^-1)
SIGMOID_BV2 = 0.5 + 0.5 + 1.0 / (1.0 + math.exp(-1.0))


class Activation:
    kind = ""
    # whether the preceding linear map carries a bias vector
    uses_bias = True

    def __init__(self, width: int):
        self.width = int(width)

    def __call__(self, s):
        raise NotImplementedError

    def derivative(self, s):
        """Right derivative at each entry of ``s``."""
        raise NotImplementedError

    def params(self) -> dict:
        return {}

    def grads(self, s, g) -> dict:
        """Parameter gradients given upstream ``g = dL/dz`` for ``z = self(s)``."""
        return {}

    def bv2_norms(self) -> np.ndarray:
        raise NotImplementedError

    def bv2_subgradient(self, weights) -> dict:
        """Subgradient of ``sum_n weights[n] * ||sigma_n||_BV2`` w.r.t. params."""
        return {}

    def n_params(self) -> int:
        return 0

    def neuron_dicts(self) -> list:
        return [{"kind": self.kind} for _ in range(self.width)]

    def copy(self):
        raise NotImplementedError


class SplineActivation(Activation):
    """One learnable linear spline per neuron, all evaluated in one shot."""

    kind = "spline"
    uses_bias = False

    def __init__(self, knots, coeffs, b1, b2):
        knots = np.array(knots, dtype=float)
        coeffs = np.array(coeffs, dtype=float)
        if knots.ndim != 2 or coeffs.shape != knots.shape:
            raise ValueError("knots and coeffs must both have shape (width, K)")
        super().__init__(knots.shape[0])
        self.knots = knots
        self.coeffs = coeffs
        self.b1 = np.array(b1, dtype=float).reshape(self.width)
        self.b2 = np.array(b2, dtype=float).reshape(self.width)

    @classmethod
    def from_splines(cls, splines):
        splines = list(splines)
        if not splines:
            raise ValueError("need at least one spline")
        sizes = {sp.n_knots for sp in splines}
        if len(sizes) != 1:
            raise ValueError("all splines of a layer must share the knot count")
        return cls(
            np.stack([sp.knots for sp in splines]),
            np.stack([sp.coeffs for sp in splines]),
            [sp.b1 for sp in splines],
            [sp.b2 for sp in splines],
        )

    def spline(self, n: int) -> DeepSpline:
        return DeepSpline(self.knots[n], self.coeffs[n], self.b1[n], self.b2[n])

    def splines(self) -> list[DeepSpline]:
        return [self.spline(n) for n in range(self.width)]

    def __call__(self, s):
        basis = relu_basis(s, self.knots)
        return np.einsum("bnk,nk->bn", basis, self.coeffs) + self.b1 * s + self.b2

    def derivative(self, s):
        active = s[..., None] >= self.knots
        return np.einsum("bnk,nk->bn", active, self.coeffs) + self.b1

    def params(self):
        return {"coeffs": self.coeffs, "b1": self.b1, "b2": self.b2}

    def grads(self, s, g):
        basis = relu_basis(s, self.knots)
        return {
            "coeffs": np.einsum("bn,bnk->nk", g, basis),
            "b1": (g * s).sum(axis=0),
            "b2": g.sum(axis=0),
        }

    def _values_at(self, x: float):
        return (
            np.einsum("nk,nk->n", np.maximum(x - self.knots, 0.0), self.coeffs)
            + self.b1 * x
            + self.b2
        )

    def bv2_norms(self):
        return (
            np.abs(self.coeffs).sum(axis=1)
            + np.abs(self._values_at(1.0))
            + np.abs(self._values_at(0.0))
        )

    def bv2_subgradient(self, weights):
        w = np.asarray(weights, dtype=float).reshape(self.width)
        s1 = np.sign(self._values_at(1.0))
        s0 = np.sign(self._values_at(0.0))
        sub_a = (
            np.sign(self.coeffs)
            + s1[:, None] * np.maximum(1.0 - self.knots, 0.0)
            + s0[:, None] * np.maximum(-self.knots, 0.0)
        )
        return {"coeffs": w[:, None] * sub_a, "b1": w * s1, "b2": w * (s1 + s0)}

    def nnz(self) -> int:
        return int(np.count_nonzero(self.coeffs))

    def n_params(self):
        return self.nnz() + 2 * self.width

    def neuron_dicts(self):
        return [
            {
                "kind": "spline",
                "knots": self.knots[n].tolist(),
                "coeffs": self.coeffs[n].tolist(),
                "b1": float(self.b1[n]),
                "b2": float(self.b2[n]),
            }
            for n in range(self.width)
        ]

    def copy(self):
        return SplineActivation(
            self.knots.copy(), self.coeffs.copy(), self.b1.copy(), self.b2.copy()
        )


class ReLU(Activation):
    kind = "relu"

    def __call__(self, s):
        return np.maximum(s, 0.0)

    def derivative(self, s):
        return (s >= 0).astype(float)

    def bv2_norms(self):
        return np.full(self.width, 2.0)

    def n_params(self):
        return self.width  # one bias per neuron

    def copy(self):
        return ReLU(self.width)


class LeakyReLU(Activation):
    kind = "leaky_relu"

    def __init__(self, width: int, slope: float = 0.01):
        super().__init__(width)
        if not 0.0 < slope < 1.0:
            raise ValueError(f"LeakyReLU slope must lie in (0, 1), got {slope}")
        self.slope = float(slope)

    def __call__(self, s):
        return np.maximum(s, self.slope * s)

    def derivative(self, s):
        return np.where(s >= 0, 1.0, self.slope)

    def bv2_norms(self):
        return np.full(self.width, 2.0 - self.slope)

    def n_params(self):
        return self.width

    def neuron_dicts(self):
        return [{"kind": self.kind, "slope": self.slope} for _ in range(self.width)]

    def copy(self):
        return LeakyReLU(self.width, self.slope)


class PReLU(Activation):
    """LeakyReLU whose negative-side slope is learned, one per neuron."""

    kind = "prelu"

    def __init__(self, width: int, slope=0.25):
        super().__init__(width)
        self.slope = np.broadcast_to(np.asarray(slope, dtype=float), (self.width,)).copy()
        if not np.all(np.isfinite(self.slope)):
            raise ValueError("PReLU slopes must be finite")

    def __call__(self, s):
        return np.where(s >= 0, s, self.slope * s)

    def derivative(self, s):
        return np.where(s >= 0, 1.0, self.slope)

    def params(self):
        return {"slope": self.slope}

    def grads(self, s, g):
        return {"slope": (g * np.minimum(s, 0.0)).sum(axis=0)}

    def bv2_norms(self):
        return np.abs(1.0 - self.slope) + 1.0

    def bv2_subgradient(self, weights):
        return {"slope": -np.asarray(weights, dtype=float) * np.sign(1.0 - self.slope)}

    def n_params(self):
        return 2 * self.width

    def neuron_dicts(self):
        return [{"kind": self.kind, "slope": float(a)} for a in self.slope]

    def copy(self):
        return PReLU(self.width, self.slope.copy())


class Sigmoid(Activation):
    kind = "sigmoid"

    def __call__(self, s):
        return expit(s)

    def derivative(self, s):
        y = expit(s)
        return y * (1.0 - y)

    def bv2_norms(self):
        return np.full(self.width, SIGMOID_BV2)

    def n_params(self):
        return self.width

    def copy(self):
        return Sigmoid(self.width)


FIXED_KINDS = {"relu": ReLU, "leaky_relu": LeakyReLU, "prelu": PReLU, "sigmoid": Sigmoid}


def from_neuron_dicts(entries) -> Activation:
    entries = list(entries)
    if not entries:
        raise ValueError("layer has no activations")
    kinds = {e.get("kind") for e in entries}
    if len(kinds) != 1:
        raise ValueError(f"mixed activation kinds in one layer: {sorted(map(str, kinds))}")
    kind = kinds.pop()
    width = len(entries)
    if kind == "spline":
        return SplineActivation.from_splines(
            DeepSpline(e["knots"], e["coeffs"], e["b1"], e["b2"]) for e in entries
        )
    if kind == "leaky_relu":
        slopes = {float(e["slope"]) for e in entries}
        if len(slopes) != 1:
            raise ValueError("LeakyReLU slope must be shared across a layer")
        return LeakyReLU(width, slopes.pop())
    if kind == "prelu":
        return PReLU(width, [float(e["slope"]) for e in entries])
    if kind in FIXED_KINDS:
        return FIXED_KINDS[kind](width)
    raise ValueError(f"unknown activation kind {kind!r}")
