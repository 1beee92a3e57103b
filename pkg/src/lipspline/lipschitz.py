"""Certified upper bounds on the Lipschitz constant of a network.

Two product bounds are provided. For the l_p topology (p in [1, inf]),

    C = prod_l ||W_l||_{q,inf} * prod_l ||sigma_l||_{BV2,p},   1/p + 1/q = 1,

and for the Euclidean topology

    C_E = prod_l ||W_l||_F * prod_l ||sigma_l||_{BV2,outer},   outer in {l1, l2}.

Both are upper bounds only. :func:`empirical_lipschitz` gives a sampled lower
bound that must never exceed them.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .activations import Sigmoid
from .network import Network, forward
from .norms import conjugate, mixed_norm, outer_exponent, parse_exponent, power_norm
from .rng import as_rng


@dataclass
class BoundReport:
    kind: str  # "general" or "euclidean"
    p: float
    outer: str | None
    include_sigmoid: bool
    linear_norms: list = field(default_factory=list)
    activation_norms: list = field(default_factory=list)
    bound: float = 0.0
    empirical: float | None = None
    balance_ratios: list | None = None

    def to_dict(self) -> dict:
        d = asdict(self)
        d["p"] = "inf" if math.isinf(self.p) else self.p
        return d

    CSV_FIELDS = ("kind", "p", "outer", "include_sigmoid", "bound", "empirical")

    def csv_row(self) -> dict:
        d = self.to_dict()
        return {k: d[k] for k in self.CSV_FIELDS}


def _drops_sigmoid(net: Network, include_sigmoid: bool) -> bool:
    return not include_sigmoid and isinstance(net.layers[-1].activation, Sigmoid)


def layer_activation_norm(layer_or_norms, p) -> float:
    """(BV2, p)-norm of a nonlinear layer: l_p norm of per-neuron BV2 norms."""
    norms = getattr(layer_or_norms, "activation", None)
    if norms is not None:
        norms = norms.bv2_norms()
    else:
        norms = np.asarray(layer_or_norms, dtype=float)
    return power_norm(norms, p)


def _activation_factors(net: Network, p, include_sigmoid: bool) -> list[float]:
    factors = [layer_activation_norm(layer, p) for layer in net.layers]
    if _drops_sigmoid(net, include_sigmoid):
        # logits: the last nonlinearity is the identity, BV2 norm 1 per neuron
        factors[-1] = power_norm(np.ones(net.layers[-1].n_out), p)
    return factors


def bound_general(net: Network, p=2, include_sigmoid: bool = True) -> BoundReport:
    p = parse_exponent(p)
    q = conjugate(p)
    lin = [mixed_norm(layer.W, q) for layer in net.layers]
    act = _activation_factors(net, p, include_sigmoid)
    return BoundReport(
        kind="general", p=p, outer=None, include_sigmoid=include_sigmoid,
        linear_norms=lin, activation_norms=act,
        bound=float(np.prod(lin) * np.prod(act)),
    )


def bound_euclidean(net: Network, outer: str = "l1", include_sigmoid: bool = True) -> BoundReport:
    op = outer_exponent(outer)
    lin = [float(np.linalg.norm(layer.W, "fro")) for layer in net.layers]
    act = _activation_factors(net, op, include_sigmoid)
    return BoundReport(
        kind="euclidean", p=2.0, outer=outer, include_sigmoid=include_sigmoid,
        linear_norms=lin, activation_norms=act,
        bound=float(np.prod(lin) * np.prod(act)),
    )


def empirical_lipschitz(net: Network, n_pairs: int = 10_000, rng=None, box=None,
                        p=2, include_sigmoid: bool = True, delta: float = 1e-4) -> float:
    """Largest ``||f(x1) - f(x2)||_p / ||x1 - x2||_p`` over sampled pairs.

    Half the budget goes to independent uniform pairs in ``box`` and half to
    close pairs ``(x, x + d)`` with ``||d||_p = delta``. ``box`` is a
    ``(low, high)`` pair of scalars or vectors, default ``[-1, 1]^N0``.
    """
    if n_pairs < 1:
        raise ValueError("n_pairs must be at least 1")
    rng = as_rng(rng)
    p = parse_exponent(p)
    n0 = net.descriptor[0]
    lo, hi = (-1.0, 1.0) if box is None else box
    lo = np.broadcast_to(np.asarray(lo, dtype=float), (n0,))
    hi = np.broadcast_to(np.asarray(hi, dtype=float), (n0,))
    drop = _drops_sigmoid(net, include_sigmoid)

    def f(x):
        return forward(net, x, skip_last_activation=drop)[0]

    def pnorm(v):
        return np.linalg.norm(v, ord=p, axis=1)

    n_far = max(1, n_pairs // 2)
    n_near = max(1, n_pairs - n_far)
    x1 = rng.uniform(lo, hi, size=(n_far, n0))
    x2 = rng.uniform(lo, hi, size=(n_far, n0))
    xa = rng.uniform(lo, hi, size=(n_near, n0))
    d = rng.standard_normal((n_near, n0))
    d *= delta / pnorm(d)[:, None]
    xb = xa + d

    best = 0.0
    for a, b in ((x1, x2), (xa, xb)):
        dx = pnorm(a - b)
        ok = dx > 0
        if np.any(ok):
            ratios = pnorm(f(a) - f(b))[ok] / dx[ok]
            best = max(best, float(ratios.max()))
    return best


def balance_ratios(net: Network, mu, lam) -> list[float]:
    """``lam_l ||sigma_l||_{BV2,1} / (2 mu_{l+1} ||W_{l+1}||_F^2)`` for l < L.

    At a local minimum of the regularized objective every ratio equals 1.
    Zero denominators give ``inf``.
    """
    L = len(net.layers)
    if L < 2:
        raise ValueError("balance ratios need at least two layers")
    mu = np.broadcast_to(np.asarray(mu, dtype=float), (L,))
    lam = np.broadcast_to(np.asarray(lam, dtype=float), (L,))
    ratios = []
    for l in range(L - 1):
        num = lam[l] * layer_activation_norm(net.layers[l], 1)
        den = 2.0 * mu[l + 1] * float(np.sum(net.layers[l + 1].W ** 2))
        ratios.append(num / den if den > 0 else math.inf)
    return ratios


def mean_balance(nets, mu, lam) -> list[float]:
    """Balance ratios of the seed-averaged layer energies over ``nets``.

    This is the population version of :func:`balance_ratios`: numerator and
    denominator are averaged separately, which is how a lambda tuned "in
    expectation at initialization" should be judged.
    """
    nets = list(nets)
    L = len(nets[0].layers)
    mu = np.broadcast_to(np.asarray(mu, dtype=float), (L,))
    lam = np.broadcast_to(np.asarray(lam, dtype=float), (L,))
    out = []
    for l in range(L - 1):
        num = np.mean([lam[l] * layer_activation_norm(n.layers[l], 1) for n in nets])
        den = np.mean([2.0 * mu[l + 1] * np.sum(n.layers[l + 1].W ** 2) for n in nets])
        out.append(float(num / den) if den > 0 else math.inf)
    return out
