"""Linear-spline ("deep-spline") activations.

A spline is parametrised as a sum of shifted ReLUs plus an affine term::

    sigma(x) = sum_k a_k * max(x - tau_k, 0) + b1 * x + b2

Knots ``tau`` are fixed; ``a``, ``b1`` and ``b2`` are the trainable parameters.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


def relu_basis(x, knots):
    """``max(x - tau_k, 0)`` for every knot, stacked on a trailing axis."""
    x = np.asarray(x, dtype=float)
    return np.maximum(x[..., None] - knots, 0.0)


def uniform_knots(n_knots: int, span=(-1.0, 1.0)) -> np.ndarray:
    """K equispaced knots over ``span``; a single knot sits at the centre."""
    if n_knots < 1:
        raise ValueError("need at least one knot")
    lo, hi = float(span[0]), float(span[1])
    if not lo < hi:
        raise ValueError(f"invalid knot span {span!r}")
    if n_knots == 1:
        return np.array([0.5 * (lo + hi)])
    return np.linspace(lo, hi, n_knots)


@dataclass
class DeepSpline:
    knots: np.ndarray
    coeffs: np.ndarray
    b1: float = 0.0
    b2: float = 0.0

    def __post_init__(self):
        self.knots = np.array(self.knots, dtype=float).reshape(-1)
        self.coeffs = np.array(self.coeffs, dtype=float).reshape(-1)
        self.b1 = float(self.b1)
        self.b2 = float(self.b2)
        if self.knots.size < 1:
            raise ValueError("a spline needs at least one knot")
        if self.coeffs.shape != self.knots.shape:
            raise ValueError(
                f"got {self.coeffs.size} coefficients for {self.knots.size} knots"
            )
        if not (np.all(np.isfinite(self.knots)) and np.all(np.isfinite(self.coeffs))):
            raise ValueError("knots and coefficients must be finite")
        if not (np.isfinite(self.b1) and np.isfinite(self.b2)):
            raise ValueError("affine coefficients must be finite")
        if np.any(np.diff(self.knots) <= 0):
            raise ValueError("knots must be strictly increasing")

    @property
    def n_knots(self) -> int:
        return self.knots.size

    def __call__(self, x):
        return eval_spline(self, x)

    def copy(self) -> "DeepSpline":
        return DeepSpline(self.knots.copy(), self.coeffs.copy(), self.b1, self.b2)


def eval_spline(s: DeepSpline, x):
    """Evaluate ``s`` at a scalar or array ``x``."""
    x = np.asarray(x, dtype=float)
    out = relu_basis(x, s.knots) @ s.coeffs + s.b1 * x + s.b2
    return float(out) if out.ndim == 0 else out


def one_sided_derivative(s: DeepSpline, x, side: str = "right"):
    """Left or right derivative; the right one counts knots with ``tau <= x``."""
    x = np.asarray(x, dtype=float)
    if side == "right":
        active = x[..., None] >= s.knots
    elif side == "left":
        active = x[..., None] > s.knots
    else:
        raise ValueError(f"side must be 'left' or 'right', got {side!r}")
    out = s.b1 + active @ s.coeffs
    return float(out) if out.ndim == 0 else out


def param_gradients(s: DeepSpline, x: float):
    """Gradient of ``eval_spline(s, x)`` with respect to ``(coeffs, b1, b2)``."""
    x = float(x)
    return relu_basis(x, s.knots), x, 1.0


def tv2(s: DeepSpline) -> float:
    """Second-order total variation; for a linear spline this is ``||a||_1``."""
    return float(np.abs(s.coeffs).sum())


def bv2_norm(s: DeepSpline) -> float:
    return tv2(s) + abs(eval_spline(s, 1.0)) + abs(eval_spline(s, 0.0))


def bv2_subgradient(s: DeepSpline):
    """A subgradient of :func:`bv2_norm` w.r.t. ``(coeffs, b1, b2)``.

    Uses ``sign(0) = 0`` so that exactly-zero coefficients stay at rest.
    """
    s1 = np.sign(eval_spline(s, 1.0))
    s0 = np.sign(eval_spline(s, 0.0))
    sub_a = (
        np.sign(s.coeffs)
        + s1 * np.maximum(1.0 - s.knots, 0.0)
        + s0 * np.maximum(-s.knots, 0.0)
    )
    return sub_a, float(s1), float(s1 + s0)


def _nearest_knot(grid: np.ndarray, target: float) -> int:
    # ties go to the knot farther from zero so that odd grids stay symmetric
    dist = np.abs(grid - target)
    candidates = np.flatnonzero(dist == dist.min())
    return int(candidates[np.argmax(np.abs(grid[candidates]))])


def _check_grid(knot_grid) -> np.ndarray:
    grid = np.array(knot_grid, dtype=float).reshape(-1)
    if grid.size < 1:
        raise ValueError("knot grid must contain at least one knot")
    return grid


def init_abs(knot_grid) -> DeepSpline:
    """Absolute value ``|x|``: ``a = 2`` at the knot closest to 0, ``b1 = -1``."""
    grid = _check_grid(knot_grid)
    coeffs = np.zeros_like(grid)
    coeffs[_nearest_knot(grid, 0.0)] = 2.0
    return DeepSpline(grid, coeffs, b1=-1.0, b2=0.0)


def init_soft(knot_grid) -> DeepSpline:
    """Soft-thresholding with a dead zone on ``(-1/2, 1/2)``."""
    grid = _check_grid(knot_grid)
    coeffs = np.zeros_like(grid)
    coeffs[_nearest_knot(grid, -0.5)] += -1.0
    coeffs[_nearest_knot(grid, 0.5)] += 1.0
    return DeepSpline(grid, coeffs, b1=1.0, b2=0.5)
