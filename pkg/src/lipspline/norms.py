from __future__ import annotations

import math

import numpy as np


def parse_exponent(p) -> float:
    """Accept 1, 2, 2.5, ``inf``, ``"inf"``; reject anything below 1."""
    if isinstance(p, str):
        p = p.strip().lower()
        if p in ("inf", "infinity", "∞"):
            return math.inf
        p = float(p)
    p = float(p)
    if not p >= 1.0:
        raise ValueError(f"norm exponent must be in [1, inf], got {p}")
    return p


def conjugate(p: float) -> float:
    p = parse_exponent(p)
    if p == 1.0:
        return math.inf
    if math.isinf(p):
        return 1.0
    return p / (p - 1.0)


def power_norm(values, p) -> float:
    """``(sum |v|^p)^(1/p)`` with the max factored out for stability."""
    v = np.abs(np.asarray(values, dtype=float)).reshape(-1)
    p = parse_exponent(p)
    if v.size == 0:
        return 0.0
    top = v.max()
    if math.isinf(p):
        return float(top)
    if top == 0.0:
        return 0.0
    if p == 1.0:
        return float(v.sum())
    return float(top * np.sum((v / top) ** p) ** (1.0 / p))


def mixed_norm(W, q) -> float:
    """Largest l_q norm over the rows of ``W``."""
    W = np.atleast_2d(np.asarray(W, dtype=float))
    return max(power_norm(row, q) for row in W)


def outer_norm(values, outer: str) -> float:
    return power_norm(values, outer_exponent(outer))


def outer_exponent(outer: str) -> float:
    if outer in ("l1", 1):
        return 1.0
    if outer in ("l2", 2):
        return 2.0
    raise ValueError(f"outer norm must be 'l1' or 'l2', got {outer!r}")
