"""Adaptive Gauss-Legendre quadrature for piecewise-smooth integrands."""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .errors import ToleranceNotMet

__all__ = ["QuadResult", "integrate_pieces", "birkhoff_avg_quadrature"]


@dataclass(frozen=True)
class QuadResult:
    value: float
    error: float

    def __iter__(self):
        return iter((self.value, self.error))


@functools.lru_cache(maxsize=None)
def _nodes(n: int):
    return np.polynomial.legendre.leggauss(n)


def _gl(fn: Callable[[float], float], a: float, b: float, n: int) -> float:
    x, w = _nodes(n)
    half = 0.5 * (b - a)
    mid = 0.5 * (b + a)
    return half * math.fsum(wi * fn(mid + half * xi) for xi, wi in zip(x, w))


def integrate_pieces(
    fn: Callable[[float], float],
    a: float,
    b: float,
    tol: float,
    breakpoints: Sequence[float] = (),
    order: int = 8,
    max_depth: int = 40,
) -> QuadResult:
    """``∫_a^b fn`` to absolute accuracy ``tol``, split at ``breakpoints``.

    Each panel compares an ``order``-point rule with a ``2*order``-point rule
    and is bisected until they agree to its share of ``tol``. Panels are
    summed left to right so the result does not depend on scheduling.
    """
    if tol <= 0:
        raise ValueError("tolerance must be positive")
    if b < a:
        raise ValueError("need a <= b")
    if b == a:
        return QuadResult(0.0, 0.0)
    cuts = sorted({a, b, *(p for p in breakpoints if a < p < b)})
    length = b - a
    total = []
    err = 0.0
    stack = [(lo, hi, 0) for lo, hi in zip(cuts, cuts[1:])][::-1]
    while stack:
        lo, hi, depth = stack.pop()
        coarse = _gl(fn, lo, hi, order)
        fine = _gl(fn, lo, hi, 2 * order)
        diff = abs(fine - coarse)
        share = tol * (hi - lo) / length
        if diff <= share or diff <= 4 * np.finfo(float).eps * abs(fine):
            total.append(fine)
            err += diff
            continue
        if depth >= max_depth or hi - lo <= np.finfo(float).eps * max(abs(lo), abs(hi), 1.0):
            raise ToleranceNotMet(f"panel [{lo}, {hi}] stalled at error {diff:g}")
        mid = 0.5 * (lo + hi)
        stack.append((mid, hi, depth + 1))
        stack.append((lo, mid, depth + 1))
    return QuadResult(math.fsum(total), err)


def birkhoff_avg_quadrature(
    f: Callable[[float, float], float],
    t: float,
    p: tuple[float, float],
    c: float,
    tol: float,
    breakpoints: Sequence[float] | None = None,
) -> QuadResult:
    """Average of ``f`` along the torus winding ``s -> ({x+s}, {y+cs})`` over ``[0, t]``.

    ``breakpoints`` are the orbit times where ``f`` is not smooth. When
    omitted and ``f`` offers ``orbit_breakpoints(p, t)``, those are used;
    otherwise refinement is blind and may stall with ToleranceNotMet.
    """
    if t <= 0:
        raise ValueError("t must be positive")
    x0, y0 = float(p[0]), float(p[1])
    if breakpoints is None and hasattr(f, "orbit_breakpoints"):
        breakpoints = [float(b) for b in f.orbit_breakpoints(p, t)]

    def along(s: float) -> float:
        return float(f((x0 + s) % 1.0, (y0 + c * s) % 1.0))

    res = integrate_pieces(along, 0.0, float(t), tol * float(t), breakpoints or ())
    return QuadResult(res.value / float(t), res.error / float(t))
