"""Brute-force oracles used to cross-check the exact engines.

The Riemann oracle samples ``s -> f(T_s p)`` on a uniform grid by stepping the
orbit cell by cell through the unit square (applying S at every unit roof),
so it shares nothing with the head/column/tail decomposition except the
function data itself.
"""

from __future__ import annotations

from fractions import Fraction

import numpy as np

from .core import PiecewiseConst, rat
from .flows import TowerFunction
from .odometer import SquarePoint, from_lsb_int, lsb_int, odometer_pow

__all__ = ["riemann_integral", "orbit_total_variation", "riemann_rotation_average"]


def _profile_counts(prof: PiecewiseConst, y: np.ndarray) -> np.ndarray:
    edges = np.array([float(b) for b in prof.breaks])
    idx = np.searchsorted(edges, y, side="right") - 1
    return np.bincount(idx, minlength=len(prof.values))


def riemann_integral(term: TowerFunction, p: SquarePoint, t, step_exp: int = 14) -> Fraction:
    """Left Riemann sum of ``∫_0^t f(T_s p) ds`` with step ``2**-step_exp``.

    ``t`` must be a multiple of the step, and all coordinates must be dyadic
    with few enough bits to be exact in float64 (checked).
    """
    t = rat(t)
    h_inv = 1 << step_exp
    n_steps = t * h_inv
    if n_steps.denominator != 1:
        raise ValueError("t must be a multiple of the step")
    n_steps = int(n_steps)
    y0 = p.y
    if y0.denominator > (1 << 40) or (1 << term.level) > (1 << 12):
        raise ValueError("point or level too fine for the float64 sampling grid")
    H = term.height
    mask = H - 1
    J0 = lsb_int(p.x)
    i = np.arange(n_steps, dtype=np.int64)
    s = i.astype(np.float64) / h_inv
    ys = float(y0) + s  # absolute height above the starting cell floor
    cell = np.floor(ys).astype(np.int64)
    total = Fraction(0)
    for k in np.unique(cell):
        k = int(k)
        sel = cell == k
        Jk = J0 + k
        j = Jk & mask
        prof = term.profile_at(from_lsb_int(Jk - j))
        y_n = ys[sel] - k + j
        counts = _profile_counts(prof, y_n)
        total += sum((int(c) * v for c, v in zip(counts, prof.values) if c), Fraction(0))
    return total / h_inv


def orbit_total_variation(term: TowerFunction, p: SquarePoint, t) -> Fraction:
    """Exact total variation of ``s -> f(T_s p)`` on ``[0, t]``."""
    t = rat(t)
    H = term.height
    J = lsb_int(p.x)
    j = J & (H - 1)
    x_n = from_lsb_int(J - j)
    y_n = p.y + j
    remaining = t
    seq: list[Fraction] = []
    while remaining > 0:
        prof = term.profile_at(x_n)
        stop = min(Fraction(H), y_n + remaining)
        for b0, b1, v in prof.pieces():
            if b1 > y_n and b0 < stop:
                if not seq or seq[-1] != v:
                    seq.append(v)
        remaining -= stop - y_n
        x_n = odometer_pow(x_n, H)
        y_n = Fraction(0)
    return sum((abs(b - a) for a, b in zip(seq, seq[1:])), Fraction(0))


def riemann_rotation_average(f: PiecewiseConst, t, x, step_exp: int = 14) -> Fraction:
    """Left Riemann average of the rotation orbit, exact via sample counts."""
    t, x = rat(t), rat(x)
    h_inv = 1 << step_exp
    n_steps = int(t * h_inv)
    s = np.arange(n_steps, dtype=np.float64) / h_inv
    pos = np.mod(float(x) + s, 1.0)
    counts = _profile_counts(f, pos)
    total = sum((int(c) * v for c, v in zip(counts, f.values) if c), Fraction(0))
    return total / h_inv / t
