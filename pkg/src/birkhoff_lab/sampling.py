"""Seeded, replayable point and time grids over dyadic rationals."""

from __future__ import annotations

import os
import random
from concurrent.futures import ProcessPoolExecutor
from fractions import Fraction
from typing import Callable, Iterable, Sequence, TypeVar

from .core import Dyadic
from .odometer import SquarePoint

T = TypeVar("T")
R = TypeVar("R")


def dyadic_points(count: int, depth: int, seed: int) -> list[SquarePoint]:
    """``count`` points of the unit square with both coordinates in ``2**-depth Z``."""
    rng = random.Random(seed)
    out = []
    for _ in range(count):
        x = Dyadic(rng.getrandbits(depth), depth)
        y = Fraction(rng.getrandbits(depth), 1 << depth)
        out.append(SquarePoint(x, y))
    return out


def dyadic_grid(depth: int) -> list[SquarePoint]:
    """Every point of the ``2**depth x 2**depth`` lower-left corner grid."""
    n = 1 << depth
    return [SquarePoint(Dyadic(i, depth), Fraction(j, n)) for i in range(n) for j in range(n)]


def geometric_odd_times(lo_exp: int, hi_exp: int, count: int) -> list[Fraction]:
    """``count`` odd integers spread geometrically over ``[2**lo_exp, 2**hi_exp]``.

    Odd times are never multiples of a column height, so no full-column
    cancellation can make an average vanish identically.
    """
    out = []
    for i in range(count):
        v = round(2 ** (lo_exp + (hi_exp - lo_exp) * i / (count - 1)))
        if v % 2 == 0:
            v += 1 if v < 2**hi_exp else -1
        out.append(Fraction(v))
    return sorted(set(out))


def worker_count() -> int:
    try:
        return max(1, int(os.environ.get("BIRKHOFF_THREADS", "1")))
    except ValueError:
        return 1


def pmap(fn: Callable[[T], R], items: Iterable[T], chunksize: int = 16) -> list[R]:
    """Order-preserving map, fanned out to processes when BIRKHOFF_THREADS > 1."""
    items = list(items)
    workers = min(worker_count(), len(items))
    if workers <= 1:
        return [fn(it) for it in items]
    with ProcessPoolExecutor(max_workers=workers) as ex:
        return list(ex.map(fn, items, chunksize=chunksize))
