"""The dyadic odometer on [0, 1) and the tower coordinates of its suspension.

A finite binary expansion ``x = sum x_i / 2**i`` is encoded by the integer
``J = sum x_i 2**(i-1)`` (least significant digit first).  In that encoding
the odometer is literally ``J -> J + 1``, so ``S**k`` is one big-integer
addition instead of ``k`` carry walks.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

from .core import Dyadic, RatLike, rat
from .errors import NegativeOrbitUnderflow

__all__ = [
    "SquarePoint",
    "TowerCoords",
    "lsb_int",
    "from_lsb_int",
    "odometer_step",
    "odometer_pow",
    "tower_coords",
    "tower_uncoords",
    "tower_roof_map",
    "interval_index",
    "induced_interval_map",
    "is_single_cycle",
]


def _check_unit(x: Dyadic) -> None:
    if not isinstance(x, Dyadic):
        raise TypeError("odometer points are Dyadic")
    if x.num < 0 or x.num >= (1 << x.exp):
        raise ValueError(f"{x} is not in [0, 1)")


def lsb_int(x: Dyadic) -> int:
    """Digits of ``x`` read as an integer, first digit least significant."""
    _check_unit(x)
    if x.exp == 0:
        return 0
    return int(format(x.num, f"0{x.exp}b")[::-1], 2)


def from_lsb_int(j: int) -> Dyadic:
    if j < 0:
        raise NegativeOrbitUnderflow("negative digit integer")
    if j == 0:
        return Dyadic(0)
    e = j.bit_length()
    return Dyadic(int(format(j, f"0{e}b")[::-1], 2), e)


def odometer_step(x: Dyadic) -> Dyadic:
    """One application of S by the carry rule on the binary digits.

    Leading ones become zeros and the first zero becomes a one; later digits
    are untouched.  Written digit-wise (not via :func:`lsb_int`) so it can
    serve as an independent check of :func:`odometer_pow`.
    """
    _check_unit(x)
    digits = x.digits()
    m = 0
    while m < len(digits) and digits[m] == 1:
        digits[m] = 0
        m += 1
    if m == len(digits):
        digits.append(1)
    else:
        digits[m] = 1
    num = int("".join(map(str, digits)), 2)
    return Dyadic(num, len(digits))


def odometer_pow(x: Dyadic, k: int) -> Dyadic:
    """``S**k x`` for any integer ``k`` (negative means backward orbit)."""
    j = lsb_int(x) + k
    if j < 0:
        raise NegativeOrbitUnderflow(f"S^{k} of {x} needs an infinite expansion")
    return from_lsb_int(j)


@dataclass(frozen=True)
class SquarePoint:
    """A point of the unit square carrying the suspension flow."""

    x: Dyadic
    y: Fraction

    def __post_init__(self):
        x = self.x if isinstance(self.x, Dyadic) else Dyadic.from_fraction(self.x)
        y = rat(self.y)
        _check_unit(x)
        if not 0 <= y < 1:
            raise ValueError(f"y = {y} not in [0, 1)")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)


@dataclass(frozen=True)
class TowerCoords:
    """Coordinates on ``M_n = [0, 2**-n) x [0, 2**n)``."""

    n: int
    x_n: Dyadic
    y_n: Fraction

    def __post_init__(self):
        if self.n < 0:
            raise ValueError("tower level must be non-negative")
        _check_unit(self.x_n)
        if lsb_int(self.x_n) & ((1 << self.n) - 1):
            raise ValueError("x_n must have its first n digits equal to zero")
        if not 0 <= self.y_n < (1 << self.n):
            raise ValueError("y_n out of [0, 2^n)")


def tower_coords(p: SquarePoint, n: int) -> TowerCoords:
    J = lsb_int(p.x)
    j = J & ((1 << n) - 1)
    return TowerCoords(n, from_lsb_int(J - j), p.y + j)


def tower_uncoords(tc: TowerCoords) -> SquarePoint:
    j = int(tc.y_n)  # floor, y_n >= 0
    return SquarePoint(odometer_pow(tc.x_n, j), tc.y_n - j)


def tower_roof_map(x_n: Dyadic, n: int) -> Dyadic:
    """First return of the tower base to itself: ``S**(2**n)``."""
    if lsb_int(x_n) & ((1 << n) - 1):
        raise ValueError("x_n is not in the tower base [0, 2^-n)")
    return odometer_pow(x_n, 1 << n)


def interval_index(x: RatLike, n: int) -> int:
    """Index ``m`` of the dyadic interval ``[m/2^n, (m+1)/2^n)`` holding x."""
    return int(rat(x) * (1 << n))


def induced_interval_map(n: int) -> list[int]:
    """Where S sends each of the 2**n intervals of generation n.

    Computed with the digit rule on every left endpoint and on the point of the
    interval whose first 2n digits are ones (longest carry); both must agree.
    """
    out = []
    for m in range(1 << n):
        left = Dyadic(m, n)
        image = interval_index(odometer_step(left), n)
        heavy = Dyadic((m << n) | ((1 << n) - 1), 2 * n)
        if interval_index(odometer_step(heavy), n) != image:
            raise AssertionError(f"S does not map interval {m} of level {n} into one interval")
        out.append(image)
    return out


def is_single_cycle(perm: list[int]) -> bool:
    n = len(perm)
    if sorted(perm) != list(range(n)):
        return False
    seen, i = 0, 0
    while True:
        i = perm[i]
        seen += 1
        if i == 0:
            return seen == n
