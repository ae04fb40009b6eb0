"""Exact-arithmetic experiments on the convergence rate of Birkhoff averages."""

from .core import CertifiedValue, Dyadic, PiecewiseConst, PiecewiseLinear, level_set_measures, pw_integrate, rat
from .core import window_average_profile
from .errors import (
    BirkhoffLabError,
    BoundViolated,
    ConfigInvalid,
    DegenerateFit,
    NegativeOrbitUnderflow,
    NotDyadic,
    PhiTooSlow,
    PrecisionExhausted,
    ToleranceNotMet,
    TruncationTooDeep,
)
from .flows import (
    SeriesFunction,
    TowerFunction,
    birkhoff_avg_rotation,
    birkhoff_avg_tower_exact,
    circle_evolve,
    odometer_flow_evolve,
    periodic_bound_check,
)
from .odometer import SquarePoint, TowerCoords, odometer_pow, odometer_step, tower_coords, tower_roof_map
from .odometer import tower_uncoords
from .phi import PhiSpec
from .quadrature import birkhoff_avg_quadrature
from .rates import RateReport, rate_fit

__version__ = "0.1.0"
