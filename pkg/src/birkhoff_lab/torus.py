"""Torus winding ``T_s(x, y) = ({x + s}, {y + c s})`` and its slowly averaging continuous functions.

For an even-index convergent ``p/q < c`` the flow box ``R`` is swept by the
vertical transversal ``{0} x [0, (1 - beta)/q)`` during time ``q``; it has
area ``1 - beta`` and the flow is a pure translation inside it. Coordinates
are ``x_n`` (offset on the transversal) and the local time ``s`` since the
last crossing of that transversal; the arc length ``y_n`` is ``s * speed``
with ``speed = sqrt(1 + c^2)``, and that conversion lives only in
:attr:`FlowBox.speed`.
"""

from __future__ import annotations

import functools
import math
import random
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import mpmath
import numpy as np

from .core import rat
from .errors import ConfigInvalid, PrecisionExhausted
from .phi import PhiSpec
from .quadrature import QuadResult, integrate_pieces

__all__ = [
    "CFNumber",
    "Convergent",
    "convergents",
    "FlowBox",
    "BoxCoords",
    "OUTSIDE",
    "smoothstep",
    "smoothstep_integral",
    "bump",
    "bump_integral",
    "TorusStage",
    "TorusTerm",
    "TorusSeries",
    "Thm3Row",
    "Thm3Report",
    "thm3_experiment",
    "outside_fraction",
    "DEFAULT_DPS",
]

DEFAULT_DPS = 80
# q^2 may use at most dps - PRECISION_GUARD decimal digits
PRECISION_GUARD = 20


@dataclass(frozen=True)
class CFNumber:
    """``c = [0; a_1, a_2, ...]`` with finitely many stored quotients.

    With ``continuation="pow10"`` the quotient ``a_k`` for ``k`` past the
    stored ones is ``10**k``; with ``None`` the expansion stops there.
    """

    quotients: tuple[int, ...]
    continuation: str | None = "pow10"

    def __post_init__(self):
        object.__setattr__(self, "quotients", tuple(int(a) for a in self.quotients))
        if not self.quotients or any(a < 1 for a in self.quotients):
            raise ConfigInvalid("partial quotients must be positive integers")
        if self.continuation not in (None, "pow10"):
            raise ConfigInvalid(f"unknown continuation {self.continuation!r}")

    @classmethod
    def from_json(cls, obj: dict) -> "CFNumber":
        try:
            return cls(tuple(obj["quotients"]), obj.get("continuation", "pow10"))
        except (KeyError, TypeError) as exc:
            raise ConfigInvalid(f"bad continued fraction spec: {exc}") from exc

    def to_json(self) -> dict:
        return {"quotients": list(self.quotients), "continuation": self.continuation}

    @property
    def available(self) -> int | None:
        """Index of the last usable quotient, or None when unbounded."""
        return None if self.continuation else len(self.quotients)

    def quotient(self, k: int) -> int:
        if k < 1:
            raise IndexError("quotients are indexed from 1")
        if k <= len(self.quotients):
            return self.quotients[k - 1]
        if self.continuation == "pow10":
            return 10**k
        raise IndexError(f"quotient {k} is not stored")

    def pq(self, k: int) -> tuple[int, int]:
        """Convergent ``p_k / q_k``; ``k = -1`` gives the seed ``(1, 0)``."""
        p0, q0, p1, q1 = 1, 0, 0, 1
        if k == -1:
            return p0, q0
        for i in range(1, k + 1):
            a = self.quotient(i)
            p0, q0, p1, q1 = p1, q1, a * p1 + p0, a * q1 + q0
        return p1, q1

    def value(self, ctx) -> "mpmath.mpf":
        """``c`` to the working precision of ``ctx``."""
        need = 10 ** (ctx.dps + 10)
        k = 1
        while True:
            p, q = self.pq(k)
            try:
                _, q_next = self.pq(k + 1)
            except IndexError:
                return ctx.mpf(p) / q
            if q * q_next > need:
                return ctx.mpf(p) / q
            k += 1


@dataclass(frozen=True)
class Convergent:
    """``p/q`` with ``|beta| = q^2 |c - p/q|`` enclosed in ``(beta_lo, beta_hi)``."""

    k: int
    p: int
    q: int
    beta_lo: Fraction | None
    beta_hi: Fraction | None

    @property
    def below(self) -> bool:
        """Even-index convergents approximate ``c`` from below."""
        return self.k % 2 == 0

    @property
    def value(self) -> Fraction:
        return Fraction(self.p, self.q)


def convergents(cf: CFNumber, k: int) -> Convergent:
    if k < 0:
        raise IndexError("convergent index must be non-negative")
    if cf.available is not None and k > cf.available:
        raise IndexError(f"only {cf.available} quotients are stored")
    p, q = cf.pq(k)
    try:
        _, q_next = cf.pq(k + 1)
    except IndexError:
        return Convergent(k, p, q, None, None)
    # 1/(q (q + q')) < |c - p/q| < 1/(q q')
    return Convergent(k, p, q, Fraction(q, q + q_next), Fraction(q, q_next))


def smoothstep(u):
    return u * u * (3 - 2 * u)


def smoothstep_integral(u):
    """``∫_0^u smoothstep``."""
    u2 = u * u
    return u2 * u - u2 * u2 / 2


def bump(u, m):
    """0 at 0 and 1, equal to 1 on ``[m, 1 - m]``, smoothstep ramps in between."""
    if u <= 0 or u >= 1:
        return 0 * u
    if u < m:
        return smoothstep(u / m)
    if u > 1 - m:
        return smoothstep((1 - u) / m)
    return 1 + 0 * u


def bump_integral(u, m):
    """``∫_0^u bump``, for ``u`` in ``[0, 1]``."""
    if u <= 0:
        return 0 * u
    if u >= 1:
        return 1 - m + 0 * u
    if u < m:
        return m * smoothstep_integral(u / m)
    if u <= 1 - m:
        return m / 2 + (u - m)
    return m / 2 + (1 - 2 * m) + m * (0.5 - smoothstep_integral((1 - u) / m))


@dataclass(frozen=True)
class BoxCoords:
    """Transversal offset ``x_n`` and local time ``s`` in ``[0, q)``."""

    x_n: object
    s: object
    speed: object

    @property
    def y_n(self):
        return self.s * self.speed


OUTSIDE = None


class FlowBox:
    """The flow box ``R`` attached to an even-index convergent of ``c``."""

    def __init__(self, cf: CFNumber, k: int, dps: int = DEFAULT_DPS):
        conv = convergents(cf, k)
        if not conv.below:
            raise ConfigInvalid("flow boxes need a convergent below c (even index)")
        if conv.beta_hi is None:
            raise ConfigInvalid(f"convergent {k} needs quotient {k + 1} for its beta enclosure")
        if conv.q * conv.q > 10 ** (dps - PRECISION_GUARD):
            raise PrecisionExhausted(f"q_{k}^2 ~ 1e{2 * len(str(conv.q))} exceeds {dps} digits")
        self.cf = cf
        self.k = k
        self.conv = conv
        self.p, self.q = conv.p, conv.q
        self.ctx = ctx = mpmath.MPContext()
        ctx.dps = dps
        self.c = cf.value(ctx)
        self.beta = self.q * (self.q * self.c - self.p)
        if not self.mpf(conv.beta_lo) < self.beta < self.mpf(conv.beta_hi):
            raise PrecisionExhausted("beta falls outside its rational enclosure")
        self.width = (1 - self.beta) / self.q
        self.speed = ctx.sqrt(1 + self.c * self.c)
        self.pinv = pow(self.p, -1, self.q) if self.q > 1 else 0

    def frac(self, v):
        return v - self.ctx.floor(v)

    def mpf(self, v):
        if isinstance(v, Fraction):
            return self.ctx.mpf(v.numerator) / v.denominator
        return self.ctx.mpf(v)

    def evolve(self, pt, s):
        x, y = (self.mpf(v) for v in pt)
        s = self.mpf(s)
        return self.frac(x + s), self.frac(y + self.c * s)

    def coords(self, pt) -> BoxCoords | None:
        """Box coordinates of ``pt``, or :data:`OUTSIDE` in the sliver of area beta."""
        x, y = (self.mpf(v) for v in pt)
        z = self.frac(y - self.c * x)  # offset at the last crossing of x = 0
        i = int(self.ctx.floor(self.q * z))
        for j in (i, i - 1):
            kk = (j * self.pinv) % self.q
            x_n = self.frac(z - self.c * kk)
            if x_n < self.width:
                return BoxCoords(x_n, x + kk, self.speed)
        return OUTSIDE

    def uncoords(self, x_n, s):
        x_n, s = self.mpf(x_n), self.mpf(s)
        return self.frac(s), self.frac(x_n + self.c * s)

    def next_entry(self, z, kmin: int, kmax: int) -> tuple[int, object] | None:
        """Smallest ``k`` in ``[kmin, kmax]`` with ``{z + c k}`` on the base, and that offset."""
        z = self.mpf(z)
        i = int(self.ctx.floor(self.q * z))
        best = None
        for j in (-i, -i - 1):
            base = (j * self.pinv) % self.q
            k = base if base >= kmin else base + -(-(kmin - base) // self.q) * self.q
            while k <= kmax and (best is None or k < best[0]):
                off = self.frac(z + self.c * k)
                if off < self.width:
                    best = (k, off)
                    break
                k += self.q
        return best


@dataclass(frozen=True)
class TorusStage:
    """One term: convergent index, amplitude, window parameter and ramp margin."""

    k: int
    a: Fraction
    delta: Fraction
    margin: Fraction = Fraction(1, 16)

    def __post_init__(self):
        for name in ("a", "delta", "margin"):
            object.__setattr__(self, name, rat(getattr(self, name)))
        if self.a <= 0 or self.delta <= 0:
            raise ConfigInvalid("a and delta must be positive")
        if not 0 < self.margin < Fraction(1, 8):
            raise ConfigInvalid("margin must lie in (0, 1/8)")

    def to_json(self) -> dict:
        return {"k": self.k, "a": str(self.a), "delta": str(self.delta), "margin": str(self.margin)}

    @classmethod
    def from_json(cls, obj: dict) -> "TorusStage":
        try:
            return cls(int(obj["k"]), rat(obj["a"]), rat(obj["delta"]), rat(obj.get("margin", "1/16")))
        except (KeyError, TypeError, ValueError, ZeroDivisionError) as exc:
            raise ConfigInvalid(f"bad torus stage: {exc}") from exc


class TorusTerm:
    """``f_n = g(x_n / width) * h(s / q)`` on the flow box, 0 outside it.

    ``g`` is a plateau bump across the transversal; ``h`` is ``a`` times a
    bump on the first quarter of the column and its negative on the third.
    """

    def __init__(self, box: FlowBox, stage: TorusStage):
        self.box = box
        self.stage = stage
        ctx = box.ctx
        self.a = box.mpf(stage.a)
        self.m = box.mpf(stage.margin)
        m4 = self.m / 4
        self.v_breaks = (0, m4, ctx.mpf(1) / 4 - m4, ctx.mpf(1) / 4, ctx.mpf(1) / 2,
                         ctx.mpf(1) / 2 + m4, ctx.mpf(3) / 4 - m4, ctx.mpf(3) / 4, 1)

    @property
    def q(self) -> int:
        return self.box.q

    @property
    def t(self):
        """``delta * q * speed``."""
        return self.box.mpf(self.stage.delta) * self.q * self.box.speed

    def g(self, x_n):
        return bump(x_n / self.box.width, self.m)

    def h(self, v):
        if 4 * v < 1:
            return self.a * bump(4 * v, self.m)
        if 2 * v >= 1 and 4 * v < 3:
            return -self.a * bump(4 * v - 2, self.m)
        return 0 * v

    def H(self, v):
        """``∫_0^v h``."""
        quarter = self.a / 4
        if 4 * v <= 1:
            return quarter * bump_integral(4 * v, self.m)
        if 2 * v <= 1:
            return quarter * (1 - self.m)
        if 4 * v <= 3:
            return quarter * ((1 - self.m) - bump_integral(4 * v - 2, self.m))
        return 0 * v

    def at_coords(self, bc: BoxCoords | None):
        if bc is OUTSIDE:
            return self.box.ctx.mpf(0)
        return self.g(bc.x_n) * self.h(bc.s / self.q)

    def __call__(self, x, y) -> float:
        return float(self.at_coords(self.box.coords((x, y))))

    def column_integral_closed(self, x_n):
        """``∫ f dy_n`` over a full column, in arc-length units."""
        return self.g(x_n) * self.box.speed * self.q * (self.H(1) - self.H(0))

    def column_integral_quadrature(self, x_n):
        """Same integral by high-precision Gauss-Legendre on the smooth pieces."""
        ctx = self.box.ctx
        gx = self.g(self.box.mpf(x_n))
        val = ctx.quad(self.h, list(self.v_breaks), method="gauss-legendre")
        return gx * self.box.speed * self.q * val

    def orbit_pieces(self, pt, t) -> list[tuple[object, object, object]]:
        """``(x_n, s0, s1)`` column pieces that can contribute to ``∫_0^t``.

        Columns crossed completely integrate to 0 and the sliver carries
        f = 0, so only the first and last partial columns remain.
        """
        box = self.box
        t = box.mpf(t)
        c0 = box.coords(pt)
        if c0 is not OUTSIDE and c0.s + t <= self.q:
            return [(c0.x_n, c0.s, c0.s + t)]
        pieces = []
        if c0 is not OUTSIDE:
            pieces.append((c0.x_n, c0.s, box.mpf(self.q)))
        c1 = box.coords(box.evolve(pt, t))
        if c1 is not OUTSIDE:
            if c1.s > t:
                raise ArithmeticError("end point claims a column entered before the start")
            pieces.append((c1.x_n, box.mpf(0), c1.s))
        return pieces

    def integral_exact(self, pt, t):
        """``∫_0^t f(T_s pt) ds`` from the closed-form antiderivative."""
        total = self.box.ctx.mpf(0)
        for x_n, s0, s1 in self.orbit_pieces(pt, t):
            total += self.g(x_n) * self.q * (self.H(s1 / self.q) - self.H(s0 / self.q))
        return total

    def average_exact(self, pt, t):
        return self.integral_exact(pt, t) / self.box.mpf(t)

    def average_quadrature(self, pt, t, tol: float = 1e-12) -> QuadResult:
        """Average by adaptive Gauss-Legendre over the same pieces, in ``v = s/q``."""
        t = self.box.mpf(t)
        total = 0.0
        err = 0.0
        q = self.q
        breaks = [float(b) for b in self.v_breaks]
        hf = self._h_float
        for x_n, s0, s1 in self.orbit_pieces(pt, t):
            gx = float(self.g(x_n))
            if gx == 0.0:
                continue
            scale = float(q / t) * gx
            res = integrate_pieces(hf, float(s0 / q), float(s1 / q), tol / max(abs(scale), 1e-300) / 2, breaks)
            total += scale * res.value
            err += abs(scale) * res.error
        return QuadResult(total, err)

    @functools.cached_property
    def _h_float(self):
        a, m = float(self.a), float(self.m)

        def hf(v: float) -> float:
            if v < 0.25:
                return a * bump(4 * v, m)
            if 0.5 <= v < 0.75:
                return -a * bump(4 * v - 2, m)
            return 0.0

        return hf

    def orbit_breakpoints(self, pt, t) -> list:
        """Every orbit time in ``(0, t)`` where ``s -> f(T_s pt)`` is not smooth.

        Walks column by column, so the cost grows like ``t / q``; meant for the
        brute-force route on small stages.
        """
        box = self.box
        t = box.mpf(t)
        q = self.q
        out = []
        c0 = box.coords(pt)
        if c0 is not OUTSIDE:
            start, x_n = -c0.s, c0.x_n
        else:
            x = box.mpf(pt[0])
            z = box.frac(box.mpf(pt[1]) - box.c * x)
            hit = box.next_entry(z, 1, int(box.ctx.ceil(t + x)) + 1)
            if hit is None:
                return out
            start, x_n = -x + hit[0], hit[1]
        while start < t:
            out.extend(start + q * b for b in self.v_breaks)
            exit_off = box.frac(x_n + box.c * q)
            hit = box.next_entry(exit_off, 0, int(box.ctx.ceil(t - start - q)) + 1)
            if hit is None:
                break
            start, x_n = start + q + hit[0], hit[1]
        return sorted({b for b in out if 0 < b < t})


class TorusSeries:
    """Finite sum of torus terms with an optional bound on what follows."""

    def __init__(self, cf: CFNumber, stages: Sequence[TorusStage], dps: int = DEFAULT_DPS, beyond_a=0):
        if not stages:
            raise ConfigInvalid("need at least one stage")
        ks = [s.k for s in stages]
        if any(b <= a for a, b in zip(ks, ks[1:])):
            raise ConfigInvalid("convergent indices must increase")
        self.cf = cf
        self.stages = list(stages)
        self.dps = dps
        self.beyond_a = rat(beyond_a)
        self.terms = [TorusTerm(FlowBox(cf, s.k, dps), s) for s in stages]

    def __len__(self) -> int:
        return len(self.terms)

    def __getitem__(self, n: int) -> TorusTerm:
        if not 1 <= n <= len(self.terms):
            raise IndexError(f"stage {n} outside 1..{len(self.terms)}")
        return self.terms[n - 1]

    def tail_a(self, n: int) -> Fraction:
        return sum((s.a for s in self.stages[n:]), Fraction(0)) + self.beyond_a

    def earlier_bound(self, n: int):
        """``sum_{m<n} 2 a_m q_m speed / t_n``: head plus tail column pieces."""
        term = self[n]
        box = term.box
        acc = box.ctx.mpf(0)
        for m in range(1, n):
            tm = self[m]
            acc += 2 * tm.a * tm.q * tm.box.speed
        return acc / term.t

    def certificate(self, beta_threshold=Fraction(1, 50), phi: PhiSpec | None = None) -> dict:
        checks = {}
        trends = []
        for n, (term, st) in enumerate(zip(self.terms, self.stages), 1):
            conv = term.box.conv
            checks[f"beta_{conv.k} < {beta_threshold}"] = conv.beta_hi < beta_threshold
            window = float(st.delta) * float(term.box.speed)
            checks[f"stage {n} window fits the plateau"] = window < float((1 - 2 * st.margin) / 4)
            row = {
                "n": n,
                "k": conv.k,
                "q": conv.q,
                "alpha": float(self.tail_a(n) / st.a),
                "q_ratio": float(sum(self[m].q for m in range(1, n)) / (term.q * st.a * st.delta)),
            }
            if phi is not None:
                tail = self.tail_a(n)
                row["log2_tail_phi_ratio"] = (math.log2(tail) - phi.log2(float(term.t))) if tail else -math.inf
            trends.append(row)
        checks["a_n decreasing"] = all(b.a < a.a for a, b in zip(self.stages, self.stages[1:]))
        return {"checks": checks, "trends": trends}

    def plateau_points(self, n: int, count: int, seed: int = 0) -> list:
        """Points whose whole window sits on the ``+a_n`` plateau of term ``n``."""
        term = self[n]
        m = term.m
        w = term.t / term.q
        lo, hi = m / 4, (1 - m) / 4 - w
        return self._points(term, count, seed, lo, hi, True)

    def zero_band_points(self, n: int, count: int, seed: int = 0) -> list:
        """Points whose window stays in the second quarter, where term ``n`` vanishes."""
        term = self[n]
        w = term.t / term.q
        return self._points(term, count, seed, term.box.mpf(Fraction(1, 4)), term.box.mpf(Fraction(1, 2)) - w, False)

    @staticmethod
    def _points(term: TorusTerm, count: int, seed: int, v_lo, v_hi, plateau_x: bool) -> list:
        box = term.box
        rng = random.Random(seed)
        m = term.m
        out = []
        for _ in range(count):
            u = box.mpf(Fraction(rng.getrandbits(30), 1 << 30))
            u2 = box.mpf(Fraction(rng.getrandbits(30), 1 << 30))
            x_frac = m + (1 - 2 * m) * u if plateau_x else u
            out.append(box.uncoords(box.width * x_frac, term.q * (v_lo + (v_hi - v_lo) * u2)))
        return out


@dataclass(frozen=True)
class Thm3Row:
    n: int
    k: int
    q: int
    t: float
    a: float
    value_min: float
    value_max: float
    slack: float
    earlier_measured: float
    earlier_bound: float
    log2_phi: float
    points: int
    quad_error: float

    @property
    def sup_abs(self) -> float:
        return self.value_max + self.slack

    @property
    def lower(self) -> float:
        return self.value_min - self.slack

    def in_band(self, lo: float = 0.9, hi: float = 1.1) -> bool:
        return lo * self.a <= self.lower and self.sup_abs <= hi * self.a

    @property
    def log2_ratio_lo(self) -> float:
        return math.log2(self.lower) - self.log2_phi if self.lower > 0 else -math.inf

    @property
    def log2_ratio_hi(self) -> float:
        return math.log2(self.sup_abs) - self.log2_phi


@dataclass
class Thm3Report:
    rows: list[Thm3Row] = field(default_factory=list)

    def growth_log2(self) -> list[float]:
        return [b.log2_ratio_lo - a.log2_ratio_hi for a, b in zip(self.rows, self.rows[1:])]

    @property
    def strictly_increasing(self) -> bool:
        return all(g > 0 for g in self.growth_log2())

    @property
    def earlier_ok(self) -> bool:
        return all(r.earlier_measured <= r.earlier_bound for r in self.rows)

    def to_csv(self) -> str:
        lines = ["n,q_n,t_n,sup_abs,phi,ratio"]
        for r in self.rows:
            phi = 2.0**r.log2_phi
            lines.append(f"{r.n},{r.q},{r.t!r},{r.sup_abs!r},{phi!r},{r.sup_abs / phi!r}")
        return "\n".join(lines) + "\n"


def thm3_experiment(series: TorusSeries, phi: PhiSpec, points_per_stage: int = 16, seed: int = 0,
                    tol: float = 1e-12) -> Thm3Report:
    """Certified ``|A(f, t_n, pt)|`` on plateau points of every stage.

    The current term is integrated by quadrature; earlier terms are bounded
    by ``sum_{m<n} 2 a_m q_m speed / t_n`` (and also evaluated in closed form
    to confirm that bound), later terms by ``sum_{m>n} a_m``.
    """
    report = Thm3Report()
    if points_per_stage <= 0:
        return report
    for n in range(1, len(series) + 1):
        term = series[n]
        t = term.t
        pts = series.plateau_points(n, points_per_stage, seed + n)
        bound = float(series.earlier_bound(n))
        vals, earlier, qerr = [], 0.0, 0.0
        for pt in pts:
            res = term.average_quadrature(pt, t, tol)
            vals.append(abs(res.value))
            qerr = max(qerr, res.error)
            for m in range(1, n):
                earlier = max(earlier, abs(float(series[m].average_exact(pt, t))))
        slack = bound + float(series.tail_a(n)) + qerr
        report.rows.append(
            Thm3Row(
                n=n,
                k=term.box.k,
                q=term.q,
                t=float(t),
                a=float(term.a),
                value_min=min(vals),
                value_max=max(vals),
                slack=slack,
                earlier_measured=earlier,
                earlier_bound=bound,
                log2_phi=phi.log2(float(t)),
                points=len(pts),
                quad_error=qerr,
            )
        )
    return report


def outside_fraction(box: FlowBox, side: int = 1000) -> float:
    """Share of a ``side x side`` cell-centre grid that falls outside the flow box.

    Vectorized float64 version of :meth:`FlowBox.coords`; meant for small q.
    """
    if box.q > 1 << 20:
        raise PrecisionExhausted("float grid test is limited to small q")
    c = float(box.c)
    width = float(box.width)
    centres = (np.arange(side) + 0.5) / side
    x, y = np.meshgrid(centres, centres, indexing="ij")
    z = np.mod(y - c * x, 1.0)
    i = np.floor(box.q * z).astype(np.int64)
    inside = np.zeros_like(z, dtype=bool)
    for j in (i, i - 1):
        kk = np.mod(j * box.pinv, box.q)
        inside |= np.mod(z - c * kk, 1.0) < width
    return float(1.0 - inside.mean())
