"""
Channel specifications and diversity-multiplexing tradeoff (DMT) algebra.

The optimal DMT of an ``m_t x m_r`` Rayleigh channel observed over ``L``
independent fading blocks is the piecewise-linear curve through the integer
points ``(k, L (m_t - k)(m_r - k))``, ``k = 0..m_min``.  Everything in this
module is exact on that curve: evaluation and inversion are linear
interpolation between integer breakpoints, and line intersections are
solved segment by segment without any iterative root finding.

Segments are numbered from the right end of the curve: segment ``i``
(``i = 1..m_min``) joins the abscissae ``m_min - i`` and ``m_min - i + 1``
and has slope magnitude ``L (|m_t - m_r| + 2 i - 1)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

from .errors import DomainError

# drift tolerated at the ends of the curve before a value counts as out of range
_EDGE_TOL = 1e-12


@dataclass(frozen=True)
class ChannelSpec:
    """Antenna configuration of an L-block Rayleigh fading MIMO channel.

    Parameters
    ----------
    m_t, m_r : int
        Number of transmit and receive antennas.
    blocks : int
        Number ``L`` of independent fading blocks spanned by a codeword.
    """

    m_t: int
    m_r: int
    blocks: int = 1

    def __post_init__(self):
        for name in ("m_t", "m_r", "blocks"):
            value = getattr(self, name)
            if isinstance(value, bool) or not isinstance(value, int) or value < 1:
                raise DomainError(f"{name} must be a positive integer, got {value!r}")

    @property
    def m_min(self) -> int:
        return min(self.m_t, self.m_r)

    @property
    def m_max(self) -> int:
        return max(self.m_t, self.m_r)

    @property
    def max_diversity(self) -> int:
        return self.blocks * self.m_t * self.m_r

    @property
    def is_miso_simo(self) -> bool:
        return self.m_min == 1

    def __str__(self):
        suffix = f", L={self.blocks}" if self.blocks != 1 else ""
        return f"{self.m_t}x{self.m_r}{suffix}"


@dataclass(frozen=True)
class DmtCurve:
    """Piecewise-linear DMT curve of a :class:`ChannelSpec`.

    Attributes
    ----------
    spec : ChannelSpec
    breakpoints : tuple of (int, int)
        ``(k, d*(k))`` for ``k = 0..m_min``, left to right.
    segment_slopes : tuple of int
        Slope magnitude ``alpha_i`` of segment ``i = 1..m_min`` (right to left).
    climb_budgets : tuple of float
        ``c_0..c_{m_min}`` with ``c_0 = 0`` and ``c_{m_min} = inf``.  ``c_i`` is
        the bandwidth ratio an infinitely layered progressive scheme needs to
        climb from zero diversity to the top of segment ``i``.
    """

    spec: ChannelSpec
    breakpoints: tuple[tuple[int, int], ...]
    segment_slopes: tuple[int, ...]
    climb_budgets: tuple[float, ...] = field(repr=False)

    @property
    def m_min(self) -> int:
        return self.spec.m_min

    @property
    def max_diversity(self) -> int:
        return self.breakpoints[0][1]

    def height(self, k: int) -> int:
        """Diversity at the integer abscissa ``k``."""
        return self.breakpoints[k][1]

    def segment_right_end(self, i: int) -> int:
        """Abscissa ``m_min - i + 1`` where segment ``i`` touches its lowest point."""
        return self.m_min - i + 1


def dmt_curve(spec: ChannelSpec) -> DmtCurve:
    L, m_t, m_r, m_min = spec.blocks, spec.m_t, spec.m_r, spec.m_min
    breakpoints = tuple((k, L * (m_t - k) * (m_r - k)) for k in range(m_min + 1))
    gap = abs(m_t - m_r)
    slopes = tuple(L * (gap + 2 * i - 1) for i in range(1, m_min + 1))
    budgets = [0.0]
    for i in range(1, m_min):
        budgets.append(budgets[-1] + slopes[i - 1] * math.log((m_min - i + 1) / (m_min - i)))
    budgets.append(math.inf)
    return DmtCurve(spec, breakpoints, slopes, tuple(budgets))


def dmt_eval(curve: DmtCurve, r: float) -> float:
    """Diversity ``d*(r)`` by linear interpolation between breakpoints."""
    m = curve.m_min
    if r < -_EDGE_TOL or r > m + _EDGE_TOL or math.isnan(r):
        raise DomainError(f"multiplexing gain {r!r} outside [0, {m}]")
    if r >= m:
        return 0.0
    if r <= 0:
        return float(curve.max_diversity)
    k = int(math.floor(r))
    d_lo, d_hi = curve.height(k), curve.height(k + 1)
    return d_lo - (d_lo - d_hi) * (r - k)


def dmt_inverse(curve: DmtCurve, d: float) -> float:
    """The unique gain ``r`` with ``d*(r) = d``."""
    top = curve.max_diversity
    if d < -_EDGE_TOL or d > top + _EDGE_TOL or math.isnan(d):
        raise DomainError(f"diversity {d!r} outside [0, {top}]")
    if d <= 0:
        return float(curve.m_min)
    if d >= top:
        return 0.0
    for k in range(curve.m_min):
        d_lo, d_hi = curve.height(k), curve.height(k + 1)
        if d_hi <= d <= d_lo:
            return k + (d_lo - d) / (d_lo - d_hi)
    raise AssertionError("unreachable: curve covers [0, max_diversity]")


def intersect_line(curve: DmtCurve, slope: float, intercept: float) -> float:
    """Abscissa where ``y = intercept + slope * r`` meets the DMT curve.

    The line is nondecreasing and the curve strictly decreasing, so the
    intersection is unique.  Segments are scanned from the right end of the
    curve and the crossing is solved in closed form on the bracketing
    segment.

    Raises
    ------
    DomainError
        If ``slope < 0`` or the intercept lies outside ``[0, d*(0)]``.
    """
    if slope < 0 or math.isnan(slope):
        raise DomainError(f"slope must be nonnegative, got {slope!r}")
    top = curve.max_diversity
    if intercept < -_EDGE_TOL or intercept > top + _EDGE_TOL:
        raise DomainError(f"intercept {intercept!r} outside [0, {top}]")
    for k in range(curve.m_min, -1, -1):
        gap = curve.height(k) - intercept - slope * k
        if gap >= 0:
            if gap == 0 or k == curve.m_min:
                return float(k)
            drop = curve.height(k) - curve.height(k + 1)
            # on [k, k+1]: d(r) = d(k) - drop * (r - k)
            return (curve.height(k) + drop * k - intercept) / (drop + slope)
    # intercept above d*(0) within tolerance
    return 0.0


def sd_diversity(spec: ChannelSpec, r_prefix: Sequence[float], r_k: float) -> float:
    """Successive-decoding diversity of a broadcast-strategy layer.

    Outage exponent of layer ``k`` when layers ``1..k-1`` (gains
    ``r_prefix``) were decoded and stripped, under the superposition power
    allocation whose cumulative layer powers scale as
    ``SNR^(1 - L * sum(r_prefix))``, in the limit of vanishing power-slack
    exponents::

        L * [m_max m_min (1 - L sum(r_prefix)) - (m_max + m_min - 1) r_k]

    Raises
    ------
    DomainError
        If any gain is negative or ``sum(r_prefix) + r_k > 1 / L``.
    """
    L = spec.blocks
    if r_k < 0 or any(r < 0 for r in r_prefix):
        raise DomainError("multiplexing gains must be nonnegative")
    prefix = math.fsum(r_prefix)
    if prefix + r_k > 1.0 / L + 1e-12:
        raise DomainError(
            f"total gain {prefix + r_k:.6g} exceeds the superposition limit 1/L = {1.0 / L:.6g}"
        )
    value = L * (spec.m_max * spec.m_min * (1.0 - L * prefix) - (spec.m_max + spec.m_min - 1) * r_k)
    return max(value, 0.0)
