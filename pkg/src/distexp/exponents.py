"""
Closed-form distortion exponents as functions of the bandwidth ratio ``b``.

Infinite-layer progressive schemes climb the DMT curve continuously.  On a
segment of slope ``alpha`` whose extension reaches ``alpha * x_hi`` at
``r = 0``, spending bandwidth ``beta`` raises the height above the
segment's lower end from ``g0`` to::

    alpha x_hi - (alpha x_hi - g0) exp(-beta / alpha)

and reaching the top of the segment costs ``alpha ln(x / (x_hi - 1))`` from
abscissa ``x``.  LS starts this climb at diversity 0, HLS at the analog
floor of diversity 1.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .channel import ChannelSpec, dmt_curve, dmt_eval, dmt_inverse, intersect_line
from .errors import DomainError
from .staircase import (
    LayerAllocation,
    Scheme,
    active_bs_system,
    bs_allocation,
    bs_ratio,
    solve_hls_staircase,
    solve_ls_staircase,
)

INFINITE = math.inf


@dataclass(frozen=True)
class ExponentResult:
    scheme: Scheme
    layers: float  # int, or INFINITE
    bandwidth_ratio: float
    exponent: float
    allocation: LayerAllocation | None = None


def _check_b(b: float) -> None:
    if not (isinstance(b, (int, float)) and b > 0 and math.isfinite(b)):
        raise DomainError(f"bandwidth ratio must be a positive finite number, got {b!r}")


def exponent_upper_bound(spec: ChannelSpec, b: float) -> float:
    """Exponent achievable with perfect channel knowledge at the transmitter."""
    _check_b(b)
    L = spec.blocks
    gap = abs(spec.m_t - spec.m_r)
    return L * math.fsum(min(b / L, 2 * i - 1 + gap) for i in range(1, spec.m_min + 1))


def exponent_single_layer(spec: ChannelSpec, b: float) -> ExponentResult:
    """Single-layer digital transmission: the fixed point ``b r* = d*(r*)``."""
    _check_b(b)
    curve = dmt_curve(spec)
    r = intersect_line(curve, b, 0.0)
    alloc = LayerAllocation(Scheme.SINGLE, (r,), time_shares=(1.0,))
    return ExponentResult(Scheme.SINGLE, 1, b, dmt_eval(curve, r), alloc)


def segment_climb(alpha: float, x_hi: float, delta_entry: float, budget: float) -> float:
    """Height above a segment's lower end after climbing with bandwidth ``budget``."""
    if budget < 0:
        raise DomainError(f"climb budget must be nonnegative, got {budget!r}")
    steady = alpha * x_hi
    # same as steady - (steady - entry) e^{-budget/alpha}, exact at zero budget
    return delta_entry - (steady - delta_entry) * math.expm1(-budget / alpha)


def climb(spec: ChannelSpec, start: float, budget: float) -> float:
    """Diversity reached by an infinitely layered staircase from height ``start``.

    Walks the segments upward from the one containing ``start``, paying the
    cost of each segment top until the budget runs out.
    """
    curve = dmt_curve(spec)
    x = dmt_inverse(curve, start)
    height = start
    for i in range(1, curve.m_min + 1):
        x_hi = curve.segment_right_end(i)
        if x <= x_hi - 1:
            continue  # start lies above this segment
        alpha = curve.segment_slopes[i - 1]
        base = curve.height(x_hi)
        cost = math.inf if x_hi == 1 else alpha * math.log(x / (x_hi - 1))
        if budget < cost:
            return base + segment_climb(alpha, x_hi, height - base, budget)
        budget -= cost
        x = x_hi - 1
        height = curve.height(x_hi - 1)
    return height


def exponent_ls_infinite(spec: ChannelSpec, b: float) -> ExponentResult:
    """Infinite-layer LS via the climb budgets ``c_p`` of the DMT curve."""
    _check_b(b)
    curve = dmt_curve(spec)
    c = curve.climb_budgets
    p = next(p for p in range(1, curve.m_min + 1) if c[p - 1] <= b < c[p])
    x_hi = curve.segment_right_end(p)
    value = curve.height(x_hi) + segment_climb(curve.segment_slopes[p - 1], x_hi, 0.0, b - c[p - 1])
    return ExponentResult(Scheme.LS, INFINITE, b, value)


def exponent_hls_infinite(spec: ChannelSpec, b: float) -> ExponentResult:
    """Infinite-layer HLS: climb from the analog floor with budget ``b - 1/m_min``."""
    _check_b(b)
    if b < 1.0 / spec.m_min:
        raise DomainError(f"HLS requires b >= 1/m_min = {1.0 / spec.m_min:.6g}, got {b!r}")
    value = climb(spec, 1.0, b - 1.0 / spec.m_min)
    return ExponentResult(Scheme.HLS, INFINITE, b, value)


def exponent_bs_finite(spec: ChannelSpec, b: float, n: int) -> ExponentResult:
    """n-layer broadcast exponent for the equal-exponent gain assignment.

    With ``P = m_t m_r`` and ``Q = m_t + m_r - 1`` of the active antenna
    system and ``eta`` the geometric gain ratio::

        Delta_n = b L P (1 - eta^n) / (L^2 P - b eta^n)

    which for ``L = 1`` is ``b P (1 - eta^n) / (P - b eta^n)``.  At
    ``eta = 1`` the analytic limit ``n L P^2 / (n L P + Q)`` is used.  On
    multi-block channels with ``eta <= 0`` the exponent is ``b / L``.
    """
    _check_b(b)
    if isinstance(n, bool) or not isinstance(n, int) or n < 1:
        raise DomainError(f"layer count must be a positive integer, got {n!r}")
    alloc = bs_allocation(spec, b, n)
    active = active_bs_system(spec, b)
    L = spec.blocks
    P = active.m_t * active.m_r
    Q = active.m_t + active.m_r - 1
    eta = bs_ratio(active, b)
    if eta <= 0 and L > 1:
        value = b / L
    elif abs(eta - 1.0) < 1e-3:
        g = math.fsum(max(eta, 0.0) ** i for i in range(n))
        value = b * P * g / (L * P * g + Q * eta**n)
    else:
        eta = max(eta, 0.0)
        value = b * L * P * (1.0 - eta**n) / (L * L * P - b * eta**n)
    return ExponentResult(Scheme.BS, n, b, value, alloc)


def exponent_bs_equal_gains(spec: ChannelSpec, n: int) -> float:
    """Exponent of the equal-gain assignment ``r_i = P / (nP + Q)`` (single block).

    This is the allocation the broadcast construction falls back to for
    ``b >= m_t m_r``; it coincides with :func:`exponent_bs_finite` at
    ``b = m_t m_r`` and is dominated by it above.
    """
    P = spec.m_t * spec.m_r
    Q = spec.m_t + spec.m_r - 1
    return n * P * P / (n * P + Q)


def exponent_bs_infinite(spec: ChannelSpec, b: float) -> ExponentResult:
    _check_b(b)
    L = spec.blocks
    P = spec.m_t * spec.m_r
    value = b / L if b < L * L * P else float(L * P)
    return ExponentResult(Scheme.BS, INFINITE, b, value)


def compute_exponent(spec: ChannelSpec, scheme: Scheme | str, b: float, layers: float = INFINITE) -> ExponentResult:
    """Dispatch to the exponent of ``scheme`` with ``layers`` (int or ``INFINITE``).

    Finite LS/HLS layer counts use the staircase with equal time shares.
    """
    scheme = Scheme(scheme)
    _check_b(b)
    if scheme is Scheme.UPPER_BOUND:
        return ExponentResult(scheme, INFINITE, b, exponent_upper_bound(spec, b))
    if scheme is Scheme.SINGLE:
        return exponent_single_layer(spec, b)
    finite = layers != INFINITE
    if finite and (layers != int(layers) or layers < 0):
        raise DomainError(f"layer count must be a nonnegative integer or inf, got {layers!r}")
    if scheme is Scheme.BS:
        return exponent_bs_finite(spec, b, int(layers)) if finite else exponent_bs_infinite(spec, b)
    if scheme is Scheme.LS:
        if not finite:
            return exponent_ls_infinite(spec, b)
        alloc, value = solve_ls_staircase(dmt_curve(spec), b, int(layers))
        return ExponentResult(scheme, int(layers), b, value, alloc)
    if not finite:
        return exponent_hls_infinite(spec, b)
    if b < 1.0 / spec.m_min:
        raise DomainError(f"HLS requires b >= 1/m_min = {1.0 / spec.m_min:.6g}, got {b!r}")
    alloc, value = solve_hls_staircase(dmt_curve(spec), b, int(layers))
    return ExponentResult(scheme, int(layers), b, value, alloc)
