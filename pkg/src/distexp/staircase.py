"""
Finite-layer allocation solvers.

Progressive layered schemes (LS, HLS) at high SNR reduce to a staircase on
the DMT curve: starting at the top layer, each layer ``k`` contributes a
line of slope ``b t_k`` whose intercept is the diversity reached by the
layer above it, and the distortion exponent is the height reached by the
first layer.  Broadcast (superposition) allocations are chosen so that all
terms of the max-min exponent are equal.

The ``*_objective`` functions evaluate the max-min exponent of an arbitrary
allocation directly; they are the yardstick the solvers are checked
against.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Sequence

from .channel import ChannelSpec, DmtCurve, dmt_eval, intersect_line, sd_diversity
from .errors import DomainError

_SHARE_TOL = 1e-9


class Scheme(str, enum.Enum):
    UPPER_BOUND = "ub"
    SINGLE = "single"
    LS = "ls"
    HLS = "hls"
    BS = "bs"

    def __str__(self):
        return self.value


@dataclass(frozen=True)
class LayerAllocation:
    """Multiplexing gains and resource split of a layered scheme.

    ``gains`` are multiplexing gains ``r_i`` (rate = ``r_i log SNR``).
    ``time_shares`` apply to progressive schemes, ``power_exponents`` (SNR
    exponent of the cumulative power from layer ``k`` on) to broadcast.
    ``analog_share`` is the fraction of channel uses spent on the uncoded
    HLS layer.  ``active_antennas`` records the reduced antenna system a
    broadcast allocation was built on, when it differs from the channel.
    """

    scheme: Scheme
    gains: tuple[float, ...]
    time_shares: tuple[float, ...] | None = None
    power_exponents: tuple[float, ...] | None = None
    analog_share: float | None = None
    active_antennas: tuple[int, int] | None = None

    @property
    def n(self) -> int:
        return len(self.gains)


def equal_shares(n: int) -> tuple[float, ...]:
    return tuple([1.0 / n] * n)


def _check_shares(t: Sequence[float] | None, n: int) -> tuple[float, ...]:
    if t is None:
        return equal_shares(n)
    t = tuple(float(x) for x in t)
    if len(t) != n:
        raise DomainError(f"expected {n} time shares, got {len(t)}")
    if any(x < 0 for x in t) or abs(math.fsum(t) - 1.0) > _SHARE_TOL:
        raise DomainError(f"time shares must be nonnegative and sum to 1, got {t}")
    return t


def _climb_stairs(curve: DmtCurve, slopes: Sequence[float], floor: float) -> list[float]:
    """Solve the staircase top-down; returns gains r_1..r_n."""
    gains = [0.0] * len(slopes)
    height = floor
    for k in range(len(slopes) - 1, -1, -1):
        r = intersect_line(curve, slopes[k], height)
        gains[k] = r
        height = dmt_eval(curve, r)
    return gains


def solve_ls_staircase(curve: DmtCurve, b: float, n: int, t: Sequence[float] | None = None):
    """Optimal LS multiplexing gains for fixed time shares.

    Solves ``b t_n r_n = d*(r_n)`` and
    ``d*(r_k) = d*(r_{k+1}) + b t_k r_k`` for ``k = n-1..1``.

    Returns
    -------
    (LayerAllocation, float)
        The allocation and its distortion exponent ``d*(r_1)``.
    """
    if not b > 0:
        raise DomainError(f"bandwidth ratio must be positive, got {b!r}")
    if n < 1:
        raise DomainError("LS needs at least one layer")
    t = _check_shares(t, n)
    gains = _climb_stairs(curve, [b * x for x in t], 0.0)
    alloc = LayerAllocation(Scheme.LS, tuple(gains), time_shares=t)
    return alloc, dmt_eval(curve, gains[0])


def solve_hls_staircase(
    curve: DmtCurve, b: float, n: int, m_min: int | None = None, t: Sequence[float] | None = None
):
    """HLS counterpart of :func:`solve_ls_staircase`.

    The digital layers use the bandwidth ``b - 1/m_min`` left after the
    analog layer, and the staircase starts from the analog floor of
    diversity 1: ``1 + (b - 1/m_min) t_n r_n = d*(r_n)``.  With ``n = 0``
    only the analog layer is sent and the exponent is 1.
    """
    m_min = curve.m_min if m_min is None else m_min
    if not b >= 1.0 / m_min:
        raise DomainError(f"HLS requires b >= 1/m_min = {1.0 / m_min:.6g}, got {b!r}")
    if n < 0:
        raise DomainError("layer count must be nonnegative")
    analog = 1.0 / (b * m_min)
    if n == 0:
        return LayerAllocation(Scheme.HLS, (), time_shares=(), analog_share=analog), 1.0
    t = _check_shares(t, n)
    digital = b - 1.0 / m_min
    gains = _climb_stairs(curve, [digital * x for x in t], 1.0)
    alloc = LayerAllocation(Scheme.HLS, tuple(gains), time_shares=t, analog_share=analog)
    return alloc, dmt_eval(curve, gains[0])


def ls_objective(curve: DmtCurve, b: float, gains: Sequence[float], t: Sequence[float]) -> float:
    """Max-min LS exponent ``min_k {d*(r_{k+1}) + b sum_{i<=k} t_i r_i}`` of an allocation."""
    return min(_progressive_terms(curve, b, gains, t, floor=0.0))


def hls_objective(curve: DmtCurve, b: float, gains: Sequence[float], t: Sequence[float]) -> float:
    """HLS exponent; the last term is ``1 + (b - 1/m_min) sum t_i r_i``."""
    digital = b - 1.0 / curve.m_min
    if digital < 0:
        raise DomainError("HLS requires b >= 1/m_min")
    return min(_progressive_terms(curve, digital, gains, t, floor=1.0))


def _progressive_terms(curve, b, gains, t, floor):
    terms = []
    spent = 0.0
    for k, r in enumerate(gains):
        terms.append(dmt_eval(curve, r) + b * spent)
        spent += t[k] * r
    terms.append(floor + b * spent)
    return terms


def bs_terms(spec: ChannelSpec, b: float, gains: Sequence[float]) -> list[float]:
    """The ``n + 1`` exponents ``d_sd(r_{i+1}) + b sum_{j<=i} r_j`` of a broadcast allocation."""
    terms = []
    for i in range(len(gains)):
        terms.append(sd_diversity(spec, gains[:i], gains[i]) + b * math.fsum(gains[:i]))
    terms.append(b * math.fsum(gains))
    return terms


def bs_objective(spec: ChannelSpec, b: float, gains: Sequence[float]) -> float:
    return min(bs_terms(spec, b, gains))


def active_bs_system(spec: ChannelSpec, b: float) -> ChannelSpec:
    """Antenna system the single-block broadcast construction operates on.

    For ``(m_t-k-1)(m_r-k-1) <= b < (m_t-k)(m_r-k)`` with ``k >= 1`` only an
    ``(m_t-k) x (m_r-k)`` subsystem is used; otherwise the full channel.
    Multi-block channels always use the full system.
    """
    if spec.blocks > 1 or b >= (spec.m_t - 1) * (spec.m_r - 1):
        return spec
    for k in range(1, spec.m_min):
        if (spec.m_t - k - 1) * (spec.m_r - k - 1) <= b < (spec.m_t - k) * (spec.m_r - k):
            return ChannelSpec(spec.m_t - k, spec.m_r - k, spec.blocks)
    raise AssertionError("unreachable: bands cover b >= 0")


def bs_ratio(spec: ChannelSpec, b: float) -> float:
    """Geometric ratio ``r_{i+1} / r_i`` that equalizes consecutive broadcast terms."""
    L = spec.blocks
    P = spec.m_t * spec.m_r
    Q = spec.m_t + spec.m_r - 1
    return (b - L * (L * P - Q)) / (L * Q)


def _geometric_sum(eta: float, n: int) -> float:
    # 1 + eta + ... + eta^(n-1), without the 0/0 at eta = 1
    if abs(eta - 1.0) < 0.5:
        return math.fsum(eta**i for i in range(n))
    return (1.0 - eta**n) / (1.0 - eta)


def bs_allocation(spec: ChannelSpec, b: float, n: int) -> LayerAllocation:
    """Equal-exponent multiplexing gains and power exponents for n-layer BS.

    Gains form the geometric sequence ``r_i = eta^(i-1) r_1`` that makes all
    terms of the max-min exponent equal, built on the active antenna system
    of :func:`active_bs_system`.  On a multi-block channel with ``eta <= 0``
    no nonnegative equalizing sequence exists; the allocation is then a
    single layer at the superposition limit ``r_1 = 1/L``, which attains the
    ceiling ``b/L`` shared by every feasible allocation.

    ``power_exponents[k] = 1 - L (r_1 + ... + r_k)``: the cumulative power of
    layers ``k+1..n`` scales as ``SNR`` to this power (before slack).
    """
    if not b > 0:
        raise DomainError(f"bandwidth ratio must be positive, got {b!r}")
    if n < 1:
        raise DomainError("BS needs at least one layer")
    active = active_bs_system(spec, b)
    L = spec.blocks
    P = active.m_t * active.m_r
    Q = active.m_t + active.m_r - 1
    eta = bs_ratio(active, b)
    if eta <= 0 and L > 1:
        gains = [1.0 / L] + [0.0] * (n - 1)
    else:
        eta = max(eta, 0.0)
        r1 = P / (L * P * _geometric_sum(eta, n) + Q * eta**n)
        gains = [r1 * eta**i for i in range(n)]
    reduced = None if active == spec else (active.m_t, active.m_r)
    return LayerAllocation(
        Scheme.BS, tuple(gains), power_exponents=bs_power_exponents(spec, gains), active_antennas=reduced
    )


def bs_power_exponents(spec: ChannelSpec, gains: Sequence[float]) -> tuple[float, ...]:
    """``1 - L (r_1 + ... + r_{k-1})`` for ``k = 1..n``."""
    exponents = []
    spent = 0.0
    for r in gains:
        exponents.append(1.0 - spec.blocks * spent)
        spent += r
    return tuple(exponents)


def explicit_bs_allocation(spec: ChannelSpec, gains: Sequence[float]) -> LayerAllocation:
    """Broadcast allocation with user-chosen gains and the matching power exponents."""
    gains = tuple(float(r) for r in gains)
    if not gains or any(r < 0 for r in gains):
        raise DomainError("BS gains must be a nonempty list of nonnegative values")
    if math.fsum(gains) > 1.0 / spec.blocks + 1e-12:
        raise DomainError(f"BS gains must sum to at most 1/L = {1.0 / spec.blocks:.6g}")
    return LayerAllocation(Scheme.BS, gains, power_exponents=bs_power_exponents(spec, gains))
