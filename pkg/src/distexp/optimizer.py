"""
Finite-SNR minimization of expected distortion by exhaustive grid search.

Candidates are layer rates (bits per channel use) taken from a uniform
grid, combined with time shares (LS, HLS) or power fractions (BS) from a
simplex grid.  Each candidate is scored either by the closed-form SISO
oracle or by Monte Carlo on one shared set of channel draws, so all
candidates see the same randomness.  The lowest expected distortion wins;
ties go to the first candidate in enumeration order.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Iterator

import numpy as np

from .channel import ChannelSpec
from .errors import DomainError, GridTooLargeError, InfeasibleError
from .montecarlo import SampleBatch, SimulationConfig, analog_factor, bs_kernel, sample_batch, batch_capacity
from .siso import siso_bs_ed, siso_hls_ed, siso_ls_ed
from .staircase import LayerAllocation, Scheme

MAX_CANDIDATES = 10**7
MAX_LAYERS = 3


@dataclass(frozen=True)
class SearchSpace:
    """Grid of finite-SNR allocations.

    Parameters
    ----------
    scheme : Scheme
        ``ls``, ``hls``, ``bs`` or ``single`` (LS with one layer).
    n : int
        Number of digital layers, at most 3 (HLS also allows 0).
    rate_grid : (min, max, step)
        Layer rates in bits per channel use, endpoints included.
    share_step : float
        Step of the time-share (LS, HLS) or power-fraction (BS) simplex.
    snr_db : float
    b : float
        Bandwidth ratio.
    """

    scheme: Scheme
    n: int
    rate_grid: tuple[float, float, float]
    share_step: float
    snr_db: float
    b: float

    def __post_init__(self):
        object.__setattr__(self, "scheme", Scheme(self.scheme))
        if self.scheme is Scheme.SINGLE:
            object.__setattr__(self, "scheme", Scheme.LS)
            if self.n != 1:
                raise DomainError("single-layer search needs n = 1")
        if self.scheme is Scheme.UPPER_BOUND:
            raise DomainError("the upper bound is not an allocation scheme")
        low = 0 if self.scheme is Scheme.HLS else 1
        if not low <= self.n <= MAX_LAYERS:
            raise DomainError(f"n must be in [{low}, {MAX_LAYERS}], got {self.n}")
        lo, hi, step = self.rate_grid
        if not (step > 0 and 0 <= lo <= hi):
            raise DomainError(f"invalid rate grid {self.rate_grid}")
        if not 0 < self.share_step <= 1:
            raise DomainError(f"share_step must be in (0, 1], got {self.share_step}")
        if not self.b > 0:
            raise DomainError(f"bandwidth ratio must be positive, got {self.b!r}")

    @property
    def snr(self) -> float:
        return 10.0 ** (self.snr_db / 10.0)

    def rates(self) -> np.ndarray:
        lo, hi, step = self.rate_grid
        count = int(math.floor((hi - lo) / step + 1e-9)) + 1
        return lo + step * np.arange(count)

    def share_units(self) -> int:
        units = round(1.0 / self.share_step)
        if abs(units * self.share_step - 1.0) > 1e-9:
            raise DomainError(f"share_step must divide 1, got {self.share_step}")
        return units


@dataclass(frozen=True)
class OptimizationResult:
    allocation: LayerAllocation
    ed: float
    rates: tuple[float, ...]
    shares: tuple[float, ...] | None
    powers: tuple[float, ...] | None  # BS power fractions, layer 1 first
    candidates: int
    evaluator: str
    grid: list = field(default_factory=list, repr=False)  # (rates, split, ed) if requested


def candidate_count(space: SearchSpace) -> int:
    k = len(space.rates())
    u = space.share_units()
    n = space.n
    if n == 0:
        return 1
    if space.scheme is Scheme.BS:
        return k**n * math.comb(u - 1, n - 1)
    return math.comb(k + n - 1, n) * math.comb(u + n - 1, n - 1)


def _simplex(units: int, n: int, positive: bool) -> Iterator[tuple[float, ...]]:
    # compositions of `units` into n parts, lexicographic
    low = 1 if positive else 0

    def rec(left, parts):
        if parts == 1:
            if left >= low:
                yield (left,)
            return
        for first in range(low, left + 1):
            for rest in rec(left - first, parts - 1):
                yield (first, *rest)

    for combo in rec(units, n):
        yield tuple(c / units for c in combo)


def _candidates(space: SearchSpace):
    rates = space.rates().tolist()
    u = space.share_units()
    if space.n == 0:
        yield (), ()
        return
    if space.scheme is Scheme.BS:
        rate_iter = itertools.product(rates, repeat=space.n)
        splits = list(_simplex(u, space.n, positive=True))
    else:
        rate_iter = itertools.combinations_with_replacement(rates, space.n)
        splits = list(_simplex(u, space.n, positive=False))
    for r in rate_iter:
        for s in splits:
            yield r, s


def _cumulative_powers(fractions, snr):
    return snr * np.cumsum(np.asarray(fractions)[::-1])[::-1]


class _MonteCarloScorer:
    """Scores candidates against one fixed set of channel draws."""

    def __init__(self, spec: ChannelSpec, space: SearchSpace, cfg: SimulationConfig):
        self.space = space
        hls = space.scheme is Scheme.HLS
        self.batch: SampleBatch = sample_batch(spec, cfg, analog=hls)
        w = np.ones(len(self.batch.eig)) if self.batch.log_w is None else np.exp(self.batch.log_w)
        self.w = w / w.sum()
        if space.scheme is not Scheme.BS:
            # progressive schemes only need the weighted distribution of capacity
            cap = batch_capacity(self.batch.eig, space.snr, self.batch.m_t)
            order = np.argsort(cap, kind="stable")
            self.cap = cap[order]
            ws = self.w[order]
            self.tail = np.concatenate((np.cumsum(ws[::-1])[::-1], [0.0]))  # P(C >= cap[i])
            if hls:
                af = analog_factor(self.batch.analog_eig, space.snr)[order]
                self.analog_tail = np.concatenate((np.cumsum((ws * af)[::-1])[::-1], [0.0]))
        self.m_min = spec.m_min

    def _survival(self, rate):
        i = np.searchsorted(self.cap, rate, side="left")
        return i

    def __call__(self, rates, split) -> float:
        sp = self.space
        if sp.scheme is Scheme.BS:
            powers = _cumulative_powers(split, sp.snr)
            _, dist = bs_kernel(self.batch, rates, powers, sp.b)
            return float(np.dot(self.w, dist))
        n = len(rates)
        bw = sp.b - 1.0 / self.m_min if sp.scheme is Scheme.HLS else sp.b
        dist = np.exp2(-bw * np.concatenate(([0.0], np.cumsum(np.asarray(split) * np.asarray(rates)))))
        idx = [self._survival(r) for r in rates]  # rates are nondecreasing
        surv = [1.0] + [self.tail[i] for i in idx]
        ed = math.fsum((surv[i] - surv[i + 1]) * dist[i] for i in range(n))
        if sp.scheme is Scheme.HLS:
            last = self.analog_tail[idx[-1]] if n else self.analog_tail[0]
            return ed + dist[n] * last
        return ed + surv[n] * dist[n]


def _siso_scorer(space: SearchSpace):
    snr, b = space.snr, space.b
    if space.scheme is Scheme.BS:
        return lambda r, s: siso_bs_ed(r, _cumulative_powers(s, snr), b)
    if space.scheme is Scheme.HLS:
        return lambda r, s: siso_hls_ed(r, s, b, snr)
    return lambda r, s: siso_ls_ed(r, s, b, snr)


def optimize_finite_snr(
    spec: ChannelSpec,
    space: SearchSpace,
    cfg: SimulationConfig | None = None,
    evaluator: str = "auto",
    keep_grid: bool = False,
) -> OptimizationResult:
    """Exhaustive search for the allocation with the lowest expected distortion.

    Parameters
    ----------
    evaluator : {"auto", "oracle", "montecarlo"}
        ``auto`` uses the closed-form oracle on single-block SISO channels
        and Monte Carlo otherwise.

    Raises
    ------
    GridTooLargeError
        If the grid exceeds ``MAX_CANDIDATES`` points.
    InfeasibleError
        If the grid contains no admissible candidate.
    """
    total = candidate_count(space)
    if total > MAX_CANDIDATES:
        raise GridTooLargeError(f"search grid has {total} candidates, more than the limit {MAX_CANDIDATES}")
    if total == 0:
        raise InfeasibleError("search grid contains no admissible candidate")
    if space.scheme is Scheme.HLS and space.b < 1.0 / spec.m_min:
        raise DomainError(f"HLS requires b >= 1/m_min = {1.0 / spec.m_min:.6g}, got {space.b!r}")
    siso = spec.m_t == spec.m_r == spec.blocks == 1
    if evaluator == "auto":
        evaluator = "oracle" if siso else "montecarlo"
    if evaluator == "oracle":
        if not siso:
            raise DomainError("the closed-form oracle covers single-block SISO channels only")
        score = _siso_scorer(space)
    elif evaluator == "montecarlo":
        score = _MonteCarloScorer(spec, space, cfg or SimulationConfig((space.snr_db,)))
    else:
        raise DomainError(f"unknown evaluator {evaluator!r}")

    best = None
    grid = []
    for rates, split in _candidates(space):
        ed = score(rates, split)
        if keep_grid:
            grid.append((rates, split, ed))
        if best is None or ed < best[2]:
            best = (rates, split, ed)
    rates, split, ed = best
    log_snr = math.log2(space.snr)
    gains = tuple(r / log_snr for r in rates)
    if space.scheme is Scheme.BS:
        alloc = LayerAllocation(Scheme.BS, gains)
        shares, powers = None, split
    else:
        analog = 1.0 / (space.b * spec.m_min) if space.scheme is Scheme.HLS else None
        alloc = LayerAllocation(space.scheme, gains, time_shares=split, analog_share=analog)
        shares, powers = split, None
    return OptimizationResult(alloc, float(ed), tuple(rates), shares, powers, total, evaluator, grid)
