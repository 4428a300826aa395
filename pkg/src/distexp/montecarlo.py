"""
Seeded Monte Carlo estimation of expected distortion at finite SNR.

Decoding failures are modelled by outage: a layer is lost when the
instantaneous mutual information falls below its rate.  Trials are split
into fixed-size chunks, each drawn from its own substream
``SeedSequence(seed, spawn_key=(chunk,))``.  Shards only decide which
worker handles which chunk, and per-chunk sums are reduced in chunk order,
so estimates are bitwise identical for any shard count.  The same channel
draws are reused across the SNR grid.

Rare outage events can be sampled with a defensive mixture: a trial's
channel is drawn with variance ``sigma^2`` picked uniformly from
``{1} + is_scales`` and reweighted by the likelihood ratio, giving a
self-normalized importance-sampling estimate.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np
from scipy.special import logsumexp
from scipy.stats import linregress

from .channel import ChannelSpec
from .errors import DomainError, InfeasibleError
from .staircase import LayerAllocation, Scheme, equal_shares

CHUNK = 16384
_EIG_TOL = 1e-10


@dataclass(frozen=True)
class SimulationConfig:
    """Monte Carlo settings.

    Parameters
    ----------
    snr_grid_db : sequence of float
        Strictly increasing SNR grid in dB.
    trials : int
        Channel draws per SNR point (shared by all points).
    seed : int
        Root seed, ``0 <= seed < 2**64``.
    epsilon0 : float
        BS power slack; layer ``k`` uses ``eps_k = k * epsilon0``.
    shards : int
        Number of parallel workers.
    is_scales : sequence of float
        Extra channel variances of the importance-sampling mixture; empty
        for plain sampling.
    fit_points : int, optional
        Number of top grid points used for slope fits; default is the top
        half of the grid (at least 3).
    """

    snr_grid_db: tuple[float, ...] = (10.0, 20.0, 30.0)
    trials: int = 10_000
    seed: int = 0
    epsilon0: float = 0.01
    shards: int = 1
    is_scales: tuple[float, ...] = ()
    fit_points: int | None = None

    def __post_init__(self):
        grid = tuple(float(x) for x in self.snr_grid_db)
        object.__setattr__(self, "snr_grid_db", grid)
        object.__setattr__(self, "is_scales", tuple(float(x) for x in self.is_scales))
        if not grid or any(b <= a for a, b in zip(grid, grid[1:])):
            raise DomainError("snr_grid_db must be nonempty and strictly increasing")
        if isinstance(self.trials, bool) or not isinstance(self.trials, int) or self.trials < 1:
            raise DomainError(f"trials must be a positive integer, got {self.trials!r}")
        if not isinstance(self.seed, int) or not 0 <= self.seed < 2**64:
            raise DomainError(f"seed must be a 64-bit unsigned integer, got {self.seed!r}")
        if not self.epsilon0 > 0:
            raise DomainError(f"epsilon0 must be positive, got {self.epsilon0!r}")
        if not isinstance(self.shards, int) or self.shards < 1:
            raise DomainError(f"shards must be a positive integer, got {self.shards!r}")
        if any(not (s > 0 and math.isfinite(s)) for s in self.is_scales):
            raise DomainError("is_scales must be positive")
        if self.fit_points is not None and self.fit_points < 3:
            raise DomainError("fit_points must be at least 3")


@dataclass(frozen=True)
class ChannelRealization:
    """One L-block channel draw with the eigenvalues of its Gram matrices."""

    blocks: np.ndarray  # (L, m_r, m_t)
    eigenvalues: np.ndarray  # (L, m_min), ascending

    @property
    def m_t(self) -> int:
        return self.blocks.shape[-1]


@dataclass(frozen=True)
class SnrPoint:
    snr_db: float
    status: str  # "ok" or "infeasible"
    expected_distortion: float
    ed_stderr: float
    layer_outage_rates: tuple[float, ...]  # layer k or an earlier layer lost
    layer_mi_outage_rates: tuple[float, ...] = ()  # layer k's own rate not supported


@dataclass(frozen=True)
class MonteCarloEstimate:
    per_snr: tuple[SnrPoint, ...]
    fitted_exponent: float
    fit_stderr: float

    def feasible(self) -> list[SnrPoint]:
        return [p for p in self.per_snr if p.status == "ok"]


class SampleBatch(NamedTuple):
    eig: np.ndarray  # (m, L, m_min)
    analog_eig: np.ndarray | None  # (m, L, m_min) of the constrained matrix
    log_w: np.ndarray | None  # importance log-weights, None for plain sampling
    m_t: int


def gram_eigenvalues(H: np.ndarray) -> np.ndarray:
    """Ascending eigenvalues of the smaller Gram matrix of ``H`` (..., m_r, m_t)."""
    Hh = np.conj(np.swapaxes(H, -1, -2))
    gram = H @ Hh if H.shape[-2] <= H.shape[-1] else Hh @ H
    lam = np.linalg.eigvalsh(gram)
    if lam.size and lam.min() < -_EIG_TOL:
        raise ValueError(f"Gram matrix eigenvalue {lam.min():.3g} is negative beyond tolerance")
    return np.maximum(lam, 0.0)


def _gaussian(rng: np.random.Generator, shape) -> np.ndarray:
    z = rng.standard_normal((2, *shape))
    return (z[0] + 1j * z[1]) / math.sqrt(2.0)


def sample_channel(spec: ChannelSpec, rng: np.random.Generator) -> ChannelRealization:
    """Draw ``L`` i.i.d. CN(0,1) matrices of size ``m_r x m_t``."""
    H = _gaussian(rng, (spec.blocks, spec.m_r, spec.m_t))
    return ChannelRealization(H, gram_eigenvalues(H))


def _chunk_sizes(trials: int) -> list[int]:
    full, rest = divmod(trials, CHUNK)
    return [CHUNK] * full + ([rest] if rest else [])


def _chunk_rng(seed: int, chunk: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(chunk,)))


def _draw_chunk(spec: ChannelSpec, cfg: SimulationConfig, chunk: int, size: int, analog: bool) -> SampleBatch:
    rng = _chunk_rng(cfg.seed, chunk)
    H = _gaussian(rng, (size, spec.blocks, spec.m_r, spec.m_t))
    log_w = None
    if cfg.is_scales:
        variances = np.array((1.0, *cfg.is_scales))
        comp = rng.integers(len(variances), size=size)
        H *= np.sqrt(variances[comp])[:, None, None, None]
        norm2 = np.sum(np.abs(H) ** 2, axis=(1, 2, 3))
        dims = spec.blocks * spec.m_r * spec.m_t
        log_beta = -math.log(len(variances))
        # log q/p for each mixture component, per trial
        terms = log_beta - dims * np.log(variances)[None, :] - norm2[:, None] * (1.0 / variances - 1.0)[None, :]
        log_w = -logsumexp(terms, axis=1)
    eig = gram_eigenvalues(H)
    analog_eig = None
    if analog:
        analog_eig = gram_eigenvalues(H[..., : spec.m_min]) if spec.m_t > spec.m_r else eig
    return SampleBatch(eig, analog_eig, log_w, spec.m_t)


def sample_batch(spec: ChannelSpec, cfg: SimulationConfig, analog: bool = False) -> SampleBatch:
    """All ``cfg.trials`` draws as one batch (same draws :func:`simulate` uses)."""
    parts = [_draw_chunk(spec, cfg, c, n, analog) for c, n in enumerate(_chunk_sizes(cfg.trials))]
    return SampleBatch(
        np.concatenate([p.eig for p in parts]),
        np.concatenate([p.analog_eig for p in parts]) if analog else None,
        np.concatenate([p.log_w for p in parts]) if cfg.is_scales else None,
        spec.m_t,
    )


def instantaneous_capacity(real: ChannelRealization | SampleBatch, snr: float) -> np.ndarray | float:
    """``(1/L) sum_j sum_i log2(1 + (snr/m_t) lambda_ji)`` in bits per channel use."""
    if isinstance(real, ChannelRealization):
        return float(batch_capacity(real.eigenvalues, snr, real.m_t))
    return batch_capacity(real.eig, snr, real.m_t)


def batch_capacity(eig: np.ndarray, snr: float, m_t: int) -> np.ndarray:
    """Per-trial capacity from eigenvalues shaped ``(..., L, m_min)``."""
    return np.log2(1.0 + (snr / m_t) * eig).sum(axis=-1).mean(axis=-1)


def _decoded_count(ok: np.ndarray) -> np.ndarray:
    # number of leading layers that decode
    return np.cumprod(ok, axis=1).sum(axis=1)


def progressive_kernel(batch: SampleBatch, rates, shares, bandwidth: float, snr: float) -> tuple[np.ndarray, np.ndarray]:
    """Per-layer decodability ``(m, n)`` and distortions of LS-style progressive transmission."""
    rates = np.asarray(rates, dtype=float)
    cap = batch_capacity(batch.eig, snr, batch.m_t)
    ok = cap[:, None] >= rates[None, :]
    table = np.exp2(-bandwidth * np.concatenate(([0.0], np.cumsum(np.asarray(shares) * rates))))
    return ok, table[_decoded_count(ok)]


def analog_factor(analog_eig: np.ndarray, snr: float) -> np.ndarray:
    """Per-trial MMSE distortion factor of the uncoded layer, averaged over blocks."""
    m_min = analog_eig.shape[-1]
    return (1.0 / (1.0 + (snr / m_min) * analog_eig)).mean(axis=-1).mean(axis=-1)


def hls_kernel(batch: SampleBatch, rates, shares, b: float, snr: float) -> tuple[np.ndarray, np.ndarray]:
    m_min = batch.eig.shape[-1]
    ok, dist = progressive_kernel(batch, rates, shares, b - 1.0 / m_min, snr)
    full = _decoded_count(ok) == len(rates)
    dist = np.where(full, dist * analog_factor(batch.analog_eig, snr), dist)
    return ok, dist


def bs_kernel(batch: SampleBatch, rates, cumulative_powers, b: float) -> tuple[np.ndarray, np.ndarray]:
    """Successive decoding of superposed layers with cumulative powers ``S_1 > ... > S_n``."""
    rates = np.asarray(rates, dtype=float)
    s = np.append(np.asarray(cumulative_powers, dtype=float), 0.0)
    logs = [np.log2(1.0 + (sk / batch.m_t) * batch.eig).sum(axis=-1).mean(axis=-1) for sk in s]
    ok = np.stack([logs[k] - logs[k + 1] >= rates[k] for k in range(len(rates))], axis=1)
    table = np.exp2(-b * np.concatenate(([0.0], np.cumsum(rates))))
    return ok, table[_decoded_count(ok)]


def bs_cumulative_powers(alloc: LayerAllocation, snr: float, epsilon0: float) -> np.ndarray:
    """``S_1 = snr`` and ``S_k = snr^(p_k - eps_{k-1})`` from the allocation's power exponents.

    Raises
    ------
    InfeasibleError
        If the powers are not strictly decreasing at this SNR.
    """
    if alloc.power_exponents is None:
        raise DomainError("BS allocation carries no power exponents")
    p = np.asarray(alloc.power_exponents, dtype=float)
    slack = epsilon0 * np.arange(len(p))
    s = snr ** (p - slack)
    s[0] = snr
    if not np.all(s > 0) or np.any(np.diff(s) >= 0):
        raise InfeasibleError(
            f"BS cumulative powers {s.tolist()} are not strictly decreasing at snr={snr:.6g}"
        )
    return s


def _moments(ok: np.ndarray, dist: np.ndarray, log_w: np.ndarray | None) -> np.ndarray:
    # [sum w, sum w^2, sum wD, sum w^2 D, sum w^2 D^2,
    #  sum w 1{layers <= k not all decoded}..., sum w 1{layer k own outage}...]
    w = np.ones_like(dist) if log_w is None else np.exp(log_w)
    w2 = w * w
    decoded = _decoded_count(ok)
    lost = [np.sum(w * (decoded < k)) for k in range(1, ok.shape[1] + 1)]
    own = [np.sum(w * ~ok[:, k]) for k in range(ok.shape[1])]
    return np.array([w.sum(), w2.sum(), (w * dist).sum(), (w2 * dist).sum(), (w2 * dist * dist).sum(), *lost, *own])


def _point(snr_db: float, sums: np.ndarray, n: int) -> SnrPoint:
    sw, sw2, swd, sw2d, sw2d2 = sums[:5]
    mu = swd / sw
    var = max(sw2d2 - 2.0 * mu * sw2d + mu * mu * sw2, 0.0)
    lost = tuple(float(x / sw) for x in sums[5 : 5 + n])
    own = tuple(float(x / sw) for x in sums[5 + n :])
    return SnrPoint(snr_db, "ok", float(mu), float(math.sqrt(var) / sw), lost, own)


def _run(spec: ChannelSpec, cfg: SimulationConfig, snrs_db: Sequence[float], evaluators, n: int, analog: bool):
    """Per-SNR moment sums; ``evaluators[i]`` is a callable or an InfeasibleError."""
    sizes = _chunk_sizes(cfg.trials)

    def work(shard: int):
        out = {}
        for c in range(shard, len(sizes), cfg.shards):
            batch = _draw_chunk(spec, cfg, c, sizes[c], analog)
            row = []
            for ev, db in zip(evaluators, snrs_db):
                if isinstance(ev, Exception):
                    row.append(None)
                    continue
                ok, dist = ev(batch, 10.0 ** (db / 10.0))
                row.append(_moments(ok, dist, batch.log_w))
            out[c] = row
        return out

    if cfg.shards == 1:
        results = [work(0)]
    else:
        with ThreadPoolExecutor(max_workers=cfg.shards) as pool:
            results = list(pool.map(work, range(cfg.shards)))
    by_chunk = {}
    for r in results:
        by_chunk.update(r)
    totals = [None if isinstance(ev, Exception) else np.zeros(5 + 2 * n) for ev in evaluators]
    for c in range(len(sizes)):  # fixed reduction order
        for i, sums in enumerate(by_chunk[c]):
            if sums is not None:
                totals[i] = totals[i] + sums
    return totals


def _rates(alloc: LayerAllocation, snr: float) -> np.ndarray:
    rates = np.asarray(alloc.gains, dtype=float) * math.log2(snr)
    if np.any(rates < 0):
        raise DomainError(f"layer rates must be nonnegative; snr={snr:.6g} gives {rates.tolist()}")
    return rates


def _evaluator(spec: ChannelSpec, alloc: LayerAllocation, b: float, snr: float, cfg: SimulationConfig):
    scheme = Scheme(alloc.scheme)
    rates = _rates(alloc, snr)
    shares = alloc.time_shares if alloc.time_shares is not None else equal_shares(alloc.n) if alloc.n else ()
    if scheme in (Scheme.LS, Scheme.SINGLE):
        return lambda batch, s: progressive_kernel(batch, rates, shares, b, s)
    if scheme is Scheme.HLS:
        if b < 1.0 / spec.m_min:
            raise DomainError(f"HLS requires b >= 1/m_min = {1.0 / spec.m_min:.6g}, got {b!r}")
        return lambda batch, s: hls_kernel(batch, rates, shares, b, s)
    if scheme is Scheme.BS:
        powers = bs_cumulative_powers(alloc, snr, cfg.epsilon0)
        return lambda batch, s: bs_kernel(batch, rates, powers, b)
    raise DomainError(f"cannot simulate scheme {scheme}")


def _evaluators(spec, alloc, b, snrs_db, cfg):
    out = []
    for db in snrs_db:
        try:
            out.append(_evaluator(spec, alloc, b, 10.0 ** (db / 10.0), cfg))
        except InfeasibleError as exc:
            out.append(exc)
    return out


def _single_point(spec, alloc, b, snr, cfg) -> SnrPoint:
    db = 10.0 * math.log10(snr)
    ev = _evaluator(spec, alloc, b, snr, cfg)
    (sums,) = _run(spec, cfg, [db], [ev], alloc.n, Scheme(alloc.scheme) is Scheme.HLS)
    return _point(db, sums, alloc.n)


def ls_expected_distortion(spec: ChannelSpec, alloc: LayerAllocation, b: float, snr: float, cfg: SimulationConfig) -> SnrPoint:
    """Expected distortion of progressive LS at one SNR (linear)."""
    if Scheme(alloc.scheme) not in (Scheme.LS, Scheme.SINGLE):
        raise DomainError("expected an LS allocation")
    return _single_point(spec, alloc, b, snr, cfg)


def hls_expected_distortion(spec: ChannelSpec, alloc: LayerAllocation, b: float, snr: float, cfg: SimulationConfig) -> SnrPoint:
    """Expected distortion of HLS at one SNR; the analog layer counts only if all layers decode."""
    if Scheme(alloc.scheme) is not Scheme.HLS:
        raise DomainError("expected an HLS allocation")
    return _single_point(spec, alloc, b, snr, cfg)


def bs_expected_distortion(spec: ChannelSpec, alloc: LayerAllocation, b: float, snr: float, cfg: SimulationConfig) -> SnrPoint:
    """Expected distortion of superposition with successive decoding at one SNR."""
    if Scheme(alloc.scheme) is not Scheme.BS:
        raise DomainError("expected a BS allocation")
    return _single_point(spec, alloc, b, snr, cfg)


def fit_window(points: Sequence[tuple[float, float]], count: int | None = None) -> list[tuple[float, float]]:
    """The top ``count`` points (default: top half, at least 3)."""
    points = list(points)
    if count is None:
        count = max(3, math.ceil(len(points) / 2))
    return points[-count:]


def estimate_exponent(points: Sequence[tuple[float, float]]) -> tuple[float, float]:
    """Least-squares slope of ``-log10(value)`` against ``log10(snr)``.

    Parameters
    ----------
    points : sequence of (snr_db, value)

    Returns
    -------
    slope, stderr : float
    """
    points = list(points)
    if len(points) < 3:
        raise DomainError(f"need at least 3 points to fit an exponent, got {len(points)}")
    x = np.array([p[0] for p in points], dtype=float) / 10.0
    v = np.array([p[1] for p in points], dtype=float)
    if np.any(v <= 0) or not np.all(np.isfinite(v)):
        raise DomainError("values must be positive and finite to take logarithms")
    y = -np.log10(v)
    if np.ptp(y) == 0.0:
        return 0.0, 0.0
    fit = linregress(x, y)
    return float(fit.slope), float(fit.stderr)


def _safe_fit(points, count):
    window = fit_window(points, count)
    if len(window) < 3 or any(v <= 0 or not math.isfinite(v) for _, v in window):
        return math.nan, math.nan
    return estimate_exponent(window)


def simulate(spec: ChannelSpec, alloc: LayerAllocation, b: float, cfg: SimulationConfig) -> MonteCarloEstimate:
    """Expected distortion over ``cfg.snr_grid_db`` with a fitted distortion exponent.

    Grid points where the BS power ordering cannot be met are reported with
    status ``"infeasible"`` and excluded from the fit.
    """
    evaluators = _evaluators(spec, alloc, b, cfg.snr_grid_db, cfg)
    totals = _run(spec, cfg, cfg.snr_grid_db, evaluators, alloc.n, Scheme(alloc.scheme) is Scheme.HLS)
    nan_layers = tuple([math.nan] * alloc.n)
    points = tuple(
        SnrPoint(db, "infeasible", math.nan, math.nan, nan_layers, nan_layers)
        if sums is None
        else _point(db, sums, alloc.n)
        for db, sums in zip(cfg.snr_grid_db, totals)
    )
    slope, err = _safe_fit([(p.snr_db, p.expected_distortion) for p in points if p.status == "ok"], cfg.fit_points)
    return MonteCarloEstimate(points, slope, err)


def outage_slopes(estimate: MonteCarloEstimate, count: int | None = None, own: bool = False) -> list[tuple[float, float]]:
    """Fitted SNR exponent of each layer's outage rate (NaN where a rate is zero).

    By default the successive-decoding loss rates are fitted; ``own=True``
    fits each layer's own mutual-information outage instead.
    """
    ok = estimate.feasible()
    if not ok:
        return []
    field = "layer_mi_outage_rates" if own else "layer_outage_rates"
    n = len(getattr(ok[0], field))
    return [_safe_fit([(p.snr_db, getattr(p, field)[k]) for p in ok], count) for k in range(n)]
