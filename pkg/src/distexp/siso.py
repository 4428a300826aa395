"""
Closed-form finite-SNR expected distortion on the SISO Rayleigh channel.

With ``|h|^2 ~ Exp(1)`` every decoding event of the layered schemes is a
threshold event ``|h|^2 >= a``, so the expected distortions reduce to
finite sums of exponentials.  These serve as oracles for the Monte Carlo
estimator and as the fast evaluator of the finite-SNR optimizer.
"""

from __future__ import annotations

import math
from typing import Sequence

import numpy as np
from scipy.special import exp1

from .errors import DomainError


def siso_outage(rate: float, snr: float) -> float:
    """``Pr{log2(1 + snr |h|^2) < rate}``."""
    if snr <= 0:
        raise DomainError(f"snr must be positive, got {snr!r}")
    return -math.expm1(-(2.0**rate - 1.0) / snr)


def _progressive_ed(thresholds: Sequence[float], distortions: Sequence[float]) -> float:
    # thresholds[i]: gain needed to decode layers 1..i+1; distortions[i]: D with i layers
    a = np.maximum.accumulate(np.asarray(thresholds, dtype=float))
    survive = np.concatenate(([1.0], np.exp(-a), [0.0]))
    probs = survive[:-1] - survive[1:]
    return float(np.dot(probs, distortions))


def siso_ls_ed(rates: Sequence[float], shares: Sequence[float], b: float, snr: float) -> float:
    """Expected distortion of progressive LS with layer rates in bits per channel use."""
    rates = np.asarray(rates, dtype=float)
    shares = np.asarray(shares, dtype=float)
    thresholds = (np.exp2(rates) - 1.0) / snr
    dist = np.exp2(-b * np.concatenate(([0.0], np.cumsum(shares * rates))))
    return _progressive_ed(thresholds, dist)


def siso_single_layer_ed(rate: float, b: float, snr: float) -> float:
    """``(1 - P_out) 2^(-b R) + P_out``."""
    p = siso_outage(rate, snr)
    return (1.0 - p) * 2.0 ** (-b * rate) + p


def _scaled_exp1(z: float) -> float:
    # e^z E1(z); asymptotic series once e^z would overflow
    if z > 700:
        return math.fsum(math.factorial(k) * (-1) ** k / z ** (k + 1) for k in range(6))
    return float(math.exp(z) * exp1(z))


def _analog_tail(a: float, snr: float) -> float:
    # E[1 / (1 + snr x); x >= a] for x ~ Exp(1), i.e. e^{1/s} E1(a + 1/s) / s
    if math.isinf(a):
        return 0.0
    return math.exp(-a) * _scaled_exp1(a + 1.0 / snr) / snr


def siso_hls_ed(rates: Sequence[float], shares: Sequence[float], b: float, snr: float) -> float:
    """Expected distortion of HLS; the analog layer refines only when every digital layer decodes."""
    if b < 1.0:
        raise DomainError(f"HLS on a SISO channel requires b >= 1, got {b!r}")
    rates = np.asarray(rates, dtype=float)
    shares = np.asarray(shares, dtype=float)
    n = len(rates)
    dist = np.exp2(-(b - 1.0) * np.concatenate(([0.0], np.cumsum(shares * rates))))
    a = np.maximum.accumulate((np.exp2(rates) - 1.0) / snr) if n else np.zeros(0)
    survive = np.concatenate(([1.0], np.exp(-a)))
    partial = math.fsum((survive[i] - survive[i + 1]) * dist[i] for i in range(n))
    return partial + dist[n] * _analog_tail(a[-1] if n else 0.0, snr)


def bs_thresholds(rates: Sequence[float], cumulative_powers: Sequence[float]) -> np.ndarray:
    """Channel-gain thresholds of successive decoding on a SISO channel.

    Layer ``k`` decodes when ``(1 + S_k x) / (1 + S_{k+1} x) >= 2^R_k`` with
    ``S_k`` the cumulative power of layers ``k..n`` and ``S_{n+1} = 0``.
    """
    s = np.append(np.asarray(cumulative_powers, dtype=float), 0.0)
    out = np.empty(len(rates))
    for k, r in enumerate(rates):
        g = 2.0**r
        denom = s[k] - g * s[k + 1]
        if r <= 0:
            out[k] = 0.0
        elif denom > 0:
            out[k] = (g - 1.0) / denom
        else:
            out[k] = math.inf
    return out


def siso_bs_ed(rates: Sequence[float], cumulative_powers: Sequence[float], b: float) -> float:
    """Expected distortion of the superposition scheme under successive decoding."""
    rates = np.asarray(rates, dtype=float)
    thresholds = bs_thresholds(rates, cumulative_powers)
    dist = np.exp2(-b * np.concatenate(([0.0], np.cumsum(rates))))
    return _progressive_ed(thresholds, dist)
