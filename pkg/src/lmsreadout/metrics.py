"""SNR, cross-correlation lag and convergence measurements."""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .lms import LengthMismatchError
from .signal import Frame


class SnrBasis(str, enum.Enum):
    CLEAN_REFERENCE = "vs_clean_reference"
    BAND_SPLIT = "band_split"


@dataclass(frozen=True)
class SnrMeasurement:
    signal_power: float
    noise_power: float
    snr_db: float
    basis: SnrBasis = SnrBasis.CLEAN_REFERENCE

    @property
    def infinite(self) -> bool:
        return self.snr_db == math.inf

    @property
    def undefined(self) -> bool:
        return math.isnan(self.snr_db)


def _samples(f) -> np.ndarray:
    return np.asarray(f.samples if isinstance(f, Frame) else f, dtype=np.float64)


def snr_from_powers(signal_power: float, noise_power: float,
                    basis: SnrBasis = SnrBasis.CLEAN_REFERENCE) -> SnrMeasurement:
    if not signal_power > 0 or math.isnan(noise_power):
        snr = math.nan
    elif noise_power <= 0:
        snr = math.inf
    elif math.isinf(noise_power):
        snr = -math.inf
    else:
        snr = 10 * math.log10(signal_power / noise_power)
    return SnrMeasurement(signal_power, noise_power, snr, basis)


def snr_vs_reference(measured, clean) -> SnrMeasurement:
    """SNR of ``measured`` with ``measured - clean`` as the noise.

    ``snr_db`` is ``inf`` when the noise is exactly zero and ``nan`` when the
    clean reference has no power.
    """
    m, c = _samples(measured), _samples(clean)
    if m.size != c.size:
        raise LengthMismatchError(f"measured has {m.size} samples, clean has {c.size}")
    with np.errstate(over="ignore", invalid="ignore"):
        noise = float(np.mean((m - c) ** 2))
    return snr_from_powers(float(np.mean(c ** 2)), noise)


def snr_band_split(measured, sample_rate: float, carrier_freq: float,
                   half_width_hz: float) -> SnrMeasurement:
    """SNR without a clean reference.

    The noise density is taken from the periodogram bins outside
    ``carrier_freq +- half_width_hz`` and assumed flat across the band; signal
    power is the in-band power minus that floor.
    """
    m = _samples(measured)
    n = m.size
    spec = np.abs(np.fft.rfft(m)) ** 2
    # one-sided periodogram scaled so that sum == mean(m**2)
    weights = np.full(spec.size, 2.0)
    weights[0] = 1.0
    if n % 2 == 0:
        weights[-1] = 1.0
    power = spec * weights / n ** 2
    freqs = np.fft.rfftfreq(n, 1.0 / sample_rate)
    inband = np.abs(freqs - carrier_freq) <= half_width_hz
    if inband.all() or not inband.any():
        return SnrMeasurement(float("nan"), float("nan"), math.nan, SnrBasis.BAND_SPLIT)
    floor = power[~inband].sum() / weights[~inband].sum()
    noise_total = floor * weights.sum()
    signal = power[inband].sum() - floor * weights[inband].sum()
    return snr_from_powers(max(float(signal), 0.0), float(noise_total), SnrBasis.BAND_SPLIT)


def xcorr_lag(a, b, max_lag: int) -> int:
    """Lag in ``[-max_lag, max_lag]`` maximizing the normalized cross-correlation.

    Positive lag means ``b`` is delayed relative to ``a`` (``b[n] = a[n - lag]``).
    Ties go to the smaller ``|lag|``, then to the positive lag.
    """
    x, y = _samples(a), _samples(b)
    n = min(x.size, y.size)
    if not 0 <= max_lag < n:
        raise ValueError(f"max_lag must be in [0, {n})")
    x, y = x[:n], y[:n]
    norm = math.sqrt(float(np.dot(x, x)) * float(np.dot(y, y)))
    if norm == 0:
        return 0
    best_lag, best = 0, -math.inf
    for lag in sorted(range(-max_lag, max_lag + 1), key=lambda v: (abs(v), -v)):
        if lag >= 0:
            c = float(np.dot(x[:n - lag], y[lag:]))
        else:
            c = float(np.dot(x[-lag:], y[:n + lag]))
        c /= norm
        if c > best:
            best_lag, best = lag, c
    return best_lag


@dataclass(frozen=True)
class ConvergenceCurve:
    error_power: tuple[float, ...]
    # 1-based pulse number, None when the curve never settles
    converged_at: int | None


def convergence_curve(error_power: Sequence[float], tolerance: float = 0.1) -> ConvergenceCurve:
    """First pulse from which every later pulse stays within ``tolerance`` of the final one.

    The final pulse alone does not count: it must be confirmed by at least one
    earlier pulse inside the band, so a curve still moving at the end has no
    convergence point.
    """
    p = [float(v) for v in error_power]
    if len(p) < 2:
        raise ValueError("need at least two pulses")
    final = p[-1]
    if not math.isfinite(final):
        return ConvergenceCurve(tuple(p), None)
    band = tolerance * abs(final)
    start = len(p)
    for j in range(len(p) - 1, -1, -1):
        if math.isfinite(p[j]) and abs(p[j] - final) <= band:
            start = j
        else:
            break
    converged = start + 1 if start <= len(p) - 2 else None
    return ConvergenceCurve(tuple(p), converged)


def diverged(error_power: Sequence[float], factor: float = 10.0, within: int = 5) -> bool:
    """True if error power grows past ``factor`` times pulse 1 within ``within`` pulses.

    A non-finite power counts as divergence.
    """
    p = list(error_power)[:within]
    if not p:
        return False
    if not all(math.isfinite(v) for v in p):
        return True
    return max(p[1:], default=p[0]) > factor * p[0]
