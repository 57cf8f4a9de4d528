"""Mock readout pulses, frames, and the DAC->ADC loopback channel."""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from .arith import QFormat, Rounding, dequantize, quantize

DEFAULT_SAMPLE_RATE = 491.52e6
DEFAULT_SAMPLE_FORMAT = QFormat(16, 14)

# Noise for pulse k comes from Philox4x64-10 keyed by (seed, substream) with the
# high counter word set to k; numpy's ziggurat turns it into N(0, 1) draws.
PRNG_ID = "philox4x64-10/key=(seed,substream)/ctr[3]=pulse/numpy-ziggurat-normal"


class ConfigError(ValueError):
    """Invalid configuration value; ``field`` names the offending entry."""

    def __init__(self, field_name: str, message: str):
        super().__init__(f"{field_name}: {message}")
        self.field = field_name


class Envelope(str, enum.Enum):
    RECTANGULAR = "rectangular"
    FLAT_TOP_COSINE = "flat-top-cosine-ramp"


@dataclass(frozen=True)
class PulseSpec:
    carrier_freq: float = 30e6
    duration: float = 8e-6
    # 0.9 of the Q1.14 full scale
    amplitude: float = 1.8
    envelope: Envelope = Envelope.RECTANGULAR
    noise_sigma: float = 1.0
    sample_rate: float = DEFAULT_SAMPLE_RATE
    phase0: float = 0.0
    ramp_fraction: float = 0.1

    def __post_init__(self):
        object.__setattr__(self, "envelope", Envelope(self.envelope))
        if not (math.isfinite(self.sample_rate) and self.sample_rate > 0):
            raise ConfigError("pulse.sample_rate", "must be a positive number")
        if not 0 <= self.carrier_freq < self.sample_rate / 2:
            raise ConfigError("pulse.carrier_freq",
                              "must lie in [0, sample_rate/2) (Nyquist)")
        if not self.duration * self.sample_rate >= 1:
            raise ConfigError("pulse.duration", "shorter than one sample")
        if not self.amplitude >= 0:
            raise ConfigError("pulse.amplitude", "must be >= 0")
        if not self.noise_sigma >= 0:
            raise ConfigError("pulse.noise_sigma", "must be >= 0")
        if not 0 <= self.ramp_fraction <= 0.5:
            raise ConfigError("pulse.ramp_fraction", "must lie in [0, 0.5]")

    @property
    def length(self) -> int:
        # tolerate binary64 noise in duration*sample_rate (8e-6*491.52e6 = 3932.16)
        return int(math.floor(self.duration * self.sample_rate + 1e-9))


@dataclass(frozen=True, eq=False)
class Frame:
    """One pulse worth of samples; ``last`` is the end-of-frame marker.

    A frame with ``last=False`` is a partial transfer that a downstream
    synchronizer must join with following chunks.
    """

    samples: np.ndarray
    pulse_index: int = 0
    last: bool = True

    def __post_init__(self):
        s = np.asarray(self.samples)
        if s.ndim != 1 or s.size < 1:
            raise ValueError("frame needs at least one sample")
        s = s.copy()
        s.flags.writeable = False
        object.__setattr__(self, "samples", s)
        if self.pulse_index < 0:
            raise ValueError("pulse_index must be nonnegative")

    def __len__(self):
        return self.samples.size

    @property
    def tlast(self) -> np.ndarray:
        """Per-sample end-of-frame flags."""
        flags = np.zeros(len(self), dtype=bool)
        flags[-1] = self.last
        return flags

    def with_samples(self, samples) -> Frame:
        return Frame(samples, self.pulse_index, self.last)

    def __eq__(self, other):
        if not isinstance(other, Frame):
            return NotImplemented
        return (self.pulse_index == other.pulse_index and self.last == other.last
                and np.array_equal(self.samples, other.samples))


@dataclass(frozen=True)
class ChannelModel:
    gain: float = 1.0
    delay: int = 0
    adc_quantize: bool = True
    sample_format: QFormat = field(default=DEFAULT_SAMPLE_FORMAT, compare=False)

    def __post_init__(self):
        if not math.isfinite(self.gain):
            raise ConfigError("channel.gain", "must be finite")
        if self.delay < 0 or int(self.delay) != self.delay:
            raise ConfigError("channel.delay", "must be a nonnegative integer")


def envelope(spec: PulseSpec) -> np.ndarray:
    n = spec.length
    env = np.ones(n)
    if spec.envelope is Envelope.FLAT_TOP_COSINE:
        ramp = int(round(spec.ramp_fraction * n))
        if ramp > 0:
            t = (np.arange(ramp) + 0.5) / ramp
            rise = 0.5 - 0.5 * np.cos(np.pi * t)
            env[:ramp] = rise
            env[n - ramp:] = rise[::-1]
    return env


def clean_pulse(spec: PulseSpec) -> np.ndarray:
    n = np.arange(spec.length)
    phase = 2 * np.pi * spec.carrier_freq * n / spec.sample_rate + spec.phase0
    return spec.amplitude * envelope(spec) * np.sin(phase)


def noise_generator(seed: int, k: int, substream: int = 0) -> np.random.Generator:
    """Independent N(0,1) stream for pulse ``k`` of run ``(seed, substream)``."""
    mask = (1 << 64) - 1
    bitgen = np.random.Philox(
        key=np.array([seed & mask, substream & mask], dtype=np.uint64),
        counter=np.array([0, 0, 0, k & mask], dtype=np.uint64))
    return np.random.Generator(bitgen)


def generate_pulse(spec: PulseSpec, seed: int, k: int,
                   substream: int = 0) -> tuple[Frame, Frame]:
    """Return ``(clean, noisy)`` frames for pulse ``k``."""
    clean = clean_pulse(spec)
    if spec.noise_sigma == 0:
        noisy = clean
    else:
        g = noise_generator(seed, k, substream).standard_normal(clean.size)
        noisy = clean + spec.noise_sigma * g
    return Frame(clean, k), Frame(noisy, k)


def _channel_input(frame: Frame, ch: ChannelModel) -> np.ndarray:
    x = np.asarray(frame.samples, dtype=np.float64)
    out = np.zeros_like(x)
    if ch.delay < x.size:
        out[ch.delay:] = ch.gain * x[:x.size - ch.delay]
    return out


def apply_channel(frame: Frame, ch: ChannelModel) -> Frame:
    """Gain, integer delay (zero fill) and optional ADC quantization."""
    out = _channel_input(frame, ch)
    if ch.adc_quantize:
        fmt = ch.sample_format
        out = dequantize(quantize(out, fmt, Rounding.HALF_EVEN), fmt)
    return frame.with_samples(out)


def adc_clip_count(frame: Frame, ch: ChannelModel) -> int:
    """Samples the ADC would saturate when ``frame`` passes through ``ch``."""
    if not ch.adc_quantize:
        return 0
    fmt = ch.sample_format
    scaled = np.rint(_channel_input(frame, ch) * 2.0 ** fmt.frac_bits)
    return int(np.count_nonzero((scaled > fmt.max_code) | (scaled < fmt.min_code)))
