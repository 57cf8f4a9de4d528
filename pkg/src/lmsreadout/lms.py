"""Streaming LMS adaptive FIR filter over either arithmetic engine.

Per sample ``n`` (all taps updated simultaneously from the same delay line)::

    y[n] = sum_i w[i] * x[n-i]
    e[n] = d[n] - y[n]
    w[i] <- w[i] + mu * e[n] * x[n-i]
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .arith import FixedConfig, make_engine
from .signal import ConfigError, Frame


class OutputTap(str, enum.Enum):
    ERROR = "e"
    FIR = "y"


class Stability(str, enum.Enum):
    STABLE = "stable"
    MARGINAL = "marginal"
    UNSTABLE = "unstable"


class LengthMismatchError(ValueError):
    pass


@dataclass(frozen=True)
class LmsConfig:
    taps: int = 64
    mu: float = 0.0006
    engine: str | FixedConfig = "float64"
    output_tap: OutputTap = OutputTap.ERROR
    # "zeros", "impulse", or an explicit sequence of N weights
    weight_init: str | tuple = "zeros"

    def __post_init__(self):
        object.__setattr__(self, "output_tap", OutputTap(self.output_tap))
        if self.engine == "fixed":
            object.__setattr__(self, "engine", FixedConfig())
        elif not (self.engine == "float64" or isinstance(self.engine, FixedConfig)):
            raise ConfigError("lms.engine", f"unknown engine {self.engine!r}")
        if not (isinstance(self.taps, int) and self.taps >= 1):
            raise ConfigError("lms.taps", "must be an integer >= 1")
        if not (math.isfinite(self.mu) and self.mu > 0):
            raise ConfigError("lms.mu", f"must be > 0, got {self.mu}")
        if isinstance(self.weight_init, str):
            if self.weight_init not in ("zeros", "impulse"):
                raise ConfigError("lms.weight_init", f"unknown init {self.weight_init!r}")
        else:
            w = tuple(float(v) for v in self.weight_init)
            if len(w) != self.taps:
                raise ConfigError("lms.weight_init",
                                  f"explicit vector has {len(w)} entries, taps={self.taps}")
            object.__setattr__(self, "weight_init", w)

    @property
    def is_fixed(self) -> bool:
        return isinstance(self.engine, FixedConfig)

    def initial_weights(self) -> np.ndarray:
        if self.weight_init == "zeros":
            return np.zeros(self.taps)
        if self.weight_init == "impulse":
            w = np.zeros(self.taps)
            w[0] = 1.0
            return w
        return np.array(self.weight_init, dtype=np.float64)


@dataclass
class LmsState:
    """Weights and delay line in engine-native representation."""

    weights: np.ndarray
    delay_line: np.ndarray
    samples_seen: int = 0

    def copy(self) -> LmsState:
        return LmsState(self.weights.copy(), self.delay_line.copy(), self.samples_seen)


class FrameStats(NamedTuple):
    samples: int
    error_power: float
    weight_l2_norm: float


class FrameResult(NamedTuple):
    out: Frame
    e: Frame
    y: Frame
    stats: FrameStats


@dataclass
class LmsFilter:
    """One stream's filter: config, engine and mutable state.

    ``mu`` overrides ``cfg.mu`` and may be 0 (frozen weights); public configs
    reject mu <= 0.
    """

    cfg: LmsConfig
    mu: float | None = None
    state: LmsState = field(default=None)

    def __post_init__(self):
        self.engine = make_engine(self.cfg.engine)
        if self.mu is None:
            self.mu = self.cfg.mu
        self._mu = self.engine.encode_mu(self.mu)
        if self.state is None:
            self.reset()

    def reset(self) -> None:
        e = self.engine
        self.state = LmsState(
            e.encode_weights(self.cfg.initial_weights()),
            np.zeros(self.cfg.taps, dtype=e.dtype), 0)

    @property
    def weights(self) -> np.ndarray:
        """Current weights as real values."""
        return self.engine.decode_weights(self.state.weights)

    # --- per-sample operations (real-valued interface) ---

    def fir_step(self, x_n: float) -> float:
        code = self._push(self.engine.encode_scalar(x_n))
        return self.engine.decode_scalar(code)

    def error_step(self, d_n: float, y_n: float) -> float:
        e = self.engine
        code = e.error(e.encode_scalar(d_n), e.encode_scalar(y_n))
        return e.decode_scalar(code)

    def update_weights(self, e_n: float) -> None:
        self._update(self.engine.encode_scalar(e_n))

    def step(self, x_n: float, d_n: float) -> tuple[float, float]:
        """fir -> error -> update for one sample; returns ``(y, e)``."""
        e = self.engine
        y = self._push(e.encode_scalar(x_n))
        err = e.error(e.encode_scalar(d_n), y)
        self._update(err)
        return e.decode_scalar(y), e.decode_scalar(err)

    def _push(self, x_code):
        st = self.state
        dl = st.delay_line
        dl[1:] = dl[:-1]
        dl[0] = x_code
        st.samples_seen += 1
        return self.engine.fir(st.weights, dl)

    def _update(self, e_code) -> None:
        st = self.state
        self.engine.update(st.weights, st.delay_line, e_code, self._mu)

    # --- frame processing ---

    def process_frame(self, x_frame: Frame, d_frame: Frame) -> FrameResult:
        """Run one frame through the filter.

        ``out`` is the configured output tap (e by default).

        State carries over between calls: consecutive frames form one stream.
        """
        if len(x_frame) != len(d_frame):
            raise LengthMismatchError(
                f"x frame has {len(x_frame)} samples, d frame has {len(d_frame)}")
        eng = self.engine
        xs = eng.encode(x_frame.samples)
        ds = eng.encode(d_frame.samples)
        L = xs.size
        ys = np.empty(L, dtype=eng.dtype)
        es = np.empty(L, dtype=eng.dtype)
        st = self.state
        w, dl, mu = st.weights, st.delay_line, self._mu
        fir, error, update = eng.fir, eng.error, eng.update
        with np.errstate(over="ignore", invalid="ignore"):
            for n in range(L):
                dl[1:] = dl[:-1]
                dl[0] = xs[n]
                y = fir(w, dl)
                err = error(ds[n], y)
                update(w, dl, err, mu)
                ys[n] = y
                es[n] = err
        st.samples_seen += L
        e_vals = eng.decode(es)
        y_vals = eng.decode(ys)
        with np.errstate(over="ignore", invalid="ignore"):
            stats = FrameStats(L, float(np.mean(e_vals ** 2)),
                               float(np.linalg.norm(self.weights)))
        e_frame = Frame(e_vals, x_frame.pulse_index)
        y_frame = Frame(y_vals, x_frame.pulse_index)
        out = e_frame if self.cfg.output_tap is OutputTap.ERROR else y_frame
        return FrameResult(out, e_frame, y_frame, stats)


def check_stability(cfg: LmsConfig, input_power_estimate: float) -> Stability:
    """Advisory against the ``mu < 2 / (N * Px)`` step-size bound (10% margin)."""
    if not input_power_estimate > 0:
        raise ValueError("input_power_estimate must be > 0")
    bound = 2.0 / (cfg.taps * input_power_estimate)
    if cfg.mu >= bound:
        return Stability.UNSTABLE
    if cfg.mu >= 0.9 * bound:
        return Stability.MARGINAL
    return Stability.STABLE


def stability_bound(taps: int, input_power_estimate: float) -> float:
    return 2.0 / (taps * input_power_estimate)
