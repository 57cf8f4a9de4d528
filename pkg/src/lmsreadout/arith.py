"""Arithmetic engines for the LMS datapath.

Two engines share one contract (``encode``/``decode``/``fir``/``error``/
``update``): :class:`FloatEngine` works in binary64, :class:`FixedEngine`
models a saturating fixed-point DSP datapath. Fixed-point values are carried
as integer codes, ``value = code / 2**frac_bits``.
"""
from __future__ import annotations

import enum
import re
from dataclasses import dataclass

import numpy as np


class Rounding(str, enum.Enum):
    TRUNCATE = "truncate"
    HALF_EVEN = "round-half-even"


@dataclass(frozen=True)
class QFormat:
    """Signed two's complement fixed-point format."""

    total_bits: int
    frac_bits: int

    def __post_init__(self):
        if not 2 <= self.total_bits <= 48:
            raise ValueError(f"total_bits must be in [2, 48], got {self.total_bits}")
        if not 0 <= self.frac_bits < self.total_bits:
            raise ValueError(
                f"frac_bits must be in [0, total_bits), got {self.frac_bits}")

    @classmethod
    def parse(cls, text: str) -> QFormat:
        """Parse ``"Qm.f"`` notation (m integer bits, sign bit implied)."""
        m = re.fullmatch(r"Q(\d+)\.(\d+)", text.strip())
        if not m:
            raise ValueError(f"not a Q format: {text!r}")
        int_bits, frac = int(m.group(1)), int(m.group(2))
        return cls(int_bits + frac + 1, frac)

    @property
    def int_bits(self) -> int:
        return self.total_bits - 1 - self.frac_bits

    @property
    def min_code(self) -> int:
        return -(1 << (self.total_bits - 1))

    @property
    def max_code(self) -> int:
        return (1 << (self.total_bits - 1)) - 1

    @property
    def lsb(self) -> float:
        return 2.0 ** -self.frac_bits

    @property
    def min_value(self) -> float:
        return self.min_code * self.lsb

    @property
    def max_value(self) -> float:
        return self.max_code * self.lsb

    def __str__(self):
        return f"Q{self.int_bits}.{self.frac_bits}"


@dataclass(frozen=True)
class FixedConfig:
    sample_format: QFormat = QFormat(16, 14)
    weight_format: QFormat = QFormat(18, 15)
    mu_format: QFormat = QFormat(18, 17)
    accumulator_bits: int = 48
    rounding: Rounding = Rounding.HALF_EVEN
    # width of the register holding x*e between the two multiplies
    product_bits: int = 27

    def __post_init__(self):
        object.__setattr__(self, "rounding", Rounding(self.rounding))
        need = self.sample_format.total_bits + self.weight_format.total_bits
        if self.accumulator_bits < need:
            raise ValueError(
                f"accumulator_bits={self.accumulator_bits} is narrower than the "
                f"{need}-bit sample*weight product")
        if self.product_bits < 2 * self.sample_format.int_bits + 2:
            raise ValueError("product_bits too narrow for the x*e product")

    @property
    def acc_max(self) -> int:
        return (1 << (self.accumulator_bits - 1)) - 1

    @property
    def product_format(self) -> QFormat:
        """Intermediate format for x*e: full integer range, as many fraction
        bits as fit in ``product_bits`` (never more than the exact product has)."""
        int_bits = 2 * self.sample_format.int_bits + 1
        frac = min(self.product_bits - 1 - int_bits, 2 * self.sample_format.frac_bits)
        return QFormat(int_bits + frac + 1, frac)


# --- scalar / array primitives ------------------------------------------------

def saturate(code, fmt: QFormat):
    """Clip integer code(s) to the range of ``fmt``."""
    if isinstance(code, np.ndarray):
        return np.clip(code, fmt.min_code, fmt.max_code)
    return min(max(int(code), fmt.min_code), fmt.max_code)


def round_shift(v, shift: int, rounding: Rounding):
    """Divide integer(s) by ``2**shift`` with the given rounding (exact integer math).

    Negative ``shift`` is an exact left shift. Truncation rounds toward
    minus infinity, like an arithmetic right shift in hardware.
    """
    if shift <= 0:
        return v << -shift
    q = v >> shift
    if Rounding(rounding) is Rounding.TRUNCATE:
        return q
    r = v - (q << shift)
    half = 1 << (shift - 1)
    if isinstance(v, np.ndarray):
        return q + ((r > half) | ((r == half) & ((q & 1) == 1)))
    return q + (r > half or (r == half and q & 1 == 1))


def quantize(v, fmt: QFormat, rounding: Rounding = Rounding.HALF_EVEN):
    """Nearest code(s) of ``fmt`` for real value(s) ``v``, saturated to range."""
    scaled = np.asarray(v, dtype=np.float64) * (2.0 ** fmt.frac_bits)
    if Rounding(rounding) is Rounding.TRUNCATE:
        r = np.floor(scaled)
    else:
        r = np.rint(scaled)  # ties to even
    r = np.clip(r, fmt.min_code, fmt.max_code)
    if r.ndim == 0:
        return int(r)
    return r.astype(np.int64)


def dequantize(code, fmt: QFormat):
    if isinstance(code, np.ndarray):
        return code.astype(np.float64) * fmt.lsb
    return float(code) * fmt.lsb


def sat_mul_acc(acc: int, a: int, b: int, accumulator_bits: int = 48) -> int:
    """``clip(acc + a*b)`` at +-(2**(accumulator_bits-1) - 1)."""
    lim = (1 << (accumulator_bits - 1)) - 1
    return min(max(acc + a * b, -lim), lim)


def requantize(acc, src_frac: int, dst: QFormat,
               rounding: Rounding = Rounding.HALF_EVEN):
    """Move an integer with ``src_frac`` fraction bits into ``dst`` (round + saturate)."""
    return saturate(round_shift(acc, src_frac - dst.frac_bits, rounding), dst)


# --- engines ------------------------------------------------------------------

class FloatEngine:
    """binary64 reference arithmetic."""

    name = "float64"
    dtype = np.float64

    def encode(self, values) -> np.ndarray:
        return np.asarray(values, dtype=np.float64).copy()

    def encode_scalar(self, v) -> float:
        return float(v)

    def decode(self, codes) -> np.ndarray:
        return np.asarray(codes, dtype=np.float64)

    def decode_scalar(self, c) -> float:
        return float(c)

    def encode_mu(self, mu: float) -> float:
        return float(mu)

    def encode_weights(self, values) -> np.ndarray:
        return self.encode(values)

    def decode_weights(self, w) -> np.ndarray:
        return np.array(w, dtype=np.float64)

    def fir(self, w, dl) -> float:
        return float(np.dot(w, dl))

    def error(self, d, y) -> float:
        return d - y

    def update(self, w, dl, e, mu) -> None:
        w += (mu * e) * dl


class FixedEngine:
    """Saturating fixed-point datapath.

    FIR: products accumulate tap by tap in a ``accumulator_bits`` register with
    saturation, then requantize to the sample format. Weight update follows the
    pipeline x*e -> product register -> *mu -> saturating add into the weight.
    """

    name = "fixed"

    def __init__(self, cfg: FixedConfig | None = None):
        self.cfg = cfg or FixedConfig()
        c = self.cfg
        self.sf, self.wf, self.mf, self.pf = (
            c.sample_format, c.weight_format, c.mu_format, c.product_format)
        self.rounding = c.rounding
        self._acc_max = c.acc_max
        # int64 is exact as long as no intermediate can exceed 62 bits
        self._p_shift = 2 * self.sf.frac_bits - self.pf.frac_bits
        self._u_shift = self.pf.frac_bits + self.mf.frac_bits - self.wf.frac_bits
        fits = (self.sf.total_bits + self.wf.total_bits + 16 <= 62
                and 2 * self.sf.total_bits <= 62
                and self.pf.total_bits + self.mf.total_bits <= 62)
        self.dtype = np.int64 if fits else object

    def encode(self, values) -> np.ndarray:
        codes = quantize(np.atleast_1d(values), self.sf, self.rounding)
        return codes.astype(self.dtype)

    def encode_scalar(self, v) -> int:
        return quantize(float(v), self.sf, self.rounding)

    def decode(self, codes) -> np.ndarray:
        return np.asarray(codes).astype(np.float64) * self.sf.lsb

    def decode_scalar(self, c) -> float:
        return float(c) * self.sf.lsb

    def encode_mu(self, mu: float) -> int:
        return quantize(float(mu), self.mf, self.rounding)

    def encode_weights(self, values) -> np.ndarray:
        return quantize(np.atleast_1d(values), self.wf, self.rounding).astype(self.dtype)

    def decode_weights(self, w) -> np.ndarray:
        return np.asarray(w).astype(np.float64) * self.wf.lsb

    def accumulate(self, products) -> int:
        """Saturating sum in tap order; vectorized when no partial sum clips."""
        partial = np.cumsum(products)
        if self.dtype is np.int64 and np.abs(partial).max(initial=0) <= self._acc_max:
            return int(partial[-1])
        acc = 0
        for p in products:
            acc = min(max(acc + int(p), -self._acc_max), self._acc_max)
        return acc

    def fir(self, w, dl) -> int:
        acc = self.accumulate(w * dl)
        return requantize(acc, self.sf.frac_bits + self.wf.frac_bits, self.sf,
                          self.rounding)

    def error(self, d, y) -> int:
        return saturate(d - y, self.sf)

    def update(self, w, dl, e, mu) -> None:
        p = saturate(round_shift(dl * e, self._p_shift, self.rounding), self.pf)
        u = round_shift(p * mu, self._u_shift, self.rounding)
        w[:] = saturate(w + u, self.wf)


def make_engine(engine):
    """Engine from ``"float64"``, ``"fixed"``, a :class:`FixedConfig` or an engine."""
    if isinstance(engine, (FloatEngine, FixedEngine)):
        return engine
    if isinstance(engine, FixedConfig):
        return FixedEngine(engine)
    if engine in ("float64", "float", None):
        return FloatEngine()
    if engine == "fixed":
        return FixedEngine()
    raise ValueError(f"unknown engine {engine!r}")
