"""File formats: binary waveforms, CSV traces, JSON configs and reports.

Waveform file layout (all integers little-endian)::

    offset  size  field
    0       4     magic b"LMSW"
    4       2     version (u16) = 1
    6       4     sample_rate_hz (u32)
    10      1     sample_format_code (u8): 0 = float32, 1 = int16
    11      1     frac_bits (u8), 0 for float32
    12      4     frame_length (u32)
    16      4     frame_count (u32)
    20      ...   payload, frames back to back
"""
from __future__ import annotations

import json
import math
import os
import struct
import tempfile
from dataclasses import asdict, fields
from importlib import resources
from pathlib import Path
from typing import Iterable

import jsonschema
import numpy as np

from .arith import FixedConfig, QFormat, Rounding
from .chain import PulseRecord, RunConfig, RunReport, SyncConfig
from .lms import LmsConfig, Stability
from .signal import ChannelModel, ConfigError, Frame, PulseSpec

MAGIC = b"LMSW"
VERSION = 1
HEADER = struct.Struct("<4sHIBBII")
FLOAT32, INT16 = 0, 1
_SAMPLE_BYTES = {FLOAT32: 4, INT16: 2}


class WaveformFormatError(ValueError):
    pass


# --- atomic writes --------------------------------------------------------------

def atomic_write(path, data: bytes | str) -> None:
    """Write via a temp file in the same directory and rename into place."""
    path = Path(path)
    if isinstance(data, str):
        data = data.encode("utf-8")
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


# --- waveforms ------------------------------------------------------------------

def encode_waveform(frames: Iterable[Frame], sample_rate: float,
                    sample_format: int = FLOAT32, frac_bits: int = 0) -> bytes:
    frames = list(frames)
    rate = int(round(sample_rate))
    if rate != sample_rate or not 0 <= rate < 2 ** 32:
        raise ValueError(f"sample rate {sample_rate} is not a u32 integer")
    if sample_format not in _SAMPLE_BYTES:
        raise ValueError(f"unknown sample format code {sample_format}")
    lengths = {len(f) for f in frames}
    if len(lengths) > 1:
        raise ValueError(f"inconsistent frame lengths {sorted(lengths)}")
    length = lengths.pop() if lengths else 0
    if sample_format == FLOAT32:
        frac_bits = 0
        payload = b"".join(np.asarray(f.samples, dtype="<f4").tobytes() for f in frames)
    else:
        if not 0 <= frac_bits <= 15:
            raise ValueError("frac_bits must be in [0, 15] for int16 samples")
        fmt = QFormat(16, frac_bits)
        parts = []
        for f in frames:
            scaled = np.asarray(f.samples, dtype=np.float64) * 2.0 ** frac_bits
            codes = np.rint(scaled)
            if np.any(codes != scaled) or codes.min() < fmt.min_code or codes.max() > fmt.max_code:
                raise ValueError(
                    f"pulse {f.pulse_index} is not representable as int16 with "
                    f"{frac_bits} fraction bits")
            parts.append(codes.astype("<i2").tobytes())
        payload = b"".join(parts)
    header = HEADER.pack(MAGIC, VERSION, rate, sample_format, frac_bits, length, len(frames))
    return header + payload


def decode_waveform(data: bytes, start_index: int = 0) -> tuple[list[Frame], dict]:
    if len(data) < HEADER.size:
        raise WaveformFormatError(
            f"truncated header: expected {HEADER.size} bytes, found {len(data)}")
    magic, version, rate, code, frac, length, count = HEADER.unpack_from(data)
    if magic != MAGIC:
        raise WaveformFormatError(f"bad magic {magic!r} at byte offset 0, expected {MAGIC!r}")
    if version != VERSION:
        raise WaveformFormatError(f"unsupported version {version} at byte offset 4")
    if code not in _SAMPLE_BYTES:
        raise WaveformFormatError(f"unknown sample format code {code} at byte offset 10")
    expected = length * count * _SAMPLE_BYTES[code]
    actual = len(data) - HEADER.size
    if actual != expected:
        raise WaveformFormatError(
            f"payload at byte offset {HEADER.size}: expected {expected} bytes "
            f"({count} frames x {length} samples), found {actual}")
    dtype = "<f4" if code == FLOAT32 else "<i2"
    raw = np.frombuffer(data, dtype=dtype, offset=HEADER.size)
    values = raw.astype(np.float64)
    if code == INT16:
        values *= 2.0 ** -frac
    frames = [Frame(values[i * length:(i + 1) * length], start_index + i)
              for i in range(count)]
    meta = {"version": version, "sample_rate_hz": rate, "sample_format_code": code,
            "frac_bits": frac, "frame_length": length, "frame_count": count}
    return frames, meta


def write_waveform(path, frames: Iterable[Frame], sample_rate: float,
                   sample_format: int = FLOAT32, frac_bits: int = 0) -> None:
    atomic_write(path, encode_waveform(frames, sample_rate, sample_format, frac_bits))


def read_waveform(path, start_index: int = 0) -> tuple[list[Frame], dict]:
    """Frames and header fields; frames are numbered from ``start_index``."""
    return decode_waveform(Path(path).read_bytes(), start_index)


# --- CSV ------------------------------------------------------------------------

def export_csv(taps: dict[str, list[Frame]], columns: Iterable[str],
               sample_rate: float) -> str:
    """``sample_index,time_us,<columns>`` with frames of each tap concatenated."""
    columns = list(columns)
    if not columns:
        raise ValueError("no columns requested")
    unknown = [c for c in columns if c not in taps]
    if unknown:
        raise ValueError(f"unknown column(s) {unknown}; recorded: {sorted(taps)}")
    data = [np.concatenate([f.samples for f in taps[c]]) for c in columns]
    n = {d.size for d in data}
    if len(n) != 1:
        raise ValueError("columns have different lengths")
    lines = [",".join(["sample_index", "time_us", *columns])]
    for i in range(n.pop()):
        t = i * 1e6 / sample_rate
        lines.append(",".join([str(i), repr(t), *(repr(float(d[i])) for d in data)]))
    return "\n".join(lines) + "\n"


# --- JSON configs and reports ----------------------------------------------------

def load_schema(name: str) -> dict:
    text = resources.files("lmsreadout").joinpath("schemas", name).read_text()
    return json.loads(text)


def _qformat_to_dict(q: QFormat) -> dict:
    return {"total_bits": q.total_bits, "frac_bits": q.frac_bits}


def fixed_to_dict(c: FixedConfig) -> dict:
    return {
        "sample_format": _qformat_to_dict(c.sample_format),
        "weight_format": _qformat_to_dict(c.weight_format),
        "mu_format": _qformat_to_dict(c.mu_format),
        "accumulator_bits": c.accumulator_bits,
        "rounding": c.rounding.value,
        "product_bits": c.product_bits,
    }


def config_to_dict(cfg: RunConfig) -> dict:
    p = asdict(cfg.pulse)
    p["envelope"] = cfg.pulse.envelope.value
    lms = cfg.lms
    engine = {"fixed": fixed_to_dict(lms.engine)} if lms.is_fixed else "float64"
    init = lms.weight_init if isinstance(lms.weight_init, str) else {
        "explicit": list(lms.weight_init)}
    return {
        "pulse": p,
        "channel": {"gain": cfg.channel.gain, "delay": cfg.channel.delay,
                    "adc_quantize": cfg.channel.adc_quantize},
        "lms": {"taps": lms.taps, "mu": lms.mu, "engine": engine,
                "output_tap": lms.output_tap.value, "weight_init": init},
        "pulses": cfg.pulses,
        "seed": cfg.seed,
        "record": list(cfg.record),
        "sync": {"offset": cfg.sync.offset, "queue_cap": cfg.sync.queue_cap},
        "substream": cfg.substream,
    }


def _qformat(d: dict) -> QFormat:
    return QFormat(d["total_bits"], d["frac_bits"])


def _fixed(d: dict) -> FixedConfig:
    base = FixedConfig()
    return FixedConfig(
        sample_format=_qformat(d["sample_format"]) if "sample_format" in d else base.sample_format,
        weight_format=_qformat(d["weight_format"]) if "weight_format" in d else base.weight_format,
        mu_format=_qformat(d["mu_format"]) if "mu_format" in d else base.mu_format,
        accumulator_bits=d.get("accumulator_bits", base.accumulator_bits),
        rounding=Rounding(d.get("rounding", base.rounding)),
        product_bits=d.get("product_bits", base.product_bits),
    )


def config_from_dict(doc: dict) -> RunConfig:
    """Validate against the published schema and build a :class:`RunConfig`.

    Missing sections or fields take their defaults. Raises :class:`ConfigError`
    naming the offending field.
    """
    try:
        jsonschema.validate(doc, load_schema("run_config.schema.json"))
    except jsonschema.ValidationError as exc:
        where = ".".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigError(where, exc.message) from None
    try:
        lms = dict(doc.get("lms", {}))
        engine = lms.get("engine", "float64")
        if isinstance(engine, dict):
            lms["engine"] = _fixed(engine["fixed"])
        init = lms.get("weight_init")
        if isinstance(init, dict):
            lms["weight_init"] = tuple(init["explicit"])
        kwargs = dict(
            pulse=PulseSpec(**doc.get("pulse", {})),
            channel=ChannelModel(**doc.get("channel", {})),
            lms=LmsConfig(**lms),
            sync=SyncConfig(**doc.get("sync", {})),
        )
        for key in ("pulses", "seed", "substream"):
            if key in doc:
                kwargs[key] = doc[key]
        if "record" in doc:
            kwargs["record"] = tuple(doc["record"])
        return RunConfig(**kwargs)
    except ConfigError:
        raise
    except (ValueError, TypeError) as exc:
        raise ConfigError("<config>", str(exc)) from None


def load_config(path) -> dict:
    try:
        return json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(str(path), f"invalid JSON: {exc}") from None


def _num(v: float):
    """JSON has no inf/nan; those become the strings "inf", "-inf", "nan"."""
    if isinstance(v, float) and not math.isfinite(v):
        return "nan" if math.isnan(v) else ("inf" if v > 0 else "-inf")
    return v


def _unnum(v):
    return float(v) if v in ("inf", "-inf", "nan") else v


def report_to_dict(rep: RunReport) -> dict:
    return {
        "spec_version": rep.spec_version,
        "prng": rep.prng,
        "config": config_to_dict(rep.config),
        "stability": rep.stability.value,
        "input_power_estimate": rep.input_power_estimate,
        "converged_at": rep.converged_at,
        "records": [{k: _num(v) for k, v in asdict(r).items()} for r in rep.records],
    }


def report_from_dict(doc: dict) -> RunReport:
    jsonschema.validate(doc, load_schema("run_report.schema.json"))
    names = [f.name for f in fields(PulseRecord)]
    records = [PulseRecord(**{k: _unnum(r[k]) for k in names}) for r in doc["records"]]
    return RunReport(records=records, config=config_from_dict(doc["config"]),
                     stability=Stability(doc["stability"]),
                     input_power_estimate=doc["input_power_estimate"],
                     converged_at=doc["converged_at"],
                     spec_version=doc["spec_version"], prng=doc["prng"])


def dumps(doc) -> str:
    return json.dumps(doc, indent=2, allow_nan=False) + "\n"


def write_report(path, rep: RunReport) -> None:
    atomic_write(path, dumps(report_to_dict(rep)))


def read_report(path) -> RunReport:
    return report_from_dict(json.loads(Path(path).read_text()))

