"""End-to-end readout chain: source -> channel -> ensemble -> sync -> LMS -> metrics."""
from __future__ import annotations

import hashlib
import itertools
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .arith import FixedConfig, dequantize, quantize
from .ensemble import EnsembleAverage
from .lms import LmsConfig, LmsFilter, LmsState, Stability, check_stability
from .metrics import convergence_curve, diverged, snr_band_split, snr_vs_reference, xcorr_lag
from .signal import (PRNG_ID, ChannelModel, ConfigError, Frame, PulseSpec, adc_clip_count,
                     apply_channel, generate_pulse)
from .sync import FrameQueuePair, GroupDelay

log = logging.getLogger(__name__)

SPEC_VERSION = "lmsreadout-run/1"
TAPS = ("x", "d", "y", "e", "w")
XCORR_MAX_LAG = 64


@dataclass(frozen=True)
class SyncConfig:
    offset: int = 0
    queue_cap: int | None = 16


@dataclass(frozen=True)
class RunConfig:
    pulse: PulseSpec = field(default_factory=PulseSpec)
    channel: ChannelModel = field(default_factory=ChannelModel)
    lms: LmsConfig = field(default_factory=LmsConfig)
    pulses: int = 10
    seed: int = 1
    record: tuple[str, ...] = ("x", "e")
    sync: SyncConfig = field(default_factory=SyncConfig)
    # extra PRNG key word; sweeps give each grid point its own substream
    substream: int = 0

    def __post_init__(self):
        if not (isinstance(self.pulses, int) and self.pulses >= 1):
            raise ConfigError("pulses", "must be an integer >= 1")
        if not (isinstance(self.seed, int) and 0 <= self.seed < 2 ** 64):
            raise ConfigError("seed", "must be an unsigned 64-bit integer")
        rec = tuple(dict.fromkeys(self.record))
        bad = [t for t in rec if t not in TAPS]
        if bad:
            raise ConfigError("record", f"unknown taps {bad}; allowed {list(TAPS)}")
        object.__setattr__(self, "record", rec)
        fmt = self.sample_format
        if self.channel.sample_format != fmt:
            object.__setattr__(self, "channel", replace(self.channel, sample_format=fmt))
        if self.pulse.amplitude > fmt.max_value:
            raise ConfigError("pulse.amplitude",
                              f"exceeds the sample format maximum {fmt.max_value}")
        if abs(self.sync.offset) >= self.pulse.length:
            raise ConfigError("sync.offset", "must be smaller than the frame length")

    @property
    def sample_format(self):
        eng = self.lms.engine
        return eng.sample_format if isinstance(eng, FixedConfig) else FixedConfig().sample_format


@dataclass
class PulseRecord:
    pulse_index: int
    error_power: float
    output_snr_db: float
    input_snr_db: float
    xcorr_lag_samples: int
    saturation_count: int
    weight_l2_norm: float
    output_snr_band_split_db: float
    weight_digest: str


@dataclass
class RunReport:
    records: list[PulseRecord]
    config: RunConfig
    stability: Stability
    input_power_estimate: float
    converged_at: int | None
    spec_version: str = SPEC_VERSION
    prng: str = PRNG_ID

    @property
    def error_power(self) -> list[float]:
        return [r.error_power for r in self.records]


@dataclass
class ChainState:
    """Everything that persists between pulses; export/import continues a run."""

    next_pulse: int = 0
    weights: np.ndarray | None = None
    delay_line: np.ndarray | None = None
    samples_seen: int = 0
    ensemble_d: np.ndarray | None = None
    ensemble_k: int = 0
    sync_carry: np.ndarray | None = None
    input_power_estimate: float | None = None


@dataclass
class RunResult:
    report: RunReport
    waveforms: dict[str, list[Frame]]
    clean: Frame
    state: ChainState


def _digest(weights: np.ndarray) -> str:
    arr = np.ascontiguousarray(weights)
    if arr.dtype == object:
        arr = arr.astype(np.int64)
    return hashlib.sha256(arr.astype(arr.dtype.newbyteorder("<")).tobytes()).hexdigest()[:16]


def run(config: RunConfig, resume: ChainState | None = None) -> RunResult:
    """Execute ``config.pulses`` pulses; LMS, ensemble and sync state persist across them.

    Passing the ``state`` of a previous result continues that stream with the
    following pulse indices.
    """
    cfg = config
    spec = cfg.pulse
    L = spec.length
    lms = LmsFilter(cfg.lms)
    ens = EnsembleAverage()
    queues = FrameQueuePair(cap=cfg.sync.queue_cap)
    delay = GroupDelay(cfg.sync.offset, L)
    k0, p_hat = 0, None
    if resume is not None:
        k0 = resume.next_pulse
        if resume.weights is not None:
            lms.state = LmsState(resume.weights.astype(lms.engine.dtype),
                                 resume.delay_line.astype(lms.engine.dtype),
                                 resume.samples_seen)
        if resume.ensemble_k:
            ens = EnsembleAverage(resume.ensemble_d, resume.ensemble_k)
        if resume.sync_carry is not None:
            delay._carry = resume.sync_carry.copy()
        p_hat = resume.input_power_estimate

    record = set(cfg.record)
    waves: dict[str, list[Frame]] = {t: [] for t in cfg.record}
    records = []
    clean = None
    fmt = cfg.sample_format
    half_width = 4.0 / spec.duration
    for k in range(k0, k0 + cfg.pulses):
        clean, noisy = generate_pulse(spec, cfg.seed, k, cfg.substream)
        x = apply_channel(noisy, cfg.channel)
        clipped = adc_clip_count(noisy, cfg.channel)
        if p_hat is None:
            p_hat = float(np.mean(x.samples ** 2)) or 1.0
        d = ens.absorb(x)
        # emitted d is rounded to the sample format before entering a fixed datapath
        if cfg.lms.is_fixed:
            d = d.with_samples(dequantize(quantize(d.samples, fmt), fmt))
        # the FIR input x travels on the y side of the synchronizer
        pairs = queues.push_d(d) + queues.push_y(x)
        for pair in pairs:
            d_al, x_al = delay.apply(pair)
            res = lms.process_frame(x_al, d_al)
            w_now = lms.weights
            with np.errstate(over="ignore", invalid="ignore"):
                out_snr = snr_vs_reference(res.out, clean).snr_db
                band_snr = snr_band_split(res.out, spec.sample_rate, spec.carrier_freq,
                                          half_width).snr_db
                lag = (xcorr_lag(x_al, res.out, min(XCORR_MAX_LAG, L - 1))
                       if np.all(np.isfinite(res.out.samples)) else 0)
            records.append(PulseRecord(
                pulse_index=k,
                error_power=res.stats.error_power,
                output_snr_db=out_snr,
                input_snr_db=snr_vs_reference(x_al, clean).snr_db,
                xcorr_lag_samples=lag,
                saturation_count=clipped,
                weight_l2_norm=res.stats.weight_l2_norm,
                output_snr_band_split_db=band_snr,
                weight_digest=_digest(lms.state.weights),
            ))
            taps = {"x": x_al, "d": d_al, "y": res.y, "e": res.e,
                    "w": Frame(w_now, k)}
            for t in record:
                waves[t].append(taps[t])

    powers = [r.error_power for r in records]
    report = RunReport(
        records=records,
        config=cfg,
        stability=check_stability(cfg.lms, p_hat),
        input_power_estimate=p_hat,
        converged_at=convergence_curve(powers).converged_at if len(powers) >= 2 else None,
    )
    st = lms.state
    state = ChainState(
        next_pulse=k0 + cfg.pulses,
        weights=st.weights.copy(), delay_line=st.delay_line.copy(),
        samples_seen=st.samples_seen,
        ensemble_d=None if ens.d is None else ens.d.copy(), ensemble_k=ens.k,
        sync_carry=delay._carry.copy(), input_power_estimate=p_hat)
    return RunResult(report, waves, clean, state)


# --- sweeps -----------------------------------------------------------------

@dataclass
class SweepRow:
    mu: float
    taps: int
    noise_sigma: float
    stability: str | None = None
    diverged: bool | None = None
    final_error_power: float | None = None
    converged_at: int | None = None
    input_power_estimate: float | None = None
    error: str | None = None


def _sweep_point(args) -> SweepRow:
    base, idx, mu, taps, sigma = args
    row = SweepRow(mu, taps, sigma)
    try:
        cfg = replace(base,
                      lms=replace(base.lms, mu=mu, taps=taps,
                                  weight_init=base.lms.weight_init
                                  if isinstance(base.lms.weight_init, str) else "zeros"),
                      pulse=replace(base.pulse, noise_sigma=sigma),
                      record=(), substream=base.substream + idx)
        rep = run(cfg).report
        p = rep.error_power
        row.stability = rep.stability.value
        row.diverged = diverged(p)
        row.final_error_power = p[-1]
        row.converged_at = rep.converged_at
        row.input_power_estimate = rep.input_power_estimate
    except Exception as exc:  # recorded per point; the sweep carries on
        log.warning("sweep point mu=%g taps=%d sigma=%g failed: %s", mu, taps, sigma, exc)
        row.error = f"{type(exc).__name__}: {exc}"
    return row


def sweep(base: RunConfig, mu=None, taps=None, noise_sigma=None, jobs: int = 1) -> list[SweepRow]:
    """One independent run per grid point (Cartesian product of the given axes).

    Point ``i`` uses PRNG substream ``base.substream + i``, so point 0 of a
    grid built from the base values reproduces ``run(base)``.
    """
    mus = list(mu) if mu is not None else [base.lms.mu]
    tapss = list(taps) if taps is not None else [base.lms.taps]
    sigmas = list(noise_sigma) if noise_sigma is not None else [base.pulse.noise_sigma]
    grid = list(itertools.product(mus, tapss, sigmas))
    if not grid:
        raise ValueError("empty sweep grid")
    points = [(base, i, float(m), int(t), float(s)) for i, (m, t, s) in enumerate(grid)]
    if jobs > 1 and len(points) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(_sweep_point, points))
    return [_sweep_point(p) for p in points]


# --- LMS versus post-processing averaging -------------------------------------

@dataclass
class PostprocComparison:
    pulses: int
    output_tap: str
    lms_output_snr_db: list[float]
    lms_e_snr_db: list[float]
    lms_y_snr_db: list[float]
    ensemble_snr_db: list[float]
    single_shot_snr_db: list[float]


def compare_to_postprocessing(config: RunConfig, pulses: int | None = None) -> PostprocComparison:
    """Per-pulse SNR (vs the clean pulse) of the live LMS taps and of the running average."""
    K = config.pulses if pulses is None else pulses
    if K < 2:
        raise ConfigError("pulses", "comparison needs at least 2 pulses")
    cfg = replace(config, pulses=K, record=("x", "d", "y", "e"))
    res = run(cfg)
    clean = res.clean
    snr = lambda frames: [snr_vs_reference(f, clean).snr_db for f in frames]
    e_snr, y_snr = snr(res.waveforms["e"]), snr(res.waveforms["y"])
    return PostprocComparison(
        pulses=K,
        output_tap=cfg.lms.output_tap.value,
        lms_output_snr_db=e_snr if cfg.lms.output_tap.value == "e" else y_snr,
        lms_e_snr_db=e_snr,
        lms_y_snr_db=y_snr,
        ensemble_snr_db=snr(res.waveforms["d"]),
        single_shot_snr_db=snr(res.waveforms["x"]),
    )
