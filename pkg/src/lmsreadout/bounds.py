"""Bound on how far the fixed-point error output may stray from binary64.

The bound is computed from binary64 quantities only (it never runs the fixed
engine). For round-half-even datapaths the weight deviation
``dw = w_fixed - w_float`` obeys, to first order,

    dw' = (I - mu_q x x^T) dw + (mu_q - mu) e x - mu_q s x + r

where ``s`` is the amount by which saturating ``y`` and ``e`` to the sample
format changes ``e`` and ``r`` collects the rounding of each update. The
deterministic forcing terms are propagated exactly along the float trajectory.
The rounding terms are zero-mean; their steady-state output spread is

    sigma_y**2 = (N * q_u**2 / 12 + mu_q**2 * N * Px * q_s**2 / 6) / (2 * mu_q)

and the per-sample envelope is

    eps[n] = |s[n]| + |x[n]^T dw[n]| + q_s + K * sigma_y

(``q_s`` covers the rounding of d and of y itself). A strict worst-case
interval bound is useless here: with adversarially aligned roundings it
exceeds the sample format range within a few hundred samples.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .arith import FixedConfig, Rounding, dequantize, quantize
from .chain import RunConfig
from .ensemble import EnsembleAverage
from .signal import apply_channel, generate_pulse

SIGMA_MULTIPLE = 6.0


@dataclass
class DeviationBound:
    envelope: list[np.ndarray]  # per pulse, per sample
    sigma_random: float
    e_float: list[np.ndarray]

    @property
    def eps_total(self) -> float:
        return float(max(env.max() for env in self.envelope))


def engine_deviation_bound(config: RunConfig, fixed: FixedConfig | None = None,
                           k_sigma: float = SIGMA_MULTIPLE) -> DeviationBound:
    """Envelope for ``|e_fixed - e_float|`` of ``config`` run on both engines."""
    fixed = fixed or (config.lms.engine if config.lms.is_fixed else FixedConfig())
    if fixed.rounding is not Rounding.HALF_EVEN:
        raise ValueError("bound model assumes round-half-even (zero-mean rounding)")
    if config.sync.offset != 0:
        raise ValueError("bound model assumes sync offset 0")
    sf, wf, mf = fixed.sample_format, fixed.weight_format, fixed.mu_format
    pf = fixed.product_format
    cfg = replace(config, lms=replace(config.lms, engine=fixed))
    N = cfg.lms.taps
    mu = cfg.lms.mu
    mu_q = dequantize(quantize(mu, mf), mf)
    lo, hi = sf.min_value, sf.max_value
    q_s, q_w = sf.lsb, wf.lsb

    w = cfg.lms.initial_weights()
    w_q = dequantize(quantize(w, wf), wf)
    dw = w_q - w
    dl = np.zeros(N)
    ens = EnsembleAverage()
    envelope, e_float = [], []
    sigma = None
    for k in range(cfg.pulses):
        _, noisy = generate_pulse(cfg.pulse, cfg.seed, k, cfg.substream)
        x_frame = apply_channel(noisy, cfg.channel)
        x = x_frame.samples
        d = ens.absorb(x_frame).samples
        if sigma is None:
            p_x = float(np.mean(x ** 2))
            var_u = q_w ** 2 / 12 + (mu_q * pf.lsb) ** 2 / 12
            rate = N * var_u + mu_q ** 2 * N * p_x * q_s ** 2 / 6
            sigma = math.sqrt(rate / (2 * mu_q))
        env = np.empty(x.size)
        ef_all = np.empty(x.size)
        for n in range(x.size):
            dl[1:] = dl[:-1]
            dl[0] = x[n]
            y = float(np.dot(w, dl))
            ef = d[n] - y
            e_sat = min(max(d[n] - min(max(y, lo), hi), lo), hi)
            s = ef - e_sat
            xdw = float(np.dot(dl, dw))
            env[n] = abs(s) + abs(xdw) + q_s + k_sigma * sigma
            dw += ((mu_q - mu) * ef - mu_q * (s + xdw)) * dl
            w += (mu * ef) * dl
            ef_all[n] = ef
        envelope.append(env)
        e_float.append(ef_all)
    return DeviationBound(envelope, sigma, e_float)
