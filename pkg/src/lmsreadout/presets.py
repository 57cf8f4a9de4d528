"""Embedded, versioned run configurations."""
from __future__ import annotations

from .chain import RunConfig
from .lms import LmsConfig
from .signal import ChannelModel, PulseSpec

# 30 MHz, 8 us pulse, sigma 1, mu 0.0006, 64 taps, 10 pulses at 491.52 MS/s
FIG4 = RunConfig(
    pulse=PulseSpec(carrier_freq=30e6, duration=8e-6, amplitude=1.8, envelope="rectangular",
                    noise_sigma=1.0, sample_rate=491.52e6, phase0=0.0),
    channel=ChannelModel(gain=1.0, delay=0, adc_quantize=True),
    lms=LmsConfig(taps=64, mu=0.0006, engine="float64", output_tap="e", weight_init="zeros"),
    pulses=10,
    seed=1,
    record=("x", "d", "y", "e"),
)

PRESETS = {
    "fig4": FIG4,
}
PRESET_VERSIONS = {
    "fig4": "fig4/v1",
}
# default sweep axes per preset
PRESET_GRIDS = {
    "fig4": {"noise_sigma": [0.5, 1.0, 2.0]},
}
