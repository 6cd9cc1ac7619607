"""Bistatic propagation and impairment model.

The receive signal is the sum of a main path and weaker secondary paths,
each with its own complex gain, delay and Doppler shift. On top of that the
receiver experiences a sample-time offset, carrier frequency/phase offsets,
a normalized sampling frequency offset (clock ratio mismatch) and AWGN.
Time origin for all phasors is n*T_s counted from the first transmitted
sample; the receiver only learns this origin through synchronization.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .dsp import fractional_delay, require_finite, resample_arbitrary
from .txframe import IqStream

SFO_BOUND = 1e-3  # sanity bound, far above any realistic clock error


class ScenarioError(ValueError):
    """Raised for inconsistent channel scenarios."""


@dataclass(frozen=True)
class PropagationPath:
    gain: complex
    delay_s: float
    doppler_hz: float
    is_main: bool = False


@dataclass(frozen=True)
class ImpairmentSet:
    sto_s: float = 0.0
    cfo_hz: float = 0.0
    cpo_rad: float = 0.0
    sfo_norm: float = 0.0
    snr_db: float | None = None  # None = noiseless
    noise_seed: int = 0

    def __post_init__(self):
        if abs(self.sfo_norm) >= SFO_BOUND:
            raise ScenarioError(f"|sfo_norm| must be below {SFO_BOUND}")


@dataclass(frozen=True)
class ChannelScenario:
    paths: tuple[PropagationPath, ...]
    impairments: ImpairmentSet = field(default_factory=ImpairmentSet)

    def __post_init__(self):
        if not self.paths:
            raise ScenarioError("scenario needs at least one path")
        mains = [p for p in self.paths if p.is_main]
        if len(mains) != 1:
            raise ScenarioError("scenario needs exactly one main path")
        main = mains[0]
        for p in self.paths:
            if p.delay_s < 0:
                raise ScenarioError("path delays must be non-negative")
            if not p.is_main and abs(p.gain) >= abs(main.gain):
                raise ScenarioError("secondary paths must be weaker than the main path")

    @property
    def main_path(self) -> PropagationPath:
        return next(p for p in self.paths if p.is_main)


def apply_paths_and_cfo(x: IqStream, scenario: ChannelScenario) -> IqStream:
    """Multipath sum with per-path delay/Doppler, then common CFO/CPO phasor."""
    require_finite(x.samples, "transmit stream")
    imp = scenario.impairments
    fs = x.nominal_rate
    ts = 1.0 / fs

    max_delay = max(p.delay_s for p in scenario.paths) + max(imp.sto_s, 0.0)
    out_len = x.samples.size + int(np.ceil(max_delay * fs)) + 64
    y = np.zeros(out_len, dtype=np.complex128)
    n = np.arange(out_len)
    for p in scenario.paths:
        delayed = fractional_delay(x.samples, (p.delay_s + imp.sto_s) * fs,
                                   out_len=out_len)
        if p.doppler_hz != 0.0:
            delayed *= np.exp(2j * np.pi * p.doppler_hz * n * ts)
        y += p.gain * delayed
    if imp.cfo_hz != 0.0 or imp.cpo_rad != 0.0:
        y *= np.exp(1j * (2.0 * np.pi * imp.cfo_hz * n * ts + imp.cpo_rad))
    return IqStream(samples=y, nominal_rate=fs, origin_index=None)


def apply_sfo(x: IqStream, sfo_norm: float) -> IqStream:
    """Receiver sampling at instants n*T_s*(1+delta) of the incoming signal."""
    if abs(sfo_norm) >= SFO_BOUND:
        raise ScenarioError(f"|sfo_norm| must be below {SFO_BOUND}")
    if sfo_norm == 0.0:
        return IqStream(samples=x.samples.copy(), nominal_rate=x.nominal_rate,
                        origin_index=x.origin_index)
    y = resample_arbitrary(x.samples, 1.0 + sfo_norm, out_len=x.samples.size)
    return IqStream(samples=y, nominal_rate=x.nominal_rate, origin_index=None)


def add_awgn(x: IqStream, snr_db: float | None, ref_power: float,
             seed: int) -> IqStream:
    """Circularly-symmetric complex AWGN at the given SNR vs ``ref_power``."""
    if snr_db is None:
        return IqStream(samples=x.samples.copy(), nominal_rate=x.nominal_rate,
                        origin_index=x.origin_index)
    if ref_power <= 0:
        raise ScenarioError("ref_power must be positive")
    noise_var = ref_power / (10.0 ** (snr_db / 10.0))
    rng = np.random.default_rng(seed)
    noise = rng.normal(0.0, np.sqrt(noise_var / 2.0), (x.samples.size, 2))
    return IqStream(samples=x.samples + noise[:, 0] + 1j * noise[:, 1],
                    nominal_rate=x.nominal_rate, origin_index=x.origin_index)


def main_path_rx_power(x: IqStream, scenario: ChannelScenario) -> float:
    """Receive power of the main-path contribution, the SNR reference."""
    active = np.abs(x.samples) > 0
    mean_pwr = np.mean(np.abs(x.samples[active]) ** 2) if active.any() else 0.0
    return abs(scenario.main_path.gain) ** 2 * mean_pwr


def run_channel(x: IqStream, scenario: ChannelScenario) -> IqStream:
    """Full impairment chain: paths + CFO/CPO, then SFO resampling, then AWGN."""
    imp = scenario.impairments
    y = apply_paths_and_cfo(x, scenario)
    y = apply_sfo(y, imp.sfo_norm)
    return add_awgn(y, imp.snr_db, main_path_rx_power(x, scenario), imp.noise_seed)
