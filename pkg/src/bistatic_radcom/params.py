"""Frame configuration and closed-form radar/communication performance figures.

All performance formulas are evaluated with *effective* pilot spacings:
pilot-only sensing uses the configured comb/block spacings, full-frame
sensing uses spacing 1 in both directions.
"""

from __future__ import annotations

from dataclasses import dataclass, field, asdict
from enum import Enum

SPEED_OF_LIGHT = 299_792_458.0  # m/s


class ConfigError(ValueError):
    """Raised when a frame configuration violates an invariant."""


class SensingMode(Enum):
    PILOT_ONLY = "pilot_only"
    FULL_FRAME = "full_frame"


@dataclass(frozen=True)
class FrameConfig:
    """OFDM frame, pilot and coding parameters.

    ``bandwidth_hz`` doubles as the nominal complex sample rate (critically
    sampled baseband, no oversampling).
    """

    n_subcarriers: int = 2048
    cp_len: int = 512
    m_sc: int = 2
    m_sfo: int = 10
    m_payload: int = 4096
    pilot_freq_spacing: int = 2
    pilot_time_spacing: int = 4
    bandwidth_hz: float = 1e9
    bits_per_symbol: int = 2
    code_rate: float = 2.0 / 3.0
    pilot_seed: int = 0x5EED_0001
    preamble_seed: int = 0x5EED_0002

    @property
    def m_preamble(self) -> int:
        return self.m_sc + self.m_sfo

    @property
    def m_total(self) -> int:
        return self.m_preamble + self.m_payload

    @property
    def symbol_len(self) -> int:
        """Samples per OFDM symbol including cyclic prefix."""
        return self.n_subcarriers + self.cp_len

    @property
    def frame_len(self) -> int:
        return self.symbol_len * self.m_total

    @property
    def sample_period(self) -> float:
        return 1.0 / self.bandwidth_hz

    @property
    def subcarrier_spacing(self) -> float:
        return self.bandwidth_hz / self.n_subcarriers

    @property
    def n_pilot_rows(self) -> int:
        return self.n_subcarriers // self.pilot_freq_spacing

    @property
    def n_pilot_cols(self) -> int:
        return self.m_payload // self.pilot_time_spacing

    @property
    def n_data_elements(self) -> int:
        return self.n_subcarriers * self.m_payload - self.n_pilot_rows * self.n_pilot_cols

    def effective_spacings(self, mode: SensingMode) -> tuple[int, int]:
        if mode is SensingMode.FULL_FRAME:
            return 1, 1
        return self.pilot_freq_spacing, self.pilot_time_spacing

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "FrameConfig":
        return cls(**d)


@dataclass(frozen=True)
class RadarPerformance:
    processing_gain_db: float
    range_resolution: float
    max_unamb_range: float
    max_isi_free_range: float
    doppler_resolution: float
    max_unamb_doppler: float
    max_ici_free_doppler: float

    def to_dict(self) -> dict:
        return asdict(self)


def validate_config(cfg: FrameConfig) -> list[str]:
    """Return every violated invariant (empty list means the config is valid)."""
    v = []
    for name in ("n_subcarriers", "cp_len", "m_sc", "m_payload",
                 "pilot_freq_spacing", "pilot_time_spacing"):
        if getattr(cfg, name) <= 0:
            v.append(f"{name} must be positive")
    if cfg.m_sfo <= 0:
        v.append("m_sfo must be positive")
    elif cfg.m_sfo % 2 != 0:
        v.append("m_sfo must be even")
    if cfg.pilot_freq_spacing > 0 and cfg.n_subcarriers % cfg.pilot_freq_spacing != 0:
        v.append("n_subcarriers not divisible by pilot_freq_spacing")
    if cfg.pilot_time_spacing > 0 and cfg.m_payload % cfg.pilot_time_spacing != 0:
        v.append("m_payload not divisible by pilot_time_spacing")
    if cfg.cp_len >= cfg.n_subcarriers:
        v.append("cp_len must be smaller than n_subcarriers")
    if cfg.bandwidth_hz <= 0:
        v.append("bandwidth_hz must be positive")
    if cfg.bits_per_symbol != 2:
        v.append("bits_per_symbol must be 2 (QPSK)")
    if not 0.0 <= cfg.code_rate <= 1.0:
        v.append("code_rate must be within [0, 1]")
    return v


def require_valid(cfg: FrameConfig) -> None:
    violations = validate_config(cfg)
    if violations:
        raise ConfigError("; ".join(violations))


def radar_performance(cfg: FrameConfig, mode: SensingMode) -> RadarPerformance:
    """Closed-form bistatic OFDM radar performance figures for a sensing mode."""
    require_valid(cfg)
    import math

    dn, dm = cfg.effective_spacings(mode)
    n, ncp, mpl, b = cfg.n_subcarriers, cfg.cp_len, cfg.m_payload, cfg.bandwidth_hz
    gp = (n / dn) * (mpl / dm)
    return RadarPerformance(
        processing_gain_db=10.0 * math.log10(gp),
        range_resolution=SPEED_OF_LIGHT / b,
        max_unamb_range=(n / dn) * SPEED_OF_LIGHT / b,
        max_isi_free_range=ncp * SPEED_OF_LIGHT / b,
        doppler_resolution=b / ((n + ncp) * mpl),
        max_unamb_doppler=b / (2 * dm * (n + ncp)),
        max_ici_free_doppler=b / (10 * n),
    )


def comm_throughput(cfg: FrameConfig) -> float:
    """Net data rate in bit/s at 100% duty cycle.

    Pilot resource elements count as overhead; the preamble contributes to
    the frame duration in the denominator.
    """
    require_valid(cfg)
    data_elements = cfg.n_data_elements
    frame_duration = cfg.frame_len / cfg.bandwidth_hz
    return cfg.bits_per_symbol * cfg.code_rate * data_elements / frame_duration


def long_payload_config(**overrides) -> FrameConfig:
    """Table-style long-payload parameterization (M_pl = 4096)."""
    return FrameConfig(**{"m_payload": 4096, **overrides})


def short_payload_config(**overrides) -> FrameConfig:
    """Table-style short-payload parameterization (M_pl = 512)."""
    return FrameConfig(**{"m_payload": 512, **overrides})
