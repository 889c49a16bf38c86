"""
System profiles for the vectoring simulator
Holds the standard-defined constants: tone grid, PSD mask, power limits,
noise floor, SNR gap and bit cap
"""
import logging
from functools import lru_cache
from typing import Dict, List, Literal, NamedTuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from src.errors import RejectedInputError

logger = logging.getLogger(__name__)

ProfileName = Literal["gfast106", "gfast212", "vdsl17"]

MHZ = 1e6

# Band edges of the per-tone PSD mask (dBm/Hz)
MASK_STEPS = (
    (30 * MHZ, -65.0),
    (106 * MHZ, -76.0),
    (float("inf"), -79.0),
)

PROFILES: Dict[str, Dict] = {
    "gfast106": {
        "tone_count": 2048,
        "tone_width": 51750.0,
        "start_freq": 2.2 * MHZ,
        "stop_freq": 106 * MHZ,
        "symbol_rate": 48000.0,
        "cp_len": 320,
        "noise_psd": -140.0,
        "snr_gap_db": 10.75,
        "bit_cap": 12,
        "total_power_dbm": 4.0,
    },
    "gfast212": {
        "tone_count": 4096,
        "tone_width": 51750.0,
        "start_freq": 2.2 * MHZ,
        "stop_freq": 212 * MHZ,
        "symbol_rate": 48000.0,
        "cp_len": 640,
        "noise_psd": -140.0,
        "snr_gap_db": 10.75,
        "bit_cap": 12,
        "total_power_dbm": 4.0,
    },
    # Comparison profile: 4096 tones of 4.3125 kHz, grid ends at 17.664 MHz
    "vdsl17": {
        "tone_count": 4096,
        "tone_width": 4312.5,
        "start_freq": 138e3,
        "stop_freq": 17.664 * MHZ,
        "symbol_rate": 4000.0,
        "cp_len": 640,
        "noise_psd": -140.0,
        "snr_gap_db": 10.75,
        "bit_cap": 15,
        "total_power_dbm": 14.5,
    },
}


class SystemProfile(BaseModel):
    """
    Tone grid and power constants of one standard profile.

    The grid is k * tone_width for k in [0, tone_count); a tone is active when
    its frequency lies in [start_freq, stop_freq].
    """

    model_config = ConfigDict(frozen=True)

    name: ProfileName
    tone_count: int = Field(gt=0)
    tone_width: float = Field(gt=0)
    start_freq: float = Field(ge=0)
    stop_freq: float = Field(gt=0)
    symbol_rate: float = Field(gt=0)
    cp_len: int = Field(ge=0)  # informational only
    noise_psd: float
    snr_gap_db: float
    bit_cap: int = Field(gt=0)
    total_power_dbm: float

    @model_validator(mode="after")
    def _check_grid(self) -> "SystemProfile":
        if self.start_freq >= self.stop_freq:
            raise ValueError("start_freq must be below stop_freq")
        # the grid has to reach the band edge to within one tone
        if self.tone_count * self.tone_width < self.stop_freq - self.tone_width:
            raise ValueError("tone grid does not cover the band")
        return self

    @property
    def first_active_tone(self) -> int:
        return int(np.ceil(self.start_freq / self.tone_width - 1e-9))

    @property
    def last_active_tone(self) -> int:
        return min(self.tone_count - 1, int(np.floor(self.stop_freq / self.tone_width + 1e-9)))

    @property
    def noise_power(self) -> float:
        """Noise power per tone in mW"""
        return 10 ** (self.noise_psd / 10) * self.tone_width

    @property
    def total_power_mw(self) -> float:
        return 10 ** (self.total_power_dbm / 10)


class Tone(NamedTuple):
    index: int
    frequency: float
    active: bool


def make_profile(name: str) -> SystemProfile:
    """
    Build a named standard profile.

    Args:
        name: One of gfast106, gfast212, vdsl17

    Returns:
        The populated SystemProfile

    Raises:
        RejectedInputError: If the name is unknown
    """
    if name not in PROFILES:
        raise RejectedInputError(
            f"Profile '{name}' not supported. Available: {list(PROFILES.keys())}"
        )
    return SystemProfile(name=name, **PROFILES[name])


def list_profiles() -> List[SystemProfile]:
    return [make_profile(name) for name in PROFILES]


def psd_mask(profile: SystemProfile, f: float) -> float:
    """
    Transmit PSD mask in dBm/Hz at frequency f.

    Raises:
        RejectedInputError: If f lies outside the profile band
    """
    if not profile.start_freq <= f <= profile.stop_freq:
        raise RejectedInputError(
            f"{f / MHZ:.4f} MHz is outside the {profile.name} band "
            f"[{profile.start_freq / MHZ:.4f}, {profile.stop_freq / MHZ:.4f}] MHz"
        )
    for edge, level in MASK_STEPS:
        if f <= edge:
            return level
    return MASK_STEPS[-1][1]


def tone_frequency(profile: SystemProfile, k: int) -> Tone:
    """
    Frequency of grid tone k and whether it is active.

    Raises:
        RejectedInputError: If k is not in [0, tone_count)
    """
    if not 0 <= k < profile.tone_count:
        raise RejectedInputError(f"tone index {k} out of range [0, {profile.tone_count})")
    f = k * profile.tone_width
    return Tone(index=k, frequency=f, active=bool(profile.start_freq <= f <= profile.stop_freq))


def active_tones(profile: SystemProfile) -> np.ndarray:
    """Indices of all active tones in ascending order"""
    return np.arange(profile.first_active_tone, profile.last_active_tone + 1)


def _mask_power(profile: SystemProfile, f: float) -> float:
    return 10 ** (psd_mask(profile, f) / 10) * profile.tone_width


@lru_cache(maxsize=None)
def _power_scale(profile: SystemProfile) -> float:
    """Uniform factor that brings the mask-limited sum under the total-power cap"""
    total = sum(_mask_power(profile, k * profile.tone_width) for k in active_tones(profile))
    if total <= profile.total_power_mw:
        return 1.0
    scale = profile.total_power_mw / total
    logger.debug(
        "%s: mask-limited power %.3f mW exceeds %.3f mW cap, scaling by %.2f dB",
        profile.name, total, profile.total_power_mw, 10 * np.log10(scale),
    )
    return scale


def tone_tx_power(profile: SystemProfile, k: int) -> float:
    """
    Transmit power of active tone k in mW.

    The mask-limited power 10^(mask/10) * tone_width is scaled uniformly over
    all active tones so that their sum respects the total-power cap.

    Raises:
        RejectedInputError: If tone k is not active
    """
    tone = tone_frequency(profile, k)
    if not tone.active:
        raise RejectedInputError(f"tone {k} ({tone.frequency / MHZ:.4f} MHz) is not active")
    return _mask_power(profile, tone.frequency) * _power_scale(profile)


def tone_powers(profile: SystemProfile, tones: np.ndarray = None) -> np.ndarray:
    """Per-tone transmit powers (mW) for the given active tones (default: all)"""
    tones = active_tones(profile) if tones is None else np.asarray(tones)
    return np.array([tone_tx_power(profile, int(k)) for k in tones])


def vectoring_load(profile: SystemProfile, n_lines: int) -> float:
    """Multiply-accumulates per second to apply an N x N canceler on every active tone"""
    return len(active_tones(profile)) * n_lines ** 2 * profile.symbol_rate


# Standalone testing
if __name__ == "__main__":
    for p in list_profiles():
        tones = active_tones(p)
        print(f"\n📡 {p.name}")
        print(f"   Tones: {p.tone_count} x {p.tone_width / 1e3:.4g} kHz, active {tones[0]}..{tones[-1]}")
        print(f"   Total tx power: {tone_powers(p).sum():.4f} mW (cap {p.total_power_mw:.4f} mW)")
        print(f"   Vectoring load (N=10): {vectoring_load(p, 10) / 1e9:.2f} G/s")
