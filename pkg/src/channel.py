"""
Binder channel model for the vectoring simulator
Direct insertion loss plus stochastic far-end crosstalk (FEXT), per tone,
and the diagonal-dominance measures of the resulting matrices
"""
import logging
from dataclasses import dataclass
from typing import Literal, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator

from src.errors import RejectedInputError, SingularDiagonalError
from src.profile import SystemProfile, active_tones, tone_frequency

logger = logging.getLogger(__name__)

CableName = Literal["cat5", "cad55", "generic"]
Direction = Literal["upstream", "downstream"]

PROPAGATION_SPEED = 2e8  # m/s
FEXT_REFERENCE_FREQ = 30e6  # Hz
FEXT_REFERENCE_LENGTH = 100.0  # m
DEFAULT_CHI_FEXT_DB = -28.0  # E|H_ij|^2 / |H_jj|^2 at the reference point

# Seed-sequence stream ids, so per-pair and per-tone draws never overlap
_PAIR_STREAM = 0
_TONE_STREAM = 1


def chi_from_db(level_db: float) -> float:
    """FEXT constant giving a relative coupling of level_db at 30 MHz over 100 m"""
    return 10 ** (level_db / 10) / (FEXT_REFERENCE_FREQ ** 2 * FEXT_REFERENCE_LENGTH)


class CableModel(BaseModel):
    """
    Insertion-loss and FEXT parameters of one cable type.

    Insertion loss per 100 m is il_a0 + il_a1 * sqrt(f/MHz) + il_a2 * f/MHz (dB).
    """

    model_config = ConfigDict(frozen=True)

    name: CableName = "generic"
    il_a0: float = Field(default=1.0, ge=0)
    il_a1: float = Field(default=3.4, ge=0)
    il_a2: float = Field(default=0.05, ge=0)
    chi_fext: float = Field(default_factory=lambda: chi_from_db(DEFAULT_CHI_FEXT_DB), gt=0)
    fext_breakpoint: float = Field(default=75e6, gt=0)
    fext_slope_hi: float = Field(default=1.2, ge=1)
    sigma_fext_db: float = Field(default=4.0, ge=0)


CABLE_DEFAULTS = {
    "cat5": {"il_a0": 1.0, "il_a1": 3.0, "il_a2": 0.04},
    "cad55": {"il_a0": 1.0, "il_a1": 3.8, "il_a2": 0.06},
    "generic": {"il_a0": 1.0, "il_a1": 3.4, "il_a2": 0.05},
}


def cable_model(name: str, chi_fext_db: Optional[float] = None, **overrides) -> CableModel:
    """
    Build a cable with its default coefficients, applying any overrides.

    Args:
        name: cat5, cad55 or generic
        chi_fext_db: Relative FEXT level at 30 MHz / 100 m; sets chi_fext
        **overrides: Any other CableModel field

    Returns:
        The validated CableModel
    """
    if name not in CABLE_DEFAULTS:
        raise RejectedInputError(f"Cable '{name}' not supported. Available: {list(CABLE_DEFAULTS.keys())}")
    fields = dict(CABLE_DEFAULTS[name])
    if chi_fext_db is not None:
        fields["chi_fext"] = chi_from_db(chi_fext_db)
    fields.update({k: v for k, v in overrides.items() if v is not None})
    return CableModel(name=name, **fields)


class BinderTopology(BaseModel):
    """N lines sharing a binder from the distribution point"""

    model_config = ConfigDict(frozen=True)

    lengths: Tuple[float, ...]
    cable: CableModel = Field(default_factory=lambda: cable_model("cat5"))

    @field_validator("lengths")
    @classmethod
    def _check_lengths(cls, lengths):
        if len(lengths) < 1:
            raise ValueError("a binder needs at least one line")
        if any(l <= 0 for l in lengths):
            raise ValueError("all line lengths must be positive")
        return lengths

    @property
    def N(self) -> int:
        return len(self.lengths)

    def coupling_length(self, i: int, j: int) -> float:
        """Shared run of lines i and j"""
        return min(self.lengths[i], self.lengths[j])

    def coupling_lengths(self) -> np.ndarray:
        lengths = np.asarray(self.lengths)
        return np.minimum.outer(lengths, lengths)


def equal_length_binder(n: int, length_m: float, cable: CableModel) -> BinderTopology:
    return BinderTopology(lengths=(float(length_m),) * n, cable=cable)


def spaced_binder(length_min_m: float, length_max_m: float, step_m: float, cable: CableModel) -> BinderTopology:
    """Lines uniformly spaced from length_min_m to length_max_m inclusive"""
    if step_m <= 0 or length_max_m < length_min_m:
        raise RejectedInputError("length range must satisfy min <= max and step > 0")
    count = int(np.floor((length_max_m - length_min_m) / step_m + 1e-9)) + 1
    return BinderTopology(lengths=tuple(length_min_m + step_m * i for i in range(count)), cable=cable)


@dataclass(frozen=True)
class ChannelTensor:
    """
    Per-tone N x N channel matrices for one binder realization.

    H[t] is the matrix at tone index tones[t]; H[t][i, j] is the gain from
    transmitter j to receiver i.
    """

    tones: np.ndarray
    frequencies: np.ndarray
    H: np.ndarray
    seed: int
    direction: Direction

    @property
    def N(self) -> int:
        return self.H.shape[1]

    def __len__(self) -> int:
        return len(self.tones)


def direct_gain(cable: CableModel, f, l):
    """
    Direct-path gain of a line of length l at frequency f.

    Magnitude follows the sqrt(f) insertion-loss polynomial, phase is a
    linear delay at the propagation speed. Accepts scalars or arrays.

    Raises:
        RejectedInputError: If l < 0 or f <= 0
    """
    f = np.asarray(f, dtype=float)
    l = np.asarray(l, dtype=float)
    if np.any(l < 0) or np.any(f <= 0):
        raise RejectedInputError("direct_gain needs f > 0 and l >= 0")
    f_mhz = f / 1e6
    il_db = (l / 100.0) * (cable.il_a0 + cable.il_a1 * np.sqrt(f_mhz) + cable.il_a2 * f_mhz)
    gain = 10 ** (-il_db / 20) * np.exp(-2j * np.pi * f * l / PROPAGATION_SPEED)
    return gain[()] if gain.ndim == 0 else gain


def effective_fext_frequency(cable: CableModel, f):
    """Dual slope: f below the breakpoint, steeper growth above it (continuous)"""
    f = np.asarray(f, dtype=float)
    bp = cable.fext_breakpoint
    ratio = np.maximum(f, bp) / bp
    return np.where(f <= bp, f, bp * ratio ** cable.fext_slope_hi)


def fext_coupling_std(cable: CableModel, f, d, direct_power):
    """
    Mean FEXT power E|H_ij|^2 = chi * f_eff^2 * d * |H_jj|^2.

    Raises:
        RejectedInputError: If f <= 0, d < 0 or direct_power < 0
    """
    f = np.asarray(f, dtype=float)
    d = np.asarray(d, dtype=float)
    direct_power = np.asarray(direct_power, dtype=float)
    if np.any(f <= 0) or np.any(d < 0) or np.any(direct_power < 0):
        raise RejectedInputError("fext_coupling_std needs f > 0, d >= 0 and direct_power >= 0")
    power = cable.chi_fext * effective_fext_frequency(cable, f) ** 2 * d * direct_power
    return power[()] if power.ndim == 0 else power


def _lognormal_unit_mean(sigma_db: float) -> float:
    """Factor c with E[c * 10^(X/10)] = 1 for X ~ N(0, sigma_db^2)"""
    a = sigma_db * np.log(10) / 10
    return float(np.exp(-a * a / 2))


def select_tones(profile: SystemProfile, count: int = 0) -> np.ndarray:
    """
    Evenly spaced subset of the active tones.

    Args:
        profile: Profile whose active tones are sampled
        count: Number of tones to keep; 0 (or more than available) keeps all
    """
    tones = active_tones(profile)
    if count <= 0 or count >= len(tones):
        return tones
    picks = np.unique(np.round(np.linspace(0, len(tones) - 1, count)).astype(int))
    return tones[picks]


def generate_channel(
    topology: BinderTopology,
    profile: SystemProfile,
    seed: int,
    direction: Direction = "upstream",
    tones: Optional[Sequence[int]] = None,
) -> ChannelTensor:
    """
    Draw one binder realization.

    Diagonal entries are the deterministic direct gains. Off-diagonal entries
    have log-normal magnitude around the mean FEXT power: the dB offset is
    drawn once per (i, j) pair and reused on every tone, the phase is uniform
    and drawn per tone. Per-tone draws come from their own seed sequence
    (seed, tone) so any subset of tones is reproducible on its own.

    Args:
        topology: Line lengths and cable
        profile: Tone grid
        seed: Non-negative RNG seed
        direction: upstream, or downstream (transpose of the upstream draw)
        tones: Active tone indices to generate (default: all active tones)

    Returns:
        ChannelTensor
    """
    if seed < 0:
        raise RejectedInputError("seed must be non-negative")
    if direction not in ("upstream", "downstream"):
        raise RejectedInputError(f"unknown direction '{direction}'")

    tones = active_tones(profile) if tones is None else np.asarray(tones, dtype=int)
    freqs = np.array([tone_frequency(profile, int(k)).frequency for k in tones])
    if not all(tone_frequency(profile, int(k)).active for k in tones):
        raise RejectedInputError("generate_channel only accepts active tones")

    cable = topology.cable
    n = topology.N
    lengths = np.asarray(topology.lengths)

    # direct[t, i]
    direct = direct_gain(cable, freqs[:, None], lengths[None, :])
    H = np.zeros((len(tones), n, n), dtype=complex)

    if n > 1:
        pair_rng = np.random.default_rng(np.random.SeedSequence([seed, _PAIR_STREAM]))
        offsets_db = pair_rng.normal(0.0, cable.sigma_fext_db, size=(n, n))
        spread = 10 ** (offsets_db / 10) * _lognormal_unit_mean(cable.sigma_fext_db)

        # mean[t, i, j] uses the disturber's direct power |H_jj|^2
        mean_power = fext_coupling_std(
            cable,
            freqs[:, None, None],
            topology.coupling_lengths()[None, :, :],
            np.abs(direct[:, None, :]) ** 2,
        )
        magnitude = np.sqrt(mean_power * spread[None, :, :])

        for t, k in enumerate(tones):
            tone_rng = np.random.default_rng(np.random.SeedSequence([seed, _TONE_STREAM, int(k)]))
            phase = tone_rng.uniform(0.0, 2 * np.pi, size=(n, n))
            H[t] = magnitude[t] * np.exp(1j * phase)

    idx = np.arange(n)
    H[:, idx, idx] = direct

    if direction == "downstream":
        H = np.transpose(H, (0, 2, 1)).copy()

    logger.debug("Generated %s channel: %d lines x %d tones (seed %d)", direction, n, len(tones), seed)
    return ChannelTensor(tones=tones, frequencies=freqs, H=H, seed=seed, direction=direction)


def diag_dominance(H: np.ndarray) -> Tuple[float, float, float]:
    """
    Row-wise, column-wise and overall diagonal dominance of H.

    Returns:
        (beta_r, beta_c, beta) with beta = max(beta_r, beta_c)

    Raises:
        SingularDiagonalError: If a diagonal entry is zero
    """
    H = np.asarray(H)
    diag = np.abs(np.diag(H))
    if np.any(diag == 0):
        raise SingularDiagonalError("diagonal dominance is undefined with a zero diagonal entry")
    off = np.abs(H) - np.diag(diag)
    beta_r = float(np.max(off.sum(axis=1) / diag))
    beta_c = float(np.max(off.sum(axis=0) / diag))
    return beta_r, beta_c, max(beta_r, beta_c)


def dominance_profile(tensor: ChannelTensor) -> np.ndarray:
    """Array of shape (tones, 3) holding (beta_r, beta_c, beta) per tone"""
    return np.array([diag_dominance(Hk) for Hk in tensor.H])


# Standalone testing
if __name__ == "__main__":
    from src.profile import make_profile

    profile = make_profile("gfast212")
    binder = equal_length_binder(10, 100.0, cable_model("cat5"))
    tensor = generate_channel(binder, profile, seed=1, tones=select_tones(profile, 64))
    betas = dominance_profile(tensor)
    print(f"\n📊 Diagonal dominance, 10 x 100 m CAT5")
    for f, beta in zip(tensor.frequencies[::8], betas[::8, 2]):
        print(f"   {f / 1e6:7.2f} MHz: beta = {20 * np.log10(beta):6.1f} dB")
