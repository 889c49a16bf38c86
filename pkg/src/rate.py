"""
Bit loading, user rates and performance bounds
"""
import logging
from dataclasses import dataclass
from typing import Tuple, Union

import numpy as np

from src.canceler import (
    CancelerSpec,
    EqualizerReport,
    equalize,
    evaluate_tones,
    mfb_snr,
    swp_snr,
)
from src.channel import ChannelTensor, diag_dominance
from src.errors import RejectedInputError
from src.precoder import PrecoderSpec, precode
from src.profile import SystemProfile, active_tones, tone_powers

logger = logging.getLogger(__name__)

BOUND_IDS = ("swp", "mfb", "zf_lower", "zf_upper", "mac_sum")

MethodSpec = Union[CancelerSpec, PrecoderSpec, str]


@dataclass(frozen=True)
class RateReport:
    """
    Bit loading and rates of one method on one channel realization.

    bits has shape (tones, N). rate_bps uses the symbol rate, rate_bps_df the
    tone spacing; both are already scaled up to the full active band when
    the tensor holds a decimated tone subset.
    """

    method: str
    profile: str
    tones: np.ndarray
    bits: np.ndarray
    rate_bps: np.ndarray
    rate_bps_df: np.ndarray
    skipped: Tuple[int, ...] = ()

    @property
    def aggregate_bps(self) -> float:
        return float(self.rate_bps.sum())


def snr_gap(gap_db: float) -> float:
    return 10 ** (gap_db / 10)


def bits_per_tone(snr, gap_db: float, bit_cap: int, integer_bits: bool = False):
    """
    min(log2(1 + snr / gap), bit_cap), element-wise.

    Raises:
        RejectedInputError: If any snr is negative
    """
    snr = np.asarray(snr, dtype=float)
    if np.any(snr < 0):
        raise RejectedInputError("SNR must be non-negative")
    bits = np.minimum(np.log2(1 + snr / snr_gap(gap_db)), bit_cap)
    if integer_bits:
        bits = np.floor(bits)
    return bits[()] if bits.ndim == 0 else bits


def user_rate(bits, symbol_rate: float):
    """symbol_rate * sum over tones (axis 0) of the bit loading"""
    return symbol_rate * np.sum(np.asarray(bits, dtype=float), axis=0)


def zf_rate_bounds(
    H_ii: complex, beta: float, P_x: float, sigma2: float, gap_db: float
) -> Tuple[float, float]:
    """
    Bits per tone bracketing the ZF canceler under diagonal dominance beta.

    lower uses max(0, 1 - 2 beta - beta^2), upper uses (1 + beta). The lower
    bound is vacuous (0 bits) from beta = sqrt(2) - 1 on.
    """
    if beta < 0:
        raise RejectedInputError("beta must be non-negative")
    snr = P_x * abs(H_ii) ** 2 / (sigma2 * snr_gap(gap_db))
    shrink = max(0.0, 1 - 2 * beta - beta ** 2)
    return float(np.log2(1 + snr * shrink)), float(np.log2(1 + snr * (1 + beta)))


def mac_sum_capacity(H, S, sigma2: float) -> float:
    """log2 det(I + H S H^H / sigma2) for diagonal S (matrix or vector of powers)"""
    H = np.asarray(H, dtype=complex)
    S = np.asarray(S, dtype=float)
    powers = np.diag(S) if S.ndim == 2 else S
    if np.any(powers < 0):
        raise RejectedInputError("transmit powers must be non-negative")
    A = np.eye(H.shape[0]) + (H * powers[None, :]) @ H.conj().T / sigma2
    _, logdet = np.linalg.slogdet(A)
    return float(logdet / np.log(2))


def decimation_weight(profile: SystemProfile, tensor: ChannelTensor) -> float:
    """Scale factor from the tones of a tensor to the full active band"""
    return len(active_tones(profile)) / len(tensor)


def rate_from_snr(
    snr: np.ndarray,
    profile: SystemProfile,
    weight: float = 1.0,
    integer_bits: bool = False,
) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    Bit loading and per-user rates from a (tones, N) SNR matrix.

    Returns:
        (bits, rate at the symbol rate, rate at the tone spacing)
    """
    bits = bits_per_tone(snr, profile.snr_gap_db, profile.bit_cap, integer_bits)
    return (
        bits,
        weight * user_rate(bits, profile.symbol_rate),
        weight * user_rate(bits, profile.tone_width),
    )


def _bound_snr(tensor: ChannelTensor, profile: SystemProfile, powers, noise: float, bound: str) -> EqualizerReport:
    n = tensor.N
    gap = snr_gap(profile.snr_gap_db)

    if bound == "swp":
        fn = lambda Hk, p, s2: np.array([swp_snr(Hk, i, p, s2) for i in range(n)])
    elif bound == "mfb":
        fn = lambda Hk, p, s2: np.array([mfb_snr(Hk, i, p, s2, tensor.direction) for i in range(n)])
    elif bound in ("zf_lower", "zf_upper"):
        def fn(Hk, p, s2):
            beta = diag_dominance(Hk)[2]
            factor = max(0.0, 1 - 2 * beta - beta ** 2) if bound == "zf_lower" else 1 + beta
            return p * np.abs(np.diag(Hk)) ** 2 * factor / s2
    elif bound == "mac_sum":
        # equal share of the gap-adjusted, capped sum rate, expressed as an SNR
        def fn(Hk, p, s2):
            total = min(mac_sum_capacity(Hk, np.full(n, p), gap * s2), n * profile.bit_cap)
            return gap * (2 ** (total / n) - 1) * np.ones(n)
    else:
        raise RejectedInputError(f"unknown bound '{bound}'. Available: {list(BOUND_IDS)}")

    return evaluate_tones(tensor, powers, noise, fn, bound)


def method_rate(
    tensor: ChannelTensor,
    profile: SystemProfile,
    spec: MethodSpec,
    integer_bits: bool = False,
) -> RateReport:
    """
    Rate report of one canceler, precoder or bound on a channel tensor.

    Tone powers come from the profile mask and noise from noise_psd * tone
    width. Singular tones carry zero bits.

    Args:
        tensor: Channel realization
        profile: Profile the tensor was drawn on
        spec: CancelerSpec, PrecoderSpec or one of BOUND_IDS
        integer_bits: Floor the loading to whole bits

    Returns:
        RateReport
    """
    powers = tone_powers(profile, tensor.tones)
    noise = profile.noise_power

    if isinstance(spec, CancelerSpec):
        report = equalize(tensor, powers, noise, spec)
    elif isinstance(spec, PrecoderSpec):
        report = precode(tensor, powers, noise, spec)
    else:
        report = _bound_snr(tensor, profile, powers, noise, spec)

    bits, rate, rate_df = rate_from_snr(
        report.snr, profile, decimation_weight(profile, tensor), integer_bits
    )
    logger.debug(
        "%s on %s (seed %d): %.1f Mbps aggregate",
        report.method, profile.name, tensor.seed, rate.sum() / 1e6,
    )
    return RateReport(
        method=report.method,
        profile=profile.name,
        tones=np.asarray(tensor.tones),
        bits=bits,
        rate_bps=rate,
        rate_bps_df=rate_df,
        skipped=report.skipped,
    )
