"""
Upstream crosstalk cancellation
Linear ZF, linear MMSE, first-order approximate ZF and the QR-based
ZF-GDFE, each with its per-user post-processing SNR, plus symbol-level
decision-feedback detection
"""
import logging
from dataclasses import dataclass
from typing import Callable, Literal, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, field_validator

from src.channel import ChannelTensor
from src.config import SINGULAR_COND_LIMIT
from src.constellation import QamConstellation
from src.errors import RejectedInputError, SingularChannelError, SingularDiagonalError

logger = logging.getLogger(__name__)

CancelerMethod = Literal["none", "zf", "mmse", "azf", "zf_gdfe"]
CANCELER_METHODS = ("none", "zf", "mmse", "azf", "zf_gdfe")


def check_permutation(ordering: Sequence[int], n: Optional[int] = None) -> Tuple[int, ...]:
    """Validate that ordering is a permutation of 0..n-1"""
    ordering = tuple(int(i) for i in ordering)
    size = len(ordering) if n is None else n
    if sorted(ordering) != list(range(size)):
        raise RejectedInputError(f"ordering {list(ordering)} is not a permutation of 0..{size - 1}")
    return ordering


class CancelerSpec(BaseModel):
    """Canceler choice; ordering applies to zf_gdfe only (None = natural order)"""

    model_config = ConfigDict(frozen=True)

    method: CancelerMethod = "zf"
    ordering: Optional[Tuple[int, ...]] = None

    @field_validator("ordering")
    @classmethod
    def _check_ordering(cls, ordering):
        if ordering is not None:
            check_permutation(ordering)
        return ordering


def as_square(H) -> np.ndarray:
    H = np.asarray(H, dtype=complex)
    if H.ndim != 2 or H.shape[0] != H.shape[1]:
        raise RejectedInputError(f"expected a square matrix, got shape {H.shape}")
    return H


def _check_powers(P_x: float, sigma2: float):
    if P_x < 0 or sigma2 <= 0:
        raise RejectedInputError("need P_x >= 0 and noise power > 0")


def check_nonsingular(H: np.ndarray):
    """
    Raises:
        SingularChannelError: If the condition-number estimate exceeds the limit
    """
    cond = np.linalg.cond(H)
    if not np.isfinite(cond) or cond > SINGULAR_COND_LIMIT:
        raise SingularChannelError(f"channel matrix is singular (condition number {cond:.3g})")


def resolve_ordering(ordering: Optional[Sequence[int]], n: int) -> Tuple[int, ...]:
    return tuple(range(n)) if ordering is None else check_permutation(ordering, n)


def box_channel(n: int, alpha: float, h_d: complex = 1.0) -> np.ndarray:
    """Symmetric n-user channel with unit direct gain and crosstalk alpha, scaled by h_d"""
    return h_d * ((1 - alpha) * np.eye(n) + alpha * np.ones((n, n)))


# ------------------------------------------------------------------ bounds

def swp_snr(H, i: int, P_x: float, sigma2: float) -> float:
    """Single-wire performance: user i alone on its own pair"""
    H = as_square(H)
    _check_powers(P_x, sigma2)
    return float(P_x * abs(H[i, i]) ** 2 / sigma2)


def mfb_snr(H, i: int, P_x: float, sigma2: float, direction: str = "upstream") -> float:
    """Matched filter bound: column i (upstream) or row i (downstream) collected coherently"""
    H = as_square(H)
    _check_powers(P_x, sigma2)
    h = H[:, i] if direction == "upstream" else H[i, :]
    return float(P_x * np.vdot(h, h).real / sigma2)


def no_cancellation_snr(H, P_x: float, sigma2: float) -> np.ndarray:
    """Per-user SINR with crosstalk treated as Gaussian noise"""
    H = as_square(H)
    _check_powers(P_x, sigma2)
    power = np.abs(H) ** 2
    signal = P_x * np.diag(power)
    interference = P_x * (power.sum(axis=1) - np.diag(power))
    return signal / (sigma2 + interference)


# ------------------------------------------------------------------ linear ZF

def zf_canceler(H) -> np.ndarray:
    """Channel inverse F = H^-1"""
    H = as_square(H)
    check_nonsingular(H)
    return np.linalg.inv(H)


def zf_snr(H, P_x: float, sigma2: float) -> np.ndarray:
    """SNR_i = P_x / (sigma2 * sum_j |[H^-1]_ij|^2)"""
    _check_powers(P_x, sigma2)
    F = zf_canceler(H)
    return P_x / (sigma2 * np.sum(np.abs(F) ** 2, axis=1))


# ------------------------------------------------------------------ linear MMSE

def mmse_canceler(H, noise_to_signal: float) -> np.ndarray:
    """F = (H^H H + (sigma2/P_x) I)^-1 H^H"""
    H = as_square(H)
    if noise_to_signal <= 0:
        raise RejectedInputError("noise-to-signal ratio must be positive")
    Hh = H.conj().T
    return np.linalg.solve(Hh @ H + noise_to_signal * np.eye(H.shape[0]), Hh)


def mmse_snr(H, P_x: float, sigma2: float) -> np.ndarray:
    """Unbiased MMSE SINR_i = 1 / [(I + (P_x/sigma2) H^H H)^-1]_ii - 1"""
    H = as_square(H)
    _check_powers(P_x, sigma2)
    rho = P_x / sigma2
    error_cov = np.linalg.inv(np.eye(H.shape[0]) + rho * (H.conj().T @ H))
    return np.maximum(1.0 / np.real(np.diag(error_cov)) - 1.0, 0.0)


# ------------------------------------------------------------------ approximate ZF

def azf_canceler(H) -> np.ndarray:
    """First-order inverse F = (I - D^-1 E) D^-1 with D = diag(H), E = H - D"""
    H = as_square(H)
    d = np.diag(H)
    if np.any(d == 0):
        raise SingularDiagonalError("approximate ZF needs a nonzero diagonal")
    d_inv = np.diag(1.0 / d)
    E = H - np.diag(d)
    return (np.eye(H.shape[0]) - d_inv @ E) @ d_inv


def azf_snr(H, P_x: float, sigma2: float) -> np.ndarray:
    """SINR from the exact residual F H of the approximate inverse"""
    _check_powers(P_x, sigma2)
    H = as_square(H)
    F = azf_canceler(H)
    residual = np.abs(F @ H) ** 2
    signal = P_x * np.diag(residual)
    interference = P_x * (residual.sum(axis=1) - np.diag(residual))
    noise = sigma2 * np.sum(np.abs(F) ** 2, axis=1)
    return signal / (interference + noise)


# ------------------------------------------------------------------ ZF-GDFE

def positive_qr(A: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """QR factorization with a real positive diagonal in R"""
    Q, R = np.linalg.qr(A)
    d = np.diag(R)
    phase = np.where(np.abs(d) > 0, d / np.where(np.abs(d) > 0, np.abs(d), 1), 1)
    return Q * phase[None, :], phase.conj()[:, None] * R


def gdfe_decompose(H, ordering: Optional[Sequence[int]] = None) -> Tuple[np.ndarray, np.ndarray]:
    """
    QR decomposition of the column-permuted channel, Q R = H P(ordering).

    Column m of the permuted channel belongs to user ordering[m]; back
    substitution detects ordering[-1] first and ordering[0] last.
    """
    H = as_square(H)
    check_nonsingular(H)
    order = resolve_ordering(ordering, H.shape[0])
    return positive_qr(H[:, list(order)])


def gdfe_snr(H, ordering: Optional[Sequence[int]], P_x: float, sigma2: float) -> np.ndarray:
    """SNR_i = P_x |R_mm|^2 / sigma2 for the user in position m"""
    _check_powers(P_x, sigma2)
    H = as_square(H)
    order = resolve_ordering(ordering, H.shape[0])
    _, R = gdfe_decompose(H, order)
    snr = np.empty(H.shape[0])
    snr[list(order)] = P_x * np.abs(np.diag(R)) ** 2 / sigma2
    return snr


def dfe_detect(
    H,
    y,
    constellation: QamConstellation,
    ordering: Optional[Sequence[int]] = None,
    genie_symbols: Optional[np.ndarray] = None,
    bit_cap: Optional[int] = None,
) -> np.ndarray:
    """
    Successive detection of one received vector with the ZF-GDFE.

    Args:
        H: Channel matrix
        y: Received vector
        constellation: Square QAM used by every user
        ordering: Detection ordering (see gdfe_decompose)
        genie_symbols: If given, feed back these true symbols instead of the
            decisions, isolating SNR effects from error propagation
        bit_cap: Per-tone bit cap of the profile; the constellation may not
            exceed it

    Returns:
        Hard decisions in original user order
    """
    if bit_cap is not None and constellation.bits > bit_cap:
        raise RejectedInputError(f"{constellation!r} exceeds the {bit_cap}-bit per-tone cap")
    H = as_square(H)
    n = H.shape[0]
    order = resolve_ordering(ordering, n)
    Q, R = gdfe_decompose(H, order)
    z = Q.conj().T @ np.asarray(y, dtype=complex)

    feedback = None if genie_symbols is None else np.asarray(genie_symbols, dtype=complex)[list(order)]
    decided = np.zeros(n, dtype=complex)
    for m in range(n - 1, -1, -1):
        past = decided[m + 1:] if feedback is None else feedback[m + 1:]
        estimate = (z[m] - R[m, m + 1:] @ past) / R[m, m]
        decided[m] = constellation.slice(estimate)

    detected = np.empty(n, dtype=complex)
    detected[list(order)] = decided
    return detected


def canceler_snr(H, spec: CancelerSpec, P_x: float, sigma2: float) -> np.ndarray:
    """Per-user post-processing SNR of one tone for the given canceler"""
    if spec.method == "none":
        return no_cancellation_snr(H, P_x, sigma2)
    if spec.method == "zf":
        return zf_snr(H, P_x, sigma2)
    if spec.method == "mmse":
        return mmse_snr(H, P_x, sigma2)
    if spec.method == "azf":
        return azf_snr(H, P_x, sigma2)
    if spec.method == "zf_gdfe":
        return gdfe_snr(H, spec.ordering, P_x, sigma2)
    raise RejectedInputError(f"unknown canceler method '{spec.method}'")


@dataclass(frozen=True)
class EqualizerReport:
    """Per-tone, per-user post-processing SNR (linear) of one method on one tensor"""

    method: str
    snr: np.ndarray  # (tones, N)
    skipped: Tuple[int, ...] = ()


def evaluate_tones(
    tensor: ChannelTensor,
    powers: np.ndarray,
    noise_power: float,
    snr_fn: Callable[[np.ndarray, float, float], np.ndarray],
    label: str,
) -> EqualizerReport:
    """
    Apply a per-tone SNR function to every matrix of a channel tensor.

    Tones whose matrix is singular get zero SNR and are listed in
    ``skipped``; one warning is logged per call.
    """
    snr = np.zeros((len(tensor), tensor.N))
    skipped = []
    for t, Hk in enumerate(tensor.H):
        try:
            snr[t] = snr_fn(Hk, float(powers[t]), noise_power)
        except (SingularChannelError, SingularDiagonalError):
            skipped.append(int(tensor.tones[t]))

    if skipped:
        logger.warning(
            "%s: skipped %d singular tone(s), first at tone %d (seed %d)",
            label, len(skipped), skipped[0], tensor.seed,
        )
    return EqualizerReport(method=label, snr=snr, skipped=tuple(skipped))


def equalize(tensor: ChannelTensor, powers: np.ndarray, noise_power: float, spec: CancelerSpec) -> EqualizerReport:
    """Post-processing SNR of the given canceler on every tone of the tensor"""
    return evaluate_tones(
        tensor, powers, noise_power,
        lambda Hk, p, s2: canceler_snr(Hk, spec, p, s2),
        spec.method,
    )


# Standalone testing
if __name__ == "__main__":
    snr_awgn = 100.0
    for alpha in (0.0, 0.1, 0.3, 0.5):
        H = box_channel(2, alpha)
        zf = zf_snr(H, snr_awgn, 1.0)[0]
        mmse = mmse_snr(H, snr_awgn, 1.0)[0]
        mfb = mfb_snr(H, 0, snr_awgn, 1.0)
        print(f"alpha={alpha:.1f}: zf {10 * np.log10(zf):6.2f} dB, "
              f"mmse {10 * np.log10(mmse):6.2f} dB, mfb {10 * np.log10(mfb):6.2f} dB")
