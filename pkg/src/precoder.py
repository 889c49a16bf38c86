"""
Downstream crosstalk pre-compensation
Gain-scaled linear ZF precoder and Tomlinson-Harashima precoding (THP)

Symbol power is normalized to 1 inside the precoder and the tone power is
carried outside, so the per-line PSD mask holds whenever every row of the
precoder has 2-norm <= 1.
"""
import logging
from typing import Literal, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator

from src.canceler import (
    EqualizerReport,
    as_square,
    check_nonsingular,
    check_permutation,
    evaluate_tones,
    no_cancellation_snr,
    positive_qr,
    resolve_ordering,
)
from src.channel import ChannelTensor
from src.constellation import QamConstellation
from src.errors import DegenerateChannelError, RejectedInputError, SingularDiagonalError

logger = logging.getLogger(__name__)

PrecoderMethod = Literal["none", "zf_linear", "thp"]
PRECODER_METHODS = ("none", "zf_linear", "thp")
SCALING_MODES = ("row_norm", "global")


class PrecoderSpec(BaseModel):
    """
    Precoder choice.

    scaling applies to zf_linear, ordering, A and shaping_loss_db to thp.
    A = None means the modulo half-edge follows the QAM on the tone.
    """

    model_config = ConfigDict(frozen=True)

    method: PrecoderMethod = "zf_linear"
    scaling: Literal["row_norm", "global"] = "row_norm"
    ordering: Optional[Tuple[int, ...]] = None
    A: Optional[float] = Field(default=None, gt=0)
    shaping_loss_db: float = Field(default=0.0, ge=0)

    @field_validator("ordering")
    @classmethod
    def _check_ordering(cls, ordering):
        if ordering is not None:
            check_permutation(ordering)
        return ordering

    def half_edge(self, bits: int) -> float:
        """Modulo half-edge for a tone carrying square 2^bits-QAM"""
        if self.A is not None:
            return self.A
        return QamConstellation(bits).half_edge


# ------------------------------------------------------------------ linear ZF

def zf_precoder(H, scaling: str = "row_norm") -> Tuple[np.ndarray, np.ndarray]:
    """
    Linear ZF precoder F = H^-1 diag(H) G.

    G is a common gain so that every row of F has 2-norm <= 1. The row_norm
    and global modes give the same factor: 1/max_i ||row_i(M)|| equals
    1/sqrt(beta_max) with beta_max the largest squared row norm.

    Args:
        H: Downstream channel (H[i, j] from line j's transmitter to receiver i)
        scaling: row_norm or global

    Returns:
        (F, G) with G diagonal

    Raises:
        SingularChannelError: If H is singular
        SingularDiagonalError: If H has a zero diagonal entry
    """
    H = as_square(H)
    if scaling not in SCALING_MODES:
        raise RejectedInputError(f"unknown scaling '{scaling}'")
    d = np.diag(H)
    if np.any(d == 0):
        raise SingularDiagonalError("ZF precoder needs a nonzero diagonal")
    check_nonsingular(H)

    M = np.linalg.solve(H, np.diag(d))
    if scaling == "row_norm":
        gain = 1.0 / np.max(np.linalg.norm(M, axis=1))
    else:
        gain = 1.0 / np.sqrt(np.max(np.sum(np.abs(M) ** 2, axis=1)))
    G = gain * np.eye(H.shape[0])
    return M @ G, G


def zf_precoder_snr(H, scaling: str, P_x: float, sigma2: float) -> np.ndarray:
    """SNR_i = P_x |G_ii H_ii|^2 / sigma2 (no residual crosstalk)"""
    if P_x < 0 or sigma2 <= 0:
        raise RejectedInputError("need P_x >= 0 and noise power > 0")
    H = as_square(H)
    _, G = zf_precoder(H, scaling)
    return P_x * np.abs(np.diag(G) * np.diag(H)) ** 2 / sigma2


# ------------------------------------------------------------------ THP

def modulo(v, A: float):
    """Fold real and imaginary parts separately into [-A, A)"""
    if A <= 0:
        raise RejectedInputError("modulo half-edge must be positive")
    v = np.asarray(v, dtype=complex)

    def fold(u):
        return u - 2 * A * np.floor((u + A) / (2 * A))

    out = fold(v.real) + 1j * fold(v.imag)
    return out[()] if out.ndim == 0 else out


def thp_decompose(H, ordering: Optional[Sequence[int]] = None) -> Tuple[np.ndarray, np.ndarray]:
    """
    QR of the Hermitian transpose of the row-permuted channel.

    With P H = R^H Q^H, transmitting Q x~ leaves the lower-triangular R^H
    at the receivers; receiver ordering[m] is precoded in position m.
    """
    H = as_square(H)
    check_nonsingular(H)
    order = resolve_ordering(ordering, H.shape[0])
    return positive_qr(H[list(order), :].conj().T)


def thp_precode(H, x, A: float, ordering: Optional[Sequence[int]] = None) -> np.ndarray:
    """
    Precode one symbol vector.

    Args:
        H: Downstream channel
        x: Symbols in user order, real and imaginary parts strictly inside (-A, A)
        A: Modulo half-edge
        ordering: Precoding order (see thp_decompose)

    Returns:
        Transmit vector Q x~ in line order
    """
    H = as_square(H)
    x = np.asarray(x, dtype=complex)
    if x.shape != (H.shape[0],):
        raise RejectedInputError(f"symbol vector shape {x.shape} does not match {H.shape[0]} users")
    if np.any(np.abs(x.real) >= A) or np.any(np.abs(x.imag) >= A):
        # modulo folds onto [-A, A), so a component at +-A would come back negated
        raise RejectedInputError(f"symbols must lie strictly inside the square of half-edge {A}")

    order = resolve_ordering(ordering, H.shape[0])
    Q, R = thp_decompose(H, order)
    L = R.conj().T
    xp = x[list(order)]

    precoded = np.zeros_like(xp)
    for m in range(len(xp)):
        interference = L[m, :m] @ precoded[:m] / L[m, m]
        precoded[m] = modulo(xp[m] - interference, A)
    return Q @ precoded


def thp_receive(y_m, R_mm, A: float):
    """
    Symbol estimate modulo(y_m / R_mm) at one receiver.

    Raises:
        DegenerateChannelError: If R_mm is zero
    """
    if R_mm == 0:
        raise DegenerateChannelError("THP receiver gain R_mm is zero")
    return modulo(y_m / R_mm, A)


def thp_detect(H, y, A: float, ordering: Optional[Sequence[int]] = None) -> np.ndarray:
    """Apply thp_receive at every receiver; estimates come back in user order"""
    H = as_square(H)
    order = resolve_ordering(ordering, H.shape[0])
    _, R = thp_decompose(H, order)
    y = np.asarray(y, dtype=complex)
    estimates = np.empty(H.shape[0], dtype=complex)
    for m, user in enumerate(order):
        estimates[user] = thp_receive(y[user], R[m, m], A)
    return estimates


def thp_snr(
    H,
    ordering: Optional[Sequence[int]],
    P_x: float,
    sigma2: float,
    shaping_loss_db: float = 0.0,
) -> np.ndarray:
    """SNR of receiver ordering[m] is P_x |R_mm|^2 / sigma2, less an optional shaping loss"""
    if P_x < 0 or sigma2 <= 0:
        raise RejectedInputError("need P_x >= 0 and noise power > 0")
    H = as_square(H)
    order = resolve_ordering(ordering, H.shape[0])
    _, R = thp_decompose(H, order)
    snr = np.empty(H.shape[0])
    snr[list(order)] = P_x * np.abs(np.diag(R)) ** 2 / sigma2
    return snr * 10 ** (-shaping_loss_db / 10)


def precoder_snr(H, spec: PrecoderSpec, P_x: float, sigma2: float) -> np.ndarray:
    """Per-user SNR of one downstream tone for the given precoder"""
    if spec.method == "none":
        return no_cancellation_snr(H, P_x, sigma2)
    if spec.method == "zf_linear":
        return zf_precoder_snr(H, spec.scaling, P_x, sigma2)
    if spec.method == "thp":
        return thp_snr(H, spec.ordering, P_x, sigma2, spec.shaping_loss_db)
    raise RejectedInputError(f"unknown precoder method '{spec.method}'")


def precode(tensor: ChannelTensor, powers: np.ndarray, noise_power: float, spec: PrecoderSpec) -> EqualizerReport:
    """Per-user SNR of the given precoder on every tone of a downstream tensor"""
    if tensor.direction != "downstream":
        logger.debug("Applying %s precoder to a %s tensor", spec.method, tensor.direction)
    return evaluate_tones(
        tensor, powers, noise_power,
        lambda Hk, p, s2: precoder_snr(Hk, spec, p, s2),
        spec.method,
    )


# Standalone testing
if __name__ == "__main__":
    rng = np.random.default_rng(0)
    H = np.eye(4) + 0.3 * (rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4)))
    qam = QamConstellation(4)
    x = qam.random_symbols(rng, 4)
    t = thp_precode(H, x, qam.half_edge)
    print(f"Sent:      {np.round(x, 3)}")
    print(f"Recovered: {np.round(thp_detect(H, H @ t, qam.half_edge), 3)}")
    F, G = zf_precoder(H)
    print(f"ZF precoder gain: {G[0, 0]:.4f}, max row norm {np.linalg.norm(F, axis=1).max():.4f}")
