"""
Adaptive upstream crosstalk cancellation
Matrix LMS and the two-stage (preprocessed) LMS with learning-curve and
condition-number diagnostics
"""
import logging
from dataclasses import dataclass, field
from typing import List, Literal, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator

from src.canceler import as_square
from src.errors import RejectedInputError, SingularDiagonalError

logger = logging.getLogger(__name__)

AdaptiveMode = Literal["lms", "two_stage"]

# Training symbols are sent once per superframe of this many DMT symbols
SYMBOLS_PER_SYNC = 275
DEFAULT_UPDATE_INSTANTS = (100, 300, 1000, 3000, 10000, 30000)


@dataclass
class LmsState:
    """
    Mutable state of one adaptation run.

    The canceler output is z = F^H (F_p y); F_p stays the identity in plain
    LMS mode.
    """

    F: np.ndarray
    mu: float
    F_p: Optional[np.ndarray] = None
    t: int = 0
    mse_curve: List[float] = field(default_factory=list)
    # (iteration, condition number before, condition number after)
    updates: List[Tuple[int, float, float]] = field(default_factory=list)

    def __post_init__(self):
        self.F = np.array(self.F, dtype=complex)
        if self.F.ndim != 2 or self.F.shape[0] != self.F.shape[1]:
            raise RejectedInputError(f"F must be square, got shape {self.F.shape}")
        if self.mu < 0:
            raise RejectedInputError("step size must be non-negative")
        if self.F_p is None:
            self.F_p = np.eye(self.F.shape[0], dtype=complex)
        else:
            self.F_p = np.array(self.F_p, dtype=complex)

    @property
    def N(self) -> int:
        return self.F.shape[0]

    def output(self, y: np.ndarray) -> np.ndarray:
        return self.F.conj().T @ (self.F_p @ y)


def initial_state(H, mu: float) -> LmsState:
    """Start from the per-line equalizer F = diag(1 / conj(H_ii))"""
    H = as_square(H)
    d = np.diag(H)
    if np.any(d == 0):
        raise SingularDiagonalError("initial LMS canceler needs a nonzero diagonal")
    return LmsState(F=np.diag(1.0 / d.conj()), mu=mu)


def lms_step(state: LmsState, y, x) -> LmsState:
    """
    One data-aided LMS iteration.

    e = x - F^H y_in with y_in = F_p y, then F <- F + 2 mu y_in e^H. The
    a-priori error power ||e||^2 / N is appended to the learning curve.
    """
    y = np.asarray(y, dtype=complex)
    x = np.asarray(x, dtype=complex)
    if y.shape != (state.N,) or x.shape != (state.N,):
        raise RejectedInputError(
            f"expected vectors of length {state.N}, got y {y.shape} and x {x.shape}"
        )

    y_in = state.F_p @ y
    e = x - state.F.conj().T @ y_in
    state.F += 2 * state.mu * np.outer(y_in, e.conj())
    state.t += 1
    state.mse_curve.append(float(np.vdot(e, e).real / state.N))
    return state


def two_stage_update(state: LmsState) -> LmsState:
    """Fold the adapted F into the preprocessor (F_p <- F^H F_p) and restart F at I"""
    state.F_p = state.F.conj().T @ state.F_p
    state.F = np.eye(state.N, dtype=complex)
    return state


def guarded_two_stage_update(state: LmsState, R_yy: np.ndarray) -> Tuple[float, float, bool]:
    """
    Fold F into the preprocessor only if that does not raise the condition
    number of the LMS input correlation.

    Args:
        state: Adaptation state, updated in place when the fold is taken
        R_yy: Correlation of the raw received vector, E[y y^H]

    Returns:
        (condition number before, after, whether the fold was taken).
        A skipped fold reports after == before.
    """
    before = condition_number(state.F_p @ R_yy @ state.F_p.conj().T)
    candidate = state.F.conj().T @ state.F_p
    after = condition_number(candidate @ R_yy @ candidate.conj().T)
    if after > before:
        return before, before, False
    two_stage_update(state)
    return before, after, True


# ------------------------------------------------------------------ diagnostics

def input_correlation(H, P_x: float, sigma2: float, F_p: Optional[np.ndarray] = None) -> np.ndarray:
    """E[y_in y_in^H] = F_p (P_x H H^H + sigma2 I) F_p^H"""
    H = as_square(H)
    R = P_x * H @ H.conj().T + sigma2 * np.eye(H.shape[0])
    if F_p is None:
        return R
    return F_p @ R @ F_p.conj().T


def condition_number(R: np.ndarray) -> float:
    """Eigenvalue spread of a Hermitian correlation matrix"""
    eig = np.linalg.eigvalsh((R + R.conj().T) / 2)
    if eig[0] <= 0:
        return float("inf")
    return float(eig[-1] / eig[0])


def smoothed_mse_db(curve, window: int = 50) -> np.ndarray:
    """Moving average of the learning curve in dB, one value per full window"""
    curve = np.asarray(curve, dtype=float)
    if window < 1:
        raise RejectedInputError("window must be >= 1")
    if len(curve) < window:
        return np.array([])
    smoothed = np.convolve(curve, np.ones(window) / window, mode="valid")
    return 10 * np.log10(np.maximum(smoothed, 1e-300))


def iterations_to_level(curve, level_db: float, window: int = 50, reference: int = 10) -> Optional[int]:
    """
    First iteration at which the smoothed MSE is level_db below the initial MSE.

    The initial MSE is the mean of the first ``reference`` samples. Returns
    None if the curve never gets there.
    """
    curve = np.asarray(curve, dtype=float)
    if len(curve) < max(window, reference):
        return None
    start_db = 10 * np.log10(np.mean(curve[:reference]))
    relative = smoothed_mse_db(curve, window) - start_db
    hits = np.flatnonzero(relative <= level_db)
    if len(hits) == 0:
        return None
    return int(hits[0] + window)


def make_test_channel(n: int, beta: float, seed: int) -> np.ndarray:
    """
    Hermitian channel with unit diagonal and diagonal dominance exactly beta.

    The off-diagonal part has zero trace, so the eigenvalues straddle 1.
    """
    if n < 2 or beta < 0:
        raise RejectedInputError("test channel needs n >= 2 and beta >= 0")
    rng = np.random.default_rng(seed)
    E = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    E = np.triu(E, 1)
    E = E + E.conj().T
    E *= beta / np.max(np.abs(E).sum(axis=1))
    return np.eye(n) + E


def elapsed_ms(iteration: int, symbol_rate: float) -> float:
    """Wall-clock time of ``iteration`` training symbols at one sync symbol per superframe"""
    return 1e3 * iteration * SYMBOLS_PER_SYNC / symbol_rate


# ------------------------------------------------------------------ driver

class AdaptiveSchedule(BaseModel):
    """
    One adaptation run.

    mu_hat is the normalized step: the LMS step is mu_hat / trace(E[y y^H]).
    """

    model_config = ConfigDict(frozen=True)

    mode: AdaptiveMode = "lms"
    mu_hat: float = Field(default=0.1, ge=0)
    iterations: int = Field(default=5000, gt=0)
    update_instants: Tuple[int, ...] = DEFAULT_UPDATE_INSTANTS
    seed: int = Field(default=0, ge=0)

    @field_validator("update_instants")
    @classmethod
    def _check_instants(cls, instants):
        if any(t <= 0 for t in instants):
            raise ValueError("update instants must be positive")
        return tuple(sorted(set(instants)))


def training_symbols(rng: np.random.Generator, shape: Tuple[int, ...]) -> np.ndarray:
    """Unit-power QPSK"""
    bits = rng.integers(0, 2, size=tuple(shape) + (2,))
    return ((2 * bits[..., 0] - 1) + 1j * (2 * bits[..., 1] - 1)) / np.sqrt(2)


def run_adaptation(H, P_x: float, sigma2: float, schedule: AdaptiveSchedule) -> Tuple[LmsState, np.ndarray]:
    """
    Train a canceler on y = H x + w with i.i.d. QPSK symbols.

    Two runs with the same seed see the same symbols and noise whatever the
    mode, so lms and two_stage curves can be compared pairwise.

    Returns:
        (final state, mse curve)
    """
    H = as_square(H)
    if P_x <= 0 or sigma2 < 0:
        raise RejectedInputError("need P_x > 0 and noise power >= 0")

    n = H.shape[0]
    R_yy = input_correlation(H, P_x, sigma2)
    mu = schedule.mu_hat / float(np.trace(R_yy).real)
    state = initial_state(H, mu)

    rng = np.random.default_rng(schedule.seed)
    x = np.sqrt(P_x) * training_symbols(rng, (schedule.iterations, n))
    w = np.sqrt(sigma2 / 2) * (rng.normal(size=(schedule.iterations, n)) + 1j * rng.normal(size=(schedule.iterations, n)))
    received = x @ H.T + w

    instants = set(schedule.update_instants) if schedule.mode == "two_stage" else set()
    for k in range(schedule.iterations):
        lms_step(state, received[k], x[k])
        if state.t in instants:
            before, after, taken = guarded_two_stage_update(state, R_yy)
            state.updates.append((state.t, before, after))
            if taken:
                logger.debug("Two-stage update at %d: condition number %.6g -> %.6g", state.t, before, after)
            else:
                logger.debug("Two-stage update at %d skipped: condition number %.6g would rise", state.t, before)

    return state, np.asarray(state.mse_curve)


# Standalone testing
if __name__ == "__main__":
    H = make_test_channel(8, 0.9, seed=1)
    for mode in ("lms", "two_stage"):
        schedule = AdaptiveSchedule(mode=mode, iterations=8000, seed=3)
        _, curve = run_adaptation(H, 1.0, 1e-9, schedule)
        print(f"{mode:>9}: -30 dB after {iterations_to_level(curve, -30.0)} iterations")
