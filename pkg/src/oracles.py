"""
Closed-form reference results for symmetric crosstalk channels, and the
self-test built on them

All closed forms use unit direct gain, unit noise and per-user SNR snr on
the channel (1 - alpha) I + alpha 11^T.
"""
import logging
from typing import List, NamedTuple

import numpy as np

from src.canceler import (
    azf_snr,
    box_channel,
    gdfe_snr,
    mfb_snr,
    mmse_snr,
    no_cancellation_snr,
    swp_snr,
    zf_snr,
)
from src.channel import diag_dominance
from src.constellation import QamConstellation
from src.errors import SingularChannelError
from src.precoder import PrecoderSpec, thp_decompose, thp_detect, thp_precode, thp_snr, zf_precoder, zf_precoder_snr
from src.profile import make_profile
from src.rate import mac_sum_capacity, zf_rate_bounds

logger = logging.getLogger(__name__)

ALPHAS_TWO_USER = (0.0, 0.1, 0.3, 0.5, 0.7)
ALPHAS_THREE_USER = (0.0, 0.05, 0.1, 0.2)


class Check(NamedTuple):
    name: str
    passed: bool
    detail: str


# ------------------------------------------------------------------ two users, upstream

def none_two_user(alpha: float, snr: float) -> float:
    """One interferer of relative power alpha^2 treated as noise"""
    return snr / (alpha ** 2 * snr + 1)


def swp_two_user(alpha: float, snr: float) -> float:
    return snr


def mfb_two_user(alpha: float, snr: float) -> float:
    return (1 + alpha ** 2) * snr


def zf_two_user(alpha: float, snr: float) -> float:
    return snr * (1 - alpha ** 2) ** 2 / (1 + alpha ** 2)


def mmse_two_user(alpha: float, snr: float) -> float:
    """Unbiased MMSE SINR from the 2x2 inverse of I + snr H^H H"""
    a = 1 + snr * (1 + alpha ** 2)
    return (a * a - (2 * alpha * snr) ** 2) / a - 1


# ------------------------------------------------------------------ two users, downstream

def thp_r_diagonal(alpha: float) -> np.ndarray:
    s = np.sqrt(1 + alpha ** 2)
    return np.array([s, (1 - alpha ** 2) / s])


def thp_unmodded_power(alpha: float) -> float:
    """Power of the second precoded symbol without the modulo, for unit-power symbols"""
    return 1 + 4 * alpha ** 2 / (1 - alpha ** 2) ** 2


def zf_precoder_gain(alpha: float) -> float:
    return (1 - alpha ** 2) / np.sqrt(1 + alpha ** 2)


def zf_precoder_amplification(alpha: float) -> float:
    """Squared row norm of the unscaled precoder H^-1 diag(H)"""
    return (1 + alpha ** 2) / (1 - alpha ** 2) ** 2


def zf_precoder_two_user(alpha: float, snr: float) -> float:
    return snr * (1 - alpha ** 2) ** 2 / (1 + alpha ** 2)


# ------------------------------------------------------------------ three users

def azf_three_user(alpha: float, snr: float) -> float:
    return snr * (1 - 2 * alpha ** 2) ** 2 / (2 * alpha ** 4 * snr + 2 * alpha ** 2 + 1)


# ------------------------------------------------------------------ random channels

def random_channel(n: int, beta: float, rng: np.random.Generator) -> np.ndarray:
    """
    Complex channel with unit-modulus diagonal and diagonal dominance exactly beta
    """
    H = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    np.fill_diagonal(H, 0)
    off = np.abs(H)
    H *= beta / max(off.sum(axis=0).max(), off.sum(axis=1).max())
    np.fill_diagonal(H, np.exp(2j * np.pi * rng.uniform(size=n)))
    return H


def _rel_close(a, b, tol: float) -> bool:
    a, b = np.asarray(a, dtype=float), np.asarray(b, dtype=float)
    return bool(np.all(np.abs(a - b) <= tol * np.maximum(np.abs(b), 1e-300)))


def _check(name: str, failures: List[str], total: int) -> Check:
    if failures:
        return Check(name, False, f"{len(failures)} failure(s), first: {failures[0]}")
    return Check(name, True, f"{total} case(s)")


def check_two_user_upstream() -> Check:
    failures, total = [], 0
    for alpha in ALPHAS_TWO_USER:
        H = box_channel(2, alpha)
        for snr_db in (10, 20):
            snr = 10 ** (snr_db / 10)
            expected = {
                "zf": (zf_snr(H, snr, 1.0), zf_two_user(alpha, snr)),
                "mmse": (mmse_snr(H, snr, 1.0), mmse_two_user(alpha, snr)),
                "none": (no_cancellation_snr(H, snr, 1.0), none_two_user(alpha, snr)),
                "swp": (swp_snr(H, 0, snr, 1.0), swp_two_user(alpha, snr)),
                "mfb": (mfb_snr(H, 0, snr, 1.0), mfb_two_user(alpha, snr)),
            }
            for name, (got, want) in expected.items():
                total += 1
                if not _rel_close(got, want, 1e-9):
                    failures.append(f"{name} alpha={alpha} snr={snr_db} dB: {np.ravel(got)[0]:.6g} != {want:.6g}")
    return _check("two-user cancelers match closed forms", failures, total)


def check_three_user_azf() -> Check:
    failures, total = [], 0
    for alpha in ALPHAS_THREE_USER:
        H = box_channel(3, alpha)
        for snr_db in (20, 40):
            snr = 10 ** (snr_db / 10)
            total += 1
            if not _rel_close(azf_snr(H, snr, 1.0), azf_three_user(alpha, snr), 1e-9):
                failures.append(f"alpha={alpha} snr={snr_db} dB")

    H = box_channel(3, 0.1)
    gap = np.log2(1 + zf_snr(H, 1e4, 1.0)[0]) - np.log2(1 + azf_snr(H, 1e4, 1.0)[0])
    total += 1
    if gap <= 0.5:
        failures.append(f"zf - azf gap at alpha=0.1, 40 dB is {gap:.3f} bit")
    return _check("three-user approximate ZF matches closed form", failures, total)


def check_thp_round_trip(trials: int = 1000, seed: int = 0) -> Check:
    rng = np.random.default_rng(seed)
    spec = PrecoderSpec(method="thp")
    qam = QamConstellation(4, bit_cap=make_profile("gfast106").bit_cap)
    A = spec.half_edge(qam.bits)
    failures = []
    for trial in range(trials):
        n = (2, 4, 8)[trial % 3]
        H = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
        x = qam.random_symbols(rng, n)
        try:
            t = thp_precode(H, x, A, spec.ordering)
        except SingularChannelError:
            continue
        Q, _ = thp_decompose(H, spec.ordering)
        precoded = Q.conj().T @ t
        if np.any(np.abs(precoded.real) > A + 1e-9) or np.any(np.abs(precoded.imag) > A + 1e-9):
            failures.append(f"trial {trial}: precoded symbol outside the modulo square")
        if np.max(np.abs(thp_detect(H, H @ t, A, spec.ordering) - x)) > 1e-8:
            failures.append(f"trial {trial}: symbols not recovered")

    for alpha in ALPHAS_TWO_USER[:-1]:
        H = box_channel(2, alpha)
        R_diag = np.sqrt(thp_snr(H, None, 1.0, 1.0))
        if not _rel_close(R_diag, thp_r_diagonal(alpha), 1e-9):
            failures.append(f"R diagonal at alpha={alpha}")
    return _check("THP round trip and triangular factor", failures, trials)


def check_zf_precoder(trials: int = 1000, seed: int = 1) -> Check:
    failures = []
    for alpha in ALPHAS_TWO_USER:
        H = box_channel(2, alpha)
        F, G = zf_precoder(H)
        if not _rel_close(np.diag(G), zf_precoder_gain(alpha), 1e-12):
            failures.append(f"gain at alpha={alpha}")
        if not _rel_close(zf_precoder_snr(H, "row_norm", 100.0, 1.0), zf_precoder_two_user(alpha, 100.0), 1e-9):
            failures.append(f"SNR at alpha={alpha}")
        if not _rel_close(np.max(np.sum(np.abs(F / G[0, 0]) ** 2, axis=1)), zf_precoder_amplification(alpha), 1e-9):
            failures.append(f"amplification at alpha={alpha}")

    rng = np.random.default_rng(seed)
    for trial in range(trials):
        n = int(rng.integers(2, 9))
        H = np.eye(n) + 0.5 * (rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n)))
        try:
            F, _ = zf_precoder(H)
        except SingularChannelError:
            continue
        if np.max(np.linalg.norm(F, axis=1)) > 1 + 1e-12:
            failures.append(f"trial {trial}: row norm above 1")
    return _check("ZF precoder gain scaling", failures, trials)


def check_bound_ordering(trials: int = 1000, seed: int = 2, snr: float = 1e8) -> Check:
    """none <= zf <= mmse <= mfb, gdfe vs mfb and the MAC sum, ZF inside its bounds"""
    rng = np.random.default_rng(seed)
    tol = 1e-9
    failures = []
    for trial in range(trials):
        n = (2, 3, 4, 6)[trial % 4]
        beta = rng.uniform(0.01, 1.5)
        H = random_channel(n, beta, rng)
        try:
            zf = zf_snr(H, snr, 1.0)
            gdfe = gdfe_snr(H, None, snr, 1.0)
        except SingularChannelError:
            continue
        none = no_cancellation_snr(H, snr, 1.0)
        mmse = mmse_snr(H, snr, 1.0)
        mfb = np.array([mfb_snr(H, i, snr, 1.0) for i in range(n)])

        if np.any(none > zf * (1 + tol)) or np.any(zf > mmse * (1 + tol)) or np.any(mmse > mfb * (1 + tol)):
            failures.append(f"trial {trial}: ordering none <= zf <= mmse <= mfb violated (beta={beta:.3f})")
        if not _rel_close(gdfe[0], mfb[0], 1e-9):
            failures.append(f"trial {trial}: last-detected GDFE user differs from MFB")
        if np.sum(np.log2(1 + gdfe)) > mac_sum_capacity(H, np.full(n, snr), 1.0) * (1 + tol):
            failures.append(f"trial {trial}: GDFE sum rate above MAC sum capacity")

        measured_beta = diag_dominance(H)[2]
        if measured_beta < 0.41:
            bits = np.log2(1 + zf)
            for i in range(n):
                lower, upper = zf_rate_bounds(H[i, i], measured_beta, snr, 1.0, 0.0)
                if not (lower - 1e-9 <= bits[i] <= upper + 1e-9):
                    failures.append(f"trial {trial}: ZF rate outside its bounds for user {i}")
    return _check("rate ordering and bounds on random channels", failures, trials)


def run_selftest() -> List[Check]:
    """Run every closed-form and random-channel check"""
    checks = [
        check_two_user_upstream(),
        check_three_user_azf(),
        check_thp_round_trip(),
        check_zf_precoder(),
        check_bound_ordering(),
    ]
    for check in checks:
        logger.debug("%s: %s (%s)", check.name, "pass" if check.passed else "FAIL", check.detail)
    return checks


# Standalone testing
if __name__ == "__main__":
    for check in run_selftest():
        print(f"{'✅' if check.passed else '❌'} {check.name}: {check.detail}")
