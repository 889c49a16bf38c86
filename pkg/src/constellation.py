"""
Square QAM constellations used for symbol-level detection and THP
"""
import numpy as np

from src.errors import RejectedInputError


class QamConstellation:
    """
    Square 2^b-QAM on the odd-integer grid {±1, ±3, ..., ±(sqrt(M)-1)} per axis.

    The constellation fits in the square of half-edge A = sqrt(M), which is the
    modulo region used by the Tomlinson-Harashima precoder.
    """

    # 15 is the largest per-tone cap of any profile (vdsl17)
    def __init__(self, bits: int, bit_cap: int = 15):
        if bits <= 0 or bits % 2 or bits > bit_cap:
            raise RejectedInputError(f"square QAM needs an even bit count in [2, {bit_cap}], got {bits}")
        self.bits = bits
        self.size = 2 ** bits
        self.side = 2 ** (bits // 2)
        self.half_edge = float(self.side)
        self.levels = np.arange(-self.side + 1, self.side, 2, dtype=float)

    @property
    def points(self) -> np.ndarray:
        return (self.levels[:, None] + 1j * self.levels[None, :]).ravel()

    @property
    def average_energy(self) -> float:
        return 2 * (self.size - 1) / 3

    def _slice_axis(self, v: np.ndarray) -> np.ndarray:
        odd = 2 * np.floor(v / 2) + 1
        return np.clip(odd, -self.side + 1, self.side - 1)

    def slice(self, z) -> np.ndarray:
        """Nearest constellation point for each entry of z"""
        z = np.asarray(z, dtype=complex)
        return self._slice_axis(z.real) + 1j * self._slice_axis(z.imag)

    def random_symbols(self, rng: np.random.Generator, size) -> np.ndarray:
        re = rng.choice(self.levels, size=size)
        im = rng.choice(self.levels, size=size)
        return re + 1j * im

    def __repr__(self) -> str:
        return f"QamConstellation({self.size}-QAM)"
