"""Husimi Q distribution of the field subsystem.

Q(q2, p2) = (1/pi) <beta|rho_field|beta> with beta = (q2 + i p2)/sqrt(2). Since
d^2 beta = dq2 dp2 / 2, the grid normalization integrates Q dq2 dp2 / 2.
"""

import math
from dataclasses import dataclass

import numpy as np
from numpy.typing import NDArray
from scipy.ndimage import label, maximum_filter

from src.model import QuantumState, fock_coherent_amplitudes


@dataclass(frozen=True)
class HusimiGridSpec:
    extent: float = 10.0
    """Half-width of the square q2, p2 window."""
    points: int = 201

    def axis(self) -> NDArray[np.float64]:
        return np.linspace(-self.extent, self.extent, self.points)


@dataclass(frozen=True)
class HusimiGrid:
    q2_axis: NDArray[np.float64]
    p2_axis: NDArray[np.float64]
    values: NDArray[np.float64]
    """Shape (len(p2_axis), len(q2_axis))."""
    timestamp: float = 0.0

    def normalization(self) -> float:
        dq = self.q2_axis[1] - self.q2_axis[0]
        dp = self.p2_axis[1] - self.p2_axis[0]
        return float(self.values.sum() * dq * dp / 2.0)

    def peak(self) -> tuple[float, float]:
        j, i = np.unravel_index(np.argmax(self.values), self.values.shape)
        return float(self.q2_axis[i]), float(self.p2_axis[j])

    def rows(self) -> list[tuple[float, float, float]]:
        return [
            (float(q2), float(p2), float(self.values[j, i]))
            for j, p2 in enumerate(self.p2_axis)
            for i, q2 in enumerate(self.q2_axis)
        ]


def husimi_q(
    state: QuantumState, grid: HusimiGridSpec | None = None, timestamp: float = 0.0
) -> HusimiGrid:
    grid = grid or HusimiGridSpec()
    axis = grid.axis()
    blocks = state.blocks()
    values = np.empty((axis.size, axis.size))
    for j, p2 in enumerate(axis):
        beta = (axis + 1j * p2) / math.sqrt(2.0)
        amps = fock_coherent_amplitudes(beta, state.cutoff)
        # <beta|psi_s> for both atomic blocks, traced over the atom
        overlaps = amps.conj() @ blocks.T
        values[j] = np.sum(np.abs(overlaps) ** 2, axis=1) / math.pi
    return HusimiGrid(q2_axis=axis, p2_axis=axis, values=values, timestamp=timestamp)


def count_local_maxima(grid: HusimiGrid, rel_height: float = 0.1) -> int:
    """Distinct local maxima higher than ``rel_height`` times the global peak."""
    values = grid.values
    is_peak = values == maximum_filter(values, size=3, mode="nearest")
    is_peak &= values >= rel_height * values.max()
    _, count = label(is_peak)
    return int(count)
