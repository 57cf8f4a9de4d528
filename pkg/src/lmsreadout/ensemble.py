"""Running per-sample ensemble average used as the desired signal d."""
from __future__ import annotations

import numpy as np

from .lms import LengthMismatchError
from .signal import Frame


class EnsembleAverage:
    """Cumulative mean of every pulse absorbed so far, kept in binary64.

    ``d_new[n] = (d_old[n] * k + x[n]) / (k + 1)`` with ``k`` the number of
    pulses already absorbed.
    """

    def __init__(self, d: np.ndarray | None = None, k: int = 0):
        if k < 0:
            raise ValueError("k must be >= 0")
        if (d is None) != (k == 0):
            raise ValueError("d must be given exactly when k > 0")
        self.d = None if d is None else np.array(d, dtype=np.float64)
        self.k = k
        self._partial: list[np.ndarray] = []

    def absorb(self, x_frame: Frame) -> Frame | None:
        """Absorb one frame (or chunk); returns the updated d once ``last`` arrives.

        Chunks with ``last=False`` are buffered and nothing is emitted, so no
        d sample is observable before its x frame has completed.
        """
        self._partial.append(np.asarray(x_frame.samples, dtype=np.float64))
        if not x_frame.last:
            return None
        x = np.concatenate(self._partial)
        self._partial = []
        if self.d is not None and x.size != self.d.size:
            raise LengthMismatchError(
                f"pulse {x_frame.pulse_index} has {x.size} samples, average has {self.d.size}")
        k = self.k
        if self.d is None:
            self.d = x.copy()
        else:
            self.d = (self.d * k + x) / (k + 1)
        self.k = k + 1
        return Frame(self.d, x_frame.pulse_index)
