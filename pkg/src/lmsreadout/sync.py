"""Frame synchronizer for the d and y streams (end-of-frame marker based)."""
from __future__ import annotations

import threading
from collections import deque

import numpy as np

from .signal import Frame


class AlignmentError(RuntimeError):
    """The two streams disagree on frame length or pulse index."""


class QueueOverflowError(RuntimeError):
    pass


class OffsetTooLargeError(ValueError):
    pass


class _Side:
    def __init__(self, name: str):
        self.name = name
        self.frames: deque[Frame] = deque()
        self.chunks: list[Frame] = []
        self.pushed = 0

    def push(self, frame: Frame) -> None:
        self.chunks.append(frame)
        if not frame.last:
            return
        if len(self.chunks) == 1:
            whole = frame
        else:
            idx = {c.pulse_index for c in self.chunks}
            if len(idx) != 1:
                raise AlignmentError(
                    f"{self.name}: chunks of one frame carry pulse indices {sorted(idx)}")
            whole = Frame(np.concatenate([c.samples for c in self.chunks]),
                          frame.pulse_index)
        self.chunks = []
        self.frames.append(whole)
        self.pushed += 1


class FrameQueuePair:
    """Pairs complete d and y frames in arrival order.

    A frame is complete once a chunk with ``last=True`` arrives. Each side is
    a FIFO; a pair is emitted whenever both sides hold a complete frame.
    ``cap`` bounds the number of complete frames pending on either side
    (``None`` = unbounded).
    """

    def __init__(self, cap: int | None = 16):
        self.cap = cap
        self._d = _Side("d")
        self._y = _Side("y")
        self.emitted = 0
        self._last_index = -1
        self._lock = threading.Lock()

    @property
    def pending_d(self) -> int:
        return len(self._d.frames)

    @property
    def pending_y(self) -> int:
        return len(self._y.frames)

    @property
    def pushed_d(self) -> int:
        return self._d.pushed

    @property
    def pushed_y(self) -> int:
        return self._y.pushed

    def push_d(self, frame: Frame) -> list[tuple[Frame, Frame]]:
        return self._push(self._d, frame)

    def push_y(self, frame: Frame) -> list[tuple[Frame, Frame]]:
        return self._push(self._y, frame)

    def _push(self, side: _Side, frame: Frame) -> list[tuple[Frame, Frame]]:
        with self._lock:
            side.push(frame)
            pairs = []
            while self._d.frames and self._y.frames:
                d, y = self._d.frames[0], self._y.frames[0]
                if len(d) != len(y):
                    raise AlignmentError(
                        f"frame length mismatch: d pulse {d.pulse_index} has {len(d)} "
                        f"samples, y pulse {y.pulse_index} has {len(y)}")
                if d.pulse_index != y.pulse_index:
                    raise AlignmentError(
                        f"pulse index mismatch: d={d.pulse_index}, y={y.pulse_index}")
                if d.pulse_index <= self._last_index:
                    raise AlignmentError(
                        f"pulse index {d.pulse_index} does not increase "
                        f"(previous {self._last_index})")
                self._d.frames.popleft()
                self._y.frames.popleft()
                self._last_index = d.pulse_index
                self.emitted += 1
                pairs.append((d, y))
            if self.cap is not None and len(side.frames) > self.cap:
                raise QueueOverflowError(
                    f"{side.name} queue exceeds cap of {self.cap} frames")
            return pairs


class GroupDelay:
    """Shift one side of a paired stream by a whole number of samples.

    Positive ``offset`` delays y; negative delays d by ``-offset`` (the same
    relative alignment without needing future samples). The delayed stream
    is zero-filled at the start of the run and its tail is carried into the
    next frame.
    """

    def __init__(self, offset: int, frame_length: int):
        if abs(offset) >= frame_length:
            raise OffsetTooLargeError(
                f"|offset|={abs(offset)} must be below the frame length {frame_length}")
        self.offset = offset
        self._carry = np.zeros(abs(offset))

    def apply(self, pair: tuple[Frame, Frame]) -> tuple[Frame, Frame]:
        d, y = pair
        if self.offset == 0:
            return pair
        shifted = y if self.offset > 0 else d
        s = np.concatenate([self._carry, np.asarray(shifted.samples, dtype=np.float64)])
        n = len(shifted)
        self._carry = s[n:]
        out = shifted.with_samples(s[:n])
        return (d, out) if self.offset > 0 else (out, y)


def compensate_group_delay(pair: tuple[Frame, Frame], offset: int,
                           state: GroupDelay | None = None) -> tuple[Frame, Frame]:
    """Functional form of :class:`GroupDelay` for a single pair or a carried state."""
    if state is None:
        state = GroupDelay(offset, len(pair[0]))
    return state.apply(pair)
