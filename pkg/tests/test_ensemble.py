import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from lmsreadout.ensemble import EnsembleAverage
from lmsreadout.lms import LengthMismatchError
from lmsreadout.signal import Frame
from oracles import direct_mean


def test_first_pulse_is_copied():
    ens = EnsembleAverage()
    d = ens.absorb(Frame(np.array([1.0, -2.0]), 0))
    assert d.samples.tolist() == [1.0, -2.0]
    assert ens.k == 1


def test_recursion():
    ens = EnsembleAverage()
    for k, v in enumerate([3.0, 5.0, 10.0]):
        d = ens.absorb(Frame(np.array([v]), k))
    assert d.samples.tolist() == [6.0]
    assert d.pulse_index == 2


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 40), st.integers(1, 30), st.integers(0, 2 ** 32))
def test_matches_direct_mean(length, K, seed):
    rng = np.random.default_rng(seed)
    pulses = rng.normal(scale=3.0, size=(K, length))
    ref = direct_mean(pulses.tolist())
    ens = EnsembleAverage()
    for k in range(K):
        d = ens.absorb(Frame(pulses[k], k)).samples
        scale = np.abs(pulses[:k + 1]).max(axis=0)
        assert np.all(np.abs(d - ref[k]) <= 1e-12 * scale)


def test_chunks_emit_only_on_last():
    ens = EnsembleAverage()
    assert ens.absorb(Frame(np.array([1.0, 2.0]), 0, last=False)) is None
    d = ens.absorb(Frame(np.array([3.0]), 0))
    assert d.samples.tolist() == [1.0, 2.0, 3.0]
    assert ens.k == 1


def test_length_change_rejected():
    ens = EnsembleAverage()
    ens.absorb(Frame(np.zeros(4)))
    with pytest.raises(LengthMismatchError):
        ens.absorb(Frame(np.zeros(5), 1))


def test_resume_from_state():
    a = EnsembleAverage()
    for k in range(3):
        a.absorb(Frame(np.full(2, float(k)), k))
    b = EnsembleAverage(a.d, a.k)
    x = Frame(np.array([7.0, 8.0]), 3)
    assert a.absorb(x) == b.absorb(x)


def test_state_validation():
    with pytest.raises(ValueError):
        EnsembleAverage(np.zeros(2), 0)
    with pytest.raises(ValueError):
        EnsembleAverage(None, 2)


def test_emitted_frame_is_a_snapshot():
    ens = EnsembleAverage()
    d0 = ens.absorb(Frame(np.array([1.0])))
    ens.absorb(Frame(np.array([3.0]), 1))
    assert d0.samples.tolist() == [1.0]


def test_order_insensitive():
    rng = np.random.default_rng(4)
    pulses = rng.normal(size=(20, 50))
    finals = []
    for perm in (range(20), rng.permutation(20), rng.permutation(20)):
        ens = EnsembleAverage()
        for k, i in enumerate(perm):
            d = ens.absorb(Frame(pulses[i], k))
        finals.append(d.samples)
    for f in finals[1:]:
        np.testing.assert_allclose(f, finals[0], rtol=1e-9, atol=1e-12)


def test_resume_from_single_pulse_state():
    ens = EnsembleAverage(np.array([2.0]), 1)
    assert ens.absorb(Frame(np.array([4.0]), 1)).samples.tolist() == [3.0]
