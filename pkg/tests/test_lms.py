import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from lmsreadout.arith import FixedConfig
from lmsreadout.lms import (LengthMismatchError, LmsConfig, LmsFilter, OutputTap, Stability,
                            check_stability, stability_bound)
from lmsreadout.signal import ConfigError, Frame
from oracles import brute_lms


def _frames(x, d, k=0):
    return Frame(np.asarray(x, dtype=float), k), Frame(np.asarray(d, dtype=float), k)


class TestConfig:
    def test_defaults(self):
        c = LmsConfig()
        assert (c.taps, c.mu, c.engine, c.output_tap) == (64, 0.0006, "float64", OutputTap.ERROR)

    @pytest.mark.parametrize("mu", [0.0, -1e-3, float("nan")])
    def test_rejects_bad_mu(self, mu):
        with pytest.raises(ConfigError) as exc:
            LmsConfig(mu=mu)
        assert exc.value.field == "lms.mu"

    def test_rejects_bad_taps_and_init(self):
        with pytest.raises(ConfigError):
            LmsConfig(taps=0)
        with pytest.raises(ConfigError):
            LmsConfig(taps=3, weight_init=(1.0, 2.0))
        with pytest.raises(ConfigError):
            LmsConfig(weight_init="random")
        with pytest.raises(ConfigError):
            LmsConfig(engine="decimal")

    def test_fixed_shorthand(self):
        c = LmsConfig(engine="fixed")
        assert c.is_fixed and c.engine == FixedConfig()

    def test_initial_weights(self):
        assert LmsConfig(taps=3, weight_init="impulse").initial_weights().tolist() == [1, 0, 0]
        assert LmsConfig(taps=2, weight_init=[0.5, 0.25]).initial_weights().tolist() == [0.5, 0.25]


def test_per_sample_ops_follow_fir_error_update():
    f = LmsFilter(LmsConfig(taps=2, mu=0.5, weight_init=(1.0, 0.0)))
    y = f.fir_step(2.0)
    assert y == 2.0
    e = f.error_step(3.0, y)
    assert e == 1.0
    f.update_weights(e)
    # w += mu * e * [x0, 0]
    assert f.weights.tolist() == [2.0, 0.0]
    assert f.state.samples_seen == 1


def test_zero_step_freezes_weights():
    f = LmsFilter(LmsConfig(taps=3, weight_init=(0.5, 0.25, -1.0)), mu=0.0)
    rng = np.random.default_rng(0)
    f.process_frame(*_frames(rng.normal(size=50), rng.normal(size=50)))
    assert f.weights.tolist() == [0.5, 0.25, -1.0]


def test_zero_error_freezes_weights():
    """d equal to the current FIR output gives e = 0 and no update."""
    w0 = (0.5, -0.25)
    f = LmsFilter(LmsConfig(taps=2, weight_init=w0))
    x = np.array([1.0, -2.0, 0.5, 3.0])
    d = np.convolve(x, w0)[:4]
    res = f.process_frame(*_frames(x, d))
    assert np.all(res.e.samples == 0)
    assert f.weights.tolist() == list(w0)


@settings(max_examples=60, deadline=None)
@given(st.integers(1, 8), st.floats(1e-4, 0.05), st.integers(1, 200), st.integers(0, 2 ** 32))
def test_matches_brute_force(taps, mu, length, seed):
    rng = np.random.default_rng(seed)
    x, d = rng.normal(size=length), rng.normal(size=length)
    f = LmsFilter(LmsConfig(taps=taps, mu=mu))
    res = f.process_frame(*_frames(x, d))
    y_ref, e_ref, w_ref = brute_lms(x.tolist(), d.tolist(), taps, mu)
    np.testing.assert_allclose(res.y.samples, y_ref, rtol=1e-12, atol=1e-12)
    np.testing.assert_allclose(res.e.samples, e_ref, rtol=1e-12, atol=1e-12)
    np.testing.assert_allclose(f.weights, w_ref, rtol=1e-12, atol=1e-12)


@settings(max_examples=30, deadline=None)
@given(st.lists(st.integers(1, 40), min_size=1, max_size=6), st.sampled_from(["float64", "fixed"]))
def test_frame_split_invariance(cuts, engine):
    """State persists across frames: splitting a stream does not change its output."""
    rng = np.random.default_rng(sum(cuts))
    n = sum(cuts)
    x, d = rng.uniform(-1.5, 1.5, n), rng.uniform(-1.5, 1.5, n)
    whole = LmsFilter(LmsConfig(taps=5, mu=0.01, engine=engine))
    ref = whole.process_frame(*_frames(x, d)).e.samples
    parts = LmsFilter(LmsConfig(taps=5, mu=0.01, engine=engine))
    out, i = [], 0
    for k, c in enumerate(cuts):
        out.append(parts.process_frame(*_frames(x[i:i + c], d[i:i + c], k)).e.samples)
        i += c
    assert np.array_equal(np.concatenate(out), ref)
    assert np.array_equal(parts.state.weights, whole.state.weights)


@pytest.mark.parametrize("engine", ["float64", "fixed"])
def test_step_matches_process_frame(engine):
    rng = np.random.default_rng(5)
    x, d = rng.uniform(-1, 1, 64), rng.uniform(-1, 1, 64)
    a = LmsFilter(LmsConfig(taps=4, mu=0.02, engine=engine))
    b = LmsFilter(LmsConfig(taps=4, mu=0.02, engine=engine))
    res = a.process_frame(*_frames(x, d))
    pairs = [b.step(xi, di) for xi, di in zip(x, d)]
    assert np.array_equal(res.y.samples, [p[0] for p in pairs])
    assert np.array_equal(res.e.samples, [p[1] for p in pairs])


def test_fixed_outputs_on_grid_and_in_range():
    rng = np.random.default_rng(1)
    x, d = rng.uniform(-3, 3, 300), rng.uniform(-3, 3, 300)
    f = LmsFilter(LmsConfig(taps=8, mu=0.05, engine="fixed"))
    res = f.process_frame(*_frames(x, d))
    for s in (res.e.samples, res.y.samples):
        assert np.array_equal(s * 2 ** 14, np.round(s * 2 ** 14))
        assert s.min() >= -2 and s.max() < 2
    w = f.weights
    assert np.array_equal(w * 2 ** 15, np.round(w * 2 ** 15))
    assert w.min() >= -4 and w.max() < 4


def test_output_tap_selection():
    x, d = _frames([1.0, 0.5, -0.5], [0.5, 0.5, 0.5])
    r_e = LmsFilter(LmsConfig(taps=2, mu=0.1)).process_frame(x, d)
    r_y = LmsFilter(LmsConfig(taps=2, mu=0.1, output_tap="y")).process_frame(x, d)
    assert r_e.out == r_e.e
    assert r_y.out == r_y.y
    assert r_e.stats.error_power == pytest.approx(np.mean(r_e.e.samples ** 2))
    assert r_e.stats.samples == 3


def test_length_mismatch():
    f = LmsFilter(LmsConfig(taps=2))
    with pytest.raises(LengthMismatchError):
        f.process_frame(Frame(np.zeros(3)), Frame(np.zeros(4)))


def test_reset():
    f = LmsFilter(LmsConfig(taps=2, mu=0.1))
    f.process_frame(*_frames([1.0, 1.0], [1.0, 1.0]))
    f.reset()
    assert f.weights.tolist() == [0, 0] and f.state.delay_line.tolist() == [0, 0]


class TestStability:
    def test_bound(self):
        assert stability_bound(64, 1.0) == pytest.approx(2 / 64)

    @pytest.mark.parametrize("mu,expected", [
        (0.01, Stability.STABLE), (0.029, Stability.MARGINAL),
        (2 / 64, Stability.UNSTABLE), (0.1, Stability.UNSTABLE)])
    def test_classification(self, mu, expected):
        assert check_stability(LmsConfig(taps=64, mu=mu), 1.0) is expected

    def test_needs_positive_power(self):
        with pytest.raises(ValueError):
            check_stability(LmsConfig(), 0.0)


class TestSmallCases:
    def test_two_tap_average(self):
        f = LmsFilter(LmsConfig(taps=2, weight_init=(0.5, 0.5)), mu=0.0)
        assert [f.fir_step(1.0) for _ in range(3)] == [0.5, 1.0, 1.0]

    def test_identity_and_zero_filters(self):
        x = np.array([0.3, -0.7, 1.1])
        ident = LmsFilter(LmsConfig(taps=4, weight_init="impulse"), mu=0.0)
        assert [ident.fir_step(v) for v in x] == x.tolist()
        zero = LmsFilter(LmsConfig(taps=4), mu=0.0)
        assert [zero.fir_step(v) for v in x] == [0.0] * 3

    def test_single_tap_recurrence(self):
        f = LmsFilter(LmsConfig(taps=1, mu=0.5))
        f.step(1.0, 1.0)
        assert f.weights.tolist() == [0.5]
        f.step(1.0, 1.0)
        assert f.weights.tolist() == [0.75]

    @pytest.mark.parametrize("engine", ["float64", "fixed"])
    def test_impulse_with_d_equal_x(self, engine):
        x = np.random.default_rng(2).uniform(-1.5, 1.5, 200)
        x = np.round(x * 2 ** 14) / 2 ** 14
        f = LmsFilter(LmsConfig(taps=8, engine=engine, weight_init="impulse"))
        w0 = f.state.weights.copy()
        res = f.process_frame(*_frames(x, x))
        assert np.all(res.e.samples == 0)
        assert np.array_equal(f.state.weights, w0)

    def test_zero_frames(self):
        f = LmsFilter(LmsConfig(taps=4))
        res = f.process_frame(*_frames(np.zeros(10), np.zeros(10)))
        assert np.all(res.out.samples == 0) and np.all(f.weights == 0)

    def test_error_examples(self):
        f = LmsFilter(LmsConfig(taps=1))
        assert f.error_step(0.3, 0.3) == 0.0
        assert f.error_step(1.0, 0.0) == 1.0
        g = LmsFilter(LmsConfig(taps=1, engine="fixed"))
        assert g.error_step(1.9999, -1.9999) == 2 - 2 ** -14


@settings(max_examples=30)
@given(st.integers(1, 8), st.integers(0, 2 ** 32), st.floats(-3, 3), st.floats(-3, 3))
def test_frozen_weights_linear(taps, seed, a, b):
    rng = np.random.default_rng(seed)
    w = tuple(rng.normal(size=taps))
    x, z = rng.normal(size=50), rng.normal(size=50)

    def fir(sig):
        f = LmsFilter(LmsConfig(taps=taps, weight_init=w), mu=0.0)
        return np.array([f.fir_step(v) for v in sig])

    lhs = fir(a * x + b * z)
    rhs = a * fir(x) + b * fir(z)
    scale = max(1.0, np.abs(rhs).max())
    assert np.all(np.abs(lhs - rhs) <= 1e-12 * scale)


def test_frozen_weights_time_invariant():
    rng = np.random.default_rng(8)
    w = tuple(rng.normal(size=5))
    x = rng.normal(size=60)
    f1 = LmsFilter(LmsConfig(taps=5, weight_init=w), mu=0.0)
    f2 = LmsFilter(LmsConfig(taps=5, weight_init=w), mu=0.0)
    y = [f1.fir_step(v) for v in x]
    ys = [f2.fir_step(v) for v in np.concatenate([np.zeros(7), x])]
    assert ys[7:] == y


def test_demo_stability_is_stable():
    assert check_stability(LmsConfig(), 1.87) is Stability.STABLE
    assert check_stability(LmsConfig(taps=64, mu=10 / 64), 1.0) is Stability.UNSTABLE
    # N=1, P=1: bound is 2, 1.9 is within 10% below it
    assert check_stability(LmsConfig(taps=1, mu=1.9), 1.0) is Stability.MARGINAL
