import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays
from scipy import signal as sps

from specmat import SensorKind, SpectralSample
from specmat.preprocess import (
    FilterSpec,
    _forward_backward,
    _odd_extend,
    design_butterworth,
    difference_quotient,
    filtfilt,
    lfilter,
    normalize_unit,
    preprocess_arrays,
    preprocess_sample,
    steady_state,
    transform,
)

# orders 1..12 are all well conditioned on this cutoff band
SAFE_CUTOFFS = st.floats(0.15, 0.9)
ORDERS = st.integers(1, 12)


# --- filter design ----------------------------------------------------------

def test_first_order_half_band_by_hand():
    # H(s) = 1/(s+1), pre-warped tan(pi/4) = 1, s = (z-1)/(z+1) -> (1 + z^-1)/2
    c = design_butterworth(FilterSpec(order=1, cutoff=0.5))
    assert np.allclose(c.b, [0.5, 0.5], atol=1e-12)
    assert np.allclose(c.a, [1.0, 0.0], atol=1e-12)


def test_default_design_matches_scipy():
    c = design_butterworth(FilterSpec())
    b, a = sps.butter(5, 0.1)
    assert np.allclose(c.b, b, rtol=1e-10, atol=1e-15)
    assert np.allclose(c.a, a, rtol=1e-10, atol=1e-12)


@settings(max_examples=60, deadline=None)
@given(ORDERS, SAFE_CUTOFFS)
def test_design_matches_scipy_everywhere(order, cutoff):
    c = design_butterworth(FilterSpec(order, cutoff))
    b, a = sps.butter(order, cutoff)
    w = np.linspace(0, math.pi, 64)
    _, h = sps.freqz(b, a, worN=w)
    assert np.allclose(np.abs(c.response(w)), np.abs(h), atol=1e-8)


@settings(max_examples=60, deadline=None)
@given(ORDERS, SAFE_CUTOFFS)
def test_design_invariants(order, cutoff):
    c = design_butterworth(FilterSpec(order, cutoff))
    assert np.all(np.abs(c.poles()) < 1 - 1e-9)
    assert abs(c.b.sum() / c.a.sum() - 1.0) <= 1e-9
    assert abs(abs(c.response(math.pi * cutoff)) - math.sqrt(0.5)) <= 1e-6


def test_default_edge_gain():
    c = design_butterworth(FilterSpec(order=5, cutoff=0.1))
    assert abs(abs(c.response(math.pi * 0.1)) - 0.70710678) < 1e-6
    assert abs(abs(c.response(0.0)) - 1.0) < 1e-9


@pytest.mark.parametrize("spec", [FilterSpec(0, 0.1), FilterSpec(13, 0.1), FilterSpec(5, 0.0),
                                  FilterSpec(5, 1.0), FilterSpec(5, -0.2)])
def test_design_rejects_out_of_range(spec):
    with pytest.raises(ValueError):
        design_butterworth(spec)


def test_ill_conditioned_design_raises():
    with pytest.raises(ValueError, match="ill-conditioned"):
        design_butterworth(FilterSpec(order=12, cutoff=0.01))


# --- filtering --------------------------------------------------------------

def test_lfilter_matches_scipy(rng):
    c = design_butterworth(FilterSpec(4, 0.3))
    x = rng.normal(size=(3, 80))
    zi = rng.normal(size=4)
    ref = sps.lfilter(c.b, c.a, x, zi=np.tile(zi[:, None], 3).T)[0]
    out = lfilter(c, x, np.tile(zi[:, None], (1, 3)))
    assert np.allclose(out, ref, atol=1e-12)


def test_steady_state_matches_scipy():
    c = design_butterworth(FilterSpec())
    assert np.allclose(steady_state(c), sps.lfilter_zi(c.b, c.a), atol=1e-12)


def test_constant_signal_passes_unchanged():
    c = design_butterworth(FilterSpec())
    out = filtfilt(c, np.full(288, 3.25))
    assert np.allclose(out, 3.25, atol=1e-9)


def test_impulse_response_is_symmetric():
    c = design_butterworth(FilterSpec(order=5, cutoff=0.1))
    x = np.zeros(201)
    x[100] = 1.0
    y = filtfilt(c, x)
    assert np.max(np.abs(y - y[::-1])) < 1e-8
    assert np.argmax(y) == 100


def test_sinusoid_at_cutoff_is_halved():
    cutoff = 0.1
    c = design_butterworth(FilterSpec(order=5, cutoff=cutoff))
    n = np.arange(2000)
    x = np.sin(math.pi * cutoff * n)
    y = filtfilt(c, x)
    # least-squares amplitude of the interior, away from the edges
    inner = slice(300, 1700)
    basis = np.stack([np.sin(math.pi * cutoff * n[inner]), np.cos(math.pi * cutoff * n[inner])], 1)
    coef, *_ = np.linalg.lstsq(basis, y[inner], rcond=None)
    amplitude = math.hypot(*coef)
    assert amplitude == pytest.approx(0.5, rel=0.02)
    assert abs(coef[1]) < 1e-3  # no phase shift


def test_single_ordering_matches_scipy(rng):
    c = design_butterworth(FilterSpec())
    x = rng.normal(size=288).cumsum()
    one_pass = _forward_backward(c, _odd_extend(x, 15))[15:-15]
    ref = sps.filtfilt(c.b, c.a, x, padtype="odd", padlen=15)
    assert np.max(np.abs(one_pass - ref)) < 1e-10


def test_averaged_filtfilt_matches_scipy_in_interior(rng):
    c = design_butterworth(FilterSpec())
    x = rng.normal(size=288).cumsum()
    diff = np.abs(filtfilt(c, x) - sps.filtfilt(c.b, c.a, x, padtype="odd", padlen=15))
    # the orderings differ only by edge transients that decay with the pole radius
    assert np.max(diff[100:-100]) < 1e-5


def test_flat_input_with_rounding_ripple_stays_flat():
    x = np.full(288, 1.0 / 3.0)
    x[::7] += 1e-16
    out = transform(x, SensorKind.VISIBLE.default_grid(), SensorKind.VISIBLE)
    assert np.array_equal(out, np.full(288, 0.5))


@settings(max_examples=40, deadline=None)
@given(arrays(np.float64, st.integers(40, 120), elements=st.floats(-100, 100)), st.integers(1, 6),
       SAFE_CUTOFFS)
def test_time_reversal_symmetry(x, order, cutoff):
    c = design_butterworth(FilterSpec(order, cutoff))
    forward = filtfilt(c, x)
    backward = filtfilt(c, x[::-1])[::-1]
    assert np.max(np.abs(forward - backward)) < 1e-9


def test_filtfilt_batches_rows_independently(rng):
    c = design_butterworth(FilterSpec())
    X = rng.normal(size=(4, 100))
    batched = filtfilt(c, X)
    for row, out in zip(X, batched):
        assert np.allclose(filtfilt(c, row), out, atol=1e-12)


def test_filtfilt_short_signal_rejected():
    c = design_butterworth(FilterSpec(order=5))
    with pytest.raises(ValueError, match="too short"):
        filtfilt(c, np.ones(15))


def test_filtfilt_rejects_nan():
    c = design_butterworth(FilterSpec())
    with pytest.raises(ValueError):
        filtfilt(c, np.r_[np.ones(50), np.nan])


# --- difference quotient and normalization ----------------------------------

def test_difference_quotient_by_hand():
    out = difference_quotient([0.0, 2.0, 6.0], [100.0, 101.0, 103.0])
    assert np.array_equal(out, [2.0, 2.0, 2.0])


def test_difference_quotient_of_constant_and_ramp():
    w = SensorKind.VISIBLE.default_grid()
    assert np.array_equal(difference_quotient(np.full_like(w, 4.0), w), np.zeros_like(w))
    assert np.allclose(difference_quotient(w, w), 1.0)


def test_difference_quotient_pads_last_value():
    out = difference_quotient([1.0, 2.0, 4.0, 8.0], [0.0, 1.0, 2.0, 3.0])
    assert out.tolist() == [1.0, 2.0, 4.0, 4.0]


@pytest.mark.parametrize("signal, wl", [([1.0], [1.0]), ([1.0, 2.0], [2.0, 1.0]),
                                        ([1.0, 2.0], [1.0, 1.0]), ([1.0, 2.0, 3.0], [1.0, 2.0])])
def test_difference_quotient_errors(signal, wl):
    with pytest.raises(ValueError):
        difference_quotient(signal, wl)


def test_normalize_by_hand():
    assert np.allclose(normalize_unit([-1.0, 0.0, 3.0]), [0.0, 0.25, 1.0])


def test_normalize_flat_is_half():
    assert np.array_equal(normalize_unit(np.full(7, -2.0)), np.full(7, 0.5))


def test_normalize_rejects_non_finite():
    with pytest.raises(ValueError):
        normalize_unit([0.0, np.inf])


@settings(max_examples=80, deadline=None)
@given(arrays(np.float64, st.integers(2, 50), elements=st.floats(-1e6, 1e6)))
def test_normalize_spans_unit_interval(x):
    out = normalize_unit(x)
    assert np.all((out >= 0) & (out <= 1))
    if np.ptp(x) > 0:
        assert out.min() == 0.0 and out.max() == 1.0


# --- full pipeline ----------------------------------------------------------

def _sample(sensor, values):
    return SpectralSample("o", sensor, 0, sensor.default_grid(), np.asarray(values, float))


def test_constant_samples_give_half():
    for sensor in SensorKind:
        fv = preprocess_sample(_sample(sensor, np.full(sensor.expected_dim, 2.5)))
        assert fv.values.shape == (sensor.expected_dim,)
        assert np.allclose(fv.values, 0.5)


def test_toy_nir_composition():
    out = transform([0.0, 2.0, 6.0], [100.0, 101.0, 103.0], SensorKind.NIR)
    assert np.array_equal(out, [0.5, 0.5, 0.5])


def test_visible_path_is_filtered(rng):
    x = 2.0 + 0.01 * rng.normal(size=288)
    w = SensorKind.VISIBLE.default_grid()
    filtered = transform(x, w, SensorKind.VISIBLE)
    raw = transform(x, w, SensorKind.NIR)
    assert not np.allclose(filtered, raw)
    # smoothing lowers sample-to-sample jitter of the derivative
    assert np.std(np.diff(filtered)) < np.std(np.diff(raw))


def test_invalid_sample_rejected():
    with pytest.raises(ValueError):
        preprocess_sample(_sample(SensorKind.NIR, np.ones(330)))


positive_spectra = st.integers(0, 2 ** 32 - 1).map(
    lambda s: np.abs(np.random.default_rng(s).normal(size=331)).cumsum() % 7 + 0.1)


@settings(max_examples=25, deadline=None)
@given(positive_spectra, st.sampled_from(list(SensorKind)))
def test_output_in_unit_interval(x, sensor):
    fv = preprocess_sample(_sample(sensor, x[:sensor.expected_dim]))
    assert fv.values.shape == (sensor.expected_dim,)
    assert np.all((fv.values >= 0) & (fv.values <= 1))


@settings(max_examples=25, deadline=None)
@given(positive_spectra, st.floats(1e-3, 1e3), st.sampled_from(list(SensorKind)))
def test_gain_invariance(x, alpha, sensor):
    x = x[:sensor.expected_dim]
    a = preprocess_sample(_sample(sensor, x)).values
    b = preprocess_sample(_sample(sensor, alpha * x)).values
    assert np.max(np.abs(a - b)) < 1e-9


def test_preprocess_arrays_matches_per_sample(small_corpus):
    for sensor in SensorKind:
        arrays = small_corpus.arrays(sensor)
        X = preprocess_arrays(arrays)
        samples = [s for s in small_corpus.samples if s.sensor is sensor]
        for i in (0, 7, len(samples) - 1):
            assert np.allclose(X[i], preprocess_sample(samples[i]).values, atol=1e-12)
