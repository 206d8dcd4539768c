"""Raw spectrum -> feature vector.

Visible-light samples are smoothed with a zero-phase Butterworth low-pass
before differentiation; NIR samples go straight to the difference
quotient. Every feature vector is min-max scaled to [0, 1] per sample.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from specmat.core import SensorArrays, SensorKind, SpectralSample


# derivative ranges below this fraction of |intensity| / step are rounding noise
FLAT_RTOL = 1e-10


@dataclass(frozen=True)
class FilterSpec:
    order: int = 5
    cutoff: float = 0.1  # fraction of Nyquist, sample-index domain

    def check(self) -> None:
        if not isinstance(self.order, (int, np.integer)) or not 1 <= self.order <= 12:
            raise ValueError(f"filter order must be an integer in [1, 12], got {self.order}")
        if not 0.0 < self.cutoff < 1.0:
            raise ValueError(f"cutoff must lie in (0, 1), got {self.cutoff}")


@dataclass(frozen=True, eq=False)
class IirCoefficients:
    b: np.ndarray
    a: np.ndarray

    @property
    def order(self) -> int:
        return len(self.a) - 1

    def poles(self) -> np.ndarray:
        return np.roots(self.a)

    def response(self, w: np.ndarray | float) -> np.ndarray:
        """Complex frequency response at normalized angular frequency ``w`` (rad/sample)."""
        z = np.exp(-1j * np.asarray(w, dtype=float))
        return np.polyval(self.b[::-1], z) / np.polyval(self.a[::-1], z)


@dataclass(frozen=True, eq=False)
class FeatureVector:
    values: np.ndarray
    sensor: SensorKind
    object_id: str


def design_butterworth(spec: FilterSpec = FilterSpec()) -> IirCoefficients:
    """Digital Butterworth low-pass via bilinear transform with pre-warping.

    The analog prototype poles are scaled to ``tan(pi * cutoff / 2)`` so the
    digital -3 dB point lands exactly on ``cutoff``; all zeros sit at z = -1.
    """
    spec.check()
    n = spec.order
    warped = math.tan(math.pi * spec.cutoff / 2.0)
    k = np.arange(1, n + 1)
    s_poles = warped * np.exp(1j * math.pi * (2 * k + n - 1) / (2 * n))
    z_poles = (1.0 + s_poles) / (1.0 - s_poles)
    a = np.real(np.poly(z_poles))
    # DC gain 1 in product form; sum(a) cancels badly for narrow filters
    gain = float(np.real(np.prod(1.0 - z_poles))) / 2.0 ** n
    b = gain * np.array([math.comb(n, i) for i in range(n + 1)], dtype=float)
    a.setflags(write=False)
    b.setflags(write=False)
    coeffs = IirCoefficients(b, a)
    # High orders at extreme cutoffs lose the design to rounding in (b, a) form.
    radius = np.abs(coeffs.poles()).max()
    dc_error = abs(b.sum() / a.sum() - 1.0)
    edge_error = abs(abs(coeffs.response(math.pi * spec.cutoff)) - math.sqrt(0.5))
    if radius >= 1.0 - 1e-9 or dc_error > 1e-9 or edge_error > 1e-6:
        raise ValueError(f"order {n} at cutoff {spec.cutoff} is numerically ill-conditioned "
                         "as a single transfer function; lower the order or widen the cutoff")
    return coeffs


def steady_state(coeffs: IirCoefficients) -> np.ndarray:
    """Transposed direct-form II state for a unit step input already at rest."""
    b, a = coeffs.b, coeffs.a
    n = coeffs.order
    companion = np.zeros((n, n))
    companion[0] = -a[1:]
    companion[1:, :-1] += np.eye(n - 1)
    return np.linalg.solve(np.eye(n) - companion.T, b[1:] - a[1:] * b[0])


def lfilter(coeffs: IirCoefficients, x: np.ndarray, zi: np.ndarray | None = None) -> np.ndarray:
    """Causal IIR filter along the last axis (transposed direct form II)."""
    b, a = coeffs.b, coeffs.a
    n = coeffs.order
    x = np.asarray(x, dtype=float)
    batch = x.shape[:-1]
    z = np.zeros((n,) + batch) if zi is None else np.array(zi, dtype=float).reshape((n,) + batch)
    y = np.empty_like(x)
    for t in range(x.shape[-1]):
        xt = x[..., t]
        yt = b[0] * xt + z[0]
        for i in range(n - 1):
            z[i] = b[i + 1] * xt + z[i + 1] - a[i + 1] * yt
        z[n - 1] = b[n] * xt - a[n] * yt
        y[..., t] = yt
    return y


def _odd_extend(x: np.ndarray, pad: int) -> np.ndarray:
    left = 2 * x[..., :1] - x[..., pad:0:-1]
    right = 2 * x[..., -1:] - x[..., -2:-pad - 2:-1]
    return np.concatenate([left, x, right], axis=-1)


def _forward_backward(coeffs: IirCoefficients, ext: np.ndarray) -> np.ndarray:
    zi = steady_state(coeffs)
    zi = zi.reshape((-1,) + (1,) * (ext.ndim - 1))
    y = lfilter(coeffs, ext, zi * ext[..., 0])
    y = lfilter(coeffs, y[..., ::-1], zi * y[..., -1])
    return y[..., ::-1]


def filtfilt(coeffs: IirCoefficients, signal: np.ndarray) -> np.ndarray:
    """Zero-phase filtering along the last axis.

    The signal is odd-extended by ``3 * order`` samples per end and each pass
    starts from the steady state of its first sample. The forward-backward
    and backward-forward results are averaged, which makes the operator
    commute exactly with time reversal; a single ordering leaves boundary
    transients that break that symmetry on short spectra.
    """
    x = np.asarray(signal, dtype=float)
    pad = 3 * coeffs.order
    if x.shape[-1] <= pad:
        raise ValueError(f"signal of length {x.shape[-1]} too short for padding {pad}")
    if not np.all(np.isfinite(x)):
        raise ValueError("signal contains non-finite values")
    ext = _odd_extend(x, pad)
    fb = _forward_backward(coeffs, ext)
    bf = _forward_backward(coeffs, ext[..., ::-1])[..., ::-1]
    return (0.5 * (fb + bf))[..., pad:-pad]


def difference_quotient(signal: np.ndarray, wavelengths: np.ndarray) -> np.ndarray:
    """Forward difference quotient along the last axis, last value repeated."""
    y = np.asarray(signal, dtype=float)
    w = np.asarray(wavelengths, dtype=float)
    if y.shape[-1] != w.shape[-1]:
        raise ValueError("signal and wavelengths differ in length")
    if y.shape[-1] < 2:
        raise ValueError("need at least two points to differentiate")
    dw = np.diff(w, axis=-1)
    if np.any(dw <= 0):
        raise ValueError("wavelengths must be strictly increasing")
    d = np.diff(y, axis=-1) / dw
    return np.concatenate([d, d[..., -1:]], axis=-1)


def normalize_unit(signal: np.ndarray, atol: float | np.ndarray = 0.0) -> np.ndarray:
    """Min-max scale along the last axis to [0, 1].

    Rows whose range is at most ``atol`` count as flat and become 0.5.
    """
    x = np.asarray(signal, dtype=float)
    if x.size == 0 or x.shape[-1] == 0:
        raise ValueError("empty signal")
    if not np.all(np.isfinite(x)):
        raise ValueError("signal contains non-finite values")
    lo = x.min(axis=-1, keepdims=True)
    span = x.max(axis=-1, keepdims=True) - lo
    flat = span <= atol
    out = (x - lo) / np.where(flat, 1.0, span)
    return np.where(flat, 0.5, np.clip(out, 0.0, 1.0))


def transform(intensities: np.ndarray, wavelengths: np.ndarray, sensor: SensorKind,
              spec: FilterSpec = FilterSpec()) -> np.ndarray:
    """Feature pipeline on one spectrum or a stack of spectra (rows)."""
    x = np.asarray(intensities, dtype=float)
    w = np.asarray(wavelengths, dtype=float)
    if SensorKind.parse(sensor) is SensorKind.VISIBLE:
        x = filtfilt(design_butterworth(spec), x)
    d = difference_quotient(x, w)
    # a flat spectrum leaves only rounding ripple in d; keep it from being stretched to [0, 1]
    step = np.min(np.diff(w, axis=-1), axis=-1, keepdims=True)
    ripple = FLAT_RTOL * np.max(np.abs(x), axis=-1, keepdims=True) / step
    return normalize_unit(d, atol=ripple)


def preprocess_sample(sample: SpectralSample, spec: FilterSpec = FilterSpec()) -> FeatureVector:
    problems = sample.problems()
    if problems:
        raise ValueError(problems[0])
    values = transform(sample.intensities, sample.wavelengths, sample.sensor, spec)
    return FeatureVector(values, sample.sensor, sample.object_id)


def preprocess_arrays(arrays: SensorArrays, spec: FilterSpec = FilterSpec()) -> np.ndarray:
    """Feature matrix (N, D) for every sample of one sensor."""
    if len(arrays) == 0:
        return np.empty((0, arrays.sensor.expected_dim))
    return transform(arrays.intensities, arrays.wavelengths, arrays.sensor, spec)
