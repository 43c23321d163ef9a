"""Uniform mid-rise quantization and its noise-variance model.

A sensor with full-scale range ``A`` and rate ``b`` bits per sample splits
``[-A/2, A/2]`` into ``2**b`` cells of width ``delta = A / 2**b`` and maps
each input to its cell midpoint.  The reconstruction error is then uniform
over a cell, with variance ``delta**2 / 12``; stacking sensors gives a
diagonal noise covariance whose entries decay by a factor 4 per added bit.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "QuantizerSpec",
    "QuantNoiseCov",
    "quantize_uniform",
    "quant_noise_cov",
    "estimate_amplitude",
]


@dataclass(frozen=True)
class QuantizerSpec:
    """Per-sensor quantizer setup: full-scale ranges and bit rates.

    ``amplitudes[k]`` is the full-scale range of sensor ``k`` (inputs live in
    ``[-amplitudes[k]/2, amplitudes[k]/2]``); ``bits[k]`` is its rate in bits
    per sample.  Fractional rates are accepted: the noise model extends
    continuously and the continuous relaxation relies on that.
    """

    amplitudes: np.ndarray
    bits: np.ndarray

    def __post_init__(self):
        amplitudes = np.atleast_1d(np.asarray(self.amplitudes, dtype=float))
        bits = np.atleast_1d(np.asarray(self.bits, dtype=float))
        if amplitudes.ndim != 1 or amplitudes.shape != bits.shape:
            raise ValueError("amplitudes and bits must be 1-D and equally long")
        if not np.all(amplitudes > 0):
            raise ValueError("amplitudes must be strictly positive")
        if not np.all(bits >= 0):
            raise ValueError("bit rates must be non-negative")
        object.__setattr__(self, "amplitudes", amplitudes)
        object.__setattr__(self, "bits", bits)

    @property
    def n_sensors(self) -> int:
        return self.amplitudes.size


@dataclass(frozen=True)
class QuantNoiseCov:
    """Diagonal of the quantization-noise covariance, one entry per sensor."""

    diag: np.ndarray

    def __post_init__(self):
        diag = np.atleast_1d(np.asarray(self.diag, dtype=float))
        if not np.all(diag > 0):
            raise ValueError("quantization noise variances must be positive")
        object.__setattr__(self, "diag", diag)

    def as_matrix(self) -> np.ndarray:
        return np.diag(self.diag)


def quantize_uniform(sample, amplitude: float, bits: int):
    """Quantize ``sample`` to the midpoint of its uniform cell.

    Inputs are clamped to ``[-A/2, A/2 - delta/2]`` so the top of the range
    falls into the highest cell instead of overflowing the midpoint formula.
    ``bits == 0`` means the sensor transmits nothing and the output is zero.
    Accepts scalars or arrays.
    """
    if amplitude <= 0:
        raise ValueError("amplitude must be positive")
    if bits < 0:
        raise ValueError("bits must be non-negative")
    if bits != int(bits):
        raise ValueError("the quantizer runs at integer rates only")
    x = np.asarray(sample, dtype=float)
    if not np.all(np.isfinite(x)):
        raise ValueError("samples must be finite")
    if bits == 0:
        out = np.zeros_like(x)
        return float(out) if np.isscalar(sample) else out
    delta = amplitude / 2.0 ** int(bits)
    clamped = np.clip(x, -amplitude / 2.0, amplitude / 2.0 - delta / 2.0)
    out = delta * (np.floor(clamped / delta) + 0.5)
    return float(out) if np.isscalar(sample) else out


def quant_noise_cov(spec: QuantizerSpec) -> QuantNoiseCov:
    """Noise variances ``A_k**2 / (12 * 4**b_k)`` for every sensor.

    Fractional ``b_k`` are fine; the continuous relaxation evaluates this at
    non-integer rates.
    """
    diag = spec.amplitudes**2 / (12.0 * 4.0**spec.bits)
    return QuantNoiseCov(diag=diag)


def estimate_amplitude(signal) -> float | np.ndarray:
    """Full-scale range that fits the observed samples: ``2 * max|x|``.

    1-D input gives a scalar; 2-D ``(sensors, samples)`` input gives one
    range per row.  An all-zero signal has no usable range and raises.
    """
    x = np.asarray(signal, dtype=float)
    if x.size == 0:
        raise ValueError("cannot estimate an amplitude from an empty signal")
    if x.ndim == 1:
        peak = np.max(np.abs(x))
        if peak == 0.0:
            raise ValueError("all-zero signal: amplitude undefined")
        return 2.0 * float(peak)
    if x.ndim == 2:
        peak = np.max(np.abs(x), axis=1)
        if np.any(peak == 0.0):
            raise ValueError("all-zero channel: amplitude undefined")
        return 2.0 * peak
    raise ValueError("signal must be 1-D or 2-D")
