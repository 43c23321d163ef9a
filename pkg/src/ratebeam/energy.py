"""Transmission energy model: channel SNR, Shannon capacity, and the
energy-usage ratio.

Per time-frequency sample, sending ``b`` bits over a channel with distance
``d``, noise level ``v`` and path-loss exponent ``r`` costs

    E = d**r * v * (4**b - 1),

the energy that makes the Shannon capacity ``0.5 * log2(1 + SNR)`` of the
channel equal ``b``.  Totals over a signal are sample-count multiples and
are computed only by the experiment layer.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "ChannelModel",
    "EnergyReport",
    "transmit_energy",
    "capacity_bits",
    "channel_snr",
    "energy_usage_ratio",
]

#: Shortest usable sensor-to-FC distance; a sensor sitting exactly on the
#: fusion center is clamped here instead of getting free transmission.
MIN_DISTANCE = 0.05


@dataclass(frozen=True)
class ChannelModel:
    """Per-sensor communication channels to the fusion center."""

    distances: np.ndarray
    noise_psd: np.ndarray | None = None
    path_loss_exponent: float = 2.0

    def __post_init__(self):
        d = np.atleast_1d(np.asarray(self.distances, dtype=float))
        if not np.all(d > 0):
            raise ValueError("channel distances must be positive")
        v = self.noise_psd
        v = np.ones_like(d) if v is None else np.atleast_1d(np.asarray(v, dtype=float))
        if v.shape != d.shape:
            raise ValueError("noise_psd must match distances in length")
        if not np.all(v > 0):
            raise ValueError("channel noise levels must be positive")
        if not 2.0 <= self.path_loss_exponent <= 6.0:
            raise ValueError("path loss exponent must lie in [2, 6]")
        object.__setattr__(self, "distances", d)
        object.__setattr__(self, "noise_psd", v)

    @classmethod
    def from_geometry(cls, sensor_positions, fc_position, noise_psd=None,
                      path_loss_exponent: float = 2.0) -> "ChannelModel":
        """Distances from sensor coordinates, clamped to ``MIN_DISTANCE``."""
        pos = np.atleast_2d(np.asarray(sensor_positions, dtype=float))
        fc = np.asarray(fc_position, dtype=float)
        d = np.linalg.norm(pos - fc[None, :], axis=1)
        d = np.maximum(d, MIN_DISTANCE)
        return cls(distances=d, noise_psd=noise_psd,
                   path_loss_exponent=path_loss_exponent)

    @property
    def n_sensors(self) -> int:
        return self.distances.size


@dataclass(frozen=True)
class EnergyReport:
    """Per-sensor transmission energies and the energy-usage ratio.

    ``eur`` divides the spent energy by the energy of the all-sensors,
    max-rate reference, so it lives in [0, 1] and hits 1 exactly when every
    sensor transmits at the maximum rate.
    """

    per_sensor: np.ndarray
    total: float
    eur: float


def transmit_energy(bits, distance, noise_psd, exponent: float = 2.0):
    """Energy per time-frequency sample: ``d**r * v * (4**b - 1)``."""
    b = np.asarray(bits, dtype=float)
    if np.any(b < 0):
        raise ValueError("bit rates must be non-negative")
    e = np.asarray(distance, dtype=float) ** exponent * np.asarray(noise_psd, dtype=float) * (4.0**b - 1.0)
    return float(e) if e.ndim == 0 else e


def capacity_bits(snr):
    """Shannon capacity of the channel in bits per sample."""
    s = np.asarray(snr, dtype=float)
    if np.any(s < 0):
        raise ValueError("SNR must be non-negative")
    b = 0.5 * np.log2(1.0 + s)
    return float(b) if b.ndim == 0 else b


def channel_snr(energy, distance, noise_psd, exponent: float = 2.0):
    """Channel SNR ``d**-r * E / v`` for transmitted energy ``E``."""
    e = np.asarray(energy, dtype=float)
    if np.any(e < 0):
        raise ValueError("energy must be non-negative")
    s = e / (np.asarray(distance, dtype=float) ** exponent * np.asarray(noise_psd, dtype=float))
    return float(s) if s.ndim == 0 else s


def energy_usage_ratio(allocation, channel: ChannelModel, b0: int) -> EnergyReport:
    """Energy report for a rate allocation against the all-at-``b0`` reference.

    ``allocation`` is a length-M array of rates or anything exposing ``.b``
    (a :class:`~ratebeam.allocation.RateVector` does).
    """
    b = np.atleast_1d(np.asarray(getattr(allocation, "b", allocation), dtype=float))
    if b.size != channel.n_sensors:
        raise ValueError("allocation length must match the channel model")
    if np.any(b < 0):
        raise ValueError("bit rates must be non-negative")
    if np.any(b > b0):
        raise ValueError("bit rates must not exceed the maximum rate")
    per_sensor = transmit_energy(b, channel.distances, channel.noise_psd,
                                 channel.path_loss_exponent)
    reference = transmit_energy(np.full(b.shape, float(b0)), channel.distances,
                                channel.noise_psd, channel.path_loss_exponent)
    total = float(np.sum(per_sensor))
    return EnergyReport(per_sensor=per_sensor, total=total,
                        eur=total / float(np.sum(reference)))
