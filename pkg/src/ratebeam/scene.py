"""Simulated network geometry, free-field transfer functions, and the
per-frequency covariance model.

A scene is a 2-D room holding M microphones, a fusion center, and point
sources (targets and interferers).  Propagation is free field: a source at
distance ``d`` reaches a sensor through a pure delay with ``1/d`` amplitude,

    a(f) = exp(-2j * pi * f * d / c) / max(d, 0.05 m),

so every downstream quantity has a closed form.  Source and self-noise
powers are flat per-bin PSDs; the recorded covariance at one frequency is

    R_yy = A Sx A^H + B Su B^H + sigma_v^2 I = R_xx + R_uu + R_vv

with R_nn = R_uu + R_vv collecting everything that is not target.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .exceptions import ConfigError

__all__ = [
    "SceneConfig",
    "ATFMatrix",
    "SignalStatistics",
    "CovarianceSet",
    "grid_scene",
    "build_freefield_atf",
    "assemble_covariances",
    "synthesize_signals",
]

#: Source-to-sensor distances are clamped here so a collocated pair keeps a
#: finite amplitude instead of blowing up the 1/d law.
ATF_MIN_DISTANCE = 0.05


def _as_points(value, name: str) -> np.ndarray:
    pts = np.asarray(value, dtype=float)
    if pts.size == 0:
        return pts.reshape(0, 2)
    pts = np.atleast_2d(pts)
    if pts.ndim != 2 or pts.shape[1] != 2:
        raise ConfigError(f"{name} must be an (n, 2) array of 2-D points")
    return pts


@dataclass(frozen=True)
class SceneConfig:
    """Geometry and source statistics of a simulated sensor network.

    Powers are linear per-bin PSDs.  ``self_noise_psd`` may be zero for
    noise-free synthesis experiments, but covariance assembly then loses
    positive definiteness of the noise covariance, which the beamforming
    stage requires; keep it positive for any allocation work.
    """

    room_size: tuple[float, float]
    sensor_positions: np.ndarray
    fc_position: np.ndarray
    target_positions: np.ndarray
    interferer_positions: np.ndarray
    target_psd: np.ndarray
    interferer_psd: np.ndarray
    self_noise_psd: float
    speed_of_sound: float = 343.0
    sample_rate: float = 16000.0

    def __post_init__(self):
        room = tuple(float(v) for v in self.room_size)
        if len(room) != 2 or room[0] <= 0 or room[1] <= 0:
            raise ConfigError("room dimensions must be two positive lengths")
        sensors = _as_points(self.sensor_positions, "sensor_positions")
        targets = _as_points(self.target_positions, "target_positions")
        interferers = _as_points(self.interferer_positions, "interferer_positions")
        fc = np.asarray(self.fc_position, dtype=float).reshape(2)
        if sensors.shape[0] < 1:
            raise ConfigError("at least one sensor is required")
        if targets.shape[0] < 1:
            raise ConfigError("at least one target source is required")
        for name, pts in (("sensor", sensors), ("target", targets),
                          ("interferer", interferers), ("fc", fc[None, :])):
            if np.any(pts < -1e-12) or np.any(pts > np.asarray(room) + 1e-12):
                raise ConfigError(f"{name} positions must lie inside the room")
        p_t = np.atleast_1d(np.asarray(self.target_psd, dtype=float))
        p_i = np.atleast_1d(np.asarray(self.interferer_psd, dtype=float))
        if p_t.size == 1 and targets.shape[0] > 1:
            p_t = np.full(targets.shape[0], p_t[0])
        if p_i.size == 1 and interferers.shape[0] > 1:
            p_i = np.full(interferers.shape[0], p_i[0])
        if p_t.size != targets.shape[0] or p_i.size != interferers.shape[0]:
            raise ConfigError("source PSD lists must match the source counts")
        if np.any(p_t < 0) or np.any(p_i < 0) or self.self_noise_psd < 0:
            raise ConfigError("PSDs must be non-negative")
        if self.speed_of_sound <= 0 or self.sample_rate <= 0:
            raise ConfigError("speed of sound and sample rate must be positive")
        object.__setattr__(self, "room_size", room)
        object.__setattr__(self, "sensor_positions", sensors)
        object.__setattr__(self, "fc_position", fc)
        object.__setattr__(self, "target_positions", targets)
        object.__setattr__(self, "interferer_positions", interferers)
        object.__setattr__(self, "target_psd", p_t)
        object.__setattr__(self, "interferer_psd", p_i)

    @property
    def n_sensors(self) -> int:
        return self.sensor_positions.shape[0]

    @property
    def n_targets(self) -> int:
        return self.target_positions.shape[0]

    @property
    def n_interferers(self) -> int:
        return self.interferer_positions.shape[0]

    def statistics(self) -> "SignalStatistics":
        return SignalStatistics(sigma_x=np.diag(self.target_psd),
                                sigma_u=np.diag(self.interferer_psd),
                                sigma_v=float(self.self_noise_psd))


@dataclass(frozen=True)
class ATFMatrix:
    """Acoustic transfer functions at one frequency.

    ``a`` is M x I (targets), ``b`` is M x J (interferers); column ``i``
    holds the response of every sensor to source ``i``.
    """

    frequency: float
    a: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        a = np.atleast_2d(np.asarray(self.a, dtype=complex))
        b = np.asarray(self.b, dtype=complex)
        b = b.reshape(a.shape[0], 0) if b.size == 0 else np.atleast_2d(b)
        if not (np.all(np.isfinite(a.view(float))) and np.all(np.isfinite(b.view(float)))):
            raise ValueError("transfer functions must be finite")
        if b.shape[0] != a.shape[0]:
            raise ValueError("target and interferer ATFs must share the sensor axis")
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)

    @property
    def n_sensors(self) -> int:
        return self.a.shape[0]


@dataclass(frozen=True)
class SignalStatistics:
    """Diagonal source powers and the self-noise level."""

    sigma_x: np.ndarray
    sigma_u: np.ndarray
    sigma_v: float

    def __post_init__(self):
        sx = np.atleast_2d(np.asarray(self.sigma_x, dtype=float))
        su = np.asarray(self.sigma_u, dtype=float)
        su = su.reshape(0, 0) if su.size == 0 else np.atleast_2d(su)
        for name, m in (("sigma_x", sx), ("sigma_u", su)):
            if m.size and np.any(m != np.diag(np.diag(m))):
                raise ValueError(f"{name} must be diagonal")
        if np.any(np.diag(sx) <= 0):
            raise ValueError("target powers must be strictly positive")
        if su.size and np.any(np.diag(su) <= 0):
            raise ValueError("interferer powers must be strictly positive")
        object.__setattr__(self, "sigma_x", sx)
        object.__setattr__(self, "sigma_u", su)


@dataclass(frozen=True)
class CovarianceSet:
    """Hermitian covariance matrices of the recorded signals at one bin."""

    frequency: float
    r_xx: np.ndarray
    r_uu: np.ndarray
    r_vv: np.ndarray
    r_nn: np.ndarray
    r_yy: np.ndarray

    def __post_init__(self):
        for name in ("r_xx", "r_uu", "r_vv", "r_nn", "r_yy"):
            m = np.asarray(getattr(self, name), dtype=complex)
            scale = max(np.max(np.abs(m)), 1.0)
            if np.max(np.abs(m - m.conj().T)) > 1e-12 * scale:
                raise ValueError(f"{name} must be Hermitian")
            object.__setattr__(self, name, m)
        resid = np.max(np.abs(self.r_yy - self.r_xx - self.r_nn))
        if resid > 1e-12 * max(np.max(np.abs(self.r_yy)), 1.0):
            raise ValueError("r_yy must equal r_xx + r_nn")

    @property
    def n_sensors(self) -> int:
        return self.r_yy.shape[0]


def grid_scene(rows: int, cols: int, room: tuple[float, float],
               margin: float = 0.0) -> np.ndarray:
    """Uniform lattice of sensor positions inside a rectangular room.

    Points are returned bottom-to-top within a column, columns left to
    right, which fixes the sensor labelling used by the presets.  A single
    row or column collapses to the room's center line.
    """
    if rows < 1 or cols < 1:
        raise ConfigError("rows and cols must be at least 1")
    w, h = float(room[0]), float(room[1])
    if w <= 0 or h <= 0:
        raise ConfigError("degenerate room dimensions")
    if margin < 0 or 2 * margin >= w or 2 * margin >= h:
        raise ConfigError("margin must be non-negative and fit inside the room")
    xs = np.linspace(margin, w - margin, cols) if cols > 1 else np.array([w / 2.0])
    ys = np.linspace(margin, h - margin, rows) if rows > 1 else np.array([h / 2.0])
    points = [(x, y) for x in xs for y in ys]
    return np.asarray(points, dtype=float)


def _freefield_response(distances: np.ndarray, frequency, speed_of_sound: float) -> np.ndarray:
    """Free-field gain for source-sensor distances; broadcasts over frequency."""
    d = np.asarray(distances, dtype=float)
    f = np.asarray(frequency, dtype=float)
    clamped = np.maximum(d, ATF_MIN_DISTANCE)
    phase = -2j * np.pi * f * d / speed_of_sound
    return np.exp(phase) / clamped


def build_freefield_atf(scene: SceneConfig, frequency: float) -> ATFMatrix:
    """Free-field transfer functions of every source at one frequency."""
    if frequency < 0:
        raise ConfigError("frequency must be non-negative")
    sensors = scene.sensor_positions
    d_t = np.linalg.norm(sensors[:, None, :] - scene.target_positions[None, :, :], axis=2)
    a = _freefield_response(d_t, frequency, scene.speed_of_sound)
    if scene.n_interferers:
        d_i = np.linalg.norm(sensors[:, None, :] - scene.interferer_positions[None, :, :], axis=2)
        b = _freefield_response(d_i, frequency, scene.speed_of_sound)
    else:
        b = np.zeros((scene.n_sensors, 0), dtype=complex)
    return ATFMatrix(frequency=float(frequency), a=a, b=b)


def _hermitize(m: np.ndarray) -> np.ndarray:
    return (m + m.conj().T) / 2.0


def assemble_covariances(atf: ATFMatrix, stats: SignalStatistics) -> CovarianceSet:
    """Model covariances at the ATF's frequency."""
    m = atf.n_sensors
    if atf.a.shape[1] != stats.sigma_x.shape[0]:
        raise ValueError("target count mismatch between ATFs and statistics")
    if atf.b.shape[1] != stats.sigma_u.shape[0]:
        raise ValueError("interferer count mismatch between ATFs and statistics")
    r_xx = _hermitize(atf.a @ stats.sigma_x @ atf.a.conj().T)
    if atf.b.shape[1]:
        r_uu = _hermitize(atf.b @ stats.sigma_u @ atf.b.conj().T)
    else:
        r_uu = np.zeros((m, m), dtype=complex)
    r_vv = stats.sigma_v * np.eye(m, dtype=complex)
    r_nn = r_uu + r_vv
    return CovarianceSet(frequency=atf.frequency, r_xx=r_xx, r_uu=r_uu,
                         r_vv=r_vv, r_nn=r_nn, r_yy=r_xx + r_nn)


def synthesize_signals(scene: SceneConfig, duration: float, seed: int) -> np.ndarray:
    """Stationary Gaussian sensor signals consistent with the scene model.

    Sources are white Gaussian with the configured per-bin power and are
    propagated by applying the free-field gain on the full-length DFT grid,
    so every DFT bin of the output has exactly the model covariance and the
    per-bin sample covariance of framed spectra converges to it as the
    duration grows.  Returns an ``(n_samples, M)`` array; the same seed
    reproduces the same signals.
    """
    if duration <= 0:
        raise ConfigError("duration must be positive")
    n = int(round(duration * scene.sample_rate))
    rng = np.random.default_rng(seed)
    m = scene.n_sensors
    freqs = np.fft.rfftfreq(n, d=1.0 / scene.sample_rate)
    out = np.zeros((n, m))

    def _propagate(positions, psds):
        contribution = np.zeros((n, m))
        for pos, power in zip(positions, psds):
            src = rng.standard_normal(n) * np.sqrt(power)
            spectrum = np.fft.rfft(src)
            d = np.linalg.norm(scene.sensor_positions - pos[None, :], axis=1)
            gain = _freefield_response(d[None, :], freqs[:, None], scene.speed_of_sound)
            contribution += np.fft.irfft(spectrum[:, None] * gain, n=n, axis=0)
        return contribution

    out += _propagate(scene.target_positions, scene.target_psd)
    if scene.n_interferers:
        out += _propagate(scene.interferer_positions, scene.interferer_psd)
    if scene.self_noise_psd > 0:
        out += rng.standard_normal((n, m)) * np.sqrt(scene.self_noise_psd)
    return out
