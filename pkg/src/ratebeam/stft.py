"""Analysis/synthesis framing with a square-root Hann window at 50% overlap.

The window satisfies ``w[n]**2 + w[n + hop]**2 = 1``, so analysis followed
by synthesis with the same window reconstructs the fully overlapped
interior of a signal exactly (to roundoff).  Edge frames are zero padded
and only attenuated, never wrapped.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.io.wavfile

__all__ = [
    "FrameSpec",
    "SpectrogramTensor",
    "sqrt_hann_window",
    "stft_analyze",
    "stft_synthesize",
    "read_wav",
    "write_wav",
]


def sqrt_hann_window(length: int) -> np.ndarray:
    """Square root of the periodic Hann window."""
    n = np.arange(length)
    return np.sqrt(0.5 * (1.0 - np.cos(2.0 * np.pi * n / length)))


@dataclass(frozen=True)
class FrameSpec:
    """Framing parameters: 20 ms square-root Hann at 16 kHz by default."""

    frame_len: int = 320
    hop: int | None = None
    fft_len: int | None = None
    sample_rate: float = 16000.0

    def __post_init__(self):
        if self.frame_len < 2 or self.frame_len % 2:
            raise ValueError("frame length must be a positive even number")
        hop = self.frame_len // 2 if self.hop is None else self.hop
        if hop != self.frame_len // 2:
            raise ValueError("only 50% overlap is supported")
        fft_len = self.frame_len if self.fft_len is None else self.fft_len
        if fft_len != self.frame_len:
            raise ValueError("fft length must equal the frame length")
        object.__setattr__(self, "hop", hop)
        object.__setattr__(self, "fft_len", fft_len)

    @property
    def n_bins(self) -> int:
        return self.fft_len // 2 + 1

    @property
    def frequencies(self) -> np.ndarray:
        return np.fft.rfftfreq(self.fft_len, d=1.0 / self.sample_rate)

    def window(self) -> np.ndarray:
        return sqrt_hann_window(self.frame_len)


@dataclass(frozen=True)
class SpectrogramTensor:
    """Complex frames, shaped (bins, frames, channels)."""

    data: np.ndarray
    spec: FrameSpec

    def __post_init__(self):
        data = np.asarray(self.data, dtype=complex)
        if data.ndim != 3:
            raise ValueError("spectrogram data must be (bins, frames, channels)")
        if data.shape[0] != self.spec.n_bins:
            raise ValueError("bin count must be fft_len // 2 + 1")
        object.__setattr__(self, "data", data)

    @property
    def n_frames(self) -> int:
        return self.data.shape[1]

    @property
    def n_channels(self) -> int:
        return self.data.shape[2]


def stft_analyze(signal, spec: FrameSpec) -> SpectrogramTensor:
    """Windowed framing followed by an FFT per frame and channel."""
    x = np.asarray(signal, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    if x.ndim != 2:
        raise ValueError("signal must be 1-D or (samples, channels)")
    n = x.shape[0]
    if n < spec.frame_len:
        raise ValueError("signal shorter than one frame")
    n_frames = int(np.ceil((n - spec.frame_len) / spec.hop)) + 1
    padded_len = (n_frames - 1) * spec.hop + spec.frame_len
    if padded_len > n:
        x = np.vstack([x, np.zeros((padded_len - n, x.shape[1]))])
    window = spec.window()
    starts = np.arange(n_frames) * spec.hop
    frames = x[starts[:, None] + np.arange(spec.frame_len)[None, :], :]
    spectra = np.fft.rfft(frames * window[None, :, None], n=spec.fft_len, axis=1)
    return SpectrogramTensor(data=np.moveaxis(spectra, 0, 1), spec=spec)


def stft_synthesize(tensor: SpectrogramTensor, spec: FrameSpec) -> np.ndarray:
    """Overlap-add synthesis with the matched square-root window.

    Round trips are exact on the interior (samples covered by two frames);
    the first and last half frame keep a single window factor.
    """
    if tensor.spec != spec:
        raise ValueError("tensor was produced with a different frame spec")
    spectra = np.moveaxis(tensor.data, 0, 1)
    frames = np.fft.irfft(spectra, n=spec.fft_len, axis=1)
    window = spec.window()
    frames *= window[None, :, None]
    n_frames = frames.shape[0]
    out_len = (n_frames - 1) * spec.hop + spec.frame_len
    out = np.zeros((out_len, frames.shape[2]))
    for l in range(n_frames):
        out[l * spec.hop:l * spec.hop + spec.frame_len, :] += frames[l]
    return out


def read_wav(path) -> tuple[float, np.ndarray]:
    """Read a PCM wav file into float64 samples in [-1, 1), (samples, channels)."""
    rate, data = scipy.io.wavfile.read(path)
    if data.dtype == np.int16:
        samples = data.astype(float) / 32768.0
    elif data.dtype == np.int32:
        samples = data.astype(float) / 2147483648.0
    elif data.dtype in (np.float32, np.float64):
        samples = data.astype(float)
    else:
        raise ValueError(f"unsupported wav sample format {data.dtype}")
    if samples.ndim == 1:
        samples = samples[:, None]
    return float(rate), samples


def write_wav(path, sample_rate: float, data, dtype: str = "float32") -> None:
    """Write (samples, channels) float data as 16-bit or float PCM."""
    x = np.asarray(data, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    if dtype == "int16":
        clipped = np.clip(x, -1.0, 32767.0 / 32768.0)
        scipy.io.wavfile.write(path, int(sample_rate), (clipped * 32768.0).astype(np.int16))
    elif dtype == "float32":
        scipy.io.wavfile.write(path, int(sample_rate), x.astype(np.float32))
    else:
        raise ValueError("dtype must be 'int16' or 'float32'")
