"""STFT analysis and per-bin spatial covariance estimation."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .synth import MultichannelSignal


@dataclass(frozen=True)
class StftConfig:
    """Analysis parameters.

    ``frame_length`` must be a power of two; ``hop`` may not exceed it.
    The window is periodic Hann by default; a rectangular window is
    available for exactness tests.
    """

    frame_length: int
    hop: int
    window: str = "hann"
    sample_rate: float = 16000.0

    def __post_init__(self) -> None:
        if self.frame_length < 2 or self.frame_length & (self.frame_length - 1):
            raise ValueError(
                f"frame length must be a power of two, got {self.frame_length}"
            )
        if not 1 <= self.hop <= self.frame_length:
            raise ValueError(
                f"hop must be in [1, {self.frame_length}], got {self.hop}"
            )
        if self.window not in ("hann", "rectangular"):
            raise ValueError(f"unknown window {self.window!r}")
        if self.sample_rate <= 0:
            raise ValueError("sample rate must be positive")

    def window_array(self) -> np.ndarray:
        if self.window == "hann":
            return np.hanning(self.frame_length + 1)[:-1]
        return np.ones(self.frame_length)

    @property
    def num_bins(self) -> int:
        return self.frame_length // 2 + 1

    @property
    def bin_spacing(self) -> float:
        return self.sample_rate / self.frame_length

    def bin_frequencies(self) -> np.ndarray:
        return np.arange(self.num_bins) * self.bin_spacing


@dataclass(frozen=True)
class MultichannelSpectrum:
    """STFT frames as a T x B x P complex tensor plus bin frequencies."""

    frames: np.ndarray
    bin_frequencies: np.ndarray
    sample_rate: float
    hop: int

    @property
    def num_frames(self) -> int:
        return self.frames.shape[0]

    @property
    def num_bins(self) -> int:
        return self.frames.shape[1]

    @property
    def num_channels(self) -> int:
        return self.frames.shape[2]


@dataclass(frozen=True)
class BinCovariance:
    """P x P Hermitian spatial covariance estimate for one frequency bin."""

    frequency: float
    matrix: np.ndarray
    snapshot_count: int


def stft(signal: MultichannelSignal, cfg: StftConfig) -> MultichannelSpectrum:
    """One-sided STFT of every channel.

    Produces ``T = 1 + (N - frame_length) // hop`` frames; each frame is
    windowed and transformed, with no padding at either end.

    Raises:
        ValueError: If the signal is shorter than one frame.
    """
    x = signal.samples
    n = x.shape[1]
    if n < cfg.frame_length:
        raise ValueError(
            f"signal length {n} is shorter than one frame ({cfg.frame_length})"
        )
    frames = np.lib.stride_tricks.sliding_window_view(x, cfg.frame_length, axis=1)
    frames = frames[:, :: cfg.hop, :]  # P x T x frame
    windowed = frames * cfg.window_array()[None, None, :]
    spectra = np.fft.rfft(windowed, axis=2)  # P x T x B
    return MultichannelSpectrum(
        frames=np.ascontiguousarray(spectra.transpose(1, 2, 0)),
        bin_frequencies=cfg.bin_frequencies(),
        sample_rate=cfg.sample_rate,
        hop=cfg.hop,
    )


def estimate_bin_covariances(
    spec: MultichannelSpectrum,
    frame_range: tuple[int, int] | None = None,
) -> list[BinCovariance]:
    """Sample-average covariance per bin over a frame range.

    For each bin the estimate is the average of ``x x^H`` over the
    selected frames; the result is Hermitian by construction and
    positive semidefinite up to rounding.

    Raises:
        ValueError: If the frame range is empty.
    """
    start, end = frame_range if frame_range is not None else (0, spec.num_frames)
    if end - start < 1:
        raise ValueError(f"empty frame range ({start}, {end})")
    x = spec.frames[start:end]  # L x B x P
    count = end - start
    covs = np.einsum("tbp,tbq->bpq", x, np.conj(x)) / count
    covs = 0.5 * (covs + np.conj(np.swapaxes(covs, 1, 2)))
    return [
        BinCovariance(float(f), covs[i], count)
        for i, f in enumerate(spec.bin_frequencies)
    ]


def band_select(
    covs: list[BinCovariance], f_low: float, f_high: float
) -> list[BinCovariance]:
    """Keep bins with ``f_low <= f <= f_high``; the DC bin never survives.

    Raises:
        ValueError: On an inverted band or when nothing is selected.
    """
    if f_low >= f_high:
        raise ValueError(f"need f_low < f_high, got ({f_low}, {f_high})")
    picked = [c for c in covs if c.frequency > 0 and f_low <= c.frequency <= f_high]
    if not picked:
        raise ValueError(f"no bins inside [{f_low}, {f_high}] Hz")
    return picked
