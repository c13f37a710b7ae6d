"""Multichannel test-signal synthesis: far-field plane-wave sources plus
diffuse background noise at a prescribed SNR.

The propagation model is free-field and far-field: each sensor receives
the source delayed by ``(p - 1) * spacing * sin(theta) / c`` seconds.
Delays are applied as exact linear phase in the frequency domain
(circular fractional delay). For even-length signals the Nyquist bin of
a real signal cannot carry an arbitrary phase shift; its rotation is
projected onto the real axis (a cosine factor), which perturbs channel
energy by at most the Nyquist bin's share of the total.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .audio_io import read_mono_wav
from .geometry import ArrayGeometry, sensor_delays

Interval = tuple[float, float]


@dataclass(frozen=True)
class SourceSpec:
    """One far-field source in a scenario.

    Attributes:
        kind: ``"white"`` for Gaussian white noise, or ``"wav"`` to play a
            mono WAV file given by ``path``.
        doa_deg: Source angle in degrees.
        gain: Linear amplitude factor (> 0).
        activity: List of (start, end) second intervals during which the
            source emits. ``None`` means always active.
        path: WAV file path, required when ``kind == "wav"``.
    """

    kind: str
    doa_deg: float
    gain: float = 1.0
    activity: tuple[Interval, ...] | None = None
    path: str | None = None

    def __post_init__(self) -> None:
        if self.kind not in ("white", "wav"):
            raise ValueError(f"unknown source kind {self.kind!r}")
        if self.kind == "wav" and not self.path:
            raise ValueError("wav source requires a file path")
        if self.gain <= 0:
            raise ValueError(f"gain must be positive, got {self.gain}")
        if self.activity is not None:
            ivs = sorted(self.activity)
            for (a0, a1) in ivs:
                if a1 <= a0:
                    raise ValueError(f"empty activity interval ({a0}, {a1})")
            for (_, prev_end), (next_start, _) in zip(ivs, ivs[1:]):
                if next_start < prev_end:
                    raise ValueError("activity intervals overlap")

    def intervals(self, duration: float) -> list[Interval]:
        """Activity intervals clipped to the scenario duration."""
        if self.activity is None:
            return [(0.0, duration)]
        out = []
        for a0, a1 in sorted(self.activity):
            a0, a1 = max(a0, 0.0), min(a1, duration)
            if a1 > a0:
                out.append((a0, a1))
        return out


@dataclass(frozen=True)
class ScenarioConfig:
    """Full scenario description for :func:`synthesize_scenario`."""

    geometry: ArrayGeometry
    sources: tuple[SourceSpec, ...]
    snr_db: float
    duration: float
    sample_rate: float
    rng_seed: int
    num_noise_directions: int = 22
    sensor_noise_db: float = -40.0

    def __post_init__(self) -> None:
        if self.sample_rate <= 0:
            raise ValueError(f"sample rate must be positive, got {self.sample_rate}")
        if self.duration <= 0:
            raise ValueError(f"duration must be positive, got {self.duration}")
        q_max = max_simultaneous_sources(self.sources, self.duration)
        if q_max >= self.geometry.num_sensors:
            raise ValueError(
                f"{q_max} simultaneously active sources requires more than "
                f"{self.geometry.num_sensors} sensors"
            )


@dataclass(frozen=True)
class MultichannelSignal:
    """Channels x samples real signal with its sample rate."""

    samples: np.ndarray
    sample_rate: float

    def __post_init__(self) -> None:
        if self.samples.ndim != 2:
            raise ValueError("samples must be a 2-D channels x samples array")
        if not np.all(np.isfinite(self.samples)):
            raise ValueError("signal contains non-finite values")

    @property
    def num_channels(self) -> int:
        return self.samples.shape[0]

    @property
    def num_samples(self) -> int:
        return self.samples.shape[1]

    @property
    def duration(self) -> float:
        return self.num_samples / self.sample_rate


def apply_farfield_propagation(
    source: np.ndarray,
    geom: ArrayGeometry,
    doa_deg: float,
    sample_rate: float,
) -> MultichannelSignal:
    """Propagate a mono signal to all sensors as a far-field plane wave.

    Channel ``p`` is the input delayed by ``(p-1) * spacing * sin(theta)
    / c`` seconds via frequency-domain linear phase, which is an exact
    fractional delay for the periodic extension of the signal. Channel 1
    equals the input up to FFT round-trip error.

    Raises:
        ValueError: On an empty input or an angle outside [-90, 90].
    """
    src = np.asarray(source, dtype=float)
    if src.ndim != 1 or src.size == 0:
        raise ValueError("source signal must be a non-empty 1-D array")
    delays = sensor_delays(geom, doa_deg)
    n = src.size
    spectrum = np.fft.rfft(src)
    freqs = np.fft.rfftfreq(n, d=1.0 / sample_rate)
    out = np.empty((geom.num_sensors, n), dtype=float)
    for p, tau in enumerate(delays):
        shift = np.exp(-2j * np.pi * freqs * tau)
        if n % 2 == 0:
            # Real output needs a real Nyquist coefficient.
            shift[-1] = np.cos(2.0 * np.pi * freqs[-1] * tau)
        out[p] = np.fft.irfft(spectrum * shift, n)
    return MultichannelSignal(out, sample_rate)


def generate_diffuse_noise(
    geom: ArrayGeometry,
    duration: float,
    sample_rate: float,
    num_directions: int = 22,
    seed: int = 0,
) -> MultichannelSignal:
    """Pseudo-diffuse noise as a sum of independent white plane waves.

    ``num_directions`` independent white-noise sources are placed at
    equally spaced angles spanning [-90, 90] degrees and propagated onto
    the array, emulating a surround playback rig. The sum is scaled by a
    single factor so the average channel power is one; individual channel
    powers agree with that target to within the statistical fluctuation
    of the realization.
    """
    if num_directions < 8:
        raise ValueError(f"need at least 8 directions, got {num_directions}")
    n = int(round(duration * sample_rate))
    rng = np.random.default_rng(seed)
    angles = np.linspace(-90.0, 90.0, num_directions)
    total = np.zeros((geom.num_sensors, n), dtype=float)
    for theta in angles:
        wave = rng.standard_normal(n)
        total += apply_farfield_propagation(wave, geom, theta, sample_rate).samples
    mean_power = np.mean(total**2)
    total /= np.sqrt(mean_power)
    return MultichannelSignal(total, sample_rate)


def mix_at_snr(
    signal: MultichannelSignal,
    noise: MultichannelSignal,
    snr_db: float,
    active_mask: np.ndarray | None = None,
) -> MultichannelSignal:
    """Scale the noise to realize the requested SNR, then sum.

    SNR is defined as ``10 * log10(signal power / noise power)`` with
    both powers averaged over channels and, when ``active_mask`` is
    given, over the masked samples only. The scaling is exact, so the
    realized SNR matches ``snr_db`` up to floating-point rounding.

    Raises:
        ValueError: On shape or rate mismatch, or when either signal has
            zero power over the evaluation region.
    """
    if signal.samples.shape != noise.samples.shape:
        raise ValueError(
            f"shape mismatch: signal {signal.samples.shape} vs noise "
            f"{noise.samples.shape}"
        )
    if signal.sample_rate != noise.sample_rate:
        raise ValueError("sample rate mismatch between signal and noise")
    if active_mask is None:
        sig_region = signal.samples
        noise_region = noise.samples
    else:
        mask = np.asarray(active_mask, dtype=bool)
        if mask.shape != (signal.num_samples,):
            raise ValueError("active mask length must match signal length")
        sig_region = signal.samples[:, mask]
        noise_region = noise.samples[:, mask]
    p_sig = float(np.mean(sig_region**2)) if sig_region.size else 0.0
    p_noise = float(np.mean(noise_region**2)) if noise_region.size else 0.0
    if p_sig <= 0.0:
        raise ValueError("signal has zero power over the active region")
    if p_noise <= 0.0:
        raise ValueError("noise has zero power over the active region")
    scale = np.sqrt(p_sig / (p_noise * 10.0 ** (snr_db / 10.0)))
    return MultichannelSignal(
        signal.samples + scale * noise.samples, signal.sample_rate
    )


def synthesize_scenario(
    cfg: ScenarioConfig,
) -> tuple[MultichannelSignal, list[tuple[float, float, float]]]:
    """Render a scenario into a multichannel signal plus ground truth.

    Every source is synthesized (white noise from the scenario RNG, or a
    WAV file resampled to the scenario rate), gated by its activity
    schedule, propagated to the array and summed. Diffuse background
    noise is added at ``cfg.snr_db`` measured over the union of source
    activity, plus uncorrelated sensor self-noise at
    ``cfg.sensor_noise_db`` relative to the diffuse noise so covariance
    matrices stay full rank.

    Returns:
        ``(signal, timeline)`` where timeline is a list of
        ``(start_s, end_s, doa_deg)`` ground-truth entries sorted by
        start time.
    """
    n = int(round(cfg.duration * cfg.sample_rate))
    seeds = np.random.SeedSequence(cfg.rng_seed).spawn(len(cfg.sources) + 2)
    noise_seed, sensor_seed = seeds[-2], seeds[-1]

    mixed = np.zeros((cfg.geometry.num_sensors, n), dtype=float)
    timeline: list[tuple[float, float, float]] = []
    active_mask = np.zeros(n, dtype=bool)
    for spec, seed in zip(cfg.sources, seeds):
        mono = _render_source(spec, n, cfg.sample_rate, seed)
        gate = np.zeros(n, dtype=bool)
        for a0, a1 in spec.intervals(cfg.duration):
            i0, i1 = int(round(a0 * cfg.sample_rate)), int(round(a1 * cfg.sample_rate))
            gate[i0:i1] = True
            timeline.append((a0, a1, spec.doa_deg))
        mono = mono * gate
        active_mask |= gate
        mixed += apply_farfield_propagation(
            mono, cfg.geometry, spec.doa_deg, cfg.sample_rate
        ).samples
    timeline.sort()

    diffuse = generate_diffuse_noise(
        cfg.geometry,
        cfg.duration,
        cfg.sample_rate,
        num_directions=cfg.num_noise_directions,
        seed=noise_seed,
    )
    if not cfg.sources:
        return diffuse, []

    signal = MultichannelSignal(mixed, cfg.sample_rate)
    out = mix_at_snr(signal, diffuse, cfg.snr_db, active_mask=active_mask)

    noise_power = float(np.mean((out.samples - signal.samples) ** 2))
    sensor_rng = np.random.default_rng(sensor_seed)
    sensor_power = noise_power * 10.0 ** (cfg.sensor_noise_db / 10.0)
    self_noise = np.sqrt(sensor_power) * sensor_rng.standard_normal(out.samples.shape)
    return MultichannelSignal(out.samples + self_noise, cfg.sample_rate), timeline


def max_simultaneous_sources(sources, duration: float) -> int:
    """Largest number of sources active at the same instant."""
    events = []
    for spec in sources:
        for a0, a1 in spec.intervals(duration):
            events.append((a0, 1))
            events.append((a1, -1))
    events.sort()
    level = peak = 0
    for _, step in events:
        level += step
        peak = max(peak, level)
    return peak


def active_doas_at(
    timeline: list[tuple[float, float, float]], t0: float, t1: float
) -> list[float]:
    """Ground-truth angles of sources covering at least half of [t0, t1].

    Sources whose activity overlaps the window for less than half its
    length (e.g. around an on/off switch) are not counted, mirroring how
    a block-level estimate is dominated by whichever source is on for
    most of the block.
    """
    half = (t1 - t0) / 2.0
    doas = []
    for a0, a1, doa in timeline:
        overlap = min(a1, t1) - max(a0, t0)
        if overlap >= half:
            doas.append(doa)
    return doas


def _render_source(spec: SourceSpec, n: int, sample_rate: float, seed) -> np.ndarray:
    if spec.kind == "white":
        rng = np.random.default_rng(seed)
        mono = rng.standard_normal(n)
    else:
        samples, _ = read_mono_wav(spec.path, target_rate=sample_rate)
        if samples.size >= n:
            mono = samples[:n]
        else:
            mono = np.zeros(n)
            mono[: samples.size] = samples
    return spec.gain * mono
