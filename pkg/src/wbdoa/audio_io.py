"""WAV file reading/writing and sample-rate conversion.

Supported input formats: PCM 16-bit and IEEE float-32, mono. Files at a
different rate are resampled with ``scipy.signal.resample_poly``, a
linear-phase polyphase FIR resampler (Kaiser-windowed sinc prototype),
so resampling adds no phase distortion.
"""

from __future__ import annotations

from fractions import Fraction
from pathlib import Path

import numpy as np
from scipy.io import wavfile
from scipy.signal import resample_poly


def read_mono_wav(path, target_rate: float | None = None) -> tuple[np.ndarray, float]:
    """Read a mono WAV file, optionally resampling.

    Args:
        path: File path.
        target_rate: If given, resample to this rate in hertz.

    Returns:
        ``(samples, rate)`` with samples as float64 in roughly [-1, 1].

    Raises:
        OSError: If the file cannot be read or is not mono
            PCM16/float32.
    """
    path = Path(path)
    try:
        rate, data = wavfile.read(path)
    except FileNotFoundError:
        raise
    except Exception as exc:  # scipy raises assorted types for bad files
        raise OSError(f"cannot read WAV file {path}: {exc}") from exc
    if data.ndim != 1:
        raise OSError(
            f"{path}: expected mono WAV, found {data.shape[1]} channels"
        )
    if data.dtype == np.int16:
        samples = data.astype(np.float64) / 32768.0
    elif data.dtype in (np.float32, np.float64):
        samples = data.astype(np.float64)
    else:
        raise OSError(f"{path}: unsupported WAV sample format {data.dtype}")
    out_rate = float(rate)
    if target_rate is not None and float(target_rate) != out_rate:
        samples = resample(samples, out_rate, float(target_rate))
        out_rate = float(target_rate)
    return samples, out_rate


def resample(samples: np.ndarray, rate_in: float, rate_out: float) -> np.ndarray:
    """Polyphase resampling from ``rate_in`` to ``rate_out`` hertz."""
    frac = Fraction(rate_out / rate_in).limit_denominator(10000)
    return resample_poly(samples, frac.numerator, frac.denominator)


def write_wav(path, samples: np.ndarray, rate: float) -> None:
    """Write samples as a float-32 WAV file (channels x samples layout).

    The file is written to a temporary name and renamed into place so a
    crashed run never leaves a truncated WAV behind.
    """
    path = Path(path)
    data = np.asarray(samples, dtype=np.float32)
    if data.ndim == 2:
        data = data.T  # wavfile wants samples x channels
    tmp = path.with_name(path.name + ".tmp")
    wavfile.write(tmp, int(rate), data)
    tmp.replace(path)


def read_multichannel_wav(path) -> tuple[np.ndarray, float]:
    """Read a multichannel WAV as a channels x samples float64 array."""
    path = Path(path)
    try:
        rate, data = wavfile.read(path)
    except FileNotFoundError:
        raise
    except Exception as exc:
        raise OSError(f"cannot read WAV file {path}: {exc}") from exc
    if data.dtype == np.int16:
        data = data.astype(np.float64) / 32768.0
    else:
        data = data.astype(np.float64)
    if data.ndim == 1:
        data = data[None, :]
    else:
        data = data.T
    return data, float(rate)
