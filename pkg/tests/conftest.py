import numpy as np
import pytest

from wbdoa import ArrayGeometry, steering_matrix
from wbdoa.spectral import BinCovariance

FS = 16000.0
FRAME = 1024
BIN_SPACING = FS / FRAME  # 15.625 Hz


@pytest.fixture
def geom() -> ArrayGeometry:
    return ArrayGeometry(num_sensors=5, spacing=0.044, sound_speed=343.0)


def exact_covariance(geom, frequency, doas, powers=None, noise_power=0.0):
    """Noise-free (or isotropic-noise) covariance built from the model."""
    doas = np.atleast_1d(doas)
    if powers is None:
        powers = np.ones(len(doas))
    a = steering_matrix(geom, frequency, doas)
    r = a @ np.diag(np.asarray(powers, dtype=float)) @ a.conj().T
    if noise_power:
        r = r + noise_power * np.eye(geom.num_sensors)
    return BinCovariance(float(frequency), r, 1)


def stft_band_frequencies(f_low=600.0, f_high=3800.0):
    """Bin-grid frequencies of the default analysis band."""
    lo = int(np.ceil(f_low / BIN_SPACING))
    hi = int(np.floor(f_high / BIN_SPACING))
    return np.arange(lo, hi + 1) * BIN_SPACING


def principal_angles(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Principal angles between the column spans of two matrices."""
    qa, _ = np.linalg.qr(a)
    qb, _ = np.linalg.qr(b)
    s = np.linalg.svd(qa.conj().T @ qb, compute_uv=False)
    return np.arccos(np.clip(s, -1.0, 1.0))
