"""Uniform linear array geometry, steering vectors and spatial-aliasing limits.

Conventions used throughout the package:

* DOA angles are measured from array broadside, in degrees, so that
  broadside is 0 deg and endfire is +/-90 deg.
* Sensor 1 is the phase reference; the propagation delay to sensor ``p``
  for a plane wave from angle ``theta`` is ``(p - 1) * spacing * sin(theta)
  / sound_speed`` seconds.
* A steering element is ``exp(-j * 2*pi * f * delay)``, so every element
  has unit modulus and the first row of a steering matrix is all ones.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class ArrayGeometry:
    """Uniform linear array description.

    Attributes:
        num_sensors: Number of microphones (>= 2).
        spacing: Inter-sensor spacing in meters (> 0).
        sound_speed: Propagation speed in meters/second. Defaults to
            343 m/s (air at roughly 20 C).
    """

    num_sensors: int
    spacing: float
    sound_speed: float = 343.0

    def __post_init__(self) -> None:
        if self.num_sensors < 2:
            raise ValueError(f"need at least 2 sensors, got {self.num_sensors}")
        if self.spacing <= 0:
            raise ValueError(f"spacing must be positive, got {self.spacing}")
        if self.sound_speed <= 0:
            raise ValueError(f"sound speed must be positive, got {self.sound_speed}")


def sensor_delays(geom: ArrayGeometry, doa_deg: float) -> np.ndarray:
    """Per-sensor propagation delays in seconds for a far-field plane wave.

    The first sensor is the reference and has zero delay.
    """
    _check_angle(doa_deg)
    theta = math.radians(doa_deg)
    p = np.arange(geom.num_sensors, dtype=float)
    return p * geom.spacing * math.sin(theta) / geom.sound_speed


def steering_matrix(geom: ArrayGeometry, frequency: float, doas_deg) -> np.ndarray:
    """Build the P x Q steering matrix for the given frequency and angles.

    Args:
        geom: Array geometry.
        frequency: Frequency in hertz (> 0).
        doas_deg: Scalar or sequence of angles in degrees, each within
            [-90, 90].

    Returns:
        Complex P x Q matrix whose (p, q) element is
        ``exp(-j * 2*pi * frequency * (p-1) * spacing * sin(theta_q) / c)``.
        All elements have unit modulus; the first row is all ones.

    Raises:
        ValueError: If ``frequency <= 0`` or any angle lies outside
            [-90, 90].
    """
    if frequency <= 0:
        raise ValueError(f"frequency must be positive, got {frequency}")
    doas = np.atleast_1d(np.asarray(doas_deg, dtype=float))
    for theta in doas:
        _check_angle(theta)
    p = np.arange(geom.num_sensors, dtype=float)[:, None]
    delays = p * geom.spacing * np.sin(np.deg2rad(doas))[None, :] / geom.sound_speed
    return np.exp(-2j * np.pi * frequency * delays)


def steering_vector(geom: ArrayGeometry, frequency: float, doa_deg: float) -> np.ndarray:
    """Single-angle steering vector of shape (P,)."""
    return steering_matrix(geom, frequency, [doa_deg])[:, 0]


def aliasing_frequency(geom: ArrayGeometry, doa_deg: float) -> float:
    """Spatial aliasing limit for a source at the given angle, in hertz.

    Above ``c / (2 * spacing * |sin(theta)|)`` the inter-sensor phase
    difference exceeds pi and the angle becomes ambiguous. The value is
    returned as continuous hertz; quantization onto an STFT bin grid is
    the caller's concern.

    A broadside source (``theta == 0``) never aliases; ``math.inf`` is
    returned in that case rather than raising.
    """
    _check_angle(doa_deg)
    s = abs(math.sin(math.radians(doa_deg)))
    if s == 0.0:
        return math.inf
    return geom.sound_speed / (2.0 * geom.spacing * s)


def lowest_aliasing_frequency(geom: ArrayGeometry) -> float:
    """Worst-case aliasing limit over all angles: ``c / (2 * spacing)``.

    This is the aliasing frequency of an endfire source and the safe
    upper band edge when source angles are unknown.
    """
    return geom.sound_speed / (2.0 * geom.spacing)


def _check_angle(doa_deg: float) -> None:
    if not -90.0 <= doa_deg <= 90.0:
        raise ValueError(f"angle {doa_deg} deg outside [-90, 90]")
