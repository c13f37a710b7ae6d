"""ESPRIT solvers: narrowband per-bin estimation and the wideband
pipelines built on subspace retargeting.

A uniform linear array has two overlapping subarrays (sensors 1..P-1
and 2..P) whose signal subspaces differ by a diagonal phase factor.
Solving the shift-invariance relation for that factor and reading DOAs
off its eigenvalue phases is the narrowband estimator; the wideband
pipelines feed it one accumulated subspace instead of running it per
bin.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

from .geometry import ArrayGeometry, lowest_aliasing_frequency
from .spectral import BinCovariance
from .subspace import (
    SubspaceEstimate,
    accumulate_iterative,
    accumulate_single_source,
    accumulate_wideband,
    bin_weight,
    decompose,
    rotate_subspace,
    wideband_signal_subspace,
)

SOLVERS = ("ls", "tls")
GAP_WARNING_THRESHOLD = 1.5


@dataclass(frozen=True)
class EspritSolution:
    """Result of one shift-invariance solve.

    Attributes:
        psi_eigenvalues: Eigenvalues of the rotation operator, paired
            index-by-index with ``doas``.
        doas: Estimated angles in degrees, ascending.
        frequency_used: Frequency whose phase scale the subspace carries;
            the angle formula divides by it.
        solver: ``"ls"`` or ``"tls"``.
        subspace_gap: Eigenvalue or singular-value ratio across the
            signal/noise split of whatever matrix produced the subspace;
            ``nan`` when the caller had nothing meaningful to report.
        out_of_range: True when at least one eigenvalue phase mapped
            outside the unit sine range and was clamped to +/-90 deg
            (aliasing or a noise-dominated estimate).
    """

    psi_eigenvalues: np.ndarray
    doas: np.ndarray
    frequency_used: float
    solver: str
    subspace_gap: float = math.nan
    out_of_range: bool = False

    @property
    def ambiguous_order(self) -> bool:
        """Weak signal/noise separation: gap below 1.5."""
        return self.subspace_gap < GAP_WARNING_THRESHOLD


def esprit_from_subspace(
    signal_subspace: np.ndarray,
    frequency: float,
    geom: ArrayGeometry,
    solver: str = "tls",
) -> EspritSolution:
    """Solve the subarray shift-invariance relation on a given subspace.

    Args:
        signal_subspace: P x Q complex matrix spanning the signal
            subspace (columns need not be orthonormal).
        frequency: Frequency in hertz the subspace phases correspond to.
        geom: Array geometry (supplies spacing and sound speed).
        solver: ``"ls"`` solves the overdetermined system by orthogonal
            factorization; ``"tls"`` uses the smallest right-singular
            subspace of the stacked subarrays.

    Returns:
        Solution with DOAs ascending; sine arguments beyond +/-1 are
        clamped to +/-90 degrees and flagged, never raised, so every
        block can be scored.
    """
    es = np.asarray(signal_subspace)
    p, q = es.shape
    if p != geom.num_sensors:
        raise ValueError(f"subspace has {p} rows for a {geom.num_sensors}-sensor array")
    if p < q + 1:
        raise ValueError(f"need at least {q + 1} sensors to resolve {q} sources")
    if frequency <= 0:
        raise ValueError("frequency must be positive")
    if solver not in SOLVERS:
        raise ValueError(f"solver must be one of {SOLVERS}, got {solver!r}")

    es1 = es[:-1, :]
    es2 = es[1:, :]
    if solver == "ls":
        psi, *_ = np.linalg.lstsq(es1, es2, rcond=None)
    else:
        _, _, vh = np.linalg.svd(np.hstack([es1, es2]))
        v = vh.conj().T
        v12 = v[:q, q:]
        v22 = v[q:, q:]
        psi = -v12 @ np.linalg.inv(v22)
    eigenvalues = np.linalg.eigvals(psi)

    sines = (
        -np.angle(eigenvalues)
        * geom.sound_speed
        / (2.0 * np.pi * frequency * geom.spacing)
    )
    clamped = np.abs(sines) > 1.0
    doas = np.rad2deg(np.arcsin(np.clip(sines, -1.0, 1.0)))
    order = np.argsort(doas, kind="stable")
    return EspritSolution(
        psi_eigenvalues=eigenvalues[order],
        doas=doas[order],
        frequency_used=float(frequency),
        solver=solver,
        out_of_range=bool(np.any(clamped)),
    )


def narrowband_esprit(
    cov: BinCovariance,
    num_sources: int,
    geom: ArrayGeometry,
    solver: str = "tls",
) -> EspritSolution:
    """Classic single-bin ESPRIT: decompose, then solve shift invariance.

    The solution's ``subspace_gap`` is the ratio of the smallest signal
    eigenvalue to the largest noise eigenvalue; a value near one means
    the covariance shows no usable signal structure.
    """
    est = decompose(cov, num_sources)
    solution = esprit_from_subspace(est.signal_vectors, cov.frequency, geom, solver)
    return replace(solution, subspace_gap=_eigenvalue_gap(est))


def wideband_esprit_single(
    covs: Sequence[BinCovariance],
    geom: ArrayGeometry,
    f_ref: float | None = None,
    solver: str = "tls",
) -> EspritSolution:
    """Single-source wideband pipeline on the accumulated vector.

    Each bin is decomposed at order one, its dominant eigenvector
    retargeted to the reference frequency, and the retargeted vectors
    summed with eigenvalue weights. One shift-invariance solve on the
    accumulated vector yields the estimate.
    """
    _check_band(covs, geom)
    if f_ref is None:
        f_ref = max(c.frequency for c in covs)
    rotated = []
    weights = []
    gaps = []
    for cov in covs:
        est = decompose(cov, 1)
        rotated.append(rotate_subspace(est, f_ref))
        weights.append(bin_weight(est))
        gaps.append(_eigenvalue_gap(est))
    vector = accumulate_single_source(rotated, weights)
    solution = esprit_from_subspace(vector[:, None], f_ref, geom, solver)
    return replace(solution, subspace_gap=float(np.median(gaps)))


def wideband_esprit_multi(
    covs: Sequence[BinCovariance],
    num_sources: int,
    geom: ArrayGeometry,
    mode: str = "batch",
    solver: str = "tls",
    f_ref: float | None = None,
    reconstruction: str = "signal",
) -> EspritSolution:
    """Multi-source wideband pipeline on the accumulated covariance.

    ``mode="batch"`` retargets every bin straight to the reference bin;
    ``mode="iterative"`` walks the bins in ascending order with
    adjacent-ratio retargeting steps. Either way the dominant subspace
    of the accumulated covariance feeds one shift-invariance solve at
    the accumulator's reference frequency. A weak singular-value gap is
    surfaced on the solution, not raised.
    """
    _check_band(covs, geom)
    if mode == "batch":
        wb = accumulate_wideband(covs, num_sources, f_ref=f_ref,
                                 reconstruction=reconstruction)
    elif mode == "iterative":
        ordered = sorted(covs, key=lambda c: c.frequency)
        wb = accumulate_iterative(ordered, num_sources,
                                  reconstruction=reconstruction)
    else:
        raise ValueError(f"mode must be 'batch' or 'iterative', got {mode!r}")
    subspace, gap = wideband_signal_subspace(wb, num_sources)
    solution = esprit_from_subspace(subspace, wb.reference_frequency, geom, solver)
    return replace(solution, subspace_gap=gap)


def _eigenvalue_gap(est: SubspaceEstimate) -> float:
    noise_top = float(est.noise_values[0]) if est.noise_values.size else 0.0
    signal_floor = float(est.signal_values[-1])
    if noise_top <= 0:
        return math.inf if signal_floor > 0 else 1.0
    return signal_floor / noise_top


def _check_band(covs: Sequence[BinCovariance], geom: ArrayGeometry) -> None:
    if len(covs) == 0:
        raise ValueError("no bins supplied")
    limit = lowest_aliasing_frequency(geom)
    worst = max(c.frequency for c in covs)
    if worst > limit:
        raise ValueError(
            f"bin at {worst:.1f} Hz exceeds the aliasing limit {limit:.1f} Hz; "
            "truncate the band first"
        )
