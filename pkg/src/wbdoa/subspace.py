"""Signal-subspace machinery for wideband accumulation.

The pipeline implemented here turns narrowband spatial covariances into
one wideband covariance referenced to a single frequency:

1. eigendecompose each bin's covariance and split signal/noise parts;
2. retarget the signal eigenvectors from the bin frequency to a
   reference frequency by scaling their phase progression, element
   magnitudes untouched;
3. rebuild a rank-Q covariance from the retargeted vectors and the
   signal eigenvalues;
4. sum the per-bin reconstructions with eigenvalue-trace weights,
   either in one pass against a fixed reference bin (batch) or by
   walking the bins in ascending order and re-aligning the running
   accumulator one bin step at a time (iterative).

Phase handling: element phases are unwrapped along the sensor axis
before scaling. For a uniform linear array the adjacent-element phase
step of a plane wave stays inside (-pi, pi] below the spatial aliasing
limit, so unwrapping recovers the true propagation phases even when the
absolute phase at the far sensors exceeds pi. Scaling unwrapped phases
therefore maps a single-source eigenvector onto the reference-frequency
steering vector exactly. With several sources the eigenvectors are
mixtures of the per-source steering vectors and phase scaling of a
mixture is only approximate; accuracy then depends on how correlated
the steering vectors are across the processed band.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .spectral import BinCovariance

logger = logging.getLogger(__name__)

HERMITIAN_RTOL = 1e-9
DEGENERATE_COND = 1e12


class DegenerateSubspaceError(ArithmeticError):
    """Raised when retargeted signal vectors are numerically rank deficient."""


@dataclass(frozen=True)
class SubspaceEstimate:
    """Eigendecomposition of one bin covariance, split at model order Q.

    Eigenpairs are sorted by descending eigenvalue; ties keep the order
    the symmetric eigensolver produced. Every eigenvector's phase is
    fixed so its first non-negligible element is real positive, which
    makes downstream accumulation deterministic.
    """

    frequency: float
    signal_vectors: np.ndarray
    noise_vectors: np.ndarray
    signal_values: np.ndarray
    noise_values: np.ndarray

    @property
    def num_sources(self) -> int:
        return self.signal_vectors.shape[1]

    @property
    def num_sensors(self) -> int:
        return self.signal_vectors.shape[0]


@dataclass(frozen=True)
class RotatedSubspace:
    """Signal vectors retargeted from ``source_frequency`` to ``reference_frequency``."""

    reference_frequency: float
    vectors: np.ndarray
    values: np.ndarray
    source_frequency: float

    @property
    def num_sources(self) -> int:
        return self.vectors.shape[1]


@dataclass(frozen=True)
class WidebandCovariance:
    """Weighted sum of retargeted per-bin reconstructions."""

    matrix: np.ndarray
    reference_frequency: float
    bins_accumulated: int
    total_weight: float


def decompose(cov: BinCovariance, num_sources: int) -> SubspaceEstimate:
    """Eigendecompose a bin covariance into signal and noise subspaces.

    Args:
        cov: Hermitian PSD bin covariance.
        num_sources: Model order Q with ``1 <= Q < P``.

    Raises:
        ValueError: If Q is out of range or the matrix is not Hermitian
            within tolerance.
    """
    R = np.asarray(cov.matrix)
    p = R.shape[0]
    if not 1 <= num_sources < p:
        raise ValueError(f"model order {num_sources} not in [1, {p - 1}]")
    scale = max(1.0, float(np.linalg.norm(R)))
    if np.linalg.norm(R - R.conj().T) > HERMITIAN_RTOL * scale:
        raise ValueError("covariance is not Hermitian within tolerance")
    values, vectors = np.linalg.eigh(R)
    order = np.argsort(-values, kind="stable")
    values = values[order]
    vectors = fix_phase(vectors[:, order])
    return SubspaceEstimate(
        frequency=cov.frequency,
        signal_vectors=vectors[:, :num_sources],
        noise_vectors=vectors[:, num_sources:],
        signal_values=values[:num_sources],
        noise_values=values[num_sources:],
    )


def fix_phase(vectors: np.ndarray) -> np.ndarray:
    """Rotate each column so its first non-negligible element is real positive.

    "Non-negligible" means at least 1e-12 of the column's largest
    magnitude, so a denormal leading entry cannot set the gauge.
    """
    v = np.array(vectors)
    mags = np.abs(v)
    thresh = 1e-12 * mags.max(axis=0, keepdims=True)
    anchor = np.argmax(mags > thresh, axis=0)
    ref = v[anchor, np.arange(v.shape[1])]
    phases = np.where(np.abs(ref) > 0, ref / np.abs(np.where(ref == 0, 1, ref)), 1.0)
    return v * np.conj(phases)[None, :]


def scale_phases(vectors: np.ndarray, exponent: float) -> np.ndarray:
    """Scale unwrapped element phases by ``exponent``, magnitudes preserved."""
    if exponent == 1.0:
        return np.array(vectors)
    phases = np.unwrap(np.angle(vectors), axis=0)
    return np.abs(vectors) * np.exp(1j * phases * exponent)


def rotate_subspace(est: SubspaceEstimate, f_ref: float) -> RotatedSubspace:
    """Retarget signal vectors to ``f_ref`` by phase scaling.

    Each element's phase is multiplied by ``f_ref / est.frequency`` with
    magnitude unchanged; ``f_ref == est.frequency`` is an exact identity.
    Phases are read after unwrapping along the sensor axis (see module
    docstring), which coincides with the principal value whenever no
    element's true phase has wrapped.
    """
    if est.frequency <= 0 or f_ref <= 0:
        raise ValueError("frequencies must be positive")
    return RotatedSubspace(
        reference_frequency=f_ref,
        vectors=scale_phases(est.signal_vectors, f_ref / est.frequency),
        values=np.array(est.signal_values),
        source_frequency=est.frequency,
    )


def bin_weight(est: SubspaceEstimate) -> float:
    """Reliability weight of a bin: the trace of its signal eigenvalues."""
    return float(np.sum(est.signal_values))


def accumulate_single_source(
    rotated: Sequence[RotatedSubspace], weights: Sequence[float]
) -> np.ndarray:
    """Weighted sum of single-source retargeted vectors, unit normalized.

    Every vector is re-gauged (first non-negligible element real
    positive) before summing so bins cannot cancel through arbitrary
    eigenvector phases. The bins commute: permuting the inputs leaves
    the result unchanged.

    Raises:
        ValueError: On empty input, mismatched lengths, mixed reference
            frequencies, a vector with more than one column, or an
            all-zero weight list.
    """
    if len(rotated) == 0 or len(rotated) != len(weights):
        raise ValueError("need equally many rotated subspaces and weights")
    f_ref = rotated[0].reference_frequency
    for r in rotated:
        if r.num_sources != 1:
            raise ValueError("single-source accumulation requires Q = 1 inputs")
        if r.reference_frequency != f_ref:
            raise ValueError("all inputs must share one reference frequency")
    w = np.asarray(weights, dtype=float)
    if not np.any(w != 0):
        raise ValueError("all weights are zero")
    total = np.zeros(rotated[0].vectors.shape[0], dtype=complex)
    for r, wi in zip(rotated, w):
        total += wi * fix_phase(r.vectors)[:, 0]
    norm = np.linalg.norm(total)
    if norm == 0:
        raise ValueError("accumulated vector vanished")
    return total / norm


def reconstruct_covariance(rotated: RotatedSubspace) -> np.ndarray:
    """Rank-Q covariance from retargeted vectors: ``U diag(lam) pinv(U)``.

    With no retargeting the vectors are orthonormal, the pseudo-inverse
    is the conjugate transpose, and the result is exactly the signal
    part of the original covariance.

    Raises:
        DegenerateSubspaceError: If the vectors' condition number
            exceeds 1e12.
    """
    return _reconstruct(rotated.vectors, rotated.values)


def _reconstruct(vectors: np.ndarray, values: np.ndarray) -> np.ndarray:
    q = vectors.shape[1]
    if q == 1:
        norm_sq = float(np.real(np.vdot(vectors[:, 0], vectors[:, 0])))
        if norm_sq == 0.0:
            raise DegenerateSubspaceError("retargeted vector is zero")
        return (vectors * values) @ (vectors.conj().T / norm_sq)
    gram = vectors.conj().T @ vectors
    if q == 2:
        tr = float(np.real(gram[0, 0] + gram[1, 1]))
        det = float(np.real(gram[0, 0] * gram[1, 1] - gram[0, 1] * gram[1, 0]))
        well_conditioned = det > 1e-8 * tr * tr
    else:
        gvals = np.linalg.eigvalsh(gram)
        well_conditioned = gvals[0] > 1e-8 * gvals[-1]
    if well_conditioned:
        # Gram condition is the square of the vectors'; the guard above
        # keeps it within what a direct solve handles accurately.
        pinv = np.linalg.solve(gram, vectors.conj().T)
    else:
        u, s, vh = np.linalg.svd(vectors, full_matrices=False)
        if s[0] == 0 or s[-1] <= s[0] / DEGENERATE_COND:
            raise DegenerateSubspaceError(
                f"retargeted subspace is rank deficient (cond > {DEGENERATE_COND:.0e})"
            )
        pinv = (vh.conj().T / s) @ u.conj().T
    return (vectors * values) @ pinv


def _reconstruct_full(est: SubspaceEstimate, exponent: float) -> np.ndarray:
    """Literal full-basis variant: retarget all P eigenvectors and invert."""
    vectors = np.hstack([est.signal_vectors, est.noise_vectors])
    values = np.concatenate([est.signal_values, est.noise_values])
    rotated = scale_phases(vectors, exponent)
    cond = np.linalg.cond(rotated)
    if not np.isfinite(cond) or cond > DEGENERATE_COND:
        raise DegenerateSubspaceError(
            f"retargeted eigenbasis is rank deficient (cond > {DEGENERATE_COND:.0e})"
        )
    return (rotated * values) @ np.linalg.inv(rotated)


def accumulate_wideband(
    covs: Sequence[BinCovariance],
    num_sources: int,
    f_ref: float | None = None,
    reconstruction: str = "signal",
) -> WidebandCovariance:
    """One-pass accumulation of all bins against a fixed reference bin.

    Per bin: decompose, retarget to ``f_ref``, reconstruct, then sum
    with eigenvalue-trace weights normalized to one, making the result
    invariant to a global scaling of the input covariances. Bins whose
    retargeted basis is degenerate are skipped with a warning; only if
    every bin fails does the error propagate.

    Args:
        covs: Bin covariances, any order.
        num_sources: Model order Q.
        f_ref: Reference frequency; defaults to the highest bin. Must be
            at least the highest bin frequency so phases only expand
            within their valid range.
        reconstruction: ``"signal"`` (rank-Q pseudo-inverse form, the
            default) or ``"full"`` (all P eigenvectors with a true
            inverse).
    """
    if len(covs) == 0:
        raise ValueError("no bins to accumulate")
    if reconstruction not in ("signal", "full"):
        raise ValueError(f"unknown reconstruction mode {reconstruction!r}")
    top = max(c.frequency for c in covs)
    if f_ref is None:
        f_ref = top
    if f_ref < top:
        raise ValueError(
            f"reference frequency {f_ref} Hz below highest bin {top} Hz"
        )
    p = covs[0].matrix.shape[0]
    acc = np.zeros((p, p), dtype=complex)
    total_weight = 0.0
    used = 0
    failures = []
    for cov in covs:
        est = decompose(cov, num_sources)
        weight = bin_weight(est)
        try:
            if reconstruction == "signal":
                part = reconstruct_covariance(rotate_subspace(est, f_ref))
            else:
                part = _reconstruct_full(est, f_ref / est.frequency)
        except DegenerateSubspaceError as exc:
            logger.warning("skipping %.1f Hz bin: %s", cov.frequency, exc)
            failures.append(exc)
            continue
        acc += weight * part
        total_weight += weight
        used += 1
    if used == 0:
        raise DegenerateSubspaceError(
            f"all {len(covs)} bins degenerate; first failure: {failures[0]}"
        )
    if total_weight > 0:
        acc /= total_weight
    return WidebandCovariance(
        matrix=acc,
        reference_frequency=float(f_ref),
        bins_accumulated=used,
        total_weight=total_weight,
    )


def accumulate_iterative(
    covs: Sequence[BinCovariance],
    num_sources: int,
    reconstruction: str = "signal",
) -> WidebandCovariance:
    """Bin-by-bin accumulation with one-step phase retargeting.

    The accumulator starts from the lowest bin retargeted to the second
    bin's frequency. At each subsequent bin the bin's own weighted
    reconstruction (no retargeting needed, the accumulator is already
    referenced there) is added, the accumulator is re-decomposed, and
    its eigen-representation is retargeted by the next adjacent-bin
    frequency ratio. Every retargeting step therefore scales phases by
    a factor close to one. The result is referenced to the highest bin
    and, for two bins, coincides exactly with the one-pass accumulation.

    Raises:
        ValueError: With fewer than two bins or frequencies not strictly
            ascending.
    """
    if len(covs) < 2:
        raise ValueError("iterative accumulation needs at least two bins")
    freqs = [c.frequency for c in covs]
    if any(f1 <= f0 for f0, f1 in zip(freqs, freqs[1:])):
        raise ValueError("bin frequencies must be strictly ascending")
    if reconstruction not in ("signal", "full"):
        raise ValueError(f"unknown reconstruction mode {reconstruction!r}")

    est = decompose(covs[0], num_sources)
    weight = bin_weight(est)
    acc = weight * reconstruct_covariance(rotate_subspace(est, freqs[1]))
    total_weight = weight
    used = 1
    n = len(covs)
    for i in range(1, n):
        est = decompose(covs[i], num_sources)
        weight = bin_weight(est)
        try:
            if reconstruction == "signal":
                part = _reconstruct(est.signal_vectors, est.signal_values)
            else:
                part = _reconstruct_full(est, 1.0)
        except DegenerateSubspaceError as exc:
            logger.warning("skipping %.1f Hz bin: %s", covs[i].frequency, exc)
            part = None
        if part is not None:
            acc = acc + weight * part
            total_weight += weight
            used += 1
        if i < n - 1:
            acc = _retarget_matrix(acc, num_sources, freqs[i + 1] / freqs[i])
    if used == 0:
        raise DegenerateSubspaceError("all bins degenerate")
    return WidebandCovariance(
        matrix=acc / total_weight,
        reference_frequency=freqs[-1],
        bins_accumulated=used,
        total_weight=total_weight,
    )


def _retarget_matrix(matrix: np.ndarray, num_sources: int, exponent: float) -> np.ndarray:
    """Re-decompose an accumulator and scale its eigenvector phases.

    The accumulator is not Hermitian in general (rank-Q reconstructions
    with oblique inverses), so a general eigendecomposition is used and
    the dominant Q eigenpairs by magnitude are kept.
    """
    values, vectors = np.linalg.eig(matrix)
    order = np.argsort(-np.abs(values), kind="stable")[:num_sources]
    values = values[order]
    vectors = fix_phase(vectors[:, order])
    return _reconstruct(scale_phases(vectors, exponent), values)


def wideband_signal_subspace(
    wb: WidebandCovariance, num_sources: int
) -> tuple[np.ndarray, float]:
    """Dominant Q-dimensional subspace of a wideband covariance.

    Returns the top-Q left singular vectors (phase-fixed like
    :func:`decompose`) together with the singular-value gap
    ``s[Q-1] / s[Q]``. A gap below 1.5 signals an ambiguous model
    order; callers surface that as a warning flag, never an error.
    """
    p = wb.matrix.shape[0]
    if not 1 <= num_sources < p:
        raise ValueError(f"model order {num_sources} not in [1, {p - 1}]")
    u, s, _ = np.linalg.svd(wb.matrix)
    if s[num_sources] > 0:
        gap = float(s[num_sources - 1] / s[num_sources])
    else:
        gap = float("inf")
    if gap < 1.5:
        logger.warning(
            "weak singular-value gap %.3f at order %d: model order ambiguous",
            gap,
            num_sources,
        )
    return fix_phase(u[:, :num_sources]), gap
