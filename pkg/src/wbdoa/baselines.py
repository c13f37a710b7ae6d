"""Comparison methods: histogram-pooled narrowband ESPRIT and the
coherent signal subspace (focusing) method with a MUSIC scan."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .esprit import narrowband_esprit
from .geometry import ArrayGeometry, steering_matrix
from .spectral import BinCovariance


@dataclass(frozen=True)
class HistogramConfig:
    """Peak picking over pooled per-bin estimates."""

    bin_width: float = 1.0
    min_peak_separation: float = 10.0

    def __post_init__(self) -> None:
        if self.bin_width <= 0:
            raise ValueError("bin width must be positive")
        if self.min_peak_separation < self.bin_width:
            raise ValueError("peak separation cannot be below the bin width")


@dataclass(frozen=True)
class CssConfig:
    """Focusing-based wideband MUSIC parameters.

    ``initial_doas`` seeds the focusing matrices; ``"auto"`` obtains them
    from a coarse histogram pass over per-bin ESPRIT estimates.
    """

    f_ref: float | None = None
    grid_resolution: float = 0.1
    initial_doas: tuple[float, ...] | str = "auto"

    def __post_init__(self) -> None:
        if self.grid_resolution <= 0:
            raise ValueError("grid resolution must be positive")


@dataclass(frozen=True)
class BaselineResult:
    """Angles found by a baseline, plus a deficit flag.

    ``insufficient_peaks`` is set when fewer than the requested number
    of peaks could be separated; ``doas`` then holds what was found.
    """

    doas: np.ndarray
    insufficient_peaks: bool = False


def hist_esprit(
    covs: list[BinCovariance],
    num_sources: int,
    geom: ArrayGeometry,
    cfg: HistogramConfig = HistogramConfig(),
    solver: str = "tls",
) -> BaselineResult:
    """Narrowband ESPRIT per bin, pooled into a histogram of angles.

    All per-bin estimates that were not clamped out of range land in a
    histogram over [-90, 90]. The highest Q peaks at least
    ``min_peak_separation`` apart are kept and each is refined as the
    mean of pooled estimates within one bin width of its center.
    """
    pooled = []
    for cov in covs:
        solution = narrowband_esprit(cov, num_sources, geom, solver)
        if not solution.out_of_range:
            pooled.extend(solution.doas)
    pooled = np.asarray(pooled, dtype=float)
    edges = np.arange(-90.0, 90.0 + cfg.bin_width, cfg.bin_width)
    counts, _ = np.histogram(pooled, bins=edges)
    centers = 0.5 * (edges[:-1] + edges[1:])

    peaks = []
    for idx in np.argsort(-counts, kind="stable"):
        if counts[idx] == 0:
            break
        center = centers[idx]
        if all(abs(center - p) >= cfg.min_peak_separation for p in peaks):
            peaks.append(center)
        if len(peaks) == num_sources:
            break

    refined = []
    for peak in peaks:
        near = pooled[np.abs(pooled - peak) <= cfg.bin_width]
        refined.append(float(near.mean()) if near.size else float(peak))
    return BaselineResult(
        doas=np.sort(refined),
        insufficient_peaks=len(refined) < num_sources,
    )


def css_localize(
    covs: list[BinCovariance],
    num_sources: int,
    geom: ArrayGeometry,
    cfg: CssConfig = CssConfig(),
) -> BaselineResult:
    """Coherent signal subspace method with rotational focusing.

    Per bin a unitary focusing matrix ``T = V W^H`` is taken from the
    SVD ``V S W^H`` of ``A_ref A_bin^H`` evaluated at the initial DOA
    guesses; that choice minimizes the focusing error among unitary
    transforms. The focused covariances are summed and a MUSIC spatial
    spectrum over a uniform angle grid yields the final peaks.
    """
    if cfg.initial_doas == "auto":
        coarse = hist_esprit(
            covs, num_sources, geom, HistogramConfig(bin_width=5.0, min_peak_separation=10.0)
        )
        init = coarse.doas
        if init.size == 0:
            return BaselineResult(doas=init, insufficient_peaks=True)
    else:
        init = np.asarray(cfg.initial_doas, dtype=float)
    f_ref = cfg.f_ref if cfg.f_ref is not None else max(c.frequency for c in covs)

    p = geom.num_sensors
    a_ref = steering_matrix(geom, f_ref, init)
    focused = np.zeros((p, p), dtype=complex)
    for cov in covs:
        a_bin = steering_matrix(geom, cov.frequency, init)
        v, _, wh = np.linalg.svd(a_ref @ a_bin.conj().T)
        t = v @ wh
        focused += t @ cov.matrix @ t.conj().T
    focused = 0.5 * (focused + focused.conj().T)

    _, vectors = np.linalg.eigh(focused)
    noise = vectors[:, : p - num_sources]

    grid = np.arange(-90.0, 90.0 + cfg.grid_resolution / 2, cfg.grid_resolution)
    a_grid = steering_matrix(geom, f_ref, grid)
    proj = noise.conj().T @ a_grid
    spectrum = 1.0 / np.einsum("ij,ij->j", proj, np.conj(proj)).real

    peaks = _top_peaks(spectrum, grid, num_sources)
    return BaselineResult(
        doas=np.sort(peaks),
        insufficient_peaks=len(peaks) < num_sources,
    )


class CssFocuser:
    """Reusable focusing state for block-streaming use.

    The focusing matrices depend only on the initial DOA guesses and the
    bin grid, so a tracker can compute them once and apply them to every
    subsequent block; per block only the focused sum, one
    eigendecomposition and the spatial-spectrum scan remain. The first
    block pays for the initialization (a coarse histogram pass when no
    guesses are supplied), later blocks reuse it; a changed bin grid
    forces re-initialization.
    """

    def __init__(self, geom: ArrayGeometry, num_sources: int,
                 cfg: CssConfig = CssConfig()):
        self._geom = geom
        self._num_sources = num_sources
        self._cfg = cfg
        self._key: tuple | None = None
        self._transforms: np.ndarray | None = None
        self._grid: np.ndarray | None = None
        self._a_grid: np.ndarray | None = None

    def localize(self, covs: list[BinCovariance]) -> BaselineResult:
        key = (len(covs), covs[0].frequency, covs[-1].frequency)
        if self._key != key:
            if not self._prepare(covs):
                return BaselineResult(doas=np.empty(0), insufficient_peaks=True)
            self._key = key
        p = self._geom.num_sensors
        focused = np.zeros((p, p), dtype=complex)
        for t, cov in zip(self._transforms, covs):
            focused += t @ cov.matrix @ t.conj().T
        focused = 0.5 * (focused + focused.conj().T)
        _, vectors = np.linalg.eigh(focused)
        noise = vectors[:, : p - self._num_sources]
        proj = noise.conj().T @ self._a_grid
        spectrum = 1.0 / np.einsum("ij,ij->j", proj, np.conj(proj)).real
        peaks = _top_peaks(spectrum, self._grid, self._num_sources)
        return BaselineResult(
            doas=np.sort(peaks),
            insufficient_peaks=len(peaks) < self._num_sources,
        )

    def _prepare(self, covs: list[BinCovariance]) -> bool:
        cfg = self._cfg
        if cfg.initial_doas == "auto":
            coarse = hist_esprit(
                covs,
                self._num_sources,
                self._geom,
                HistogramConfig(bin_width=5.0, min_peak_separation=10.0),
            )
            init = coarse.doas
            if init.size == 0:
                return False
        else:
            init = np.asarray(cfg.initial_doas, dtype=float)
        f_ref = cfg.f_ref if cfg.f_ref is not None else max(c.frequency for c in covs)
        a_ref = steering_matrix(self._geom, f_ref, init)
        transforms = []
        for cov in covs:
            a_bin = steering_matrix(self._geom, cov.frequency, init)
            v, _, wh = np.linalg.svd(a_ref @ a_bin.conj().T)
            transforms.append(v @ wh)
        self._transforms = np.array(transforms)
        self._grid = np.arange(
            -90.0, 90.0 + cfg.grid_resolution / 2, cfg.grid_resolution
        )
        self._a_grid = steering_matrix(self._geom, f_ref, self._grid)
        return True


def _top_peaks(spectrum: np.ndarray, grid: np.ndarray, count: int,
               min_separation: float = 5.0) -> list[float]:
    """Largest local maxima (boundaries included) with a separation floor."""
    padded = np.concatenate([[-np.inf], spectrum, [-np.inf]])
    is_peak = (padded[1:-1] > padded[:-2]) & (padded[1:-1] >= padded[2:])
    candidates = np.flatnonzero(is_peak)
    peaks: list[float] = []
    for idx in candidates[np.argsort(-spectrum[candidates], kind="stable")]:
        angle = float(grid[idx])
        if all(abs(angle - p) >= min_separation for p in peaks):
            peaks.append(angle)
        if len(peaks) == count:
            break
    return peaks
