"""Experiment harness: block-wise estimation, MAE/SDE scoring and
runtime comparison.

A run synthesizes a scenario, computes one STFT, and walks it in
non-overlapping blocks of frames. Every algorithm sees the identical
per-block covariances; only the estimation call itself is timed. Blocks
with no active source are excluded from scoring. The per-block model
order is the number of ground-truth sources active in the block, so all
algorithms receive the same oracle order.
"""

from __future__ import annotations

import csv
import io
import logging
import os
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Sequence

import numpy as np
from scipy.optimize import linear_sum_assignment

from .baselines import CssConfig, CssFocuser, HistogramConfig, hist_esprit
from .esprit import wideband_esprit_multi, wideband_esprit_single
from .geometry import ArrayGeometry, lowest_aliasing_frequency
from .spectral import BinCovariance, StftConfig, band_select, estimate_bin_covariances, stft
from .synth import ScenarioConfig, active_doas_at, synthesize_scenario

logger = logging.getLogger(__name__)

ALGORITHMS = (
    "proposed-single",
    "proposed-multi-batch",
    "proposed-multi-iterative",
    "hist-esprit",
    "css",
)


@dataclass(frozen=True)
class BlockResult:
    """Scored estimates for one block.

    ``estimates`` is stored in truth order (after assignment), so signed
    errors are recoverable as ``estimates - truth``.
    """

    block_index: int
    time_span: tuple[float, float]
    estimates: tuple[float, ...]
    truth: tuple[float, ...]
    per_source_error: tuple[float, ...]
    wall_time: float


@dataclass(frozen=True)
class RunReport:
    """Aggregate scores for one algorithm on one scenario."""

    algorithm: str
    scenario: str
    mae: float
    sde: float
    blocks: tuple[BlockResult, ...]
    total_time: float


@dataclass(frozen=True)
class RuntimeRow:
    algorithm: str
    total_time: float
    pct_vs_baseline: float


def assign_estimates(estimates: Sequence[float], truth: Sequence[float]) -> np.ndarray:
    """Reorder estimates to minimize the total absolute error vs truth."""
    est = np.asarray(estimates, dtype=float)
    tru = np.asarray(truth, dtype=float)
    if est.shape != tru.shape:
        raise ValueError(
            f"estimate/truth length mismatch: {est.shape} vs {tru.shape}"
        )
    cost = np.abs(est[None, :] - tru[:, None])
    _, cols = linear_sum_assignment(cost)
    return est[cols]


def score_block(estimates: Sequence[float], truth: Sequence[float]) -> np.ndarray:
    """Absolute per-source errors in truth order, optimally assigned."""
    assigned = assign_estimates(estimates, truth)
    return np.abs(assigned - np.asarray(truth, dtype=float))


def effective_band(
    geom: ArrayGeometry, f_low: float, f_high: float
) -> tuple[float, float]:
    """Clamp the requested band to the array's aliasing limit, logging cuts."""
    limit = lowest_aliasing_frequency(geom)
    if f_high > limit:
        logger.warning(
            "band truncated: requested up to %.1f Hz, aliasing limit is %.1f Hz",
            f_high,
            limit,
        )
        f_high = limit
    return f_low, f_high


def make_estimator(
    name: str, geom: ArrayGeometry, solver: str = "tls"
) -> Callable[[list[BinCovariance], int], np.ndarray]:
    """Look up an estimation callable by algorithm name.

    The callable maps ``(covs, num_sources)`` to an ascending array of
    DOA estimates in degrees. Names and their pipelines:
    ``proposed-single`` (accumulated vector, order one),
    ``proposed-multi-batch`` / ``proposed-multi-iterative`` (accumulated
    covariance), ``hist-esprit`` and ``css`` (baselines).
    """
    if name == "proposed-single":
        def run(covs, q):
            return wideband_esprit_single(covs, geom, solver=solver).doas
    elif name == "proposed-multi-batch":
        def run(covs, q):
            return wideband_esprit_multi(covs, q, geom, mode="batch", solver=solver).doas
    elif name == "proposed-multi-iterative":
        def run(covs, q):
            return wideband_esprit_multi(covs, q, geom, mode="iterative", solver=solver).doas
    elif name == "hist-esprit":
        def run(covs, q):
            return hist_esprit(covs, q, geom, HistogramConfig(), solver=solver).doas
    elif name == "css":
        focusers: dict[int, CssFocuser] = {}
        def run(covs, q):
            if q not in focusers:
                focusers[q] = CssFocuser(geom, q, CssConfig())
            return focusers[q].localize(covs).doas
    else:
        raise ValueError(
            f"unknown algorithm {name!r}; valid names: {', '.join(ALGORITHMS)}"
        )
    return run


def run_experiment(
    scenario: ScenarioConfig,
    algorithms: Sequence[str],
    stft_cfg: StftConfig,
    band: tuple[float, float],
    block_frames: int = 16,
    scenario_name: str = "scenario",
    solver: str = "tls",
) -> list[RunReport]:
    """Synthesize, localize block-wise with every algorithm, and score.

    Args:
        scenario: Scenario to synthesize.
        algorithms: Algorithm names (see ``ALGORITHMS``).
        stft_cfg: Analysis parameters.
        band: Requested (f_low, f_high) in hertz; automatically clamped
            to the aliasing limit.
        block_frames: STFT frames per localization estimate.
        scenario_name: Label recorded in the reports.
        solver: Shift-invariance solver for the ESPRIT-based methods.

    Returns:
        One report per algorithm, in input order.
    """
    for name in algorithms:
        if name not in ALGORITHMS:
            raise ValueError(
                f"unknown algorithm {name!r}; valid names: {', '.join(ALGORITHMS)}"
            )
    signal, timeline = synthesize_scenario(scenario)
    spectrum = stft(signal, stft_cfg)
    f_low, f_high = effective_band(scenario.geometry, *band)

    num_blocks = spectrum.num_frames // block_frames
    block_covs: list[list[BinCovariance]] = []
    block_spans: list[tuple[float, float]] = []
    block_truths: list[tuple[float, ...]] = []
    for b in range(num_blocks):
        start = b * block_frames
        t0 = start * stft_cfg.hop / stft_cfg.sample_rate
        t1 = (
            (start + block_frames - 1) * stft_cfg.hop + stft_cfg.frame_length
        ) / stft_cfg.sample_rate
        truth = active_doas_at(timeline, t0, t1)
        if not truth:
            continue
        covs = estimate_bin_covariances(spectrum, (start, start + block_frames))
        block_covs.append(band_select(covs, f_low, f_high))
        block_spans.append((t0, t1))
        block_truths.append(tuple(sorted(truth)))

    reports = []
    for name in algorithms:
        estimator = make_estimator(name, scenario.geometry, solver=solver)
        blocks = []
        total_time = 0.0
        for b, (covs, span, truth) in enumerate(
            zip(block_covs, block_spans, block_truths)
        ):
            q = len(truth)
            t_start = time.perf_counter()
            estimates = np.asarray(estimator(covs, q), dtype=float)
            elapsed = time.perf_counter() - t_start
            total_time += elapsed
            if estimates.size < q:
                # a deficit counts as broadside guesses rather than a skip
                estimates = np.concatenate(
                    [estimates, np.zeros(q - estimates.size)]
                )
            assigned = assign_estimates(estimates[:q], truth)
            errors = np.abs(assigned - np.asarray(truth))
            blocks.append(
                BlockResult(
                    block_index=b,
                    time_span=span,
                    estimates=tuple(float(x) for x in assigned),
                    truth=truth,
                    per_source_error=tuple(float(x) for x in errors),
                    wall_time=elapsed,
                )
            )
        reports.append(_aggregate(name, scenario_name, blocks, total_time))
    return reports


def _aggregate(
    algorithm: str, scenario_name: str, blocks: list[BlockResult], total_time: float
) -> RunReport:
    abs_errors = [e for blk in blocks for e in blk.per_source_error]
    signed = [
        est - tru
        for blk in blocks
        for est, tru in zip(blk.estimates, blk.truth)
    ]
    mae = float(np.mean(abs_errors)) if abs_errors else float("nan")
    sde = float(np.std(signed)) if signed else float("nan")
    return RunReport(
        algorithm=algorithm,
        scenario=scenario_name,
        mae=mae,
        sde=sde,
        blocks=tuple(blocks),
        total_time=total_time,
    )


def compare_runtime(
    reports: Sequence[RunReport], baseline: str = "hist-esprit"
) -> list[RuntimeRow]:
    """Estimation-time table relative to a baseline algorithm.

    ``pct_vs_baseline`` is the speedup in percent: positive means faster
    than the baseline. All reports must come from the same scenario and
    block set.
    """
    if not reports:
        raise ValueError("no reports to compare")
    scen = reports[0].scenario
    count = len(reports[0].blocks)
    for rep in reports:
        if rep.scenario != scen:
            raise ValueError("reports mix different scenarios")
        if len(rep.blocks) != count:
            raise ValueError("reports have mismatched block counts")
    base = next((r for r in reports if r.algorithm == baseline), None)
    if base is None:
        raise ValueError(f"baseline {baseline!r} not among the reports")
    rows = []
    for rep in reports:
        if base.total_time > 0:
            pct = 100.0 * (base.total_time - rep.total_time) / base.total_time
        else:
            pct = 0.0
        rows.append(RuntimeRow(rep.algorithm, rep.total_time, pct))
    return rows


def report_to_csv(report: RunReport) -> str:
    """Block rows as CSV text. Deterministic: timing is deliberately
    left out so identical runs serialize byte-identically."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    q = max((len(b.truth) for b in report.blocks), default=0)
    header = ["block", "t_start", "t_end"]
    header += [f"truth_{i + 1}" for i in range(q)]
    header += [f"estimate_{i + 1}" for i in range(q)]
    header += [f"abs_error_{i + 1}" for i in range(q)]
    writer.writerow(header)
    for blk in report.blocks:
        row = [blk.block_index, f"{blk.time_span[0]:.6f}", f"{blk.time_span[1]:.6f}"]
        row += _padded(blk.truth, q)
        row += _padded(blk.estimates, q)
        row += _padded(blk.per_source_error, q)
        writer.writerow(row)
    return buf.getvalue()


def trace_to_csv(report: RunReport) -> str:
    """Plot-ready error-vs-time trace: block midpoint and mean abs error."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["time", "mean_abs_error"])
    for blk in report.blocks:
        mid = 0.5 * (blk.time_span[0] + blk.time_span[1])
        writer.writerow([f"{mid:.6f}", f"{np.mean(blk.per_source_error):.6f}"])
    return buf.getvalue()


def summary_table(reports: Sequence[RunReport]) -> str:
    """Human-readable MAE/SDE/time table for a scenario."""
    lines = [f"scenario: {reports[0].scenario}" if reports else "scenario: (none)"]
    lines.append(f"{'algorithm':<26} {'MAE [deg]':>10} {'SDE [deg]':>10} {'time [s]':>10}")
    for rep in reports:
        lines.append(
            f"{rep.algorithm:<26} {rep.mae:>10.3f} {rep.sde:>10.3f} "
            f"{rep.total_time:>10.3f}"
        )
    return "\n".join(lines) + "\n"


def runtime_table(rows: Sequence[RuntimeRow]) -> str:
    lines = [f"{'algorithm':<26} {'time [s]':>10} {'vs hist-esprit':>16}"]
    for row in rows:
        lines.append(
            f"{row.algorithm:<26} {row.total_time:>10.3f} "
            f"{row.pct_vs_baseline:>+15.1f}%"
        )
    return "\n".join(lines) + "\n"


def write_text_atomic(path, text: str) -> None:
    """Write-then-rename so rerun outputs are replaced atomically."""
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(text, encoding="utf-8")
    os.replace(tmp, path)


def _padded(values: Sequence[float], width: int) -> list[str]:
    out = [f"{v:.6f}" for v in values]
    out += [""] * (width - len(values))
    return out
