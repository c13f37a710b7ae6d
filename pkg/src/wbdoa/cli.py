"""Command-line entry point.

Commands:
    simulate   render a scenario to a multichannel WAV plus ground truth
    localize   estimate per-block DOAs from a WAV file
    evaluate   run the scenario battery and write score reports
    compare    evaluate, then tabulate estimation-time ratios

Exit codes: 0 success, 2 validation error, 3 I/O error, 4 numerical
failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import logging
import sys
from pathlib import Path

import numpy as np

from .audio_io import read_multichannel_wav, write_wav
from .config import RunSettings, effective_config_text, load_settings
from .evaluation import (
    compare_runtime,
    effective_band,
    make_estimator,
    report_to_csv,
    run_experiment,
    runtime_table,
    summary_table,
    trace_to_csv,
    write_text_atomic,
)
from .spectral import band_select, estimate_bin_covariances, stft
from .subspace import DegenerateSubspaceError
from .synth import MultichannelSignal, synthesize_scenario

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_IO = 3
EXIT_NUMERICAL = 4


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.func(args)
    except (ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (DegenerateSubspaceError, ArithmeticError, np.linalg.LinAlgError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="wbdoa",
        description="wideband DOA estimation toolkit for uniform linear arrays",
    )
    parser.add_argument("--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="INI configuration file")
        p.add_argument("--preset", help="scenario preset name")
        p.add_argument("--out", required=True, help="output directory")
        p.add_argument("--seed", type=int, help="override the scenario RNG seed")

    p_sim = sub.add_parser("simulate", help="write scenario WAV + ground truth")
    common(p_sim)
    p_sim.set_defaults(func=cmd_simulate)

    p_loc = sub.add_parser("localize", help="per-block DOA trace from a WAV")
    common(p_loc)
    p_loc.add_argument("--wav", required=True, help="input multichannel WAV")
    p_loc.add_argument("--algo", help="algorithm name")
    p_loc.set_defaults(func=cmd_localize)

    p_eval = sub.add_parser("evaluate", help="run scenario battery and score")
    common(p_eval)
    p_eval.set_defaults(func=cmd_evaluate)

    p_cmp = sub.add_parser("compare", help="evaluate and tabulate runtimes")
    common(p_cmp)
    p_cmp.set_defaults(func=cmd_compare)
    return parser


def _settings(args, algo_override=None) -> RunSettings:
    if args.config is None and args.preset is None:
        raise ValueError("give --config and/or --preset")
    return load_settings(
        args.config,
        preset_name=args.preset,
        seed_override=args.seed,
        algo_override=algo_override,
    )


def _prepare_out(args, settings: RunSettings) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_text_atomic(out / "effective_config.ini", effective_config_text(settings))
    return out


def cmd_simulate(args) -> int:
    settings = _settings(args)
    out = _prepare_out(args, settings)
    signal, timeline = synthesize_scenario(settings.scenario)
    write_wav(out / "scenario.wav", signal.samples, signal.sample_rate)
    lines = ["# time_start time_end doa_deg"]
    lines += [f"{a:.6f} {b:.6f} {doa:.3f}" for a, b, doa in timeline]
    write_text_atomic(out / "ground_truth.txt", "\n".join(lines) + "\n")
    print(f"wrote {out / 'scenario.wav'} ({signal.num_channels} channels) "
          f"and {out / 'ground_truth.txt'}")
    return EXIT_OK


def cmd_localize(args) -> int:
    settings = _settings(args, algo_override=args.algo)
    samples, rate = read_multichannel_wav(args.wav)
    expected = settings.scenario.geometry.num_sensors
    if samples.shape[0] != expected:
        raise ValueError(
            f"channel mismatch: config expects {expected} channels, "
            f"WAV has {samples.shape[0]}"
        )
    out = _prepare_out(args, settings)
    signal = MultichannelSignal(samples, rate)
    stft_cfg = settings.stft
    if rate != stft_cfg.sample_rate:
        from dataclasses import replace

        stft_cfg = replace(stft_cfg, sample_rate=rate)
    spectrum = stft(signal, stft_cfg)
    f_low, f_high = effective_band(settings.scenario.geometry, *settings.band)
    estimator = make_estimator(
        settings.algorithm, settings.scenario.geometry, solver=settings.solver
    )

    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(
        ["t_start", "t_end"]
        + [f"doa_{i + 1}" for i in range(settings.num_sources)]
    )
    num_blocks = spectrum.num_frames // settings.block_frames
    for b in range(num_blocks):
        start = b * settings.block_frames
        covs = estimate_bin_covariances(
            spectrum, (start, start + settings.block_frames)
        )
        covs = band_select(covs, f_low, f_high)
        doas = estimator(covs, settings.num_sources)
        t0 = start * stft_cfg.hop / stft_cfg.sample_rate
        t1 = (
            (start + settings.block_frames - 1) * stft_cfg.hop
            + stft_cfg.frame_length
        ) / stft_cfg.sample_rate
        row = [f"{t0:.6f}", f"{t1:.6f}"] + [f"{d:.4f}" for d in doas]
        row += [""] * (settings.num_sources - len(doas))
        writer.writerow(row)
    write_text_atomic(out / "doa_trace.csv", buf.getvalue())
    print(f"wrote {out / 'doa_trace.csv'} ({num_blocks} blocks, "
          f"algorithm {settings.algorithm})")
    return EXIT_OK


def _run_reports(settings: RunSettings):
    return run_experiment(
        settings.scenario,
        settings.algorithms,
        settings.stft,
        settings.band,
        block_frames=settings.block_frames,
        scenario_name=settings.scenario_name,
        solver=settings.solver,
    )


def cmd_evaluate(args) -> int:
    settings = _settings(args)
    out = _prepare_out(args, settings)
    reports = _run_reports(settings)
    for rep in reports:
        stem = f"{rep.scenario}__{rep.algorithm}"
        write_text_atomic(out / f"{stem}_blocks.csv", report_to_csv(rep))
        write_text_atomic(out / f"{stem}_trace.csv", trace_to_csv(rep))
    write_text_atomic(out / "summary.txt", summary_table(reports))
    print(summary_table(reports), end="")
    return EXIT_OK


def cmd_compare(args) -> int:
    settings = _settings(args)
    out = _prepare_out(args, settings)
    reports = _run_reports(settings)
    rows = compare_runtime(reports)
    write_text_atomic(out / "runtime.txt", runtime_table(rows))
    print(runtime_table(rows), end="")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
