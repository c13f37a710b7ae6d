"""INI-style run configuration.

A config file is standard INI with these sections, all optional when a
preset supplies the corresponding values:

    [scenario]            preset, snr_db, duration, sample_rate, seed
    [array]               num_sensors, spacing, sound_speed
    [source.<label>]      kind (white|wav), doa, gain, active, path
    [stft]                frame_length, hop, window
    [band]                low_hz, high_hz
    [localize]            algorithm, num_sources, block_frames, solver
    [evaluate]            algorithms (comma separated), block_frames, solver

``active`` is a comma-separated list of ``start:end`` second intervals,
e.g. ``active = 0:2, 4:6``. Explicit ``[source.*]`` sections replace the
preset's sources wholesale. Values given in the file override preset
defaults; command-line flags override the file.
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass, replace
from pathlib import Path

from .evaluation import ALGORITHMS
from .geometry import ArrayGeometry
from .presets import DEFAULT_BAND, DEFAULT_BLOCK_FRAMES, get_preset
from .spectral import StftConfig
from .synth import ScenarioConfig, SourceSpec


@dataclass(frozen=True)
class RunSettings:
    """Everything a command needs, with defaults resolved."""

    scenario: ScenarioConfig
    scenario_name: str
    stft: StftConfig
    band: tuple[float, float]
    block_frames: int
    algorithm: str
    algorithms: tuple[str, ...]
    num_sources: int
    solver: str


def load_settings(
    config_path: str | None,
    preset_name: str | None = None,
    seed_override: int | None = None,
    algo_override: str | None = None,
) -> RunSettings:
    """Resolve preset defaults, config file values and CLI overrides."""
    parser = configparser.ConfigParser()
    if config_path is not None:
        path = Path(config_path)
        if not path.is_file():
            raise FileNotFoundError(f"config file not found: {path}")
        parser.read(path)

    preset_name = parser.get("scenario", "preset", fallback=preset_name)
    if preset_name is None and not _has_sources(parser):
        raise ValueError(
            "no scenario given: select a preset or define [source.*] sections"
        )

    duration = _getfloat(parser, "scenario", "duration")
    snr_db = _getfloat(parser, "scenario", "snr_db")
    sample_rate = _getfloat(parser, "scenario", "sample_rate")
    seed = _getint(parser, "scenario", "seed")

    if preset_name is not None:
        preset = get_preset(
            preset_name,
            duration=duration if duration is not None else 60.0,
            snr_db=snr_db,
            seed=seed,
            sample_rate=sample_rate if sample_rate is not None else 16000.0,
        )
        scenario = preset.scenario
        stft_cfg = preset.stft
        band = preset.band
        block_frames = preset.block_frames
        name = preset.name
    else:
        scenario = None
        stft_cfg = StftConfig(
            frame_length=1024,
            hop=512,
            window="hann",
            sample_rate=sample_rate if sample_rate is not None else 16000.0,
        )
        band = DEFAULT_BAND
        block_frames = DEFAULT_BLOCK_FRAMES
        name = "custom"

    geometry = _parse_geometry(parser) or (
        scenario.geometry if scenario else ArrayGeometry(5, 0.044)
    )
    sources = _parse_sources(parser)
    if sources or scenario is None:
        scenario = ScenarioConfig(
            geometry=geometry,
            sources=tuple(sources),
            snr_db=snr_db if snr_db is not None else 10.0,
            duration=duration if duration is not None else 60.0,
            sample_rate=sample_rate if sample_rate is not None else 16000.0,
            rng_seed=seed if seed is not None else 0,
        )
    elif _parse_geometry(parser):
        scenario = replace(scenario, geometry=geometry)

    if parser.has_section("stft"):
        stft_cfg = StftConfig(
            frame_length=_getint(parser, "stft", "frame_length") or stft_cfg.frame_length,
            hop=_getint(parser, "stft", "hop") or stft_cfg.hop,
            window=parser.get("stft", "window", fallback=stft_cfg.window),
            sample_rate=scenario.sample_rate,
        )
    else:
        stft_cfg = replace(stft_cfg, sample_rate=scenario.sample_rate)
    if parser.has_section("band"):
        band = (
            _getfloat(parser, "band", "low_hz") or band[0],
            _getfloat(parser, "band", "high_hz") or band[1],
        )

    algorithm = algo_override or parser.get(
        "localize", "algorithm", fallback="proposed-multi-batch"
    )
    algo_list = parser.get(
        "evaluate",
        "algorithms",
        fallback="proposed-multi-batch, hist-esprit, css",
    )
    algorithms = tuple(a.strip() for a in algo_list.split(",") if a.strip())
    for a in (algorithm, *algorithms):
        if a not in ALGORITHMS:
            raise ValueError(
                f"unknown algorithm {a!r}; valid names: {', '.join(ALGORITHMS)}"
            )
    block_frames = (
        _getint(parser, "localize", "block_frames")
        or _getint(parser, "evaluate", "block_frames")
        or block_frames
    )
    num_sources = _getint(parser, "localize", "num_sources") or max(
        1, len(scenario.sources) and _max_q(scenario)
    )
    solver = parser.get(
        "localize", "solver", fallback=parser.get("evaluate", "solver", fallback="tls")
    )

    if seed_override is not None:
        scenario = replace(scenario, rng_seed=seed_override)

    return RunSettings(
        scenario=scenario,
        scenario_name=name,
        stft=stft_cfg,
        band=band,
        block_frames=block_frames,
        algorithm=algorithm,
        algorithms=algorithms,
        num_sources=num_sources,
        solver=solver,
    )


def effective_config_text(settings: RunSettings) -> str:
    """INI echo of the fully resolved configuration."""
    cp = configparser.ConfigParser()
    cp["scenario"] = {
        "name": settings.scenario_name,
        "snr_db": str(settings.scenario.snr_db),
        "duration": str(settings.scenario.duration),
        "sample_rate": str(settings.scenario.sample_rate),
        "seed": str(settings.scenario.rng_seed),
    }
    cp["array"] = {
        "num_sensors": str(settings.scenario.geometry.num_sensors),
        "spacing": str(settings.scenario.geometry.spacing),
        "sound_speed": str(settings.scenario.geometry.sound_speed),
    }
    for i, src in enumerate(settings.scenario.sources, start=1):
        section = f"source.{i}"
        cp[section] = {"kind": src.kind, "doa": str(src.doa_deg), "gain": str(src.gain)}
        if src.path:
            cp[section]["path"] = src.path
        if src.activity is not None:
            cp[section]["active"] = ", ".join(f"{a}:{b}" for a, b in src.activity)
    cp["stft"] = {
        "frame_length": str(settings.stft.frame_length),
        "hop": str(settings.stft.hop),
        "window": settings.stft.window,
    }
    cp["band"] = {"low_hz": str(settings.band[0]), "high_hz": str(settings.band[1])}
    cp["localize"] = {
        "algorithm": settings.algorithm,
        "num_sources": str(settings.num_sources),
        "block_frames": str(settings.block_frames),
        "solver": settings.solver,
    }
    cp["evaluate"] = {"algorithms": ", ".join(settings.algorithms)}
    import io

    buf = io.StringIO()
    cp.write(buf)
    return buf.getvalue()


def _has_sources(parser: configparser.ConfigParser) -> bool:
    return any(s.startswith("source.") for s in parser.sections())


def _parse_geometry(parser) -> ArrayGeometry | None:
    if not parser.has_section("array"):
        return None
    return ArrayGeometry(
        num_sensors=parser.getint("array", "num_sensors", fallback=5),
        spacing=parser.getfloat("array", "spacing", fallback=0.044),
        sound_speed=parser.getfloat("array", "sound_speed", fallback=343.0),
    )


def _parse_sources(parser) -> list[SourceSpec]:
    sources = []
    for section in parser.sections():
        if not section.startswith("source."):
            continue
        kind = parser.get(section, "kind", fallback="white")
        activity = None
        raw = parser.get(section, "active", fallback=None)
        if raw:
            activity = tuple(
                (float(a), float(b))
                for a, b in (pair.split(":") for pair in raw.split(","))
            )
        sources.append(
            SourceSpec(
                kind=kind,
                doa_deg=parser.getfloat(section, "doa"),
                gain=parser.getfloat(section, "gain", fallback=1.0),
                activity=activity,
                path=parser.get(section, "path", fallback=None),
            )
        )
    return sources


def _max_q(scenario: ScenarioConfig) -> int:
    from .synth import max_simultaneous_sources

    return max(1, max_simultaneous_sources(scenario.sources, scenario.duration))


def _getfloat(parser, section, option):
    return parser.getfloat(section, option) if parser.has_option(section, option) else None


def _getint(parser, section, option):
    return parser.getint(section, option) if parser.has_option(section, option) else None
