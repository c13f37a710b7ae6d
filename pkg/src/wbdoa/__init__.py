"""Wideband sound-source DOA estimation for uniform linear microphone arrays.

The package provides a scenario simulator (far-field plane waves plus
diffuse noise), an STFT covariance front end, a family of ESPRIT-based
estimators built on signal-subspace phase retargeting, two classic
wideband baselines, and an evaluation harness with MAE/SDE scoring.
"""

from .geometry import (
    ArrayGeometry,
    aliasing_frequency,
    lowest_aliasing_frequency,
    steering_matrix,
    steering_vector,
)
from .spectral import BinCovariance, MultichannelSpectrum, StftConfig, band_select, estimate_bin_covariances, stft
from .subspace import (
    DegenerateSubspaceError,
    RotatedSubspace,
    SubspaceEstimate,
    WidebandCovariance,
    accumulate_iterative,
    accumulate_single_source,
    accumulate_wideband,
    bin_weight,
    decompose,
    reconstruct_covariance,
    rotate_subspace,
    wideband_signal_subspace,
)
from .esprit import (
    EspritSolution,
    esprit_from_subspace,
    narrowband_esprit,
    wideband_esprit_multi,
    wideband_esprit_single,
)
from .baselines import BaselineResult, CssConfig, HistogramConfig, css_localize, hist_esprit
from .synth import (
    MultichannelSignal,
    ScenarioConfig,
    SourceSpec,
    apply_farfield_propagation,
    generate_diffuse_noise,
    mix_at_snr,
    synthesize_scenario,
)
from .evaluation import (
    BlockResult,
    RunReport,
    compare_runtime,
    run_experiment,
    score_block,
)
from .presets import Preset, get_preset

__version__ = "0.1.0"

__all__ = [
    "ArrayGeometry",
    "BaselineResult",
    "BinCovariance",
    "BlockResult",
    "CssConfig",
    "DegenerateSubspaceError",
    "EspritSolution",
    "HistogramConfig",
    "MultichannelSignal",
    "MultichannelSpectrum",
    "Preset",
    "RotatedSubspace",
    "RunReport",
    "ScenarioConfig",
    "SourceSpec",
    "StftConfig",
    "SubspaceEstimate",
    "WidebandCovariance",
    "accumulate_iterative",
    "accumulate_single_source",
    "accumulate_wideband",
    "aliasing_frequency",
    "apply_farfield_propagation",
    "band_select",
    "bin_weight",
    "compare_runtime",
    "css_localize",
    "decompose",
    "esprit_from_subspace",
    "estimate_bin_covariances",
    "generate_diffuse_noise",
    "get_preset",
    "hist_esprit",
    "lowest_aliasing_frequency",
    "mix_at_snr",
    "narrowband_esprit",
    "reconstruct_covariance",
    "rotate_subspace",
    "run_experiment",
    "score_block",
    "steering_matrix",
    "steering_vector",
    "stft",
    "synthesize_scenario",
    "wideband_esprit_multi",
    "wideband_esprit_single",
    "wideband_signal_subspace",
]
