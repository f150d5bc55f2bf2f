"""Separate a broadband trace from additive low-frequency noise with sparse spline fits."""

__version__ = "0.1.0"

from .errors import SubsepError  # noqa: E402
from .focuss import FocussConfig, FocussResult, run_focuss  # noqa: E402
from .pipeline import (  # noqa: E402
    SeparationConfig,
    SeparationResult,
    compare,
    fft_baseline,
    separate,
    sweep_q,
)
from .signal import Signal, SynthSpec, read_signal_csv, synth_scenario, write_signal_csv  # noqa: E402

__all__ = [
    "__version__",
    "FocussConfig",
    "FocussResult",
    "SeparationConfig",
    "SeparationResult",
    "Signal",
    "SubsepError",
    "SynthSpec",
    "compare",
    "fft_baseline",
    "read_signal_csv",
    "run_focuss",
    "separate",
    "sweep_q",
    "synth_scenario",
    "write_signal_csv",
]
