"""Floquet stability of coupled Mathieu-type systems with quasiperiodic forcing."""

__version__ = "0.1.0"

from .core import RationalPoint, StateVector, SystemParams, Variant, fundamental_period
from .floquet import (DEFAULT_CUTOFF, MultiplierConfiguration, MultiplierSet,
                      StabilityVerdict, classify, multipliers, rational_verdict, verdict)
from .hill import (HillMatrix, ScanLine, build_hill, determinant, resonance_curves,
                   resonance_lines_for_seq, trace_transition_curves)
from .integrator import IntegratorConfig, integrate_fundamental, integrate_state
from .slowflow import MuWindow, SlowFlowModel, stability_band, stability_window
from .sweep import StabilityChart, SweepSpec, export_csv, render_chart, run_sweep

__all__ = [
    "RationalPoint", "StateVector", "SystemParams", "Variant", "fundamental_period",
    "DEFAULT_CUTOFF", "MultiplierConfiguration", "MultiplierSet", "StabilityVerdict",
    "classify", "multipliers", "rational_verdict", "verdict",
    "HillMatrix", "ScanLine", "build_hill", "determinant", "resonance_curves",
    "resonance_lines_for_seq", "trace_transition_curves",
    "IntegratorConfig", "integrate_fundamental", "integrate_state",
    "MuWindow", "SlowFlowModel", "stability_band", "stability_window",
    "StabilityChart", "SweepSpec", "export_csv", "render_chart", "run_sweep",
]
