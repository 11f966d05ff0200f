from .scenario import (
    ChannelSegment,
    ParseError,
    RadioParams,
    Scenario,
    ScenarioCell,
    ScenarioDevice,
    Stimulus,
    StimulusKind,
    ValidationError,
    load_scenario,
)
from .engine import SimResult, run
from .report import SimReport, emit_report

__all__ = [
    "ChannelSegment",
    "ParseError",
    "RadioParams",
    "Scenario",
    "ScenarioCell",
    "ScenarioDevice",
    "SimReport",
    "SimResult",
    "Stimulus",
    "StimulusKind",
    "ValidationError",
    "emit_report",
    "load_scenario",
    "run",
]
