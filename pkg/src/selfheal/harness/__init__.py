"""Pipeline orchestration, run configuration, reports, and the CLI."""

from .config import (
    AgentSection,
    DetectorSection,
    EvalSection,
    GnnSection,
    RunConfig,
    SimulatorSection,
    config_from_dict,
    load_config,
    resolved_config_json,
)
from .pipeline import compare_adaptation, run_pipeline
from .report import RunReport, emit_report, parse_report, render_markdown

__all__ = [
    "AgentSection",
    "DetectorSection",
    "EvalSection",
    "GnnSection",
    "RunConfig",
    "RunReport",
    "SimulatorSection",
    "compare_adaptation",
    "config_from_dict",
    "emit_report",
    "load_config",
    "parse_report",
    "render_markdown",
    "resolved_config_json",
    "run_pipeline",
]
