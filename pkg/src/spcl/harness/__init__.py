"""Experiment harness: configs, the run matrix, reports, and the CLI."""

from spcl.harness.config import (
    ExperimentConfig,
    NavgridParams,
    SyntheticParams,
    available_presets,
    load_experiment_config,
    preset_path,
)
from spcl.harness.experiment import (
    ReportRow,
    ReportTable,
    RunArtifact,
    compare_report,
    emit_plot_series,
    load_artifacts,
    read_trace,
    resolve_output_dir,
    run_experiment,
)

__all__ = [
    "ExperimentConfig",
    "NavgridParams",
    "SyntheticParams",
    "available_presets",
    "load_experiment_config",
    "preset_path",
    "ReportRow",
    "ReportTable",
    "RunArtifact",
    "compare_report",
    "emit_plot_series",
    "load_artifacts",
    "read_trace",
    "resolve_output_dir",
    "run_experiment",
]
