from .data import Observations, load_csv
from .experiment import ExperimentMetrics, aggregate, run_experiment
from .report import emit_report, load_report, report_document
from .simulate import Gaussian, SimulationSpec, Uniform, mean_shift, simulate, variance_shift

__all__ = [
    "ExperimentMetrics",
    "Gaussian",
    "Observations",
    "SimulationSpec",
    "Uniform",
    "aggregate",
    "emit_report",
    "load_csv",
    "load_report",
    "mean_shift",
    "report_document",
    "run_experiment",
    "simulate",
    "variance_shift",
]
