"""Strapdown INS with an error-state Kalman filter, vehicle pseudo-measurements
(ZUPT, ZARU, NHC) and wheel-slip detection for small skid-steer robots."""

from .config import PipelineConfig, load_config
from .errors import (
    DataError,
    GimbalLockError,
    NumericalHealthError,
    PolarRegionError,
    ScenarioError,
    SingularUpdateError,
    SlipNavError,
    StreamGapError,
)
from .evaluate import EvaluationReport, evaluate
from .pipeline import FilterRun, run_comparators, run_filter, run_toy_static
from .sim import BUILTIN_SCENARIOS, ScenarioSpec, Segment, simulate
from .slip import SlipClass, SlipRecord

__all__ = [
    "BUILTIN_SCENARIOS",
    "DataError",
    "EvaluationReport",
    "FilterRun",
    "GimbalLockError",
    "NumericalHealthError",
    "PipelineConfig",
    "PolarRegionError",
    "ScenarioError",
    "ScenarioSpec",
    "Segment",
    "SingularUpdateError",
    "SlipClass",
    "SlipNavError",
    "SlipRecord",
    "StreamGapError",
    "evaluate",
    "load_config",
    "run_comparators",
    "run_filter",
    "run_toy_static",
    "simulate",
]
