"""Closed-loop scenarios, resilience scoring, campaigns and reports."""

from .bus import TOPICS, TopicBus
from .campaign import (
    CampaignReport,
    CellRecord,
    campaign_from_dict,
    emit_report,
    load_campaign,
    read_csv,
    run_campaign,
    write_csv,
)
from .metric import ExecutionTrace, GridMismatch, ResilienceParams, resilience, write_timeseries
from .profiles import P_FAIL, PROFILES, degradation_profile, failure_time
from .scenario import STATUS_NONE, STATUS_SCORE, STATUS_X, CellResult, ScenarioConfig, run_scenario

__all__ = [
    "TOPICS",
    "TopicBus",
    "CampaignReport",
    "CellRecord",
    "campaign_from_dict",
    "emit_report",
    "load_campaign",
    "read_csv",
    "run_campaign",
    "write_csv",
    "ExecutionTrace",
    "GridMismatch",
    "ResilienceParams",
    "resilience",
    "write_timeseries",
    "P_FAIL",
    "PROFILES",
    "degradation_profile",
    "failure_time",
    "STATUS_NONE",
    "STATUS_SCORE",
    "STATUS_X",
    "CellResult",
    "ScenarioConfig",
    "run_scenario",
]
