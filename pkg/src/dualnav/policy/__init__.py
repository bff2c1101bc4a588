"""Fast-policy and slow-planner implementations."""
from .base import (
    Candidate,
    EnvSummary,
    FastPolicy,
    FrontierChoice,
    InvalidSelection,
    MalformedReply,
    NoCandidates,
    PlannerTimeout,
    SlowPlanner,
    SlowPlannerError,
    TransportError,
    label_for,
    nearest_frontier,
)
from .fast import ScriptedFastPolicy
from .remote import RemoteSlowPlanner
from .slow import OracleSlowPlanner, StubLatencyPlanner

__all__ = [
    "Candidate",
    "EnvSummary",
    "FastPolicy",
    "FrontierChoice",
    "InvalidSelection",
    "MalformedReply",
    "NoCandidates",
    "OracleSlowPlanner",
    "PlannerTimeout",
    "RemoteSlowPlanner",
    "ScriptedFastPolicy",
    "SlowPlanner",
    "SlowPlannerError",
    "StubLatencyPlanner",
    "TransportError",
    "label_for",
    "nearest_frontier",
]
