# app/models/responses.py
"""
Pydantic models for API responses.
"""
from typing import Any

from pydantic import BaseModel, Field


class EnvironmentInfo(BaseModel):
    """Summary of one benchmark preset."""

    name: str = Field(..., description="Preset name")
    environment: str = Field(..., description="Environment name used in results")
    dimension: int = Field(..., description="Workspace dimension")
    goal_count: int = Field(..., description="Goals in the goal set")
    conditions: list[str] = Field(..., description="Configured condition labels")


class EnvironmentListResponse(BaseModel):
    """Response model for the preset listing."""

    environments: list[EnvironmentInfo]


class FieldQueryResponse(BaseModel):
    """Response model for geodesic field queries."""

    distance: list[float] = Field(..., description="Geodesic distance per point in m")
    flow: list[list[float]] = Field(..., description="Unit flow toward the goal per point")
    clamped: list[bool] = Field(..., description="Point lay outside the field grid")
    warnings: list[str] = Field(default_factory=list, description="Field construction warnings")


class TrialResponse(BaseModel):
    """Response model for a planning trial."""

    environment: str
    goal_index: int
    goal: list[float]
    condition: str
    success: bool = Field(..., description="Collision free and goal reached")
    collision_free: bool
    goal_reached: bool
    solver_status: str
    wall_time: float = Field(..., description="Trial time in s")
    final_objective: float | None
    iterations: int
    kkt_residual: float | None
    min_clearance: float | None = Field(None, description="Exact clearance along the path in m")
    goal_error: float | None = Field(None, description="End-effector distance to the goal in m")
    reason: str | None = Field(None, description="Why the trial could not be planned")


class ErrorResponse(BaseModel):
    """Response model for errors."""

    error: bool = Field(True, description="Always true for error responses")
    error_code: str = Field(..., description="Machine-readable error code")
    message: str = Field(..., description="Human-readable error message")
    details: dict[str, Any] | None = Field(None, description="Additional error details")
