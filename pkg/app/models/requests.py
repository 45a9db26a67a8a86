# app/models/requests.py
"""
Pydantic models for API request validation.
"""
from pydantic import BaseModel, Field, field_validator


class FieldQueryRequest(BaseModel):
    """Request model for geodesic field queries."""

    environment: str = Field(..., description="Preset name, e.g. planar_narrow")
    goal: list[float] = Field(..., min_length=2, max_length=3, description="Goal point in m")
    points: list[list[float]] = Field(..., min_length=1, description="Query points in m")

    @field_validator("points")
    @classmethod
    def validate_points(cls, v: list[list[float]]) -> list[list[float]]:
        """
        Validate that all query points share one dimension.

        :param v: Query points
        :type v: list[list[float]]
        :return: Validated points
        :rtype: list[list[float]]
        :raises ValueError: If point dimensions differ or are not 2 or 3
        """
        sizes = {len(p) for p in v}
        if len(sizes) != 1 or sizes.pop() not in (2, 3):
            raise ValueError("points must all have 2 or all have 3 coordinates")
        return v


class TrialRequest(BaseModel):
    """Request model for a single planning trial."""

    environment: str = Field(..., description="Preset name, e.g. cartesian_narrow")
    goal_index: int = Field(0, ge=0, description="Index into the preset's goal set")
    condition: str = Field("geodesic-flow:50", description="Condition label")
    time_limit: float | None = Field(
        None, gt=0.0, le=600.0, description="Solver wall clock limit in s"
    )
