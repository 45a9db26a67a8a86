# app/api/routes/fields.py
"""
API routes for geodesic field queries.
"""
from fastapi import APIRouter, Depends, HTTPException

from app.api.dependencies import get_planner_service
from app.core.exceptions import PlannerException
from app.models.requests import FieldQueryRequest
from app.models.responses import ErrorResponse, FieldQueryResponse
from app.services.planner_service import PlannerService

router = APIRouter(prefix="/fields", tags=["Geodesic Fields"])


@router.post(
    "/query",
    response_model=FieldQueryResponse,
    responses={400: {"model": ErrorResponse}, 500: {"model": ErrorResponse}}
)
def query_field(
    request: FieldQueryRequest,
    planner_service: PlannerService = Depends(get_planner_service)
) -> FieldQueryResponse:
    """
    Sample the geodesic field of a goal at workspace points.

    The field is built on first use and memoized per (preset, goal).

    :param request: Field query parameters
    :type request: FieldQueryRequest
    :param planner_service: Planner service dependency
    :type planner_service: PlannerService
    :return: Distance and flow per point
    :rtype: FieldQueryResponse
    :raises HTTPException: If the preset is unknown or the goal lies in an obstacle
    """
    try:
        result = planner_service.query_field(request.environment, request.goal, request.points)
        return FieldQueryResponse(**result)
    except PlannerException as e:
        raise HTTPException(status_code=400, detail=str(e))
    except Exception as e:
        raise HTTPException(status_code=500, detail=f"Internal error: {str(e)}")
