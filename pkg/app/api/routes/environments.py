# app/api/routes/environments.py
"""
API routes for the benchmark presets.
"""
from fastapi import APIRouter, Depends, HTTPException

from app.api.dependencies import get_planner_service
from app.core.exceptions import PlannerException
from app.models.responses import EnvironmentInfo, EnvironmentListResponse, ErrorResponse
from app.services.planner_service import PlannerService

router = APIRouter(prefix="/environments", tags=["Environments"])


@router.get(
    "",
    response_model=EnvironmentListResponse,
    responses={400: {"model": ErrorResponse}, 500: {"model": ErrorResponse}}
)
def list_environments(
    planner_service: PlannerService = Depends(get_planner_service)
) -> EnvironmentListResponse:
    """
    List the experiment presets the service can plan in.

    :param planner_service: Planner service dependency
    :type planner_service: PlannerService
    :return: One entry per preset
    :rtype: EnvironmentListResponse
    :raises HTTPException: If a preset cannot be loaded
    """
    try:
        entries = planner_service.list_environments()
        return EnvironmentListResponse(environments=[EnvironmentInfo(**e) for e in entries])
    except PlannerException as e:
        raise HTTPException(status_code=400, detail=str(e))
    except Exception as e:
        raise HTTPException(status_code=500, detail=f"Internal error: {str(e)}")
