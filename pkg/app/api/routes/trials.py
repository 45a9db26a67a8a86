# app/api/routes/trials.py
"""
API routes for single planning trials.
"""
from fastapi import APIRouter, Depends, HTTPException

from app.api.dependencies import get_planner_service
from app.core.exceptions import PlannerException
from app.models.requests import TrialRequest
from app.models.responses import ErrorResponse, TrialResponse
from app.services.planner_service import PlannerService, trial_payload

router = APIRouter(prefix="/trials", tags=["Trials"])


@router.post(
    "",
    response_model=TrialResponse,
    responses={400: {"model": ErrorResponse}, 500: {"model": ErrorResponse}}
)
def run_trial(
    request: TrialRequest,
    planner_service: PlannerService = Depends(get_planner_service)
) -> TrialResponse:
    """
    Plan one (goal, condition) pair and score it.

    Solver failures are reported in ``solver_status`` with a 200 response.

    :param request: Trial parameters
    :type request: TrialRequest
    :param planner_service: Planner service dependency
    :type planner_service: PlannerService
    :return: Trial record
    :rtype: TrialResponse
    :raises HTTPException: If the preset, goal index or condition is invalid
    """
    try:
        result = planner_service.run_trial(
            request.environment,
            request.goal_index,
            request.condition,
            request.time_limit
        )
        return TrialResponse(**trial_payload(result))
    except PlannerException as e:
        raise HTTPException(status_code=400, detail=str(e))
    except Exception as e:
        raise HTTPException(status_code=500, detail=f"Internal error: {str(e)}")
