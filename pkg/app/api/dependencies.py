# app/api/dependencies.py
"""
FastAPI dependency injection providers.
"""
from app.services.planner_service import PlannerService

# Singleton service instance
_planner_service: PlannerService | None = None


def get_planner_service() -> PlannerService:
    """
    Dependency provider for the planner service (singleton pattern).

    :return: Planner service instance
    :rtype: PlannerService
    """
    global _planner_service

    if _planner_service is None:
        _planner_service = PlannerService()

    return _planner_service
