# app/core/exceptions.py
"""
Custom exception classes for the motion planner.
"""


class PlannerException(Exception):
    """Base exception for all planner-related errors."""

    def __init__(self, message: str, error_code: str | None = None) -> None:
        """
        Initialize planner exception.

        :param message: Human-readable error message
        :type message: str
        :param error_code: Optional error code for client handling
        :type error_code: str | None
        """
        self.message = message
        self.error_code = error_code
        super().__init__(self.message)


class SourceNotInFreespaceException(PlannerException):
    """Raised when a heat source or goal lies inside an obstacle."""

    def __init__(self, message: str = "source not in freespace") -> None:
        """
        Initialize source-not-in-freespace exception.

        :param message: Error message
        :type message: str
        """
        super().__init__(message, error_code="SOURCE_NOT_IN_FREESPACE")


class InfeasibleStartException(PlannerException):
    """Raised when the start configuration violates the collision constraint."""

    def __init__(self, message: str = "infeasible start") -> None:
        super().__init__(message, error_code="INFEASIBLE_START")


class InvalidStartException(PlannerException):
    """Raised when the solver's initial point has a non-finite objective."""

    def __init__(self, message: str = "invalid start") -> None:
        super().__init__(message, error_code="INVALID_START")


class DimensionMismatchException(PlannerException):
    """Raised when a configuration does not match the robot's degrees of freedom."""

    def __init__(self, expected: int, received: int) -> None:
        """
        Initialize dimension mismatch exception.

        :param expected: Expected vector length
        :type expected: int
        :param received: Received vector length
        :type received: int
        """
        message = f"Configuration has {received} entries, expected {expected}"
        super().__init__(message, error_code="DIMENSION_MISMATCH")


class InvalidParameterException(PlannerException):
    """Raised when invalid parameters are provided."""

    def __init__(self, parameter: str, reason: str) -> None:
        """
        Initialize invalid parameter exception.

        :param parameter: Name of the invalid parameter
        :type parameter: str
        :param reason: Reason why parameter is invalid
        :type reason: str
        """
        message = f"Invalid parameter '{parameter}': {reason}"
        super().__init__(message, error_code="INVALID_PARAMETER")


class ConfigurationException(PlannerException):
    """Raised when an experiment document cannot be read or validated."""

    def __init__(self, message: str, path: str | None = None) -> None:
        """
        Initialize configuration exception.

        :param message: Error message
        :type message: str
        :param path: Config file that caused the error
        :type path: str | None
        """
        full_message = message
        if path:
            full_message += f" (config: {path})"
        super().__init__(full_message, error_code="CONFIGURATION_ERROR")


class FieldConstructionException(PlannerException):
    """Raised when a geodesic field cannot be built."""

    def __init__(self, message: str) -> None:
        super().__init__(message, error_code="FIELD_CONSTRUCTION_ERROR")
