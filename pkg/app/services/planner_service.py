# app/services/planner_service.py
"""
Planner service layer behind the REST API.
"""
import logging
import math
import threading
from pathlib import Path
from typing import Any

import numpy as np

from app.config.settings import settings
from app.core.exceptions import InvalidParameterException
from app.core.heat import GeodesicField, build_geodesic_field
from app.core.storage import FieldCache
from app.models.config import ExperimentConfig, load_config
from app.services.benchmarks import Condition, TrialResult, run_trial

logger = logging.getLogger(__name__)


class PlannerService:
    """Preset lookup, memoized geodesic fields and single trials."""

    def __init__(self, presets_dir: Path | None = None, cache_dir: Path | None = None) -> None:
        """
        Initialize planner service.

        :param presets_dir: Directory of experiment YAML presets
        :type presets_dir: Path | None
        :param cache_dir: Field cache directory
        :type cache_dir: Path | None
        """
        self._presets_dir = Path(presets_dir or settings.presets_path)
        self._cache_dir = Path(cache_dir or settings.field_cache_path)
        self._configs: dict[str, ExperimentConfig] | None = None
        self._fields: dict[tuple[str, tuple[float, ...]], GeodesicField] = {}
        self._lock = threading.Lock()

    def _presets(self) -> dict[str, ExperimentConfig]:
        with self._lock:
            if self._configs is None:
                paths = sorted(self._presets_dir.glob("*.yaml"))
                self._configs = {path.stem: load_config(path) for path in paths}
                logger.info("loaded %d presets from %s", len(self._configs), self._presets_dir)
            return self._configs

    def get_config(self, name: str) -> ExperimentConfig:
        """
        Look up a preset by file stem.

        :param name: Preset name such as ``planar_narrow``
        :type name: str
        :return: Experiment config
        :rtype: ExperimentConfig
        :raises InvalidParameterException: If the preset does not exist
        """
        presets = self._presets()
        if name not in presets:
            raise InvalidParameterException("environment", f"unknown preset '{name}'")
        return presets[name]

    def list_environments(self) -> list[dict[str, Any]]:
        """
        Describe every preset.

        :return: Name, environment, dimension, goal count and conditions per preset
        :rtype: list[dict[str, Any]]
        """
        return [
            {
                "name": name,
                "environment": config.environment.name,
                "dimension": len(config.environment.bounds_min),
                "goal_count": int(np.prod(config.environment.goal_region.counts)),
                "conditions": list(config.conditions),
            }
            for name, config in self._presets().items()
        ]

    def get_field(self, name: str, goal: list[float]) -> GeodesicField:
        config = self.get_config(name)
        env = config.to_environment()
        if len(goal) != env.workspace.dimension:
            raise InvalidParameterException("goal", f"expected {env.workspace.dimension} values")
        key = (name, tuple(float(v) for v in goal))
        with self._lock:
            cached = self._fields.get(key)
        if cached is not None:
            return cached
        trial_settings = config.to_settings()
        field_ = build_geodesic_field(
            env.workspace,
            np.asarray(goal, dtype=float),
            trial_settings.cell_size,
            trial_settings.blend_radius,
            trial_settings.heat,
            FieldCache(self._cache_dir),
        )
        with self._lock:
            self._fields[key] = field_
        return field_

    def query_field(
        self, name: str, goal: list[float], points: list[list[float]]
    ) -> dict[str, Any]:
        """
        Geodesic distance and unit flow at workspace points.

        :param name: Preset name
        :type name: str
        :param goal: Goal point
        :type goal: list[float]
        :param points: Query points
        :type points: list[list[float]]
        :return: Distances, flows and out-of-grid flags
        :rtype: dict[str, Any]
        """
        field_ = self.get_field(name, goal)
        array = np.asarray(points, dtype=float)
        if array.ndim != 2 or array.shape[1] != field_.dimension:
            raise InvalidParameterException("points", f"expected rows of {field_.dimension} values")
        sample = field_.query(array)
        return {
            "distance": sample.distance.tolist(),
            "flow": sample.flow.tolist(),
            "clamped": sample.clamped.tolist(),
            "warnings": list(field_.warnings),
        }

    def run_trial(
        self, name: str, goal_index: int, condition: str, time_limit: float | None = None
    ) -> TrialResult:
        """
        Plan one (goal, condition) pair of a preset.

        :param name: Preset name
        :type name: str
        :param goal_index: Goal index in the preset's goal set
        :type goal_index: int
        :param condition: Condition label
        :type condition: str
        :param time_limit: Solver wall clock limit in seconds
        :type time_limit: float | None
        :return: Trial record
        :rtype: TrialResult
        """
        config = self.get_config(name)
        env = config.to_environment()
        goals = env.goals()
        if not 0 <= goal_index < len(goals):
            raise InvalidParameterException(
                "goal_index", f"{goal_index} outside 0..{len(goals) - 1}"
            )
        parsed = Condition.parse(condition)
        field_ = None
        trial_settings = config.to_settings(time_limit, str(self._cache_dir))
        if parsed.apply(trial_settings.weights).needs_field:
            field_ = self.get_field(name, goals[goal_index].tolist())
        return run_trial(env, goals[goal_index], parsed, trial_settings, goal_index, field_)


def trial_payload(result: TrialResult) -> dict[str, Any]:
    """
    Trial record with non-finite numbers mapped to ``None`` for JSON responses.

    :param result: Trial record
    :type result: TrialResult
    :return: JSON-safe record
    :rtype: dict[str, Any]
    """
    record = result.to_dict()
    for key, value in record.items():
        if isinstance(value, float) and not math.isfinite(value):
            record[key] = None
    return record
