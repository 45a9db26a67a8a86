# app/core/geometry.py
"""
Workspaces populated by box and sphere obstacles, with exact signed distances.

Every evaluator accepts a single point (shape ``(dim,)``) or a batch of points
(shape ``(..., dim)``) and returns an :class:`SdfSample` with matching leading
axes. Values are negative inside obstacles.
"""
import hashlib
import json
from dataclasses import dataclass, field, replace
from functools import cached_property

import numpy as np
from scipy.special import logsumexp, softmax

from app.core.exceptions import InvalidParameterException
from app.core.rotations import rotation_from_orientation

DEFAULT_HESSIAN_CLAMP = 20.0
DEFAULT_SOFTMIN_BETA = 100.0


@dataclass(frozen=True)
class SdfSample:
    """Signed distance with gradient and (clamped) Hessian."""

    value: np.ndarray
    gradient: np.ndarray
    hessian: np.ndarray


@dataclass(frozen=True)
class BoxObstacle:
    """Oriented box given by its center, half extents and orientation."""

    center: tuple[float, ...]
    half_extents: tuple[float, ...]
    orientation: tuple[float, ...] = ()

    def __post_init__(self) -> None:
        if len(self.center) not in (2, 3):
            raise InvalidParameterException("center", "box must be planar or spatial")
        if len(self.half_extents) != len(self.center):
            raise InvalidParameterException("half_extents", "dimension does not match center")
        if any(h <= 0.0 for h in self.half_extents):
            raise InvalidParameterException("half_extents", "must be strictly positive")
        expected = 1 if len(self.center) == 2 else 3
        if len(self.orientation) not in (0, expected):
            raise InvalidParameterException(
                "orientation", f"expected {expected} angle(s), got {len(self.orientation)}"
            )

    @property
    def dimension(self) -> int:
        return len(self.center)

    @cached_property
    def rotation(self) -> np.ndarray:
        return rotation_from_orientation(self.orientation, self.dimension)

    def signed_distance(
        self, points: np.ndarray, hessian_clamp: float = DEFAULT_HESSIAN_CLAMP
    ) -> SdfSample:
        return sdf_box(points, self, hessian_clamp)

    def to_dict(self) -> dict:
        return {
            "kind": "box",
            "center": list(self.center),
            "half_extents": list(self.half_extents),
            "orientation": list(self.orientation),
        }


@dataclass(frozen=True)
class SphereObstacle:
    """Ball obstacle (circle in the plane)."""

    center: tuple[float, ...]
    radius: float

    def __post_init__(self) -> None:
        if self.radius <= 0.0:
            raise InvalidParameterException("radius", "must be strictly positive")

    @property
    def dimension(self) -> int:
        return len(self.center)

    def signed_distance(
        self, points: np.ndarray, hessian_clamp: float = DEFAULT_HESSIAN_CLAMP
    ) -> SdfSample:
        return sdf_sphere(points, self, hessian_clamp)

    def to_dict(self) -> dict:
        return {"kind": "sphere", "center": list(self.center), "radius": self.radius}


Obstacle = BoxObstacle | SphereObstacle


def sdf_box(
    p: np.ndarray, box: BoxObstacle, hessian_clamp: float = DEFAULT_HESSIAN_CLAMP
) -> SdfSample:
    """
    Exact signed distance to an oriented box.

    The Hessian of the exact distance has eigenvalues 1/d along edge and corner
    regions; they are clamped to ``hessian_clamp``. Inside the box and in face
    regions the Hessian is zero. On the medial axis inside, the first axis in
    coordinate order wins.

    :param p: Point(s), shape (..., dim)
    :type p: np.ndarray
    :param box: Box obstacle
    :type box: BoxObstacle
    :param hessian_clamp: Eigenvalue bound H_max in 1/m
    :type hessian_clamp: float
    :return: Signed distance sample
    :rtype: SdfSample
    """
    p = np.asarray(p, dtype=float)
    rot = box.rotation
    dim = box.dimension
    local = (p - np.asarray(box.center)) @ rot
    q = np.abs(local) - np.asarray(box.half_extents)
    sign = np.where(local >= 0.0, 1.0, -1.0)

    outer = np.maximum(q, 0.0)
    outside_dist = np.linalg.norm(outer, axis=-1)
    outside = outside_dist > 0.0
    safe_dist = np.where(outside, outside_dist, 1.0)

    nearest_face = np.argmax(q, axis=-1)
    inside_value = np.take_along_axis(q, nearest_face[..., None], axis=-1)[..., 0]
    value = np.where(outside, outside_dist, inside_value)

    grad_out = sign * outer / safe_dist[..., None]
    grad_in = sign * np.eye(dim)[nearest_face]
    grad_local = np.where(outside[..., None], grad_out, grad_in)

    active = (q > 0.0).astype(float)
    projector = active[..., :, None] * np.eye(dim)
    curvature = np.minimum(1.0 / safe_dist, hessian_clamp)
    hess_local = (projector - grad_out[..., :, None] * grad_out[..., None, :]) * curvature[
        ..., None, None
    ]
    hess_local = np.where(outside[..., None, None], hess_local, 0.0)

    gradient = grad_local @ rot.T
    hessian = np.einsum("ij,...jk,lk->...il", rot, hess_local, rot)
    return SdfSample(value=value, gradient=gradient, hessian=hessian)


def sdf_sphere(
    p: np.ndarray, sphere: SphereObstacle, hessian_clamp: float = DEFAULT_HESSIAN_CLAMP
) -> SdfSample:
    """
    Exact signed distance to a ball, with clamped Hessian.

    :param p: Point(s), shape (..., dim)
    :type p: np.ndarray
    :param sphere: Sphere obstacle
    :type sphere: SphereObstacle
    :param hessian_clamp: Eigenvalue bound H_max in 1/m
    :type hessian_clamp: float
    :return: Signed distance sample
    :rtype: SdfSample
    """
    p = np.asarray(p, dtype=float)
    dim = sphere.dimension
    offset = p - np.asarray(sphere.center)
    norm = np.linalg.norm(offset, axis=-1)
    degenerate = norm == 0.0
    safe_norm = np.where(degenerate, 1.0, norm)
    normal = np.where(degenerate[..., None], np.eye(dim)[0], offset / safe_norm[..., None])
    curvature = np.where(degenerate, 0.0, np.minimum(1.0 / safe_norm, hessian_clamp))
    hessian = (np.eye(dim) - normal[..., :, None] * normal[..., None, :]) * curvature[
        ..., None, None
    ]
    return SdfSample(value=norm - sphere.radius, gradient=normal, hessian=hessian)


@dataclass(frozen=True)
class Workspace:
    """Axis-aligned bounds with a list of obstacles; the freespace is what remains."""

    bounds_min: tuple[float, ...]
    bounds_max: tuple[float, ...]
    obstacles: tuple[Obstacle, ...] = field(default_factory=tuple)
    hessian_clamp: float = DEFAULT_HESSIAN_CLAMP

    def __post_init__(self) -> None:
        if len(self.bounds_min) not in (2, 3) or len(self.bounds_max) != len(self.bounds_min):
            raise InvalidParameterException("bounds", "must be planar or spatial boxes")
        if any(hi <= lo for lo, hi in zip(self.bounds_min, self.bounds_max)):
            raise InvalidParameterException("bounds", "must be nonempty")
        lo, hi = np.asarray(self.bounds_min), np.asarray(self.bounds_max)
        for index, obstacle in enumerate(self.obstacles):
            if obstacle.dimension != self.dimension:
                raise InvalidParameterException(
                    f"obstacles[{index}]", "dimension does not match the workspace"
                )
            clipped = np.clip(np.asarray(obstacle.center, dtype=float), lo, hi)
            if float(obstacle.signed_distance(clipped).value) > 0.0:
                raise InvalidParameterException(f"obstacles[{index}]", "does not intersect bounds")
        samples = np.stack(
            np.meshgrid(*[np.linspace(a, b, 11)[1:-1] for a, b in zip(lo, hi)], indexing="ij"),
            axis=-1,
        )
        if not np.any(sdf_workspace(samples, self).value > 0.0):
            raise InvalidParameterException("obstacles", "freespace is empty")

    @property
    def dimension(self) -> int:
        return len(self.bounds_min)

    @cached_property
    def bounds_box(self) -> BoxObstacle:
        lo, hi = np.asarray(self.bounds_min), np.asarray(self.bounds_max)
        return BoxObstacle(center=tuple((lo + hi) / 2), half_extents=tuple((hi - lo) / 2))

    def without_obstacles(self) -> "Workspace":
        return replace(self, obstacles=())

    def to_dict(self) -> dict:
        return {
            "bounds_min": list(self.bounds_min),
            "bounds_max": list(self.bounds_max),
            "obstacles": [obstacle.to_dict() for obstacle in self.obstacles],
            "hessian_clamp": self.hessian_clamp,
        }

    def fingerprint(self) -> str:
        """
        Stable hash of the workspace geometry, used as a cache key.

        :return: Hex digest
        :rtype: str
        """
        payload = json.dumps(self.to_dict(), sort_keys=True).encode("utf-8")
        return hashlib.sha256(payload).hexdigest()


def sdf_bounds(p: np.ndarray, ws: Workspace) -> SdfSample:
    """
    Inner distance to the workspace bounds: positive inside, negative outside.

    :param p: Point(s), shape (..., dim)
    :type p: np.ndarray
    :param ws: Workspace
    :type ws: Workspace
    :return: Signed distance sample
    :rtype: SdfSample
    """
    box = sdf_box(p, ws.bounds_box, ws.hessian_clamp)
    return SdfSample(value=-box.value, gradient=-box.gradient, hessian=-box.hessian)


def obstacle_distances(p: np.ndarray, ws: Workspace) -> list[SdfSample]:
    """
    Signed distance to each obstacle, in list order.

    :param p: Point(s), shape (..., dim)
    :type p: np.ndarray
    :param ws: Workspace
    :type ws: Workspace
    :return: One sample per obstacle
    :rtype: list[SdfSample]
    """
    return [obstacle.signed_distance(p, ws.hessian_clamp) for obstacle in ws.obstacles]


def sdf_workspace(p: np.ndarray, ws: Workspace) -> SdfSample:
    """
    Hard minimum over obstacle distances and the inner distance to the bounds.

    Ties go to the first obstacle in list order; the bounds come last.

    :param p: Point(s), shape (..., dim)
    :type p: np.ndarray
    :param ws: Workspace
    :type ws: Workspace
    :return: Signed distance sample of the minimizing component
    :rtype: SdfSample
    """
    components = obstacle_distances(p, ws) + [sdf_bounds(p, ws)]
    values = np.stack([c.value for c in components], axis=-1)
    gradients = np.stack([c.gradient for c in components], axis=-2)
    hessians = np.stack([c.hessian for c in components], axis=-3)
    winner = np.argmin(values, axis=-1)
    value = np.take_along_axis(values, winner[..., None], axis=-1)[..., 0]
    gradient = np.take_along_axis(gradients, winner[..., None, None], axis=-2)[..., 0, :]
    hessian = np.take_along_axis(hessians, winner[..., None, None, None], axis=-3)[..., 0, :, :]
    return SdfSample(value=value, gradient=gradient, hessian=hessian)


def softmin(
    values: np.ndarray, beta: float = DEFAULT_SOFTMIN_BETA, axis: int = -1
) -> tuple[np.ndarray, np.ndarray]:
    """
    Smooth lower bound of the minimum, -(1/beta) log sum exp(-beta v).

    :param values: Nonempty values along ``axis``
    :type values: np.ndarray
    :param beta: Temperature, > 0
    :type beta: float
    :param axis: Reduction axis
    :type axis: int
    :return: (softmin value, convex weights used as chain-rule coefficients)
    :rtype: tuple[np.ndarray, np.ndarray]
    :raises InvalidParameterException: If beta is not positive or values are empty
    """
    values = np.asarray(values, dtype=float)
    if beta <= 0.0:
        raise InvalidParameterException("beta", "must be positive")
    if values.shape[axis] == 0:
        raise InvalidParameterException("values", "must be nonempty")
    value = -logsumexp(-beta * values, axis=axis) / beta
    weights = softmax(-beta * values, axis=axis)
    return value, weights


def keypoint_clearance(points: np.ndarray, radii: np.ndarray, ws: Workspace) -> np.ndarray:
    """
    Exact (hard-min) clearance of spheres centered at ``points``.

    :param points: Keypoint positions, shape (..., K, dim)
    :type points: np.ndarray
    :param radii: Keypoint radii, shape (K,)
    :type radii: np.ndarray
    :param ws: Workspace
    :type ws: Workspace
    :return: Minimum over keypoints of sdf - radius, shape (...)
    :rtype: np.ndarray
    """
    return np.min(sdf_workspace(points, ws).value - np.asarray(radii), axis=-1)
