# app/core/rendering.py
"""
Image emitters: geodesic distance heatmaps with flow quivers, transient heat
frames and trajectory traces with time shown as color fading.

3D grids are rendered as the axis-aligned slice through the goal.
"""
import io
import logging
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402
from matplotlib.patches import Circle, Polygon  # noqa: E402

from app.core.geometry import BoxObstacle, SphereObstacle, Workspace  # noqa: E402
from app.core.heat import GeodesicField, ScalarGrid  # noqa: E402
from app.core.kinematics import FreeFlyerRobot, forward_kinematics  # noqa: E402
from app.core.storage import atomic_write_bytes  # noqa: E402

logger = logging.getLogger(__name__)

matplotlib.rcParams["svg.hashsalt"] = "trajectory-planner"
_PNG_METADATA = {"Software": None}
_SVG_METADATA = {"Date": None, "Creator": None}


def _planar_slice(
    grid: ScalarGrid, point: np.ndarray
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    # values, x nodes, y nodes of the z-slice through ``point``
    values = grid.values
    if grid.dimension == 3:
        index = grid.locate(point)[2]
        values = values[:, :, index]
    xs = grid.origin[0] + grid.cell_size * np.arange(values.shape[0])
    ys = grid.origin[1] + grid.cell_size * np.arange(values.shape[1])
    return values, xs, ys


def _save(fig, path: Path, fmt: str) -> Path:
    buffer = io.BytesIO()
    metadata = _SVG_METADATA if fmt == "svg" else _PNG_METADATA
    fig.savefig(buffer, format=fmt, dpi=100, metadata=metadata)
    plt.close(fig)
    return atomic_write_bytes(path, buffer.getvalue())


def _draw_obstacles(ax, ws: Workspace) -> None:
    for obstacle in ws.obstacles:
        if isinstance(obstacle, SphereObstacle):
            ax.add_patch(Circle(obstacle.center[:2], obstacle.radius, color="0.35"))
        elif isinstance(obstacle, BoxObstacle):
            half = np.asarray(obstacle.half_extents)
            corners = np.array([[-1, -1], [1, -1], [1, 1], [-1, 1]], dtype=float)
            if obstacle.dimension == 3:
                local = np.hstack([corners * half[:2], np.zeros((4, 1))])
            else:
                local = corners * half
            world = local @ obstacle.rotation.T + np.asarray(obstacle.center)
            ax.add_patch(Polygon(world[:, :2], closed=True, color="0.35"))


def render_distance(
    field: GeodesicField,
    path: str | Path,
    ws: Workspace | None = None,
    quiver_stride: int = 3,
) -> Path:
    """
    Distance heatmap (cool = near, hot = far) with isocontours and a flow quiver.

    :param field: Geodesic field
    :type field: GeodesicField
    :param path: Output PNG path
    :type path: str | Path
    :param ws: Workspace whose obstacles are drawn on top
    :type ws: Workspace | None
    :param quiver_stride: Draw one arrow every ``quiver_stride`` cells
    :type quiver_stride: int
    :return: Written path
    :rtype: Path
    """
    values, xs, ys = _planar_slice(field.distance, field.source)
    aspect = (ys[-1] - ys[0]) / max(xs[-1] - xs[0], 1e-9)
    fig, ax = plt.subplots(figsize=(6.5, max(3.0, 6.0 * aspect)))
    h = field.distance.cell_size
    extent = (xs[0] - h / 2, xs[-1] + h / 2, ys[0] - h / 2, ys[-1] + h / 2)
    masked = np.ma.masked_invalid(values.T)
    image = ax.imshow(masked, origin="lower", extent=extent, cmap="coolwarm")
    if np.isfinite(values).sum() > 4:
        ax.contour(xs, ys, masked, levels=12, colors="k", linewidths=0.4)

    gx, gy = np.meshgrid(xs[::quiver_stride], ys[::quiver_stride], indexing="ij")
    points = np.stack([gx, gy], axis=-1)
    if field.dimension == 3:
        points = np.concatenate(
            [points, np.full(gx.shape + (1,), field.source[2])], axis=-1
        )
    flow = field.query(points).flow
    free = np.isfinite(values[::quiver_stride, ::quiver_stride])
    ax.quiver(gx[free], gy[free], flow[..., 0][free], flow[..., 1][free], scale=40, width=0.002)
    ax.plot(field.source[0], field.source[1], "o", color="red", markersize=6)
    if ws is not None:
        _draw_obstacles(ax, ws)
    fig.colorbar(image, ax=ax, label="geodesic distance [m]")
    ax.set_xlabel("x [m]")
    ax.set_ylabel("y [m]")
    logger.debug("rendering distance field to %s", path)
    return _save(fig, Path(path), "png")


def render_heat_frames(
    frames: list[ScalarGrid], source: np.ndarray, directory: str | Path, prefix: str = "heat"
) -> list[Path]:
    """
    One PNG per heat snapshot, each on its own log color scale.

    :param frames: Heat snapshots
    :type frames: list[ScalarGrid]
    :param source: Heat source (marked in red)
    :type source: np.ndarray
    :param directory: Output directory
    :type directory: str | Path
    :param prefix: File name prefix
    :type prefix: str
    :return: Written paths in frame order
    :rtype: list[Path]
    """
    directory = Path(directory)
    written = []
    for index, frame in enumerate(frames):
        values, xs, ys = _planar_slice(frame, source)
        h = frame.cell_size
        extent = (xs[0] - h / 2, xs[-1] + h / 2, ys[0] - h / 2, ys[-1] + h / 2)
        heat = np.where(np.isfinite(values), np.log10(np.maximum(values, 1e-300)), np.nan)
        fig, ax = plt.subplots(figsize=(6, 6))
        ax.imshow(np.ma.masked_invalid(heat.T), origin="lower", extent=extent, cmap="inferno")
        ax.plot(source[0], source[1], "o", color="red", markersize=5)
        ax.set_title(f"frame {index}")
        written.append(_save(fig, directory / f"{prefix}_{index:02d}.png", "png"))
    return written


def render_trajectory(
    ws: Workspace,
    robot: FreeFlyerRobot,
    configurations: np.ndarray,
    goal: np.ndarray,
    path: str | Path,
) -> Path:
    """
    Keypoint traces over time (light to dark) in the xy plane, as SVG.

    :param ws: Workspace
    :type ws: Workspace
    :param robot: Robot
    :type robot: FreeFlyerRobot
    :param configurations: Configurations q_0..q_T
    :type configurations: np.ndarray
    :param goal: Goal point
    :type goal: np.ndarray
    :param path: Output SVG path
    :type path: str | Path
    :return: Written path
    :rtype: Path
    """
    points = forward_kinematics(robot, configurations)
    fig, ax = plt.subplots(figsize=(7, 6))
    _draw_obstacles(ax, ws)
    colors = plt.get_cmap("viridis")(np.linspace(0.0, 1.0, len(points)))
    for t, frame in enumerate(points):
        alpha = 0.15 + 0.85 * t / max(len(points) - 1, 1)
        for keypoint, radius in zip(frame, robot.radii):
            ax.add_patch(
                Circle(keypoint[:2], radius, facecolor=colors[t], edgecolor="none", alpha=alpha)
            )
    end_effector = points[:, robot.end_effector_index]
    ax.plot(end_effector[:, 0], end_effector[:, 1], "-", color="k", linewidth=0.8)
    ax.plot(goal[0], goal[1], "*", color="red", markersize=10)
    ax.set_xlim(ws.bounds_min[0], ws.bounds_max[0])
    ax.set_ylim(ws.bounds_min[1], ws.bounds_max[1])
    ax.set_aspect("equal")
    ax.set_xlabel("x [m]")
    ax.set_ylabel("y [m]")
    return _save(fig, Path(path), "svg")
