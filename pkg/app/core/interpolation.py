# app/core/interpolation.py
"""
Tensor-product cubic interpolation on regular grids (bicubic in 2D, tricubic in 3D).
"""
from itertools import combinations_with_replacement

import numpy as np
from scipy.interpolate import NdBSpline, make_interp_spline


class CubicGridSpline:
    """Interpolating cubic B-spline through every node of a regular grid."""

    def __init__(
        self,
        origin: np.ndarray,
        cell_size: float,
        values: np.ndarray,
        bc_type: str = "natural",
    ) -> None:
        """
        Fit the spline one axis at a time.

        :param origin: Position of node (0, ..., 0)
        :type origin: np.ndarray
        :param cell_size: Node spacing
        :type cell_size: float
        :param values: Node values, finite everywhere
        :type values: np.ndarray
        :param bc_type: End condition passed to make_interp_spline
        :type bc_type: str
        """
        values = np.asarray(values, dtype=float)
        if not np.all(np.isfinite(values)):
            raise ValueError("spline node values must be finite")
        self.dimension = values.ndim
        self.origin = np.asarray(origin, dtype=float)
        self.cell_size = float(cell_size)

        coefficients = values
        knots = []
        for axis in range(self.dimension):
            nodes = self.origin[axis] + self.cell_size * np.arange(values.shape[axis])
            moved = np.moveaxis(coefficients, axis, 0)
            fitted = make_interp_spline(nodes, moved, k=3, bc_type=bc_type)
            knots.append(fitted.t)
            coefficients = np.moveaxis(fitted.c, 0, axis)
        self._spline = NdBSpline(tuple(knots), coefficients, 3)

    def _eval(self, points: np.ndarray, order: tuple[int, ...]) -> np.ndarray:
        flat = points.reshape(-1, self.dimension)
        return self._spline(flat, nu=np.array(order)).reshape(points.shape[:-1])

    def __call__(self, points: np.ndarray) -> np.ndarray:
        points = np.asarray(points, dtype=float)
        return self._eval(points, (0,) * self.dimension)

    def derivatives(self, points: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """
        Value, gradient and Hessian from analytic derivatives of the cubic basis.

        :param points: Query points, shape (..., dim)
        :type points: np.ndarray
        :return: (value (...), gradient (..., dim), hessian (..., dim, dim))
        :rtype: tuple[np.ndarray, np.ndarray, np.ndarray]
        """
        points = np.asarray(points, dtype=float)
        dim = self.dimension
        batch = points.shape[:-1]
        value = self._eval(points, (0,) * dim)
        gradient = np.empty(batch + (dim,))
        hessian = np.empty(batch + (dim, dim))
        for i in range(dim):
            order = [0] * dim
            order[i] = 1
            gradient[..., i] = self._eval(points, tuple(order))
        for i, j in combinations_with_replacement(range(dim), 2):
            order = [0] * dim
            order[i] += 1
            order[j] += 1
            hessian[..., i, j] = hessian[..., j, i] = self._eval(points, tuple(order))
        return value, gradient, hessian
