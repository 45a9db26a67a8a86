# app/core/storage.py
"""
On-disk artifacts: atomic file writes, the geodesic distance grid cache and
the line-delimited trial results file.
"""
import hashlib
import json
import logging
import os
import struct
import tempfile
import threading
from pathlib import Path
from typing import Iterable

import numpy as np

from app.core.exceptions import ConfigurationException, FieldConstructionException
from app.core.geometry import Workspace
from app.core.heat import ScalarGrid

logger = logging.getLogger(__name__)

FIELD_MAGIC = b"GEOF"
FIELD_VERSION = 1
# magic, version, dimension, shape (3 axes), origin (3 axes), cell size
_HEADER = struct.Struct("<4sHH3q3dd")


def atomic_write_bytes(path: str | Path, data: bytes) -> Path:
    """
    Write ``data`` to a temporary file next to ``path`` and rename it into place.

    :param path: Destination
    :type path: str | Path
    :param data: File contents
    :type data: bytes
    :return: Destination path
    :rtype: Path
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    handle = tempfile.NamedTemporaryFile(dir=path.parent, prefix=f".{path.name}.", delete=False)
    try:
        with handle:
            handle.write(data)
            handle.flush()
            os.fsync(handle.fileno())
        os.replace(handle.name, path)
    except BaseException:
        Path(handle.name).unlink(missing_ok=True)
        raise
    return path


def atomic_write_text(path: str | Path, text: str) -> Path:
    return atomic_write_bytes(path, text.encode("utf-8"))


def encode_distance_grid(grid: ScalarGrid) -> bytes:
    """
    Serialize a grid: fixed header then little-endian float64 values in C order.

    Masked and unreachable cells are stored as NaN.

    :param grid: Distance grid
    :type grid: ScalarGrid
    :return: Binary payload
    :rtype: bytes
    """
    shape = list(grid.shape) + [1] * (3 - grid.dimension)
    origin = list(grid.origin) + [0.0] * (3 - grid.dimension)
    header = _HEADER.pack(
        FIELD_MAGIC, FIELD_VERSION, grid.dimension, *shape, *origin, grid.cell_size
    )
    return header + np.ascontiguousarray(grid.values, dtype="<f8").tobytes()


def decode_distance_grid(payload: bytes, free_mask: np.ndarray | None = None) -> ScalarGrid:
    """
    Inverse of :func:`encode_distance_grid`.

    :param payload: Binary payload
    :type payload: bytes
    :param free_mask: Free mask of the grid (defaults to the finite cells)
    :type free_mask: np.ndarray | None
    :return: Distance grid
    :rtype: ScalarGrid
    :raises FieldConstructionException: On a malformed payload
    """
    if len(payload) < _HEADER.size:
        raise FieldConstructionException("field cache file is truncated")
    magic, version, dimension, *rest = _HEADER.unpack_from(payload)
    if magic != FIELD_MAGIC or version != FIELD_VERSION or dimension not in (2, 3):
        raise FieldConstructionException("field cache header is invalid")
    shape = tuple(int(n) for n in rest[:dimension])
    origin = np.array(rest[3 : 3 + dimension], dtype=float)
    cell_size = float(rest[6])
    values = np.frombuffer(payload, dtype="<f8", offset=_HEADER.size)
    if values.size != int(np.prod(shape)):
        raise FieldConstructionException("field cache size does not match its header")
    values = values.reshape(shape).astype(float)
    mask = np.isfinite(values) if free_mask is None else np.asarray(free_mask, dtype=bool)
    return ScalarGrid(origin, cell_size, values, mask)


class FieldCache:
    """Distance grids keyed by (workspace fingerprint, goal, resolution, heat variant)."""

    def __init__(self, directory: str | Path) -> None:
        self.directory = Path(directory)

    @staticmethod
    def key(ws: Workspace, goal: np.ndarray, cell_size: float, variant: str = "") -> str:
        payload = json.dumps(
            {
                "workspace": ws.fingerprint(),
                "goal": [float(v) for v in np.asarray(goal, dtype=float)],
                "cell_size": float(cell_size),
                "variant": variant,
            },
            sort_keys=True,
        )
        return hashlib.sha256(payload.encode("utf-8")).hexdigest()

    def path(
        self, ws: Workspace, goal: np.ndarray, cell_size: float, variant: str = ""
    ) -> Path:
        return self.directory / f"{self.key(ws, goal, cell_size, variant)}.geof"

    def load(
        self,
        ws: Workspace,
        goal: np.ndarray,
        cell_size: float,
        free_mask: np.ndarray | None = None,
        variant: str = "",
    ) -> ScalarGrid | None:
        path = self.path(ws, goal, cell_size, variant)
        if not path.exists():
            return None
        try:
            grid = decode_distance_grid(path.read_bytes(), free_mask)
        except (FieldConstructionException, ValueError) as exc:
            logger.warning("ignoring unreadable field cache %s: %s", path.name, exc)
            return None
        logger.debug("field cache hit %s", path.name)
        return grid

    def store(
        self,
        ws: Workspace,
        goal: np.ndarray,
        cell_size: float,
        grid: ScalarGrid,
        variant: str = "",
    ) -> Path:
        path = atomic_write_bytes(
            self.path(ws, goal, cell_size, variant), encode_distance_grid(grid)
        )
        logger.debug("field cache stored %s", path.name)
        return path


class ResultStore:
    """
    Line-delimited JSON records. Records already in the file are loaded on
    open; writes are serialized and every flush rewrites the file atomically.
    """

    KEY_FIELDS = ("environment", "goal_index", "condition")

    def __init__(self, path: str | Path) -> None:
        self.path = Path(path)
        self._records: list[dict] = self.read(self.path) if self.path.is_file() else []
        self._lock = threading.Lock()
        if self._records:
            logger.debug("results file %s opened with %d records", self.path, len(self._records))

    def append(self, record: dict) -> None:
        with self._lock:
            self._records.append(record)
            self._flush()

    def extend(self, records: Iterable[dict]) -> None:
        with self._lock:
            self._records.extend(records)
            self._flush()

    def upsert(self, records: Iterable[dict]) -> None:
        """
        Replace records with the same (environment, goal index, condition) in
        place and append the others.

        :param records: New records
        :type records: Iterable[dict]
        """
        with self._lock:
            position = {self._key(r): k for k, r in enumerate(self._records)}
            for record in records:
                key = self._key(record)
                if key in position:
                    self._records[position[key]] = record
                else:
                    position[key] = len(self._records)
                    self._records.append(record)
            self._flush()

    def replace(self, records: Iterable[dict]) -> None:
        with self._lock:
            self._records = list(records)
            self._flush()

    def _key(self, record: dict) -> tuple:
        return tuple(record.get(name) for name in self.KEY_FIELDS)

    def _flush(self) -> None:
        lines = "".join(json.dumps(r, sort_keys=True) + "\n" for r in self._records)
        atomic_write_text(self.path, lines)

    @property
    def records(self) -> list[dict]:
        with self._lock:
            return list(self._records)

    @staticmethod
    def read(path: str | Path) -> list[dict]:
        """
        Parse a results file, skipping blank lines.

        :param path: Results file
        :type path: str | Path
        :return: Records in file order
        :rtype: list[dict]
        :raises ConfigurationException: If a line is not a JSON object
        """
        records = []
        with open(path, encoding="utf-8") as handle:
            for number, line in enumerate(handle, start=1):
                if not line.strip():
                    continue
                try:
                    record = json.loads(line)
                except json.JSONDecodeError as exc:
                    raise ConfigurationException(f"{path}:{number}: {exc.msg}") from exc
                if not isinstance(record, dict):
                    raise ConfigurationException(f"{path}:{number}: record is not an object")
                records.append(record)
        return records
