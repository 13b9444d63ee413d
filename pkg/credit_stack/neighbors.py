"""Exact brute-force Euclidean nearest neighbors."""

import numpy as np
import numpy.typing as npt

from .errors import DataError

# Query rows processed per block in batched searches
QUERY_CHUNK = 512


class NeighborIndex:
    """Immutable point set answering exact k-nearest-neighbor queries.

    Distances are squared Euclidean, accumulated one feature at a time so a
    single query and a batched query produce bit-identical values. Ties are
    ordered by lower row index.
    """

    def __init__(self, points: npt.ArrayLike) -> None:
        """Validate and freeze the point matrix."""
        matrix = np.array(points, dtype=np.float64)
        if matrix.ndim != 2 or matrix.shape[1] < 1:
            raise DataError("neighbor index needs an n x d matrix with d >= 1")
        if not np.isfinite(matrix).all():
            raise DataError("neighbor index points must be finite")

        matrix.flags.writeable = False
        self.points = matrix

    @property
    def n_points(self) -> int:
        """Return the number of indexed points."""
        return int(self.points.shape[0])

    @property
    def n_dims(self) -> int:
        """Return the point dimension."""
        return int(self.points.shape[1])

    def _check_k(self, k: int, available: int) -> None:
        if k < 1:
            raise DataError(f"k must be at least 1, got {k}")
        if k > available:
            raise DataError(f"k = {k} exceeds the {available} available points")

    def distances(self, query: npt.ArrayLike) -> npt.NDArray[np.float64]:
        """Return squared distances from one query to every point."""
        point = np.asarray(query, dtype=np.float64).reshape(-1)
        if point.shape[0] != self.n_dims:
            raise DataError(
                f"query has {point.shape[0]} values, expected {self.n_dims}"
            )

        total = np.zeros(self.n_points)
        for dim in range(self.n_dims):
            total += (self.points[:, dim] - point[dim]) ** 2

        return total

    def query(
        self, query: npt.ArrayLike, k: int, exclude_self: bool = False
    ) -> npt.NDArray[np.int64]:
        """Return the k nearest row indices, nearest first."""
        distances = self.distances(query)
        order = np.argsort(distances, kind="stable")
        if exclude_self:
            # Skip the first indexed point the query coincides with
            if len(order) and distances[order[0]] == 0.0:
                order = order[1:]

        self._check_k(k, len(order))
        return order[:k].astype(np.int64)

    def _block_distances(
        self, queries: npt.NDArray[np.float64]
    ) -> npt.NDArray[np.float64]:
        total = np.zeros((queries.shape[0], self.n_points))
        for dim in range(self.n_dims):
            total += (queries[:, dim, None] - self.points[None, :, dim]) ** 2

        return total

    def query_batch(self, queries: npt.ArrayLike, k: int) -> npt.NDArray[np.int64]:
        """Return the k nearest row indices for every query row."""
        matrix = np.asarray(queries, dtype=np.float64)
        if matrix.ndim != 2 or matrix.shape[1] != self.n_dims:
            raise DataError(f"queries must be an m x {self.n_dims} matrix")
        self._check_k(k, self.n_points)

        result = np.empty((matrix.shape[0], k), dtype=np.int64)
        for start in range(0, matrix.shape[0], QUERY_CHUNK):
            block = self._block_distances(matrix[start : start + QUERY_CHUNK])
            result[start : start + len(block)] = np.argsort(
                block, axis=1, kind="stable"
            )[:, :k]

        return result

    def query_rows(self, rows: npt.ArrayLike, k: int) -> npt.NDArray[np.int64]:
        """Return the k nearest neighbors of indexed rows, excluding the row itself."""
        index = np.asarray(rows, dtype=np.int64).reshape(-1)
        self._check_k(k, self.n_points - 1)

        result = np.empty((len(index), k), dtype=np.int64)
        for start in range(0, len(index), QUERY_CHUNK):
            chunk = index[start : start + QUERY_CHUNK]
            block = self._block_distances(self.points[chunk])
            block[np.arange(len(chunk)), chunk] = np.inf
            result[start : start + len(chunk)] = np.argsort(
                block, axis=1, kind="stable"
            )[:, :k]

        return result


def knn_indices(
    index: NeighborIndex, query: npt.ArrayLike, k: int, exclude_self: bool = False
) -> list[int]:
    """Return the indices of the k points nearest to the query."""
    return [int(row) for row in index.query(query, k, exclude_self)]
