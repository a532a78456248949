# flowtopo/models/complex.py
"""
Filtered complexes of dimension <= 2.

Vertices 0..n-1 enter at 0 and edges carry their own filtration value. A
complex built by `flag_complex` leaves `triangles` unset: its triangles are
implied by the edges (every 3-clique, entering at the largest of its edge
values) and are streamed on demand instead of being stored. Explicit triangle
arrays are still accepted, e.g. for hand-built complexes.

Filtration order is (value, dimension, lexicographic vertices).
"""

from typing import FrozenSet, Iterator, List, Optional, Tuple

import numpy as np
from pydantic import Field, field_validator, model_validator

from flowtopo.core.exceptions import FiltrationOrderError
from flowtopo.models.base import ArrayModel, readonly_array

Simplex = Tuple[int, ...]


class FilteredComplex(ArrayModel):
    n_vertices: int = Field(..., ge=0)
    edges: np.ndarray
    edge_values: np.ndarray
    triangles: Optional[np.ndarray] = Field(None, description="Explicit triangles; None for a flag complex")
    triangle_values: Optional[np.ndarray] = None
    cap: Optional[float] = Field(None, description="Largest scale the complex was built up to")

    @field_validator("edges", mode="before")
    @classmethod
    def coerce_edges(cls, v):
        return readonly_array(v, dtype=np.int64, ndim=2)

    @field_validator("triangles", mode="before")
    @classmethod
    def coerce_triangles(cls, v):
        return None if v is None else readonly_array(v, dtype=np.int64, ndim=2)

    @field_validator("edge_values", "triangle_values", mode="before")
    @classmethod
    def coerce_values(cls, v):
        return None if v is None else readonly_array(v, ndim=1)

    @model_validator(mode="after")
    def validate_arrays(self) -> "FilteredComplex":
        if self.edges.shape[1] != 2:
            raise ValueError("Edges need two vertices")
        if len(self.edges) != len(self.edge_values):
            raise ValueError("Each edge needs exactly one filtration value")
        if (self.triangles is None) != (self.triangle_values is None):
            raise ValueError("Triangles and their values must be given together")
        if self.triangles is not None:
            if self.triangles.shape[1] != 3:
                raise ValueError("Triangles need three vertices")
            if len(self.triangles) != len(self.triangle_values):
                raise ValueError("Each triangle needs exactly one filtration value")
        for values in (self.edge_values, self.triangle_values):
            if values is not None and values.size and (not np.all(np.isfinite(values)) or np.any(values < 0)):
                raise ValueError("Filtration values must be finite and non-negative")
        return self

    @property
    def is_flag(self) -> bool:
        return self.triangles is None

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    @property
    def edge_order(self) -> np.ndarray:
        """Edge indices sorted by (value, i, j)."""
        return np.lexsort((self.edges[:, 1], self.edges[:, 0], self.edge_values))

    @property
    def n_triangles(self) -> int:
        if not self.is_flag:
            return len(self.triangles)
        if self.n_edges == 0:
            return 0
        adjacency = np.zeros((self.n_vertices, self.n_vertices), dtype=np.int64)
        adjacency[self.edges[:, 0], self.edges[:, 1]] = 1
        adjacency[self.edges[:, 1], self.edges[:, 0]] = 1
        return int(np.sum((adjacency @ adjacency) * adjacency) // 6)

    def flag_batches(self) -> Iterator[Tuple[int, np.ndarray]]:
        """
        For each edge in filtration order: (edge index, third vertices k).

        The triangles {i, j, k} of a batch are exactly those whose last edge
        (in filtration order) is this edge, so they enter at its value and
        batches come out in a filtration-compatible order.
        """
        n = self.n_vertices
        adjacent = np.zeros((n, n), dtype=bool)
        for e in self.edge_order:
            i, j = self.edges[e]
            yield int(e), np.flatnonzero(adjacent[i] & adjacent[j])
            adjacent[i, j] = adjacent[j, i] = True

    def triangle_arrays(self) -> Tuple[np.ndarray, np.ndarray]:
        """All triangles and their values, sorted by (value, lexicographic vertices)."""
        if not self.is_flag:
            tris, values = np.asarray(self.triangles), np.asarray(self.triangle_values)
        else:
            chunks, chunk_values = [], []
            for e, ks in self.flag_batches():
                if ks.size:
                    i, j = self.edges[e]
                    chunks.append(np.sort(np.column_stack([np.full(ks.size, i), np.full(ks.size, j), ks]), axis=1))
                    chunk_values.append(np.full(ks.size, self.edge_values[e]))
            if not chunks:
                return np.empty((0, 3), dtype=np.int64), np.empty(0)
            tris, values = np.concatenate(chunks), np.concatenate(chunk_values)
        order = np.lexsort((tris[:, 2], tris[:, 1], tris[:, 0], values))
        return tris[order], values[order]

    def ordered_simplices(self) -> List[Tuple[float, int, Simplex]]:
        """Every simplex as (value, dimension, vertices), in filtration order."""
        triangles, triangle_values = self.triangle_arrays()
        simplices = [(0.0, 0, (v,)) for v in range(self.n_vertices)]
        simplices += [(float(w), 1, (int(i), int(j))) for (i, j), w in zip(self.edges, self.edge_values)]
        simplices += [(float(w), 2, (int(i), int(j), int(k))) for (i, j, k), w in zip(triangles, triangle_values)]
        simplices.sort()
        return simplices

    def snapshot(self, scale: float) -> FrozenSet[Tuple[int, int]]:
        """Edge set of the complex at `scale` (edges with value <= scale)."""
        keep = self.edge_values <= scale
        return frozenset((int(i), int(j)) for i, j in self.edges[keep])

    def edge_set(self) -> FrozenSet[Tuple[int, int]]:
        return frozenset((int(i), int(j)) for i, j in self.edges)

    def check_valid(self) -> None:
        """
        Verify that every face enters no later than its coface.

        Raises:
        - FiltrationOrderError: naming the first offending (face, coface) pair.
        """
        if self.edges.size and (self.edges.min() < 0 or self.edges.max() >= self.n_vertices):
            raise FiltrationOrderError("Edge references a vertex outside the complex")
        for i, j in self.edges:
            if not i < j:
                raise FiltrationOrderError(f"Edge ({i}, {j}) is not in lexicographic vertex order")
        if self.is_flag:
            if len(self.edge_set()) != self.n_edges:
                raise FiltrationOrderError("Duplicate edge in flag complex")
            return
        lookup = {(int(i), int(j)): float(w) for (i, j), w in zip(self.edges, self.edge_values)}
        for (i, j, k), w in zip(self.triangles, self.triangle_values):
            tri = (int(i), int(j), int(k))
            for face in ((tri[0], tri[1]), (tri[0], tri[2]), (tri[1], tri[2])):
                if face not in lookup:
                    raise FiltrationOrderError(f"Face {face} of triangle {tri} is missing")
                if lookup[face] > w:
                    raise FiltrationOrderError(
                        f"Face {face} (value {lookup[face]}) enters after triangle {tri} (value {w})"
                    )

    def is_valid(self) -> bool:
        try:
            self.check_valid()
        except FiltrationOrderError:
            return False
        return True
