# flowtopo/operations/persistence.py
"""
Module: persistence.py

H0 and H1 persistence of a FilteredComplex over Z/2.

H0 comes from union-find over the edges in filtration order: an edge joining
two components is negative and kills one of them, every other edge opens a
loop. H1 follows the cohomology form of the reduction, which yields the same
pairs: each open loop keeps a 1-cocycle, stored as one bit column over the
edge ranks. A triangle on which some live cocycles evaluate to 1 closes the
youngest of them, and the others absorb it.

Flag complexes are processed while their triangles are streamed edge by
edge; all triangles of an edge are evaluated against the live cocycles in one
vectorised step, and skipped outright when no loop is open. The full triangle
set is never held in memory.
"""

import logging
from typing import Dict, List, Optional, Tuple, Union

import numpy as np
from scipy.cluster.hierarchy import DisjointSet

from flowtopo.core.exceptions import DominantClassNotFoundError, InvalidSpecError
from flowtopo.models.complex import FilteredComplex
from flowtopo.models.persistence import PersistenceDiagram, PersistencePair, ScaleSchedule

logger = logging.getLogger(__name__)

INFINITY = float("inf")
_WORD = 64


def _bit(slot: int) -> Tuple[int, np.uint64]:
    word, offset = divmod(slot, _WORD)
    return word, np.uint64(1 << offset)


class _LiveCocycles:
    """1-cocycles of the open loops: bit `slot` of words[r] is set iff edge rank r is in cocycle `slot`."""

    def __init__(self, n_edges: int):
        self.words = np.zeros((n_edges, 1), dtype=np.uint64)
        self.birth_rank: List[int] = []
        self.free: List[int] = []
        self.n_open = 0

    def open(self, rank: int) -> None:
        if self.free:
            slot = self.free.pop()
        else:
            slot = len(self.birth_rank)
            self.birth_rank.append(-1)
            if slot >= _WORD * self.words.shape[1]:
                self.words = np.hstack([self.words, np.zeros_like(self.words)])
        self.birth_rank[slot] = rank
        word, bit = _bit(slot)
        self.words[rank, word] |= bit
        self.n_open += 1

    def _slots(self, row: np.ndarray) -> List[int]:
        slots = []
        for w, word in enumerate(row.tolist()):
            while word:
                low = word & -word
                slots.append(w * _WORD + low.bit_length() - 1)
                word ^= low
        return slots

    def close(self, faces: np.ndarray, values) -> List[Tuple[int, float]]:
        """
        Feed triangles (rows of three edge ranks) in filtration order.

        Returns (birth rank, death value) for every loop they close.
        """
        closed = []
        start = 0
        while self.n_open and start < len(faces):
            rest = faces[start:]
            evaluation = self.words[rest[:, 0]] ^ self.words[rest[:, 1]] ^ self.words[rest[:, 2]]
            hit = np.flatnonzero(evaluation.any(axis=1))
            if hit.size == 0:
                break
            t = start + int(hit[0])
            slots = self._slots(evaluation[hit[0]])
            youngest = max(slots, key=lambda s: self.birth_rank[s])
            closed.append((self.birth_rank[youngest], float(values[t])))

            word_y, bit_y = _bit(youngest)
            support = (self.words[:, word_y] & bit_y) != 0
            for s in slots:
                if s != youngest:
                    word, bit = _bit(s)
                    self.words[support, word] ^= bit
            self.words[support, word_y] &= ~bit_y
            self.birth_rank[youngest] = -1
            self.free.append(youngest)
            self.n_open -= 1
            start = t + 1
        return closed


def compute_persistence(complex_: FilteredComplex, check: bool = True) -> PersistenceDiagram:
    """
    Persistence pairs for dimensions 0 and 1.

    Every vertex is born at 0. An edge that merges two components kills one
    of them (H0 pair); every other edge opens a loop, closed by the first
    triangle on which its cocycle, or a younger one it was merged into,
    evaluates to 1 (H1 pair). Loops that never close are reported with
    death = scale cap and `unresolved` set.

    Raises:
    - FiltrationOrderError: if a face enters after one of its cofaces.
    """
    if check:
        complex_.check_valid()

    n, m = complex_.n_vertices, complex_.n_edges
    order = complex_.edge_order
    values = complex_.edge_values[order]
    rank_of = np.empty(m, dtype=np.int64)
    rank_of[order] = np.arange(m)

    scale_cap = complex_.cap
    if scale_cap is None:
        scale_cap = float(values.max()) if m else 0.0

    # H0
    components = DisjointSet(range(n))
    merges: List[float] = []
    positive = np.zeros(m, dtype=bool)
    for r, (i, j) in enumerate(complex_.edges[order].tolist()):
        if components.merge(i, j):
            merges.append(float(values[r]))
        else:
            positive[r] = True

    # H1
    cocycles = _LiveCocycles(m)
    death: Dict[int, float] = {}
    evaluated = 0
    if complex_.is_flag:
        rank = np.full((n, n), -1, dtype=np.int64)
        for e, ks in complex_.flag_batches():
            r = int(rank_of[e])
            i, j = (int(v) for v in complex_.edges[e])
            if positive[r]:
                cocycles.open(r)
            if ks.size and cocycles.n_open:
                faces = np.column_stack([rank[i, ks], rank[j, ks], np.full(ks.size, r)])
                evaluated += ks.size
                death.update(cocycles.close(faces, np.full(ks.size, values[r])))
            rank[i, j] = rank[j, i] = r
    else:
        triangles, triangle_values = complex_.triangle_arrays()
        lookup = {(int(i), int(j)): int(rank_of[e]) for e, (i, j) in enumerate(complex_.edges)}
        faces = np.array(
            [[lookup[(a, b)], lookup[(a, c)], lookup[(b, c)]] for a, b, c in triangles.tolist()],
            dtype=np.int64,
        ).reshape(-1, 3)
        # a triangle enters after every edge of equal or smaller value
        feed_until = np.append(np.searchsorted(triangle_values, values, side="left"), len(faces))
        cursor = 0
        for r, stop in enumerate(feed_until.tolist()):
            if stop > cursor and cocycles.n_open:
                evaluated += stop - cursor
                death.update(cocycles.close(faces[cursor:stop], triangle_values[cursor:stop]))
            cursor = max(cursor, stop)
            if r < m and positive[r]:
                cocycles.open(r)

    pairs: List[PersistencePair] = [PersistencePair(dim=0, birth=0.0, death=w) for w in merges]
    pairs += [PersistencePair(dim=0, birth=0.0, death=INFINITY) for _ in range(n - len(merges))]
    for r in np.flatnonzero(positive).tolist():
        birth = float(values[r])
        if r in death:
            pairs.append(PersistencePair(dim=1, birth=birth, death=death[r]))
        else:
            pairs.append(PersistencePair(dim=1, birth=birth, death=max(scale_cap, birth), unresolved=True))

    pairs.sort(key=lambda p: (p.dim, p.birth, p.death, p.unresolved))
    logger.debug(
        "Persistence: %d vertices, %d edges, %d triangles evaluated -> %d H0 / %d H1 pairs",
        n, m, evaluated, sum(p.dim == 0 for p in pairs), sum(p.dim == 1 for p in pairs),
    )
    return PersistenceDiagram(pairs=pairs, scale_cap=scale_cap)


def dominant_class(
    diagram: PersistenceDiagram,
    dim: int = 1,
    include_unresolved: bool = False,
    include_diagonal: bool = True,
) -> PersistencePair:
    """
    The finite pair of `dim` with the largest lifetime.

    Ties go to the earlier birth, then to the earlier pair in the diagram.

    Raises:
    - DominantClassNotFoundError: when no eligible pair exists.
    """
    best: Optional[Tuple[float, float, int]] = None
    chosen: Optional[PersistencePair] = None
    for index, pair in enumerate(diagram.pairs_in(dim, include_diagonal=include_diagonal)):
        if not (pair.is_finite or (include_unresolved and pair.unresolved)):
            continue
        key = (-pair.lifetime, pair.birth, index)
        if best is None or key < best:
            best, chosen = key, pair
    if chosen is None:
        raise DominantClassNotFoundError(f"No finite H{dim} pair in the diagram")
    return chosen


def scale_schedule(dominant: Union[PersistencePair, Tuple[float, float, float]]) -> ScaleSchedule:
    """[B, B + L/2, B + L, B + 3L/2] for the dominant class (b, d, l)."""
    if isinstance(dominant, PersistencePair):
        birth, death = dominant.birth, dominant.death
    else:
        birth, death = dominant[0], dominant[1]
    if death < birth:
        raise InvalidSpecError(f"Lifetime must be non-negative, got {death - birth}")
    return ScaleSchedule(birth=birth, death=death)
