# tests/unit/test_persistence.py

import math
from typing import List

import numpy as np
import pytest
from pydantic import ValidationError

from flowtopo.core.exceptions import DominantClassNotFoundError, FiltrationOrderError
from flowtopo.models.complex import FilteredComplex
from flowtopo.models.covariance import CovarianceField
from flowtopo.models.persistence import PersistenceDiagram, PersistencePair, ScaleSchedule
from flowtopo.operations.filtration import ellipsoid_filtration, flag_complex, vietoris_rips_filtration
from flowtopo.operations.persistence import compute_persistence, dominant_class, scale_schedule
from tests.conftest import circle_points, make_cloud

SQRT2 = math.sqrt(2.0)


def gf2_rank(rows: List[int]) -> int:
    """Rank over Z/2 of vectors encoded as int bitsets."""
    basis = {}
    for row in rows:
        while row:
            top = row.bit_length() - 1
            if top not in basis:
                basis[top] = row
                break
            row ^= basis[top]
    return len(basis)


def betti_oracle(complex_: FilteredComplex, value: float):
    """(b0, b1) of the subcomplex at `value` from boundary ranks."""
    edges = [tuple(e) for e, w in zip(complex_.edges.tolist(), complex_.edge_values) if w <= value]
    all_triangles, triangle_values = complex_.triangle_arrays()
    triangles = [tuple(t) for t, w in zip(all_triangles.tolist(), triangle_values) if w <= value]
    edge_index = {e: r for r, e in enumerate(edges)}
    rank1 = gf2_rank([(1 << i) | (1 << j) for i, j in edges])
    rank2 = gf2_rank([
        (1 << edge_index[(a, b)]) | (1 << edge_index[(a, c)]) | (1 << edge_index[(b, c)])
        for a, b, c in triangles
    ])
    return complex_.n_vertices - rank1, len(edges) - rank1 - rank2


# ---------------------------------------------
# Diagrams of known complexes
# ---------------------------------------------

def test_unit_square_diagram(unit_square):
    diagram = compute_persistence(vietoris_rips_filtration(unit_square, 2.0))
    h0 = diagram.pairs_in(0)
    assert len(h0) == 4
    assert sorted(p.death for p in h0) == [1.0, 1.0, 1.0, math.inf]

    h1 = diagram.pairs_in(1)
    assert [(p.birth, p.death) for p in h1] == [(1.0, SQRT2), (SQRT2, SQRT2), (SQRT2, SQRT2)]
    assert not any(p.unresolved for p in h1)
    assert diagram.pairs_in(1, include_diagonal=False) == [h1[0]]


def test_open_loop_is_unresolved_at_the_cap(unit_square):
    diagram = compute_persistence(vietoris_rips_filtration(unit_square, 1.2))
    (loop,) = diagram.pairs_in(1)
    assert loop.unresolved
    assert loop.birth == 1.0 and loop.death == 1.2
    assert not loop.is_finite
    assert diagram.scale_cap == 1.2


def test_cap_defaults_to_largest_edge_value():
    complex_ = flag_complex(4, [(0, 1), (1, 2), (2, 3), (0, 3)], [1.0, 1.0, 1.0, 2.0])
    diagram = compute_persistence(complex_)
    (loop,) = diagram.pairs_in(1)
    assert loop.unresolved and loop.death == 2.0


def test_isolated_vertices_are_essential():
    diagram = compute_persistence(flag_complex(3, np.empty((0, 2)), []))
    assert [p.death for p in diagram.pairs_in(0)] == [math.inf] * 3
    assert diagram.pairs_in(1) == []


def test_circle_has_one_dominant_loop():
    cloud = make_cloud(circle_points(24))
    diagram = compute_persistence(vietoris_rips_filtration(cloud, 2.5))
    dominant = dominant_class(diagram)
    side = 2.0 * math.sin(math.pi / 24)
    assert dominant.birth == pytest.approx(side)
    assert dominant.death > 5 * side
    others = [p for p in diagram.pairs_in(1) if p is not dominant and p.is_finite]
    assert all(p.lifetime < 0.5 * dominant.lifetime for p in others)


def test_invalid_complex_is_rejected():
    complex_ = FilteredComplex(
        n_vertices=3,
        edges=[[0, 1], [0, 2], [1, 2]],
        edge_values=[1.0, 1.0, 2.0],
        triangles=[[0, 1, 2]],
        triangle_values=[1.0],
    )
    with pytest.raises(FiltrationOrderError):
        compute_persistence(complex_)


# ---------------------------------------------
# Agreement with boundary ranks
# ---------------------------------------------

@pytest.mark.parametrize("seed", [0, 1, 2, 3], ids=["seed0", "seed1", "seed2", "seed3"])
def test_betti_numbers_match_boundary_ranks(seed):
    """Diagram Betti counts equal Z/2 ranks at every filtration value and between them."""
    rng = np.random.default_rng(seed)
    cloud = make_cloud(rng.uniform(size=(12, 2)))
    complex_ = vietoris_rips_filtration(cloud, 0.6)
    diagram = compute_persistence(complex_)
    values = np.unique(complex_.edge_values)
    checked_values = list(values) + list(0.5 * (values[1:] + values[:-1])) + [0.0]
    for value in checked_values:
        b0, b1 = betti_oracle(complex_, value)
        assert diagram.betti(0, value) == b0, f"b0 at {value}"
        assert diagram.betti(1, value) == b1, f"b1 at {value}"


def test_identity_ellipsoid_diagram_is_half_the_rips_diagram(rng):
    cloud = make_cloud(circle_points(16) + rng.normal(scale=0.05, size=(16, 2)))
    rips = compute_persistence(vietoris_rips_filtration(cloud, 3.0))
    ellipsoid = compute_persistence(ellipsoid_filtration(cloud, CovarianceField.identity(16, 2), 1.5, rel_tol=1e-10))
    for dim in (0, 1):
        a = sorted((p.birth / 2, p.death / 2) for p in rips.pairs_in(dim))
        b = sorted((p.birth, p.death) for p in ellipsoid.pairs_in(dim))
        assert len(a) == len(b)
        for (ba, da), (bb, db) in zip(a, b):
            assert bb == pytest.approx(ba, abs=1e-8)
            assert db == pytest.approx(da, abs=1e-8) or (math.isinf(da) and math.isinf(db))


def as_explicit(complex_: FilteredComplex) -> FilteredComplex:
    triangles, triangle_values = complex_.triangle_arrays()
    return FilteredComplex(
        n_vertices=complex_.n_vertices,
        edges=complex_.edges,
        edge_values=complex_.edge_values,
        triangles=triangles,
        triangle_values=triangle_values,
        cap=complex_.cap,
    )


def diagram_values(diagram: PersistenceDiagram):
    return [(p.dim, p.birth, p.death, p.unresolved) for p in diagram.pairs]


@pytest.mark.parametrize("seed", [0, 1, 2], ids=["seed0", "seed1", "seed2"])
def test_streamed_flag_reduction_matches_explicit_triangles(seed):
    rng = np.random.default_rng(seed)
    complex_ = vietoris_rips_filtration(make_cloud(rng.uniform(size=(20, 2))), 0.7)
    assert complex_.is_flag
    explicit = as_explicit(complex_)
    assert explicit.n_triangles == complex_.n_triangles
    assert diagram_values(compute_persistence(complex_)) == diagram_values(compute_persistence(explicit))


def test_full_cap_complex_is_reduced_without_storing_triangles():
    n = 150
    cloud = make_cloud(circle_points(n) + np.random.default_rng(7).normal(scale=0.02, size=(n, 2)))
    complex_ = vietoris_rips_filtration(cloud, 10.0)
    assert complex_.triangles is None
    assert complex_.n_triangles == n * (n - 1) * (n - 2) // 6
    diagram = compute_persistence(complex_)
    assert not any(p.unresolved for p in diagram.pairs_in(1))
    assert diagram.betti(1, 10.0) == 0
    assert dominant_class(diagram).lifetime > 1.0

@pytest.mark.parametrize("seed", [0, 1, 2], ids=["seed0", "seed1", "seed2"])
def test_rips_diagram_moves_at_most_twice_the_perturbation(seed):
    """Moving every point by at most eta moves every distance, hence every pair, by at most 2 eta."""
    eta = 1e-3
    rng = np.random.default_rng(seed)
    points = rng.uniform(size=(20, 2))
    directions = rng.normal(size=points.shape)
    directions /= np.linalg.norm(directions, axis=1, keepdims=True)
    moved = points + eta * rng.uniform(size=(20, 1)) * directions
    before = compute_persistence(vietoris_rips_filtration(make_cloud(points), 2.0))
    after = compute_persistence(vietoris_rips_filtration(make_cloud(moved), 2.0))
    bound = 2 * eta + 1e-12

    deaths_before = sorted(p.death for p in before.pairs_in(0))
    deaths_after = sorted(p.death for p in after.pairs_in(0))
    for a, b in zip(deaths_before[:-1], deaths_after[:-1]):
        assert abs(a - b) <= bound

    # every H1 pair far from the diagonal has a partner within 2 eta in both coordinates
    for mine, theirs in ((before, after), (after, before)):
        for p in mine.pairs_in(1):
            if p.lifetime <= 2 * bound:
                continue
            assert any(
                abs(p.birth - q.birth) <= bound and abs(p.death - q.death) <= bound for q in theirs.pairs_in(1)
            ), f"H1 pair ({p.birth}, {p.death}) has no partner"



def test_reduction_is_deterministic(rng):
    complex_ = vietoris_rips_filtration(make_cloud(rng.uniform(size=(25, 2))), 0.5)
    first = compute_persistence(complex_)
    second = compute_persistence(complex_)
    assert diagram_values(first) == diagram_values(second)
    assert dominant_class(first) == dominant_class(second)


# ---------------------------------------------
# Dominant class and schedule
# ---------------------------------------------

def test_dominant_class_tie_goes_to_earlier_birth():
    diagram = PersistenceDiagram(pairs=[
        PersistencePair(dim=1, birth=2.0, death=3.0),
        PersistencePair(dim=1, birth=1.0, death=2.0),
        PersistencePair(dim=1, birth=0.5, death=1.5),
    ])
    assert dominant_class(diagram).birth == 0.5


def test_dominant_class_skips_unresolved_unless_asked():
    diagram = PersistenceDiagram(pairs=[
        PersistencePair(dim=1, birth=0.1, death=5.0, unresolved=True),
        PersistencePair(dim=1, birth=1.0, death=2.0),
    ], scale_cap=5.0)
    assert dominant_class(diagram).birth == 1.0
    assert dominant_class(diagram, include_unresolved=True).unresolved


def test_dominant_class_missing_raises():
    diagram = PersistenceDiagram(pairs=[PersistencePair(dim=0, birth=0.0, death=math.inf)])
    with pytest.raises(DominantClassNotFoundError):
        dominant_class(diagram)


def test_zero_lifetime_pairs_can_be_excluded():
    diagram = PersistenceDiagram(pairs=[PersistencePair(dim=1, birth=1.0, death=1.0)])
    assert dominant_class(diagram).lifetime == 0.0
    with pytest.raises(DominantClassNotFoundError):
        dominant_class(diagram, include_diagonal=False)


@pytest.mark.parametrize(
    "dominant, expected",
    [
        ((1.0, 3.0, 2.0), (1.0, 2.0, 3.0, 4.0)),
        ((0.0, 0.0, 0.0), (0.0, 0.0, 0.0, 0.0)),
        ((0.5, 1.5, 1.0), (0.5, 1.0, 1.5, 2.0)),
    ],
    ids=["unit_steps", "zero_lifetime", "half_steps"],
)
def test_scale_schedule(dominant, expected):
    schedule = scale_schedule(dominant)
    assert schedule.scales == pytest.approx(expected)
    assert schedule[2] == pytest.approx(dominant[1])


def test_schedule_rejects_infinite_death():
    with pytest.raises(ValidationError):
        ScaleSchedule(birth=0.0, death=math.inf)


def test_pair_rejects_death_before_birth():
    with pytest.raises(ValidationError):
        PersistencePair(dim=1, birth=2.0, death=1.0)
