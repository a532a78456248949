# tests/unit/test_denoise.py

import numpy as np
import pytest
from pydantic import ValidationError
from scipy.spatial import ConvexHull

from flowtopo.core.exceptions import InvalidSpecError, ShapeMismatchError
from flowtopo.models.covariance import CovarianceField
from flowtopo.operations.denoise import (
    adaptive_moving_average,
    adaptive_windows,
    apply_filter,
    geometric_median,
    moving_average,
    rmse,
    topological_filter,
    weiszfeld_iterates,
)
from flowtopo.operations.neighborhoods import covariance_field
from flowtopo.operations.signal_model import add_noise, generate_chirp
from flowtopo.schemas.denoise import Aggregator, FilterKind, FilterSpec, NeighborhoodMode, ScaleAnchor
from flowtopo.schemas.neighborhood import NeighborhoodSpec
from flowtopo.schemas.signal import ChirpParams, NoiseSpec
from tests.conftest import circle_points, make_cloud


def grid_median(points: np.ndarray, steps: int = 401) -> np.ndarray:
    """Oracle: brute-force minimiser of the summed distance on a fine planar grid."""
    lo, hi = points.min(axis=0) - 0.1, points.max(axis=0) + 0.1
    xs, ys = np.linspace(lo[0], hi[0], steps), np.linspace(lo[1], hi[1], steps)
    gx, gy = np.meshgrid(xs, ys)
    grid = np.column_stack([gx.ravel(), gy.ravel()])
    cost = np.sum(np.linalg.norm(grid[:, None, :] - points[None], axis=2), axis=1)
    return grid[int(np.argmin(cost))]


def summed_distance(points: np.ndarray, y: np.ndarray) -> float:
    return float(np.sum(np.linalg.norm(points - y, axis=1)))


# ---------------------------------------------
# Moving averages
# ---------------------------------------------

def test_moving_average_of_constant_is_constant():
    np.testing.assert_allclose(moving_average(np.full(20, 3.5), 5), 3.5)


@pytest.mark.parametrize(
    "w, expected",
    [
        (1, [0.0, 1.0, 2.0, 3.0, 4.0]),
        (3, [0.5, 1.0, 2.0, 3.0, 3.5]),
        (4, [0.5, 1.0, 1.5, 2.5, 3.0]),
    ],
    ids=["identity_window", "odd_window", "even_window"],
)
def test_moving_average_truncates_at_the_ends(w, expected):
    """The window [i - w//2, i + (w-1)//2] is clipped to the series."""
    np.testing.assert_allclose(moving_average(np.arange(5.0), w), expected)


def test_moving_average_is_per_axis():
    x = np.column_stack([np.arange(6.0), 10 * np.arange(6.0)])
    out = moving_average(x, 3)
    np.testing.assert_allclose(out[:, 1], 10 * out[:, 0])


def test_moving_average_rejects_empty_window():
    with pytest.raises(InvalidSpecError):
        moving_average(np.arange(5.0), 0)


def test_adaptive_windows_track_the_chirp():
    """Windows shrink as the chirp speeds up."""
    cloud, _ = generate_chirp(ChirpParams(n=500))
    windows = adaptive_windows(cloud.points, cloud.sampling_rate)
    assert windows.shape == (500,)
    assert windows.min() >= 3 and windows.max() <= 125
    assert np.mean(windows[:100]) > np.mean(windows[-100:])


def test_adaptive_windows_of_silence_use_the_maximum_frequency():
    windows = adaptive_windows(np.zeros((100, 2)), 50.0)
    # fs / (2 * fs / 2) = 1, clamped up to 3
    np.testing.assert_array_equal(windows, 3)


def test_adaptive_moving_average_keeps_shape():
    cloud, _ = generate_chirp(ChirpParams(n=200))
    out = adaptive_moving_average(cloud.points, cloud.sampling_rate)
    assert out.shape == cloud.points.shape
    assert adaptive_moving_average(cloud.points[:, 0], cloud.sampling_rate).shape == (200,)


def test_adaptive_moving_average_needs_enough_samples():
    with pytest.raises(InvalidSpecError):
        adaptive_windows(np.zeros(5), 10.0)


# ---------------------------------------------
# Geometric median
# ---------------------------------------------

def test_geometric_median_matches_grid_search(rng):
    for _ in range(5):
        points = rng.normal(size=(9, 2))
        median = geometric_median(points)
        oracle = grid_median(points)
        assert summed_distance(points, median) <= summed_distance(points, oracle) + 1e-6


def test_geometric_median_resists_outliers():
    points = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [1.0, 1.0], [100.0, 100.0]])
    median = geometric_median(points)
    assert np.linalg.norm(median - [0.5, 0.5]) < 1.0
    assert np.linalg.norm(points.mean(axis=0) - [0.5, 0.5]) > 10.0


def test_geometric_median_of_collinear_odd_set_is_the_middle_point():
    points = np.array([[0.0, 0.0], [1.0, 0.0], [5.0, 0.0]])
    np.testing.assert_allclose(geometric_median(points), [1.0, 0.0], atol=1e-6)


def test_geometric_median_of_two_points_is_the_midpoint():
    np.testing.assert_allclose(geometric_median([[0.0, 0.0], [2.0, 2.0]]), [1.0, 1.0])


def test_geometric_median_of_single_point():
    np.testing.assert_array_equal(geometric_median([[3.0, -1.0]]), [3.0, -1.0])


def test_weiszfeld_objective_never_exceeds_the_centroid(rng):
    points = rng.normal(size=(15, 3))
    values = [value for _, value in weiszfeld_iterates(points)]
    assert min(values) <= values[0]
    assert all(b <= a + 1e-12 for a, b in zip(values, values[1:]))


def test_geometric_median_of_empty_set_raises():
    with pytest.raises(InvalidSpecError):
        geometric_median(np.empty((0, 2)))


# ---------------------------------------------
# Topological filters
# ---------------------------------------------

@pytest.fixture
def noisy_circle(rng):
    return make_cloud(circle_points(60) + rng.normal(scale=0.05, size=(60, 2)), dt=0.01)


def test_spherical_filter_with_tiny_radius_is_identity(noisy_circle):
    out = topological_filter(noisy_circle, FilterSpec(kind=FilterKind.SPHERICAL, radius=1e-9))
    np.testing.assert_array_equal(out.points, noisy_circle.points)


def test_spherical_filter_with_huge_radius_collapses_to_the_mean(noisy_circle):
    out = topological_filter(noisy_circle, FilterSpec(kind=FilterKind.SPHERICAL, radius=100.0))
    np.testing.assert_allclose(out.points, np.broadcast_to(noisy_circle.points.mean(axis=0), out.points.shape))


def test_identity_ellipsoidal_filter_equals_spherical(noisy_circle):
    field = CovarianceField.identity(noisy_circle.n, 2)
    spherical = topological_filter(noisy_circle, FilterSpec(kind=FilterKind.SPHERICAL, radius=0.3))
    ellipsoidal = topological_filter(noisy_circle, FilterSpec(kind=FilterKind.ELLIPSOIDAL, eps=0.3), field)
    np.testing.assert_array_equal(spherical.points, ellipsoidal.points)


def test_knn_filter_averages_k_plus_one_points():
    cloud = make_cloud(np.arange(6.0))
    out = topological_filter(cloud, FilterSpec(kind=FilterKind.KNN, k=2))
    # each point plus its two nearest; ties prefer the smaller index
    np.testing.assert_allclose(out.points[:, 0], [1.0, 1.0, 2.0, 3.0, 4.0, 4.0])


def test_intersection_mode_grows_the_neighborhood(noisy_circle):
    field = covariance_field(noisy_circle, NeighborhoodSpec(tau=2, k=3))
    contain = topological_filter(noisy_circle, FilterSpec(kind=FilterKind.ELLIPSOIDAL, eps=0.5), field)
    meet = topological_filter(
        noisy_circle,
        FilterSpec(kind=FilterKind.ELLIPSOIDAL, eps=0.5, mode=NeighborhoodMode.INTERSECTION),
        field,
    )
    assert contain.points.shape == meet.points.shape
    assert not np.array_equal(contain.points, meet.points)


def test_geometric_median_aggregator(noisy_circle):
    spec = FilterSpec(kind=FilterKind.SPHERICAL, radius=0.3, aggregator=Aggregator.GEOMETRIC_MEDIAN)
    out = topological_filter(noisy_circle, spec)
    assert out.n == noisy_circle.n and out.dt == noisy_circle.dt


@pytest.mark.parametrize(
    "spec",
    [
        FilterSpec(kind=FilterKind.SPHERICAL, radius=0.3),
        FilterSpec(kind=FilterKind.KNN, k=5),
        FilterSpec(kind=FilterKind.ELLIPSOIDAL, eps=0.6),
        FilterSpec(kind=FilterKind.ELLIPSOIDAL, eps=0.4, mode=NeighborhoodMode.INTERSECTION),
        FilterSpec(kind=FilterKind.SPHERICAL, radius=0.3, aggregator=Aggregator.GEOMETRIC_MEDIAN),
    ],
    ids=["spherical", "knn", "ellipsoidal", "ellipsoidal_intersection", "spherical_median"],
)
def test_filters_commute_with_translation(noisy_circle, spec):
    shift = np.array([3.0, -2.0])
    moved = noisy_circle.with_points(noisy_circle.points + shift)
    neighborhood = NeighborhoodSpec(tau=2, k=4)
    field = covariance_field(noisy_circle, neighborhood) if spec.kind == FilterKind.ELLIPSOIDAL else None
    moved_field = covariance_field(moved, neighborhood) if field is not None else None
    before = topological_filter(noisy_circle, spec, field)
    after = topological_filter(moved, spec, moved_field)
    np.testing.assert_allclose(after.points, before.points + shift, atol=1e-6)


@pytest.mark.parametrize(
    "spec",
    [
        FilterSpec(kind=FilterKind.SPHERICAL, radius=0.4),
        FilterSpec(kind=FilterKind.KNN, k=6),
        FilterSpec(kind=FilterKind.ELLIPSOIDAL, eps=0.8),
    ],
    ids=["spherical", "knn", "ellipsoidal"],
)
def test_mean_aggregation_stays_in_the_convex_hull(noisy_circle, spec):
    field = covariance_field(noisy_circle, NeighborhoodSpec(tau=2, k=4))
    out = topological_filter(noisy_circle, spec, field)
    hull = ConvexHull(noisy_circle.points)
    # facet equations are a . x + b <= 0 inside the hull
    slack = out.points @ hull.equations[:, :-1].T + hull.equations[:, -1]
    assert slack.max() <= 1e-9


@pytest.mark.parametrize(
    "spec, field_needed",
    [
        (FilterSpec(kind=FilterKind.SPHERICAL), False),
        (FilterSpec(kind=FilterKind.ELLIPSOIDAL), True),
        (FilterSpec(kind=FilterKind.ELLIPSOIDAL, eps=0.3), False),
        (FilterSpec(kind=FilterKind.MOVING_AVERAGE), False),
    ],
    ids=["spherical_without_radius", "ellipsoidal_without_eps", "ellipsoidal_without_field", "not_topological"],
)
def test_topological_filter_rejects_incomplete_specs(noisy_circle, spec, field_needed):
    field = CovarianceField.identity(noisy_circle.n, 2) if field_needed else None
    with pytest.raises(InvalidSpecError):
        topological_filter(noisy_circle, spec, field)


def test_misaligned_field_is_rejected(noisy_circle):
    with pytest.raises(ShapeMismatchError):
        topological_filter(noisy_circle, FilterSpec(kind=FilterKind.ELLIPSOIDAL, eps=0.3), CovarianceField.identity(5, 2))


@pytest.mark.parametrize("kind", list(FilterKind), ids=[k.value for k in FilterKind])
def test_every_filter_keeps_the_sampling(kind, noisy_circle):
    spec = FilterSpec(kind=kind, window=5, k=4, radius=0.3, eps=0.3)
    field = CovarianceField.identity(noisy_circle.n, 2)
    out = apply_filter(noisy_circle, spec, field)
    assert out.points.shape == noisy_circle.points.shape
    assert out.dt == noisy_circle.dt and out.t0 == noisy_circle.t0


def test_filters_reduce_error_on_a_noisy_chirp():
    clean, _ = generate_chirp(ChirpParams(n=400))
    noisy = add_noise(clean, NoiseSpec.from_db(10.0, seed=0))
    before = rmse(clean, noisy).per_axis
    after = rmse(clean, apply_filter(noisy, FilterSpec(kind=FilterKind.MOVING_AVERAGE, window=3))).per_axis
    assert after[0] < before[0]


# ---------------------------------------------
# Scoring and specs
# ---------------------------------------------

def test_rmse_per_axis():
    clean = make_cloud(np.zeros((4, 2)))
    denoised = make_cloud([[1.0, 0.0], [1.0, 0.0], [-1.0, 2.0], [-1.0, 2.0]])
    report = rmse(clean, denoised, snr_db=10.0, seed=1)
    assert report.per_axis == pytest.approx([1.0, np.sqrt(2.0)])
    assert report.snr_db == 10.0 and report.seed == 1


def test_rmse_rejects_shape_mismatch():
    with pytest.raises(ShapeMismatchError):
        rmse(make_cloud(np.zeros((4, 2))), make_cloud(np.zeros((5, 2))))


@pytest.mark.parametrize(
    "spec, label",
    [
        (FilterSpec(kind="moving-average", window=7), "moving_average_7"),
        (FilterSpec(kind="adaptive_moving_average"), "adaptive_moving_average"),
        (FilterSpec(kind="knn", k=5, aggregator="geometric-median"), "knn_5_gm"),
        (FilterSpec(kind="spherical"), "spherical"),
        (FilterSpec(kind="ellipsoidal", mode="intersection"), "ellipsoidal_intersection"),
    ],
    ids=["moving_average", "adaptive", "knn_median", "spherical", "ellipsoidal_intersection"],
)
def test_filter_labels(spec, label):
    assert spec.label == label


def test_with_scale_sets_the_right_parameter():
    assert FilterSpec(kind="spherical").with_scale(0.4).radius == 0.4
    assert FilterSpec(kind="ellipsoidal").with_scale(0.4).eps == 0.4
    assert FilterSpec(kind="knn").with_scale(0.4).scale is None
    with pytest.raises(ValueError):
        FilterSpec(kind="spherical").with_scale(0.0)


@pytest.mark.parametrize(
    "text, index",
    [("death", None), ("schedule:0", 0), (" Schedule:3 ", 3)],
    ids=["death", "first_schedule_entry", "padded_mixed_case"],
)
def test_scale_anchor_parse(text, index):
    anchor = ScaleAnchor.parse(text)
    assert anchor.schedule_index == index
    assert ScaleAnchor.parse(str(anchor)) == anchor


@pytest.mark.parametrize("text", ["birth", "schedule:", "schedule:x"], ids=["unknown", "missing_index", "non_digit"])
def test_scale_anchor_rejects_bad_text(text):
    with pytest.raises(ValueError):
        ScaleAnchor.parse(text)


def test_scale_anchor_index_is_bounded():
    with pytest.raises(ValidationError):
        ScaleAnchor.parse("schedule:4")
