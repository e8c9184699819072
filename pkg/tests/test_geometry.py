import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from reflectlab.errors import NoMetricAvailable, NotAComplexSpace, PointOutsideDomain
from reflectlab.geometry import (
    apply_complex_structure,
    christoffel_at,
    christoffel_fd,
    distance,
    geodesic_integrate,
    make_space,
    metric_at,
    random_points,
    to_complex,
    to_real,
)

finite = st.floats(-5, 5, allow_nan=False)
COMPLEX_KINDS = [("euclidean_c", 2), ("chyp_ball", 2), ("cproj", 2), ("bdi_domain", 3),
                 ("quadric_chart", 3)]


@given(arrays(float, (4, 6), elements=finite))
def test_complex_real_roundtrip(p):
    np.testing.assert_array_equal(to_real(to_complex(p)), p)


@pytest.mark.parametrize("kind,n", COMPLEX_KINDS)
def test_complex_structure_squares_to_minus_one(kind, n, rng):
    space = make_space(kind, n)
    p = random_points(space, 5, rng, radius=0.3)
    v = rng.normal(size=p.shape)
    jj = apply_complex_structure(space, p, apply_complex_structure(space, p, v))
    np.testing.assert_allclose(jj, -v, atol=0)


def test_real_space_has_no_complex_structure():
    with pytest.raises(NotAComplexSpace):
        apply_complex_structure(make_space("euclidean_r", 2), np.zeros(2), np.ones(2))


def test_quadric_has_no_metric():
    with pytest.raises(NoMetricAvailable):
        metric_at(make_space("quadric_chart", 2), np.zeros(4))


def test_ball_metric_at_origin_and_scaling():
    ball = make_space("chyp_ball", 2)
    np.testing.assert_allclose(metric_at(ball, np.zeros(4)), 4 * np.eye(4))
    # radial direction at |z| = r has length 2 / (1 - r^2)
    r = 0.6
    g = metric_at(ball, np.array([r, 0, 0, 0]))
    assert g[0, 0] == pytest.approx(4 / (1 - r * r) ** 2)
    assert g[2, 2] == pytest.approx(4 / (1 - r * r))


def test_fubini_study_at_origin():
    np.testing.assert_allclose(metric_at(make_space("cproj", 3), np.zeros(6)), 4 * np.eye(6))


@pytest.mark.parametrize("kind", ["chyp_ball", "cproj"])
def test_closed_form_christoffel_matches_finite_differences(kind, rng):
    space = make_space(kind, 2)
    for p in random_points(space, 5, rng, radius=0.5):
        np.testing.assert_allclose(christoffel_at(space, p), christoffel_fd(space, p), atol=1e-7)


@given(st.floats(0.0, 0.95))
def test_ball_distance_from_origin(r):
    ball = make_space("chyp_ball", 1)
    d = distance(ball, np.zeros(2), np.array([r, 0.0]))
    assert d == pytest.approx(2 * np.arctanh(r), rel=1e-12, abs=1e-15)


@given(st.floats(0.0, 50.0))
def test_projective_distance_from_origin(r):
    cp = make_space("cproj", 1)
    d = distance(cp, np.zeros(2), np.array([0.0, r]))
    assert d == pytest.approx(2 * np.arctan(r), rel=1e-12, abs=1e-15)


@pytest.mark.parametrize("kind", ["chyp_ball", "cproj"])
def test_distance_is_a_metric(kind, rng):
    space = make_space(kind, 2)
    a, b, c = (random_points(space, 200, rng) for _ in range(3))
    dab, dbc, dac = distance(space, a, b), distance(space, b, c), distance(space, a, c)
    np.testing.assert_allclose(dab, distance(space, b, a), rtol=1e-12)
    assert np.all(dac <= dab + dbc + 1e-12)
    np.testing.assert_allclose(distance(space, a, a), 0.0, atol=1e-14)


def test_distance_keeps_precision_for_close_points():
    ball = make_space("chyp_ball", 1)
    p = np.array([0.5, 0.2])
    d = distance(ball, p, p + np.array([1e-12, 0.0]))
    # metric length of the step: 2 * 1e-12 / (1 - |p|^2)
    assert d == pytest.approx(2e-12 / (1 - 0.29), rel=1e-6)


def test_ball_geodesic_through_origin():
    ball = make_space("chyp_ball", 1)
    # unit metric speed at the origin is Euclidean speed 1/2
    traj = geodesic_integrate(ball, np.zeros(2), np.array([0.5, 0.0]), t_end=1.0, dt=0.01)
    assert not traj.left_domain
    assert traj.points[-1, 0] == pytest.approx(np.tanh(0.5), abs=1e-9)
    assert traj.points[-1, 1] == 0.0
    speed = traj.speed_squared(ball)
    np.testing.assert_allclose(speed, 1.0, atol=1e-8)


def test_geodesic_stops_at_chart_boundary():
    ball = make_space("chyp_ball", 1)
    traj = geodesic_integrate(ball, np.array([0.9, 0.0]), np.array([5.0, 0.0]), 50.0, 0.5)
    assert traj.left_domain
    assert np.all(ball.domain_contains(traj.points))


def test_check_point_rejects_outside():
    ball = make_space("chyp_ball", 1)
    with pytest.raises(PointOutsideDomain):
        ball.check_point([1.0, 0.0])
    with pytest.raises(PointOutsideDomain):
        ball.check_point([0.0, 0.0, 0.0])


def test_unknown_space_kind():
    with pytest.raises(ValueError, match="unknown space kind"):
        make_space("sphere", 2)


@pytest.mark.parametrize("kind,n", COMPLEX_KINDS + [("euclidean_r", 3)])
def test_random_points_lie_in_domain(kind, n, rng):
    space = make_space(kind, n)
    assert np.all(space.domain_contains(random_points(space, 100, rng)))
