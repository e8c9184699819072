import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from reflectlab.chains import (
    CHAIN_CHECKS,
    FAMILIES,
    affine_plane_drift,
    build_chain,
    chain_rows,
    check_chain_realforms,
    check_totally_geodesic,
    require_metric_family,
    restriction_cr_residual,
    submanifold_drift,
)
from reflectlab.errors import InvalidFamily, InvalidQ, NoMetricAvailable, NTooSmall
from reflectlab.geometry import make_space, to_complex


def q_for(family):
    return 1 if family.startswith("quadric") else None


@pytest.mark.parametrize("family", FAMILIES)
def test_all_algebraic_checks_pass_at_n3(family, rng):
    n = 4 if family == "quadric_dual" else 3
    rep = check_chain_realforms(build_chain(family, n, q_for(family)), 50, rng)
    assert rep.conclusion_status == "pass", {k: r.max for k, r in rep.residuals.items() if not r.ok}
    names = {k.split(":", 1)[1] for k in rep.residuals}
    assert names == set(CHAIN_CHECKS)


@settings(max_examples=10)
@given(st.integers(2, 5), st.integers(0, 2))
def test_quadric_dual_all_admissible_q(n, q):
    if q > n // 2:
        with pytest.raises(InvalidQ):
            build_chain("quadric_dual", n, q)
        return
    rep = check_chain_realforms(build_chain("quadric_dual", n, q), 20, np.random.default_rng(n))
    assert rep.conclusion_status == "pass"


def test_levels_are_nested_and_end_at_the_ambient():
    chain = build_chain("hermitian_hyperbolic", 3)
    dims = [chain.level(k).level_dim for k in range(1, 4)]
    assert dims == [1, 2, 3]
    assert len(chain.level(3).fixed_coords) == 0
    for k in (1, 2):
        assert set(chain.level(k).free_coords) < set(chain.level(k + 1).free_coords)


def test_quadric_dual_hypersurface_switches_block():
    chain = build_chain("quadric_dual", 4, 1)
    # x_{11} for level 1, then x_{2l}
    assert [chain.level(k).hypersurface_coord for k in range(1, 5)] == [0, 5, 6, 7]


def test_quadric_hypersurface_switches_part():
    chain = build_chain("quadric", 3, 2)
    # chi^1, chi^2, then v^3
    assert [chain.level(k).hypersurface_coord for k in range(1, 4)] == [0, 2, 5]
    assert "single chart" in chain.notes[0]


@pytest.mark.parametrize("family", ["euclidean", "hermitian_hyperbolic", "complex_projective"])
def test_levels_are_totally_geodesic(family, rng):
    chain = build_chain(family, 3)
    for k in (1, 2):
        rep = check_totally_geodesic(chain, k, 30, rng)
        assert rep.conclusion_status == "pass"
        assert rep.residuals["drift"].max < 1e-9


def test_geodesic_check_detects_a_tilted_start(rng):
    # starting direction leaving M_1 must produce drift
    ball = make_space("chyp_ball", 2)
    chain = build_chain("hermitian_hyperbolic", 2)
    pts = np.array([[0.3, 0.1, 0.0, 0.0]])
    tangents = np.array([[1.0, 0.0, 0.1, 0.0]])
    drift, speed_err, left = submanifold_drift(ball, pts, tangents, chain.level(1).drift)
    assert drift[0] > 1e-3
    assert speed_err[0] < 1e-8 and not left[0]


def test_real_plane_is_not_totally_geodesic(rng):
    cp = make_space("cproj", 2)
    drift = affine_plane_drift(cp, [0.3, 0.1, 0.2, 0.0], [[1, 0, 0, 0], [0, 0, 1, 0]], 10, rng)
    assert np.max(drift) > 1e-3


def test_quadric_geodesics_skipped(rng):
    chain = build_chain("quadric", 3, 1)
    assert check_totally_geodesic(chain, 1, 5, rng).conclusion_status == "skipped"
    with pytest.raises(NoMetricAvailable):
        require_metric_family(chain)
    rows = chain_rows(chain, 5, rng)
    assert {r["status"] for r in rows if r["check"] == "totally_geodesic"} == {"skipped"}


def test_restriction_of_holomorphic_function(rng):
    chain = build_chain("euclidean", 3)

    def f(p):
        z = to_complex(p)
        return z[..., 0] ** 2 * z[..., 1] + np.exp(z[..., 2])

    def g(p):
        return np.conj(to_complex(p)[..., 0])

    assert np.max(restriction_cr_residual(chain, f, 2, rng=rng)) < 1e-8
    assert np.max(restriction_cr_residual(chain, g, 1, rng=rng)) == pytest.approx(1.0)


@pytest.mark.parametrize("args,exc", [
    (("sphere", 3), InvalidFamily),
    (("euclidean", 1), NTooSmall),
    (("quadric", 3), InvalidQ),
    (("euclidean", 3, 1), InvalidQ),
    (("quadric", 3, 4), InvalidQ),
])
def test_build_chain_errors(args, exc):
    with pytest.raises(exc):
        build_chain(*args)
