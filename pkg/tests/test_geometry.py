import json
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from fejerlab import geometry
from fejerlab.geometry import AffineSubspace, Ball, Box, HalfSpace, Hyperplane, ProblemInstance

import oracles

finite = st.floats(-5, 5, allow_nan=False, allow_infinity=False)


def vectors(d):
    return st.lists(finite, min_size=d, max_size=d).map(np.array)


@st.composite
def convex_sets(draw, d=None):
    d = draw(st.integers(1, 4)) if d is None else d
    kind = draw(st.sampled_from(["halfspace", "hyperplane", "ball", "box", "affine"]))
    if kind in ("halfspace", "hyperplane"):
        a = draw(vectors(d).filter(lambda v: np.linalg.norm(v) > 1e-2))
        cls = HalfSpace if kind == "halfspace" else Hyperplane
        return cls(a, draw(finite))
    if kind == "ball":
        return Ball(draw(vectors(d)), draw(st.floats(0.1, 4)))
    if kind == "box":
        lo = draw(vectors(d))
        return Box(lo, lo + np.abs(draw(vectors(d))))
    k = draw(st.integers(0, d))
    B = draw(st.lists(vectors(d), min_size=k, max_size=k))
    B = np.array(B).reshape(k, d)
    if k and np.linalg.matrix_rank(B, tol=1e-3) < k:
        B = np.eye(d)[:k]
    return AffineSubspace(B, draw(vectors(d)))


@st.composite
def set_and_points(draw, n=2):
    s = draw(convex_sets())
    return s, [draw(vectors(s.dim)) for _ in range(n)]


# -- worked examples---------------------------------------------------------


def test_halfspace_drops_orthogonally_onto_boundary():
    np.testing.assert_allclose(geometry.project(HalfSpace([1, 0], 1), [2, 0]), [1, 0])


def test_ball_interior_point_is_fixed():
    np.testing.assert_array_equal(geometry.project(Ball([0, 0], 1), [0, 0]), [0, 0])


def test_box_clamps_coordinatewise():
    np.testing.assert_array_equal(geometry.project(Box([0, 0], [1, 1]), [2, -1]), [1, 0])


def test_hyperplane_distance_is_vertical_gap():
    assert geometry.dist(Hyperplane([0, 1], 0), [3, 2]) == pytest.approx(2)


def test_ball_distance_is_radial():
    assert geometry.dist(Ball([0, 0], 1), [2, 0]) == pytest.approx(1)


def test_residual_at_z_is_zero(orthant2):
    assert geometry.residual_f(orthant2, orthant2.z) == 0


def test_residual_is_max_of_distances(orthant2):
    assert geometry.residual_f(orthant2, [1, 2]) == pytest.approx(2)


def test_residual_single_set_is_distance():
    inst = ProblemInstance((Ball([0, 0], 1),), [0, 3], [0, 0], 3)
    assert geometry.residual_f(inst, [0, 3]) == pytest.approx(2)


# -- errors and invariants --------------------------------------------------


def test_dimension_mismatch_is_reported():
    with pytest.raises(geometry.DimensionError):
        HalfSpace([1, 0], 0).project([1, 2, 3])
    with pytest.raises(geometry.DimensionError):
        geometry.dist(Ball([0, 0, 0], 1), [1, 2])


@pytest.mark.parametrize("make", [lambda: HalfSpace([0, 0], 1), lambda: Hyperplane([0.0], 1)])
def test_zero_normal_rejected_at_construction(make):
    with pytest.raises(geometry.GeometryError):
        make()


def test_invalid_box_and_ball_rejected():
    with pytest.raises(geometry.GeometryError):
        Box([1, 0], [0, 1])
    with pytest.raises(geometry.GeometryError):
        Ball([0, 0], 0)


def test_nonfinite_coordinates_rejected():
    with pytest.raises(geometry.GeometryError):
        geometry.as_vector([1.0, math.nan])


def test_dependent_affine_basis_rejected():
    with pytest.raises(geometry.GeometryError):
        AffineSubspace([[1, 1], [2, 2]], [0, 0])


def test_instance_requires_z_in_every_set():
    with pytest.raises(geometry.GeometryError, match="z is not in set 1"):
        ProblemInstance((HalfSpace([1, 0], 0), HalfSpace([0, 1], -1)), [1, 1], [0, 0], 2)


@pytest.mark.parametrize("b", [0, 1, 1.5])
def test_instance_requires_natural_b_covering_start(b):
    with pytest.raises(geometry.GeometryError):
        ProblemInstance((HalfSpace([1, 0], 0),), [1, 1], [0, 0], b)


def test_instance_json_round_trip(orthant2):
    back = ProblemInstance.from_json(orthant2.to_json())
    assert back.to_dict() == orthant2.to_dict()
    assert json.loads(orthant2.to_json())["sets"][0] == {"type": "halfspace", "a": [1.0, 0.0], "beta": 0.0}


@given(convex_sets())
def test_set_json_round_trip(s):
    back = geometry.set_from_dict(json.loads(json.dumps(s.to_dict())))
    X = np.linspace(-3, 3, 7 * s.dim).reshape(7, s.dim)
    np.testing.assert_allclose(back.project(X), s.project(X), atol=1e-12)


def test_unknown_set_type():
    with pytest.raises(geometry.GeometryError, match="unknown set type"):
        geometry.set_from_dict({"type": "cone"})


def test_projection_is_vectorised_over_leading_axes():
    s = Ball([0, 0], 1)
    X = np.arange(24, dtype=float).reshape(3, 4, 2)
    out = s.project(X)
    assert out.shape == X.shape
    np.testing.assert_allclose(out[1, 2], s.project(X[1, 2]))


# -- properties -------------------------------------------------------------


@settings(max_examples=200)
@given(set_and_points(1))
def test_projection_idempotent(args):
    s, (x,) = args
    p = s.project(x)
    np.testing.assert_allclose(s.project(p), p, atol=1e-12 * (1 + np.linalg.norm(x)))
    assert s.dist(p) <= 1e-12 * (1 + np.linalg.norm(x))


@settings(max_examples=200)
@given(set_and_points(2))
def test_variational_inequality(args):
    s, (x, w) = args
    p = s.project(x)
    y = s.project(w)  # an arbitrary point of the set
    assert np.dot(x - p, y - p) <= 1e-10 * (1 + np.linalg.norm(x) * np.linalg.norm(w))


@settings(max_examples=200)
@given(set_and_points(2))
def test_nonexpansive(args):
    s, (x, y) = args
    assert np.linalg.norm(s.project(x) - s.project(y)) <= np.linalg.norm(x - y) + 1e-10


@settings(max_examples=100)
@given(set_and_points(1))
def test_residual_zero_iff_in_set(args):
    s, (x,) = args
    z = s.project(x)
    inst = ProblemInstance((s,), x, z, max(1, math.ceil(np.linalg.norm(z - x))))
    assert geometry.residual_f(inst, z) <= geometry.FEAS_TOL
    assert (geometry.residual_f(inst, x) <= geometry.FEAS_TOL) == s.contains(x)


# -- reference projection onto the intersection ------------------------------


def test_orthant_uses_clamping_oracle(orthant2, rng):
    X = rng.normal(size=(50, 2)) * 3
    P, method = geometry.project_intersection(orthant2, X)
    assert method == "box"
    np.testing.assert_array_equal(P, oracles.orthant_projection(X))


@pytest.mark.parametrize("theta", [math.pi / 8, math.pi / 32, 2.5])
def test_polyhedral_oracle_matches_optimiser(theta, rng):
    sets = (HalfSpace([0, 1], 0), HalfSpace([math.sin(theta), -math.cos(theta)], 0), HalfSpace([1, 1], 1.0))
    X = rng.normal(size=(25, 2)) * 2
    P, method = geometry.project_intersection(sets, X)
    assert method == "polyhedral"
    for x, p in zip(X, P):
        np.testing.assert_allclose(p, oracles.project_slsqp(sets, x), atol=1e-6)


def test_dykstra_reference_matches_optimiser(rng):
    sets = (Ball([0, 0], 1), HalfSpace([1, 1], 0.2))
    X = rng.normal(size=(15, 2)) * 2
    P, method = geometry.project_intersection(sets, X)
    assert method == "dykstra"
    for x, p in zip(X, P):
        np.testing.assert_allclose(p, oracles.project_slsqp(sets, x, start=np.zeros(2)), atol=1e-6)


def test_affine_and_hyperplane_intersection_is_polyhedral():
    sets = (AffineSubspace([[1, 0, 0], [0, 1, 0]], [0, 0, 1]), Hyperplane([1, 1, 0], 1))
    P, method = geometry.project_intersection(sets, np.array([[3.0, 0.0, 5.0]]))
    assert method == "polyhedral"
    np.testing.assert_allclose(P[0], [2.0, -1.0, 1.0], atol=1e-12)


def test_empty_intersection_detected():
    with pytest.raises(geometry.GeometryError):
        geometry.project_intersection((HalfSpace([1, 0], -1), HalfSpace([-1, 0], -1)), np.zeros((1, 2)))
