import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sepdiag.errors import InputError
from sepdiag.spaces import (
    CHEBYSHEV,
    EQUICONNECTORS,
    EUCLIDEAN,
    Box,
    as_vector,
    circle_equiconnector,
    distance,
    linear_equiconnector,
)

# rounded so that squared coordinate gaps never underflow
finite = st.floats(-1e3, 1e3, allow_nan=False, allow_infinity=False).map(lambda v: round(v, 6))
vec3 = st.lists(finite, min_size=3, max_size=3)


def test_distance_examples():
    assert distance(EUCLIDEAN, [0, 0], [3, 4]) == 5.0
    assert distance(CHEBYSHEV, [1, 2], [4, 3]) == 3.0
    for m in (EUCLIDEAN, CHEBYSHEV):
        assert distance(m, [0.3, -2.0], [0.3, -2.0]) == 0.0


def test_distance_dimension_mismatch():
    with pytest.raises(InputError):
        distance(EUCLIDEAN, [0.0], [0.0, 1.0])


def test_vector_rejects_non_finite():
    with pytest.raises(InputError):
        as_vector([0.0, math.nan])
    with pytest.raises(InputError):
        as_vector([math.inf])
    with pytest.raises(InputError):
        as_vector([1.0, 2.0], dim=3)


@settings(max_examples=1000, deadline=None)
@given(vec3, vec3, vec3, st.sampled_from([EUCLIDEAN, CHEBYSHEV]))
def test_metric_axioms(a, b, c, m):
    dab, dba = distance(m, a, b), distance(m, b, a)
    assert dab == dba
    assert (dab == 0.0) == (a == b)
    assert distance(m, a, c) <= dab + distance(m, b, c) + 1e-9 * (1 + dab)


def test_linear_examples():
    lam = linear_equiconnector()
    assert lam([0.0], [2.0], 0.5).tolist() == [1.0]
    assert lam([3.0], [3.0], 0.7).tolist() == [3.0]
    assert lam([1.0, 0.0], [0.0, 1.0], 0.25).tolist() == [0.75, 0.25]
    assert lam.lipschitz_in_t == 1.0 and lam.smooth_in_t


def _on_circle(theta):
    return [math.cos(theta), math.sin(theta)]


@settings(max_examples=1000, deadline=None)
@given(vec3, vec3, st.floats(0, 1))
def test_linear_axioms_exact(z1, z2, t):
    lam = linear_equiconnector()
    assert lam(z1, z2, 0.0).tolist() == z1
    assert lam(z1, z2, 1.0).tolist() == z2
    assert lam(z1, z1, t).tolist() == z1


@settings(max_examples=1000, deadline=None)
@given(vec3, vec3, st.floats(0, 1), st.floats(0, 1))
def test_linear_lipschitz_in_t(z1, z2, t, s):
    lam = linear_equiconnector()
    lhs = np.linalg.norm(lam(z1, z2, t) - lam(z1, z2, s))
    rhs = lam.lipschitz_in_t * np.linalg.norm(np.subtract(z1, z2)) * abs(t - s)
    assert lhs <= rhs * (1 + 1e-9) + 1e-9


@settings(max_examples=1000, deadline=None)
@given(st.floats(-3.1, 3.1), st.floats(-3.1, 3.1), st.floats(0, 1), st.floats(0, 1))
def test_circle_axioms_and_lipschitz(a, b, t, s):
    lam = circle_equiconnector()
    z1, z2 = np.array(_on_circle(a)), np.array(_on_circle(b))
    assert np.array_equal(lam(z1, z2, 0.0), z1)
    assert np.array_equal(lam(z1, z2, 1.0), z2)
    assert np.array_equal(lam(z1, z1, t), z1)
    if lam.valid_pair(z1, z2):
        out = lam(z1, z2, t)
        assert abs(np.linalg.norm(out) - 1.0) < 1e-12
        lhs = np.linalg.norm(out - lam(z1, z2, s))
        rhs = lam.lipschitz_in_t * np.linalg.norm(z1 - z2) * abs(t - s)
        assert lhs <= rhs * (1 + 1e-9) + 1e-12


def test_circle_midpoint_and_antipode_tie_break():
    lam = circle_equiconnector()
    mid = lam(_on_circle(0.0), _on_circle(math.pi / 2), 0.5)
    assert np.allclose(mid, _on_circle(math.pi / 4))
    # antipodes: counter-clockwise arc, and flagged outside the valid domain
    z1, z2 = np.array([1.0, 0.0]), np.array([-1.0, 0.0])
    assert np.allclose(lam(z1, z2, 0.5), [0.0, 1.0])
    assert not lam.valid_pair(z1, z2)


def test_registry_instances():
    assert set(EQUICONNECTORS) == {"linear", "circle"}


def test_box_grid_and_contains():
    b = Box((-1.0, 0.0), (1.0, 2.0))
    g = b.grid(3)
    assert g.shape == (9, 2)
    assert all(b.contains(p) for p in g)
    assert not b.contains([1.5, 0.0])
    with pytest.raises(InputError):
        Box((1.0,), (1.0,))
