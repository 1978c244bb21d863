import json
import math

import numpy as np
import pytest

from sepdiag.errors import InputError, NotApplicable
from sepdiag.extension import build_cc, build_cd, build_cl
from sepdiag.verify import (
    ProbeReport,
    cl_section_bound,
    classic,
    composition_continuity_probe,
    diagonal_check,
    frechet_fd_check,
    glue_bound,
    joint_oscillation,
    lipschitz_estimate,
    pointwise_lipschitz_at,
    pointwise_lipschitz_profile,
    section_oscillation,
    sigma_decompose,
)
from sepdiag.witnesses import ramp_witnesses

SGN = ramp_witnesses("sgn")
GRID = np.linspace(-1, 1, 1000)


def test_probe_report_invariants():
    r = ProbeReport("k", 3, 0.5, 0.5, {"a": math.inf}, [{"p": i} for i in range(20)])
    assert r.passed and len(r.witnesses) == 10
    d = r.to_dict()
    assert set(d) == {"kind", "params", "samples", "worst_case", "threshold", "pass", "witnesses"}
    json.dumps(d, allow_nan=False)
    assert not ProbeReport("k", 1, 1e-7, 0.0).passed
    assert ProbeReport("k", 1, 0.0, 0.0).passed


def test_diagonal_check_examples():
    assert diagonal_check(build_cc(SGN), GRID).worst_case == 0.0
    assert diagonal_check(build_cc(ramp_witnesses("const_c", 2.0)), GRID).worst_case == 0.0
    r = diagonal_check(build_cc(ramp_witnesses("zero")), GRID, tol=1.0 / 64)
    assert r.passed and 0 < r.worst_case <= 1.0 / 64


def test_section_oscillation_examples():
    const = build_cc(ramp_witnesses("const_c", 1.0))
    r = section_oscillation(const, "x", [0.3], [0.1])
    assert r.passed and r.params["oscillations"] == [0.0] * 8
    r = section_oscillation(build_cc(SGN), "x", [0.0], [0.4])
    assert r.params["oscillations"] == [0.0] * 8
    r = section_oscillation(classic, "y", [0.3], [0.0])
    osc = r.params["oscillations"]
    assert all(b < a for a, b in zip(osc, osc[1:]))
    # closed form: |d/dx 2xy/(x^2+y^2)| = 2/0.3 at x = 0, so oscillation ~ 2r * 2/0.3
    assert osc[-1] == pytest.approx(2 * 2 ** -10 * 2 / 0.3, rel=1e-3)
    with pytest.raises(InputError):
        section_oscillation(classic, "x", [0.0], [0.0], radii=[0.1, 0.2])


def test_joint_versus_separate_for_classic():
    j = joint_oscillation(classic, [0.0], [0.0])
    assert j.worst_case >= 1.9 and not j.passed
    assert section_oscillation(classic, "x", [0.0], [0.0]).passed
    assert section_oscillation(classic, "y", [0.0], [0.0]).passed


def test_lipschitz_estimate_examples():
    pairs = [([0.0], [1.0]), ([0.2], [0.25]), ([0.5], [0.5])]
    est = lipschitz_estimate(lambda t: 3 * t, pairs)
    assert est.value == pytest.approx(3.0) and est.pairs_used == 2 and est.skipped == 1
    assert lipschitz_estimate(lambda t: 7.0, pairs).value == 0.0
    with pytest.raises(InputError):
        lipschitz_estimate(lambda t: t, [([1.0], [1.0])])


def test_pointwise_lipschitz_examples():
    radii = [2.0 ** -k for k in range(1, 20)]
    assert pointwise_lipschitz_at(lambda x, y: abs(y[0]), [0.0], radii) == pytest.approx(1.0)
    prof = pointwise_lipschitz_profile(lambda x, y: math.sqrt(abs(y[0] - x[0])), [0.3], radii)
    for r, v in zip(radii, prof):
        assert v == pytest.approx(r ** -0.5, rel=1e-9)


def test_glue_bound_examples():
    assert glue_bound(1, 2, 4, 2) == 2
    assert glue_bound(0, 0, 3, 1) == 3
    with pytest.raises(InputError):
        glue_bound(1, 1, 1, 0)
    with pytest.raises(InputError):
        glue_bound(-1, 1, 1, 1)


def cl_bound_oracle(x0):
    """Gluing recursion written out for the derived sgn gauge."""
    c = [None]
    for n in range(1, 70):
        cap = 1.0 / (n * (n + 1))
        if n > 1:
            cap = min(cap, c[-1] / 16)
        c.append(0.9 * cap)
    N = SGN.stabilization_index([x0])
    n0 = max(1, min(N - 1, 64))
    g = [None] + [clamp(k * x0) for k in range(1, n0 + 2)]
    vals = g[1:] + [float(np.sign(x0))]
    C = max(vals) - min(vals)
    lip = lambda n: abs(g[n + 1] - g[n]) * 8 / (7 * c[n])  # noqa: E731
    B = lip(1)
    for n in range(1, n0):
        B = max(B, lip(n + 1), C / (c[n] / 16))
    return max(B, C / (c[n0] / 16))


def clamp(v):
    return max(-1.0, min(1.0, v))


@pytest.mark.parametrize("x0", [0.5, 0.3, 0.1, 0.01, -0.7, 0.0])
def test_cl_section_bound_matches_recursion_and_dominates(x0):
    e = build_cl(SGN)
    bound = cl_section_bound(e, [x0])
    assert bound == pytest.approx(cl_bound_oracle(x0), rel=1e-12)
    rng = np.random.default_rng(0)
    a = x0 + rng.normal(scale=10.0 ** rng.uniform(-5, 0, 400))
    b = a + rng.normal(scale=10.0 ** rng.uniform(-7, -2, 400))
    est = lipschitz_estimate(lambda y: e([x0], y), zip(a, b))
    assert est.value <= bound
    assert pointwise_lipschitz_at(e, [x0], [2.0 ** -k for k in range(1, 40)]) <= bound


def test_cl_section_bound_only_for_cl():
    with pytest.raises(NotApplicable):
        cl_section_bound(build_cc(SGN), [0.1])


def test_composition_probe_examples():
    g = lambda x: np.array([math.sin(3 * x[0])])  # noqa: E731
    r = composition_continuity_probe(lambda x, y: y, g, [[0.2]], tol=1.0)
    # h = g, so the final oscillation is the sine's modulus on the smallest ball
    expected = abs(math.sin(3 * (0.2 + 2 ** -10)) - math.sin(3 * (0.2 - 2 ** -10)))
    assert r.worst_case == pytest.approx(expected, rel=1e-6)
    r = composition_continuity_probe(classic, lambda x: x, [[0.0]])
    assert not r.passed and r.worst_case == pytest.approx(1.0)
    e = build_cl(SGN)
    r = composition_continuity_probe(e, lambda x: x, [[0.5], [-0.4]], certificate=(cl_section_bound(e, [0.5]), 1e-3))
    assert r.passed


def test_sigma_constant_map_is_level_one():
    dec = sigma_decompose(lambda x, y: np.array([2.0]), lambda x: x, np.linspace(-1, 1, 21), n_levels=8)
    assert dec.covered and dec.closure_ok
    assert dec.first_level == [1] * 21


def test_sigma_square_map_matches_closed_form():
    pts = np.linspace(-1, 1, 41)
    dec = sigma_decompose(lambda x, y: np.array([y[0] ** 2]), lambda x: x, pts, n_levels=8)

    def oracle(x):
        # |y^2 - x^2| <= n|y - x| for sampled offsets d < 1/n iff 2|x| + max d <= n,
        # the largest sampled offset below 1/n being (7/8)/n
        for j in range(9):
            n = 2 ** j
            if 2 * abs(x) + 0.875 / n <= n:
                return n
        return None

    assert dec.first_level == [oracle(x) for x in pts]
    assert dec.closure_ok and dec.covered


def test_sigma_cl_sgn_covers_with_vanishing_level_moduli():
    e = build_cl(SGN)
    dec = sigma_decompose(e, lambda x: x, np.linspace(-1, 1, 61), n_levels=64)
    assert dec.covered and dec.closure_ok
    # sgn restricted to a level is locally constant away from 0: only pairs
    # straddling 0 contribute
    for n, worst in dec.restriction_moduli.items():
        assert worst in (0.0, 1.0)


def test_frechet_affine_section_exact():
    r = frechet_fd_check(lambda y: 3.0 * y + 1.0, [0.2], reference=lambda y: [[3.0]])
    assert r.passed
    assert abs(r.params["T"][0][0] - 3.0) <= 1e-9
    r2 = frechet_fd_check(lambda y: np.array([y[0] - 2 * y[1]]), [0.1, 0.2])
    assert r2.passed and r2.params["linearity_error"] <= 1e-9


def test_frechet_abs_fails_with_slope_report():
    r = frechet_fd_check(lambda y: abs(y[0]), [0.0])
    assert not r.passed
    assert r.params["observed_order"][0] == pytest.approx(0.0, abs=1e-9) or r.params["scores"]["order"] > 1


@pytest.mark.parametrize("dim", [1, 2])
def test_frechet_cd_sections(dim):
    w = ramp_witnesses("sgn")
    from sepdiag.spaces import Box

    e = build_cd(w, box=Box.cube(dim))
    rng = np.random.default_rng(7)
    done = 0
    while done < 20:
        x0 = rng.uniform(-0.8, 0.8, dim)
        n = int(rng.integers(1, 5))
        g0, g1 = e.system.gamma(n, x0), e.system.gamma(n + 1, x0)
        s = g1 + (g0 - g1) * rng.uniform(0.1, 0.9)
        u = rng.normal(size=dim)
        y0 = x0 + s * u / np.linalg.norm(u)
        r = frechet_fd_check(lambda y: e(x0, y), y0, reference=lambda y: e.section_gradient(x0, y))
        assert r.passed, r.params
        done += 1
