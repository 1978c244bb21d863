import numpy as np
import pytest

from sepdiag.errors import BuildError, NotApplicable, UnresolvablePointError
from sepdiag.extension import (
    REQUIRE_STABILIZATION,
    TRUNCATE,
    ExtensionEvaluator,
    build_cc,
    build_cd,
    build_cl,
    cd_telescoping_eval,
    overlap_identity_check,
)
from sepdiag.sandwich import cc_system
from sepdiag.spaces import Box, circle_equiconnector
from sepdiag.witnesses import ramp_witnesses, template_witnesses

SGN = ramp_witnesses("sgn")


def clamp(v, lo, hi):
    return max(lo, min(hi, v))


def cc_oracle(x, y, n_max=64):
    """Hand scan over the sgn ramps: first n with d_n > 1/(n+1)."""
    g = lambda k, t: clamp(k * t, -1.0, 1.0)  # noqa: E731
    d = abs(g(1, x) - g(1, y))
    for n in range(1, n_max + 1):
        d = max(d, abs(g(n + 1, x) - g(n + 1, y)))
        if d > 1.0 / (n + 1):
            phi = clamp((1.0 / n - d) / (1.0 / n - 1.0 / (n + 1)), 0.0, 1.0)
            return n, phi, (1 - phi) * g(n, x) + phi * g(n + 1, x)
    return None, 1.0, float(np.sign(x))


def test_sgn_cc_example():
    e = build_cc(SGN)
    out = e.evaluate([0.5], [0.6])
    n, phi, val = cc_oracle(0.5, 0.6)
    assert (out.piece, n) == (10, 10)
    assert out.value.tolist() == [1.0] == [val]
    assert out.phi_used == pytest.approx(phi, abs=1e-15) and abs(phi) <= 1e-12
    assert out.depth_cost == 10


def test_sgn_cc_matches_oracle_on_random_pairs():
    e = build_cc(SGN)
    rng = np.random.default_rng(0)
    for _ in range(2000):
        x = rng.uniform(-1, 1)
        y = x + rng.choice([-1, 1]) * 10.0 ** rng.uniform(-5, 0)
        n, phi, val = cc_oracle(x, y)
        out = e.evaluate([x], [y])
        if n is None:
            assert out.residual
        else:
            assert out.piece == n
            assert out.value[0] == pytest.approx(val, abs=1e-15)


def test_zero_row_and_column():
    e = build_cc(SGN)
    for y in np.linspace(-1, 1, 41):
        assert e([0.0], [y]).tolist() == [0.0]


def test_constant_witnesses_give_constant_rows():
    e = build_cc(ramp_witnesses("const_c", 0.25))
    rng = np.random.default_rng(1)
    for x, y in rng.uniform(-1, 1, (200, 2)):
        assert e([x], [y]).tolist() == [0.25]


@pytest.mark.parametrize("builder", [build_cc, build_cl, build_cd])
def test_diagonal_is_exact_residual(builder):
    e = builder(SGN)
    for x in np.linspace(-1, 1, 201):
        out = e.evaluate([x], [x])
        assert out.residual and out.depth_cost == e.n_max
        assert out.value.tolist() == [float(np.sign(x))]


def test_piece_resolution_invariant():
    for e in (build_cc(SGN), build_cl(SGN), build_cd(SGN)):
        rng = np.random.default_rng(2)
        for _ in range(1000):
            x = rng.uniform(-1, 1)
            y = x + rng.choice([-1, 1]) * 10.0 ** rng.uniform(-8, 0)
            out = e.evaluate([x], [y])
            if out.residual:
                assert e.system.in_F(e.n_max, [x], [y])
                continue
            n = out.piece
            assert e.system.in_F(n - 1, [x], [y]) and not e.system.in_F(n, [x], [y])


def test_overlap_identity_on_resolved_points():
    e = build_cc(SGN)
    rng = np.random.default_rng(3)
    checked = 0
    while checked < 1000:
        x = rng.uniform(-1, 1)
        y = x + rng.choice([-1, 1]) * 10.0 ** rng.uniform(-5, 0)
        try:
            d = overlap_identity_check(e, [x], [y])
        except NotApplicable:
            continue
        assert d <= 1e-12
        checked += 1


def test_overlap_identity_reductions():
    e = build_cc(SGN)
    lam = e.lam
    x, y = [0.5], [0.6]
    n = e.evaluate(x, y).piece
    # phi_n = 1 on F_n minus F_{n+1}: identity reduces to the outer arc
    x2, y2 = [0.3], [0.3 + 0.02]
    p = e.evaluate(x2, y2).piece
    s = e.system
    if s.phi(p - 1, x2, y2) == 1.0:
        rhs = lam(e.g(p, x2), e.g(p + 1, x2), s.phi(p, x2, y2))
        assert np.allclose(e(x2, y2), rhs, atol=1e-15)
    # phi_{n+1} = 0 off G_{n+1}: identity reduces to the inner arc
    assert s.phi(n + 1, x, y) == 0.0
    inner = lam(e.g(n, x), e.g(n + 1, x), s.phi(n, x, y))
    assert np.array_equal(e(x, y), inner)


def test_overlap_not_applicable_at_residual():
    e = build_cc(SGN)
    with pytest.raises(NotApplicable):
        overlap_identity_check(e, [0.2], [0.2])


def test_cd_telescoping_agrees_with_direct_form():
    e = build_cd(SGN)
    rng = np.random.default_rng(4)
    checked = 0
    while checked < 1000:
        x = rng.uniform(-1, 1)
        n = int(rng.integers(1, 8))
        y = x + rng.choice([-1, 1]) * e.system.gamma(n, [x]) * rng.uniform(0, 1.2)
        p, _ = e.resolve([x], [y])
        if p is None:
            continue
        direct = e([x], [y])
        for m in {max(1, p - 1), p}:
            assert np.max(np.abs(cd_telescoping_eval(e, [x], [y], m) - direct)) <= 1e-12
        checked += 1


def test_cd_telescoping_reductions():
    e = build_cd(SGN)
    s = e.system
    x = [0.3]
    g2, g3 = s.gamma(2, x), s.gamma(3, x)
    # phi_2 = 0 beyond gamma_2: two-term convex combination at level 1
    y = [0.3 + (s.gamma(1, x) + g2) / 2]
    a = s.phi(1, x, y)
    two = (1 - a) * e.g(1, x) + a * e.g(2, x)
    assert np.allclose(cd_telescoping_eval(e, x, y, 1), two, atol=1e-15)
    # phi_1 = 1 inside gamma_2: reduces to the next arc
    y = [0.3 + (g2 + g3) / 2]
    b = s.phi(2, x, y)
    assert s.phi(1, x, y) == 1.0
    nxt = (1 - b) * e.g(2, x) + b * e.g(3, x)
    assert np.allclose(cd_telescoping_eval(e, x, y, 1), nxt, atol=1e-15)


def test_piece_boundary_continuity():
    e = build_cc(SGN)
    x = 0.2
    for n in (2, 3, 5, 8):
        # boundary of F_n along y: d_n = 1/(n+1)
        ts = np.linspace(0, 0.5, 20001)
        pieces = [e.evaluate([x], [x + t]).piece for t in ts]
        for i in range(1, len(ts)):
            if pieces[i] != pieces[i - 1]:
                a, b = e([x], [x + ts[i - 1]]), e([x], [x + ts[i]])
                assert np.max(np.abs(a - b)) <= 5e-3


def test_gates():
    with pytest.raises(BuildError, match="stable witness required"):
        build_cl(ramp_witnesses("zero"))
    unindexed = template_witnesses("t", "clamp(n * x[0], -1, 1)", lipschitz=float, stable=True)
    with pytest.raises(BuildError, match="stable witness required"):
        build_cl(unindexed)
    with pytest.raises(BuildError, match="stable witness required"):
        build_cd(unindexed)
    nolip = template_witnesses(
        "t", "clamp(n * x[0], -1, 1)", stable=True, stabilization_index=SGN.stabilization_index
    )
    with pytest.raises(BuildError, match="Lipschitz"):
        build_cl(nolip)


def test_unresolvable_residual():
    w = template_witnesses("t", "clamp(n * x[0], -1, 1)", stable=True)
    e = ExtensionEvaluator(w, build_cc(SGN).lam, cc_system(w), "CC", 64, REQUIRE_STABILIZATION)
    with pytest.raises(UnresolvablePointError):
        e([0.4], [0.4])


def test_truncation_policy_for_unstable_target():
    e = build_cc(ramp_witnesses("zero"))
    assert e.residual_policy == TRUNCATE
    worst = max(abs(e([x], [x])[0]) for x in np.linspace(-1, 1, 1000))
    assert worst <= 1.0 / 64


def test_cl_constant_witnesses():
    e = build_cl(ramp_witnesses("const_c", -0.5))
    rng = np.random.default_rng(5)
    for x, y in rng.uniform(-1, 1, (100, 2)):
        assert e([x], [y]).tolist() == [-0.5]


def test_circle_equiconnector_build():
    w = ramp_witnesses("circle_sgn")
    e = build_cc(w, circle_equiconnector())
    rng = np.random.default_rng(6)
    for _ in range(300):
        x = rng.uniform(-1, 1)
        y = x + rng.choice([-1, 1]) * 10.0 ** rng.uniform(-4, 0)
        v = e([x], [y])
        assert abs(np.linalg.norm(v) - 1.0) <= 1e-12
    for x in np.linspace(-1, 1, 41):
        assert np.array_equal(e([x], [x]), w.limit([x]))
    ecl = build_cl(w, circle_equiconnector())
    assert ecl.build_report["gates"]["lambda_lipschitz_in_t"] == pytest.approx(np.pi / 2)


def test_build_report_contents():
    e = build_cl(SGN, box=Box.cube(1))
    rep = e.build_report
    assert rep["containment_certificate"]["kind"] == "analytic"
    assert rep["containment_certificate"]["ok"]
    assert rep["gauge"]["first_levels"][0] == pytest.approx(0.45)
    assert build_cc(SGN).build_report["n_max"] == 64
