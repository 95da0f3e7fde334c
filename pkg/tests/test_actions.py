import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hornlab.actions import (
    Axis,
    EuclideanAction,
    HornAction,
    Isometry,
    MobiusAction,
    PERIODIC,
    axis,
    classify,
    displacement,
    displacement_growth,
    divergence_profile,
    identity,
    isometry_from_json,
    isometry_to_json,
    properness_probe,
    random_point,
    translation_length,
)
from hornlab.errors import BasinError
from hornlab.geometry import (
    Euclidean,
    Horn,
    HornPoint,
    HyperbolicPlane,
    SpaceSpec,
    chart_vector,
    distance,
    make_point,
    metric_tensor,
    points_equal,
)
from hornlab.paths import DiscretePath, equivariant_seed

HORN = SpaceSpec((Horn(),))
HYP = SpaceSpec((HyperbolicPlane(),))
EU2 = SpaceSpec((Euclidean(2),))


def z4() -> Isometry:
    return Isometry(HYP, (MobiusAction(((2.0, 0.0), (0.0, 0.5))),))


def golden() -> Isometry:
    return Isometry(HYP, (MobiusAction(((5.0, 3.0), (3.0, 2.0))),))


# ---------------------------------------------------------------------------
# group structure


def test_compose_inverse_roundtrip():
    space = SpaceSpec((Horn(), HyperbolicPlane(), Euclidean(2)))
    g = Isometry(space, (
        HornAction(a=0.7, reflect=True),
        MobiusAction(((1.0, 1.0), (0.5, 1.0))),
        EuclideanAction([[0.0, -1.0], [1.0, 0.0]], [0.3, -0.2]),
    ))
    rng = np.random.default_rng(0)
    p = random_point(space, rng)
    q = g.inverse().apply(g.apply(p))
    assert np.allclose(chart_vector(space, q), chart_vector(space, p), atol=1e-12)
    e = g.compose(g.inverse())
    assert np.allclose(chart_vector(space, e.apply(p)), chart_vector(space, p), atol=1e-12)


def test_permutation_action():
    space = SpaceSpec((Horn(), Horn()))
    swap = Isometry(space, (HornAction(), HornAction()), permutation=(1, 0))
    p = make_point(space, [(0.1, 0.5), (0.9, 1.5)])
    q = swap.apply(p)
    assert q.blocks[0] == HornPoint(0.9, 1.5)
    assert q.blocks[1] == HornPoint(0.1, 0.5)
    # swap composed with itself is the identity
    p2 = swap.compose(swap).apply(p)
    assert points_equal(p2, p)
    with pytest.raises(ValueError):
        Isometry(SpaceSpec((Horn(), HyperbolicPlane())),
                 (HornAction(), MobiusAction(((1, 0), (0, 1)))), permutation=(1, 0))


def test_permutation_composition_law():
    space = SpaceSpec((Horn(), Horn(), Horn()))
    acts = lambda a: tuple(HornAction(a=a + i) for i in range(3))
    g = Isometry(space, acts(0.1), permutation=(1, 2, 0))
    h = Isometry(space, acts(-0.4), permutation=(2, 0, 1))
    rng = np.random.default_rng(5)
    p = random_point(space, rng)
    lhs = h.compose(g).apply(p)
    rhs = h.apply(g.apply(p))
    assert np.allclose(chart_vector(space, lhs), chart_vector(space, rhs), atol=1e-12)


@settings(max_examples=40, deadline=None)
@given(st.lists(st.floats(-2, 2), min_size=8, max_size=8))
def test_mobius_group_laws(vals):
    m1 = np.array(vals[:4]).reshape(2, 2)
    m2 = np.array(vals[4:]).reshape(2, 2)
    for m in (m1, m2):
        if abs(m[0, 0] * m[1, 1] - m[0, 1] * m[1, 0]) < 0.1:
            return
        if m[0, 0] * m[1, 1] - m[0, 1] * m[1, 0] < 0:
            return
    a = MobiusAction(m1)
    b = MobiusAction(m2)
    z = (0.3, 1.7)
    lhs = a.compose(b).apply_block(z)
    rhs = a.apply_block(b.apply_block(z))
    assert lhs == pytest.approx(rhs, abs=1e-9)
    back = a.inverse().apply_block(a.apply_block(z))
    assert back == pytest.approx(z, abs=1e-9)


def test_metric_preservation_validation():
    from hornlab.geometry import PerturbedHorn

    # rotating the Euclidean block breaks the b3 cross term
    space = SpaceSpec((PerturbedHorn(B=1.0, b3=0.4), Euclidean(2)))
    rot = EuclideanAction([[0.0, -1.0], [1.0, 0.0]], [0.0, 0.0])
    with pytest.raises(ValueError):
        Isometry(space, (HornAction(a=1.0), rot))
    # translations leave the cross term alone
    Isometry(space, (HornAction(a=1.0), EuclideanAction(np.eye(2), [1.0, 2.0])))


def test_pullback_metric_invariance_fd():
    space = SpaceSpec((Horn(), HyperbolicPlane()))
    g = Isometry(space, (
        HornAction(a=0.5),
        MobiusAction(((2.0, 1.0), (1.0, 1.0))),
    ))
    rng = np.random.default_rng(3)
    h = 1e-6
    for _ in range(5):
        p = random_point(space, rng)
        x = chart_vector(space, p)
        gp = metric_tensor(space, p)
        gq = metric_tensor(space, g.apply(p))
        d = space.dim
        J = np.empty((d, d))
        from hornlab.geometry import point_from_chart

        for k in range(d):
            e = np.zeros(d)
            e[k] = h
            plus = chart_vector(space, g.apply(point_from_chart(space, x + e)))
            minus = chart_vector(space, g.apply(point_from_chart(space, x - e)))
            J[:, k] = (plus - minus) / (2 * h)
        pullback = J.T @ gq @ J
        assert np.allclose(pullback, gp, atol=1e-6 * np.max(np.abs(gp)) + 1e-9)


def test_boundary_maps_to_boundary():
    g = Isometry(HORN, (HornAction(a=2.0),))
    b = make_point(HORN, [None])
    assert g.apply(b).stratum() == frozenset({0})


def test_isometry_preserves_distances():
    space = SpaceSpec((Horn(), HyperbolicPlane()))
    g = Isometry(space, (
        HornAction(a=-0.3, reflect=True),
        MobiusAction(((1.2, 0.3), (0.1, 0.9))),
    ))
    rng = np.random.default_rng(8)
    for _ in range(500):
        p = random_point(space, rng)
        q = random_point(space, rng)
        d1 = distance(space, p, q)
        d2 = distance(space, g.apply(p), g.apply(q))
        assert abs(d1 - d2) <= 1e-8 * (1 + d1)


def test_isometry_json_roundtrip():
    space = SpaceSpec((Horn(), HyperbolicPlane(), Euclidean(2)))
    g = Isometry(space, (
        HornAction(a=0.7, reflect=True),
        MobiusAction(((2.0, 0.0), (0.0, 0.5))),
        EuclideanAction([[0.0, -1.0], [1.0, 0.0]], [0.3, -0.2]),
    ))
    doc = isometry_to_json(g)
    assert doc["factor_actions"][0] == {"kind": "horn_reflect", "a": 0.7}
    assert doc["factor_actions"][1]["kind"] == "mobius"
    assert doc["permutation"] == [0, 1, 2]
    back = isometry_from_json(space, doc)
    rng = np.random.default_rng(1)
    p = random_point(space, rng)
    assert np.allclose(
        chart_vector(space, back.apply(p)), chart_vector(space, g.apply(p)), atol=1e-12
    )


# ---------------------------------------------------------------------------
# displacement and translation length


def test_displacement_examples():
    tr = Isometry(EU2, (EuclideanAction(np.eye(2), [3.0, 4.0]),))
    assert displacement(tr, make_point(EU2, [(7.0, -2.0)])) == pytest.approx(5.0)
    d = displacement(Isometry(HORN, (HornAction(a=1.0),)), make_point(HORN, [(0.0, 0.1)]))
    assert 0.0 < d <= 1e-3  # bounded by the constant-level arc xi^3 |a|
    assert displacement(z4(), make_point(HYP, [(0.0, 1.0)])) == pytest.approx(math.log(4.0))


def test_translation_length_fast_cases():
    rot = Isometry(EU2, (EuclideanAction([[0.0, -1.0], [1.0, 0.0]], [0.0, 0.0]),))
    res = translation_length(rot)
    assert res.status == "ok" and res.attained and res.L_estimate < 1e-6
    res4 = translation_length(z4())
    assert res4.attained and res4.L_estimate == pytest.approx(math.log(4.0), abs=1e-6)
    parab = Isometry(HYP, (MobiusAction(((1.0, 1.0), (0.0, 1.0))),))
    rp = translation_length(parab)
    assert not rp.attained and rp.L_estimate < 1e-6 and rp.witness.unbounded


def test_conjugation_invariance():
    h = Isometry(HYP, (MobiusAction(((1.0, 0.7), (0.2, 1.1))),))
    g = z4()
    conj = h.compose(g).compose(h.inverse())
    r1 = translation_length(g)
    r2 = translation_length(conj)
    assert abs(r1.L_estimate - r2.L_estimate) <= 1e-6
    rng = np.random.default_rng(17)
    for _ in range(10):
        p = random_point(HYP, rng)
        d1 = displacement(g, p)
        d2 = displacement(conj, h.apply(p))
        assert abs(d1 - d2) <= 1e-9 * (1 + d1)


def test_identity_is_periodic():
    res = classify(identity(EU2))
    assert res.label == PERIODIC and res.L_estimate == 0.0


# ---------------------------------------------------------------------------
# axes


def make_z4_axis(n=16):
    psi = 2 * math.atan(math.exp(-0.5))
    w = make_point(HYP, [(math.cos(psi), math.sin(psi))])
    return axis(z4(), equivariant_seed(HYP, z4(), w, n))


def test_axis_period_and_uniqueness_seed():
    ax = make_z4_axis()
    assert ax.period_length == pytest.approx(math.log(4.0), abs=1e-4)
    for pt in ax.path.nodes:
        x, y = pt.blocks[0]
        assert abs(x) / y <= 1e-6  # nodes on the imaginary axis


def test_axis_equivariant_invariance():
    # applying gamma to its own axis reproduces the axis one period on
    ax = make_z4_axis()
    g = z4()
    n = ax.path.n_segments
    for i, node in enumerate(ax.path.nodes[:-1]):
        shifted = g.apply(node)
        want = ax.point_at(ax.period_length * (1.0 + i / n))
        assert distance(HYP, shifted, want) <= 1e-6


def test_axis_on_axis_seed_immediate():
    seed = equivariant_seed(HYP, z4(), make_point(HYP, [(0.0, 1.0)]), 8)
    ax = axis(z4(), seed, tol=1e-10)
    assert ax.period_length == pytest.approx(math.log(4.0), abs=1e-9)


def test_axis_escape_raises():
    tr = Isometry(HORN, (HornAction(a=1.0),))
    nodes = tuple(make_point(HORN, [(i / 8, 0.1)]) for i in range(9))
    seed = DiscretePath(HORN, nodes, periodic_shift=tr)
    with pytest.raises(BasinError):
        axis(tr, seed, max_iter=120)


def test_axis_hartman_monotonicity():
    def dist_to_axis(pt):
        x, y = pt.blocks[0]
        return math.asinh(abs(x) / y)

    psi = 2 * math.atan(math.exp(-0.5))
    w = make_point(HYP, [(math.cos(psi), math.sin(psi))])
    ax = axis(z4(), equivariant_seed(HYP, z4(), w, 16), reference_distance=dist_to_axis)
    assert ax.hartman_ok is True


def test_product_axis_length():
    space = SpaceSpec((HyperbolicPlane(), Euclidean(1)))
    g = Isometry(space, (
        MobiusAction(((2.0, 0.0), (0.0, 0.5))),
        EuclideanAction([[1.0]], [3.0]),
    ))
    seed = equivariant_seed(space, g, make_point(space, [(0.0, 1.0), (0.0,)]), 16)
    ax = axis(g, seed)
    want = math.hypot(math.log(4.0), 3.0)
    assert ax.period_length == pytest.approx(want, abs=1e-6)


# ---------------------------------------------------------------------------
# displacement growth and divergence


def test_displacement_growth_oracle():
    ax = make_z4_axis()
    g = z4()
    grid = [0.0, 2.0, 3.0, 4.0, 5.0, 6.0]
    rep = displacement_growth(g, ax, grid)
    L = math.log(4.0)
    assert rep.values[0] == pytest.approx(L, abs=1e-6)
    for D, val in zip(grid[1:], rep.values[1:]):
        want = 2.0 * math.asinh(math.cosh(D) * math.sinh(L / 2.0))
        assert val == pytest.approx(want, abs=1e-6)
    assert rep.convex_ok and rep.increasing_ok


def test_divergence_same_axis_zero():
    ax = make_z4_axis()
    prof = divergence_profile(ax, ax, [1.0, 2.0, 3.0])
    assert prof.center_distance <= 1e-9
    assert all(m <= 1e-9 for m in prof.m_values)


def test_divergence_euclidean_lines():
    # two straight lines through the origin at an angle: m(R) grows linearly
    space = EU2
    tr1 = Isometry(space, (EuclideanAction(np.eye(2), [1.0, 0.0]),))
    c, s = math.cos(0.9), math.sin(0.9)
    tr2 = Isometry(space, (EuclideanAction(np.eye(2), [c, s]),))
    n1 = tuple(make_point(space, [(i / 8.0, 0.0)]) for i in range(9))
    n2 = tuple(make_point(space, [(i / 8.0 * c, i / 8.0 * s)]) for i in range(9))
    ax1 = Axis(DiscretePath(space, n1, periodic_shift=tr1), tr1, 1.0)
    ax2 = Axis(DiscretePath(space, n2, periodic_shift=tr2), tr2, 1.0)
    grid = [1.0, 2.0, 4.0, 8.0]
    prof = divergence_profile(ax1, ax2, grid)
    # exact oracle: min over |t| + |s| = R of the chord between the rays
    def oracle(R):
        best = math.inf
        for a in np.linspace(0.0, R, 4001):
            for st_, ss in ((1, 1), (1, -1), (-1, 1), (-1, -1)):
                t, s_par = st_ * (R - a), ss * a
                dx = t - s_par * c
                dy = -s_par * s
                best = min(best, math.hypot(dx, dy))
        return best

    for R, m in zip(grid, prof.m_values):
        assert m == pytest.approx(oracle(R), abs=2e-3)
    ratios = [m / R for m, R in zip(prof.m_values, grid)]
    assert max(ratios) - min(ratios) <= 0.05  # linear growth


def test_divergence_independent_pair():
    base = make_point(HYP, [(0.05, 1.0)])
    ax1 = axis(z4(), equivariant_seed(HYP, z4(), base, 16))
    ax2 = axis(golden(), equivariant_seed(HYP, golden(), base, 16))
    prof = divergence_profile(ax1, ax2, list(range(2, 11)))
    assert all(b > a for a, b in zip(prof.m_values[:-1], prof.m_values[1:]))
    assert prof.m_values[-1] > prof.m_values[0] + 1.0


# ---------------------------------------------------------------------------
# properness


def test_properness_independent_pair_bounded():
    rep = properness_probe([z4(), golden()], [2.0, 3.0, 4.0], 2500, seed=0)
    assert all(not e.unbounded_evidence for e in rep.entries)
    m4 = rep.entries[-1]
    assert m4.admissible_found and m4.radius < 16.0


def test_properness_single_translation_unbounded():
    tr5 = Isometry(EU2, (EuclideanAction(np.eye(2), [3.0, 4.0]),))
    rep = properness_probe([tr5], [5.0], 2500, seed=0)
    assert rep.entries[0].unbounded_evidence


def test_properness_single_hyperbolic_unbounded():
    rep = properness_probe([z4()], [2.0], 2500, seed=0)
    assert rep.entries[0].unbounded_evidence  # the whole axis is admissible
