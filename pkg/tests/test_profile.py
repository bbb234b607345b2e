import math

import numpy as np
import pytest

from heisbcp.dsl import parse_expr
from heisbcp.group import GroupPoint, PlanarVector, dilate, group_inv
from heisbcp.profile import (
    ZOO_NAMES,
    Disc,
    Polygon,
    Profile,
    ProfileError,
    ball_contains,
    phi_eval,
    phi_grad,
    profile_from_json,
    profile_to_json,
    sample_ball,
    sample_domain,
    support_radius,
    validate_profile,
    zoo_entry,
    zoo_profile,
)

SQUARE = Polygon(tuple(PlanarVector(x, y) for x, y in ((1, 1), (-1, 1), (-1, -1), (1, -1))))


def pv(x, y):
    return PlanarVector(x, y)


def test_support_radius_examples():
    assert support_radius(Disc(1.0), pv(0, 1)) == 1
    assert support_radius(SQUARE, pv(1, 0)) == pytest.approx(1, abs=1e-15)
    h = math.sqrt(2) / 2
    assert support_radius(SQUARE, pv(h, h)) == pytest.approx(math.sqrt(2), abs=1e-12)


def test_polygon_rejects_bad_shapes():
    with pytest.raises(ProfileError):
        Polygon(tuple(pv(x, y) for x, y in ((1, 0), (0, 1), (-1, 0))))
    with pytest.raises(ProfileError):
        Polygon(tuple(pv(x, y) for x, y in ((2, 0), (0, 1), (-1, 0), (0, -1))))


def test_phi_eval_examples():
    assert phi_eval(zoo_profile("koranyi"), pv(0, 0)) == 0.25
    r1 = 1 / math.sqrt(2)
    # r1 is rounded, so the radicand is a few ulps off zero
    assert abs(phi_eval(zoo_profile("d_eps", eps=1.0), pv(r1, 0))) <= 1e-8
    assert phi_eval(zoo_profile("phi1"), pv(0, 0)) == 1.25
    with pytest.raises(ProfileError):
        phi_eval(zoo_profile("koranyi"), pv(1.1, 0))


def test_phi1_exceptional_points():
    p = zoo_profile("phi1")
    assert phi_eval(p, pv(1.0, 0.0)) == 0.25
    assert phi_eval(p, pv(-1.0, 0.0)) == 0.25
    assert "5/4" in zoo_entry("phi1").note


def test_phi_grad_examples():
    g = phi_grad(zoo_profile("d_alpha", alpha=1.0), pv(0.6, 0))
    assert g.x == pytest.approx(-0.75, abs=1e-12) and g.y == 0
    g = phi_grad(zoo_profile("phi1"), pv(0.5, 0))
    assert (g.x, g.y) == (0, 0)
    g = phi_grad(zoo_profile("phi2"), pv(0, 0))
    assert (g.x, g.y) == (0, 0)


def test_ball_contains_examples():
    k = zoo_profile("koranyi")
    assert ball_contains(k, GroupPoint.of(0, 0, 0.25))
    assert not ball_contains(k, GroupPoint.of(0, 0, 0.26))
    assert ball_contains(k, GroupPoint.of(1, 0, 0))


def test_odd_radial_profile_rejected():
    with pytest.raises(ProfileError, match="not even"):
        Profile("odd", "radial", Disc(1.0), parse_expr("1 + s", "radial"))
    with pytest.raises(ProfileError, match="not even"):
        Profile("odd", "radial", Disc(1.0), parse_expr("0.25*sqrt(1-s^4)+0.3*s", "radial"))


def test_nonpositive_profile_rejected():
    with pytest.raises(ProfileError, match="positive"):
        Profile("neg", "general", Disc(1.0), parse_expr("x", "general"))


def test_radial_profile_needs_disc():
    with pytest.raises(ProfileError):
        Profile("sq", "radial", SQUARE, parse_expr("1", "radial"))


EXPECTED_FLAGS = {
    "koranyi": (False, True, True),
    "d_eps": (False, True, True),
    "d_alpha": (False, True, True),
    "d_inf": (True, True, True),
    "rho_inf": (True, True, True),
    "quasi": (False, True, False),
    "phi1": (True, True, True),
    "phi2": (True, True, True),
}


@pytest.mark.parametrize("name", ZOO_NAMES)
def test_validate_zoo(name):
    rep = validate_profile(zoo_profile(name), samples=3000, seed=1)
    assert (rep.lower_bound_ok, rep.concavity_ok, rep.ball_axiom_ok) == EXPECTED_FLAGS[name]
    for flag, ok in zip(("lower_bound", "concavity", "ball_axiom"), EXPECTED_FLAGS[name]):
        assert (flag in rep.witnesses) == (not ok)


def test_phi1_lower_bound_value():
    rep = validate_profile(zoo_profile("phi1"), samples=2000, seed=0)
    assert rep.lower_bound == 0.25 and rep.min_phi >= 0.25 - 1e-9
    assert rep.certified_by_concavity


def _box(rng, n):
    return rng.uniform([-1.1, -1.1, -1.4], [1.1, 1.1, 1.4], (n, 3))


@pytest.mark.parametrize("name", ZOO_NAMES)
def test_ball_symmetric(name):
    p = zoo_profile(name)
    rng = np.random.default_rng(4)
    Q = np.vstack([_box(rng, 5000), sample_ball(p, 5000, rng, rim=0.25)])
    for row in Q:
        q = GroupPoint.of(*row)
        assert ball_contains(p, q) == ball_contains(p, group_inv(q))


@pytest.mark.parametrize("name", ZOO_NAMES)
def test_ball_star_shaped(name):
    p = zoo_profile(name)
    rng = np.random.default_rng(8)
    for row in sample_ball(p, 1000, rng, rim=0.25):
        q = GroupPoint.of(*row)
        assert ball_contains(p, q)
        for t in rng.uniform(0, 1, 5):
            assert ball_contains(p, dilate(t, q))


def _boundary_points(p, angles=64):
    theta = 2 * np.pi * np.arange(angles) / angles
    r = p.domain.support_radii(theta)
    pts = np.column_stack([r * np.cos(theta), r * np.sin(theta)])
    pts[np.abs(pts) < 1e-12] = 0.0
    return pts


def _jumps(p):
    """Boundary points where |phi(tv) - phi(v)| does not shrink as t -> 1."""
    bad = []
    for x, y in _boundary_points(p):
        end = phi_eval(p, pv(x, y))
        gaps = [abs(phi_eval(p, pv(t * x, t * y)) - end) for t in (0.9, 0.99, 0.999)]
        if not (gaps[-1] <= 1e-9 or gaps[-1] <= 0.5 * gaps[0]):
            bad.append((round(x, 12), round(y, 12)))
    return bad


@pytest.mark.parametrize("name", ZOO_NAMES)
def test_radial_continuity(name):
    bad = _jumps(zoo_profile(name))
    if name in ("phi1", "phi2"):
        assert sorted(bad) == [(-1.0, 0.0), (1.0, 0.0)]
    else:
        assert bad == []


@pytest.mark.parametrize("name", ZOO_NAMES)
def test_grad_matches_finite_differences(name):
    p = zoo_profile(name)
    rng = np.random.default_rng(9)
    h = 1e-6
    for x, y in sample_domain(p.domain, 1000, rng, max_frac=0.9):
        if p.kind == "radial" and math.hypot(x, y) < 1e-3:
            continue
        g = phi_grad(p, pv(x, y))
        fx = (phi_eval(p, pv(x + h, y)) - phi_eval(p, pv(x - h, y))) / (2 * h)
        fy = (phi_eval(p, pv(x, y + h)) - phi_eval(p, pv(x, y - h))) / (2 * h)
        assert abs(g.x - fx) <= 1e-6 * (1 + abs(g.x))
        assert abs(g.y - fy) <= 1e-6 * (1 + abs(g.y))


@pytest.mark.parametrize("name", ZOO_NAMES)
def test_json_round_trip(name):
    p = zoo_profile(name)
    q = profile_from_json(profile_to_json(p))
    assert q == p
    assert profile_to_json(q) == profile_to_json(p)


def test_json_errors():
    with pytest.raises(ProfileError):
        profile_from_json({"name": "a", "kind": "radial", "phi": "1"})
    with pytest.raises(ProfileError):
        profile_from_json({"name": "a", "kind": "radial", "domain": {"type": "blob"}, "phi": "1"})


def test_unknown_zoo_name():
    with pytest.raises(ProfileError):
        zoo_profile("nope")
