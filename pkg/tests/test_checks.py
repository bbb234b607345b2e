import math

import numpy as np
import pytest

from heisbcp import checks
from heisbcp.checks import (
    BCP,
    INCONCLUSIVE,
    NONBCP,
    CheckReport,
    CheckUsageError,
    StripWitness,
    SufficientParams,
    VerdictConflictError,
    Witness,
    cone_margin,
    cone_margins,
    gradients,
    hessian_at_origin,
    hessian_check,
    necessary_gradient_check,
    origin_regularity_check,
    radial_monotone_check,
    rotational_check,
    run_all,
    sample_grid,
    strip_report,
    strip_witness_check,
    sufficient_check,
    verdict_aggregate,
)
from heisbcp.dsl import parse_expr
from heisbcp.group import PlanarVector
from heisbcp.profile import ZOO_NAMES, Disc, Profile, phi_grad, radial_derivative, sample_domain, zoo_profile


def radial(name, src):
    return Profile(name, "radial", Disc(1.0), parse_expr(src, "radial"))


def general(name, src):
    return Profile(name, "general", Disc(1.0), parse_expr(src, "general"))


# -- cone margin ---------------------------------------------------------------


def test_cone_margin_d_alpha_example():
    m = cone_margin(zoo_profile("d_alpha", alpha=1.0), PlanarVector(0.6, 0), math.pi / 4)
    assert m == pytest.approx(-0.75 * math.sqrt(2) / 2 / 0.6, abs=1e-12)
    assert m == pytest.approx(-0.8839, abs=1e-4)


def test_cone_margin_zero_gradient():
    assert cone_margin(zoo_profile("d_inf"), PlanarVector(0.3, 0.1), math.pi / 4) == 0.0
    assert cone_margin(zoo_profile("phi1"), PlanarVector(0.5, 0), math.pi / 8) == 0.0


def test_cone_margin_inside_cone():
    # gradient along v itself: the best direction is g, so the margin is |g|/|v|
    p = general("tilt", "1 + 0.1*x")
    assert cone_margin(p, PlanarVector(0.5, 0), math.pi / 8) == pytest.approx(0.2, abs=1e-15)


def test_cone_margin_rejects_bad_input():
    p = zoo_profile("koranyi")
    with pytest.raises(CheckUsageError):
        cone_margin(p, PlanarVector(0.5, 0), math.pi / 2)
    with pytest.raises(CheckUsageError):
        cone_margin(p, PlanarVector(0, 0), 0.3)


def _brute_margin(v, g, alpha, n=10_000):
    base = math.atan2(v[1], v[0])
    ang = base + np.linspace(-alpha, alpha, n)
    return float(np.max(g[0] * np.cos(ang) + g[1] * np.sin(ang))) / math.hypot(*v)


def _triples(count, seed):
    rng = np.random.default_rng(seed)
    names = rng.choice(ZOO_NAMES, count)
    out = []
    for name in names:
        p = zoo_profile(str(name))
        v = sample_domain(p.domain, 1, rng, max_frac=0.9)[0]
        if math.hypot(*v) < 1e-6:
            continue
        out.append((p, v, float(rng.uniform(0.01, math.pi / 2 - 0.01))))
    return out


def test_cone_margin_matches_grid_max():
    worst = 0.0
    for p, v, alpha in _triples(1000, 0):
        g = phi_grad(p, PlanarVector(*v))
        closed = cone_margin(p, PlanarVector(*v), alpha)
        worst = max(worst, abs(closed - _brute_margin(v, (g.x, g.y), alpha)))
    assert worst <= 1e-9


def test_cone_margin_monotone_in_alpha():
    rng = np.random.default_rng(1)
    for p, v, alpha in _triples(300, 1):
        a2 = float(rng.uniform(alpha, math.pi / 2 - 1e-3))
        assert cone_margin(p, PlanarVector(*v), alpha) <= cone_margin(p, PlanarVector(*v), a2) + 1e-15


def test_cone_margin_radial_consistency():
    for name in ("koranyi", "d_eps", "d_alpha", "quasi"):
        p = zoo_profile(name)
        rng = np.random.default_rng(2)
        for v in sample_domain(p.domain, 200, rng, max_frac=0.9):
            s = math.hypot(*v)
            d = radial_derivative(p, s)
            if s < 1e-6 or d > 0:
                continue
            for alpha in (math.pi / 8, math.pi / 4, 1.2):
                expected = d / s * math.cos(alpha)
                assert abs(cone_margin(p, PlanarVector(*v), alpha) - expected) <= 1e-9


def test_vectorised_margins_match_scalar():
    p = zoo_profile("phi2")
    V = sample_grid(p.domain, 8, 32, seed=0, min_frac=0.01)
    G = gradients(p, V)
    vec = cone_margins(V, G, math.pi / 4)
    for k in range(0, len(V), 17):
        assert vec[k] == pytest.approx(cone_margin(p, PlanarVector(*V[k]), math.pi / 4), abs=1e-12)


def test_grid_contains_axes_and_stays_inside():
    p = zoo_profile("rho_inf")
    V = sample_grid(p.domain, 16, 64, seed=3)
    assert np.any((np.abs(V[:, 1]) < 1e-15) & (V[:, 0] > 0))
    assert all(p.domain.contains(PlanarVector(*v)) for v in V)
    assert not np.any(np.all(V == 0, axis=1))
    with pytest.raises(CheckUsageError):
        sample_grid(p.domain, 0, 4)


# -- sufficient and rotational ------------------------------------------------------


def test_sufficient_examples():
    r = sufficient_check(zoo_profile("phi2"))
    assert r.verdict == BCP and r.params.m_hat > 0
    r = sufficient_check(zoo_profile("d_eps", eps=1.0))
    assert r.verdict == BCP
    r = sufficient_check(zoo_profile("d_inf"))
    assert r.verdict == INCONCLUSIVE and r.params.m_hat == 0


def test_sufficient_rejects_bad_alphas():
    with pytest.raises(CheckUsageError):
        sufficient_check(zoo_profile("phi2"), alpha_grid=[])
    with pytest.raises(CheckUsageError):
        sufficient_check(zoo_profile("phi2"), alpha_grid=[2.0])


def test_rotational_examples():
    r = rotational_check(zoo_profile("koranyi"))
    assert r.verdict == NONBCP and -1e-6 <= r.details["sup_ratio"] <= 0
    for eps in (0.5, 1.0):
        r = rotational_check(zoo_profile("d_eps", eps=eps))
        assert r.verdict == BCP and r.params.m_hat >= eps * eps / 2 - 1e-6
    r = rotational_check(zoo_profile("d_alpha", alpha=1.0))
    assert r.verdict == BCP and abs(r.params.m_hat - 1) <= 1e-6
    with pytest.raises(CheckUsageError):
        rotational_check(zoo_profile("phi1"))


def test_rotational_divergent_ratio_is_inconclusive():
    # phi'(s)/s ~ -1/sqrt(s) near 0
    r = rotational_check(radial("root", "1 - abs(s)^1.5"))
    assert r.verdict == INCONCLUSIVE and r.notes


# -- necessary ---------------------------------------------------------------------


def test_necessary_examples():
    assert necessary_gradient_check(zoo_profile("rho_inf")).verdict == NONBCP
    assert necessary_gradient_check(zoo_profile("d_inf")).verdict == NONBCP
    r = necessary_gradient_check(zoo_profile("phi1"))
    assert r.verdict == INCONCLUSIVE
    flat = [w for w in r.witnesses if w.condition == "ae_strictness"]
    assert flat and all(abs(w.point[1]) < 1e-12 and not w.hard for w in flat)
    r = necessary_gradient_check(zoo_profile("d_eps", eps=1.0))
    assert r.witnesses == [] and r.verdict == INCONCLUSIVE


def test_d_eps_radial_bound():
    eps = 1.0
    p = zoo_profile("d_eps", eps=eps)
    V = sample_grid(p.domain, 32, 256, seed=0, min_frac=0.01)
    G = gradients(p, V)
    s2 = (V**2).sum(axis=1)
    # s phi'(s) <= -eps^2 s^2 / 2
    assert np.all((V * G).sum(axis=1) <= -eps * eps * s2 / 2 * (1 - 1e-6))


def test_monotone_examples():
    r = radial_monotone_check(zoo_profile("koranyi"))
    assert r.verdict == INCONCLUSIVE and not r.witnesses
    r = radial_monotone_check(zoo_profile("phi1"))
    assert not r.witnesses
    r = radial_monotone_check(radial("bump", "0.3 + s^2 - s^4"))
    assert r.verdict == NONBCP
    first = min((w for w in r.witnesses if w.condition == "radial_monotone"), key=lambda w: math.hypot(*w.point))
    assert math.hypot(*first.point) < 0.05
    with pytest.raises(CheckUsageError):
        radial_monotone_check(zoo_profile("koranyi"), directions=1)


def test_origin_examples():
    r = origin_regularity_check(zoo_profile("koranyi"))
    assert r.verdict == INCONCLUSIVE and r.details["slope"] > 2.5
    r = origin_regularity_check(radial("kink", "0.3 - abs(s)/2 + s^2"))
    assert r.verdict == NONBCP and r.witnesses[0].value == pytest.approx(0.5, abs=0.01)
    assert origin_regularity_check(zoo_profile("phi2")).verdict == INCONCLUSIVE
    with pytest.raises(CheckUsageError):
        origin_regularity_check(zoo_profile("koranyi"), h_grid=(1e-3, 1e-2))


# -- hessian ------------------------------------------------------------------------


def test_hessian_examples():
    r = hessian_check(zoo_profile("koranyi"), smooth=True, hessian_differentiable=True)
    assert r.verdict == NONBCP
    assert all(abs(l) <= 1e-6 for l in r.details["eigenvalues"])
    assert any(w.condition == "hessian_definite" for w in r.witnesses)
    H = hessian_at_origin(zoo_profile("phi2"))
    assert np.allclose(np.sort(np.linalg.eigvalsh(H)), [-4, -2], atol=1e-3)
    r = hessian_check(zoo_profile("phi2"), smooth=True, hessian_differentiable=True)
    assert r.verdict == INCONCLUSIVE and not r.witnesses
    r = hessian_check(zoo_profile("phi1"), smooth=True, points=[(0.5, 0.0)])
    assert r.verdict == NONBCP
    w = r.witnesses[0]
    assert w.condition == "strict_radial" and w.point == (0.5, 0.0) and w.value == 0


def test_hessian_flags_gate_verdict():
    r = hessian_check(zoo_profile("phi1"), points=[(0.5, 0.0)])
    assert r.verdict == INCONCLUSIVE and r.witnesses and not any(w.hard for w in r.witnesses)
    r = hessian_check(zoo_profile("koranyi"), smooth=True)
    assert r.verdict == INCONCLUSIVE
    with pytest.raises(CheckUsageError):
        hessian_at_origin(zoo_profile("koranyi"), h=0.1)


def test_positive_hessian_flagged():
    r = hessian_check(radial("cup", "1 + s^2 - s^4"), smooth=True)
    assert r.verdict == NONBCP and r.witnesses[0].condition == "hessian_semidefinite"


# -- strip criterion -------------------------------------------------------------------


def test_strip_d_eps_fails():
    p = zoo_profile("d_eps", eps=1.0)
    w = StripWitness(PlanarVector(1, 0), 0.01, (0.5, 0.4, 0.3), (0.5, 0.4, 0.3), 0.6)
    assert strip_witness_check(p, w) is False
    assert strip_report(p, w).verdict == INCONCLUSIVE


def test_strip_general_profile():
    p = general("cubic", "0.6 - (x^2+y^2)/4 + x^3/4")
    w = StripWitness(PlanarVector(-1, 0), 0.05, (0.9, 0.8, 0.7), (0.9, 0.8, 0.7), 0.95)
    assert strip_witness_check(p, w) is True
    r = strip_report(p, w)
    assert r.verdict == INCONCLUSIVE and r.details["holds"] and not r.details["stable"]
    assert r.details["a_n"] == pytest.approx([0.2025, 0.16, 0.1225], abs=1e-12)


def test_strip_stable_gap_is_nonbcp():
    # phi(t v) - phi(-t v) = -t for v = (-1, 0): a_n = 1/2 at every scale
    p = general("wedge", "2 - (x^2+y^2) + x")
    w = StripWitness(PlanarVector(-1, 0), 0.1, (0.2, 0.1, 0.05), (0.2, 0.1, 0.05), 0.4)
    r = strip_report(p, w)
    assert r.verdict == NONBCP and r.details["stable"]


def test_strip_rejects_degenerate():
    v = PlanarVector(1, 0)
    with pytest.raises(ValueError):
        StripWitness(v, 0.1, (0.0,), (0.0,), 0.5)
    with pytest.raises(ValueError):
        StripWitness(v, 0.1, (0.3, 0.4), (0.3, 0.4), 0.5)
    with pytest.raises(ValueError):
        StripWitness(PlanarVector(2, 0), 0.1, (0.3,), (0.3,), 0.5)
    with pytest.raises(ValueError):
        StripWitness(v, 0.1, (0.3,), (0.3, 0.2), 0.5)


# -- reports and aggregation --------------------------------------------------------------


def test_report_invariants():
    with pytest.raises(ValueError):
        CheckReport("x", BCP)
    with pytest.raises(ValueError):
        CheckReport("x", NONBCP, witnesses=[Witness((0.1,), "c", 1.0, hard=False)])
    with pytest.raises(ValueError):
        SufficientParams(1.0, 2.0, 0.1, 1.0)


def test_aggregate_examples():
    k = zoo_profile("koranyi")
    a = rotational_check(k)
    b = hessian_check(k, smooth=True, hessian_differentiable=True)
    assert verdict_aggregate([a, b]).verdict == NONBCP
    d = zoo_profile("d_eps", eps=1.0)
    agg = verdict_aggregate([rotational_check(d), necessary_gradient_check(d)])
    assert agg.verdict == BCP and agg.params.m_hat > 0
    fake_bcp = CheckReport("x", BCP, SufficientParams(0.1, 0.5, 0.1, 1.0), checks_run=["sufficient"])
    fake_no = CheckReport("x", NONBCP, witnesses=[Witness((0.1, 0.0), "c", 1.0)], checks_run=["necessary"])
    with pytest.raises(VerdictConflictError):
        verdict_aggregate([fake_bcp, fake_no])
    with pytest.raises(CheckUsageError):
        verdict_aggregate([])
    with pytest.raises(CheckUsageError):
        verdict_aggregate([a, agg])


@pytest.mark.parametrize("name", ZOO_NAMES)
def test_exclusivity_on_zoo(name):
    p = zoo_profile(name)
    for flags in ((False, False), (True, True)):
        run_all(p, 0, 32, 128, *flags)


EXPECTED_ALL = {
    "koranyi": NONBCP,
    "d_eps": BCP,
    "d_alpha": BCP,
    "d_inf": NONBCP,
    "rho_inf": NONBCP,
    "quasi": BCP,
    "phi1": INCONCLUSIVE,
    "phi2": BCP,
}


@pytest.mark.parametrize("name", ZOO_NAMES)
def test_run_all_verdicts(name):
    assert run_all(zoo_profile(name)).verdict == EXPECTED_ALL[name]


@pytest.mark.parametrize("name", ZOO_NAMES)
def test_sufficient_implies_necessary_clean(name):
    p = zoo_profile(name)
    if sufficient_check(p).verdict != BCP:
        return
    assert necessary_gradient_check(p).witnesses == []
    assert radial_monotone_check(p).witnesses == []
    assert origin_regularity_check(p).witnesses == []


def test_reports_independent_of_threads(monkeypatch):
    p = zoo_profile("phi1")
    docs = []
    for n in ("1", "4"):
        monkeypatch.setenv("HEISBCP_THREADS", n)
        docs.append([sufficient_check(p, radial_grid=16, angular_grid=64).to_json(), necessary_gradient_check(p).to_json()])
    assert docs[0] == docs[1]


def test_report_json_shape():
    doc = rotational_check(zoo_profile("d_eps", eps=1.0)).to_json()
    assert set(doc) >= {"profile", "verdict", "params", "witnesses", "grid", "checks_run"}
    assert doc["params"]["m_hat"] > 0.49
    assert checks.DEFAULT_ALPHAS[0] == math.pi / 32
