"""Acceptance criteria, one PASS/FAIL line each.

Run ``pytest tests/test_acceptance.py -s`` (or ``python tests/test_acceptance.py``)
to see the lines. Criterion 6b is a known miss and is marked xfail; its line
still says FAIL.
"""

import subprocess
import sys
import time
from contextlib import contextmanager
from pathlib import Path

import numpy as np
import pytest

from heisbcp import checks
from heisbcp.family import SearchConfig, scale_buckets, search_family, verify_family
from heisbcp.metric import DistanceOracle, axioms_check, oracle_for
from heisbcp.profile import ZOO_NAMES, validate_profile, zoo_profile

from oracles.lattice_oracle import FROZEN

HERE = Path(__file__).resolve().parent
SEEDS = (1, 2, 3)
BUDGET = 100_000


@contextmanager
def criterion(label, limit):
    """Time the block and print one verdict line; ``state['ok']`` is set by the block."""
    state = {"ok": False, "detail": ""}
    t0 = time.perf_counter()
    try:
        yield state
    finally:
        secs = time.perf_counter() - t0
        ok = state["ok"] and secs < limit
        print(f"{'PASS' if ok else 'FAIL'} {label}: {state['detail']} [{secs:.1f} s, limit {limit:.0f} s]", flush=True)
    assert ok, state["detail"]


def test_c1_closed_form_equivalence():
    with criterion("c1 gauge vs closed form", 10) as st:
        rng = np.random.default_rng(2024)
        P, Q = rng.uniform(-2, 2, (1000, 3)), rng.uniform(-2, 2, (1000, 3))
        worst = 0.0
        pairs = [(zoo_profile("koranyi"), DistanceOracle.closed("koranyi"))]
        pairs += [(zoo_profile("d_eps", eps=e), DistanceOracle.closed("d_eps", eps=e)) for e in (0.1, 0.5, 1.0)]
        for prof, closed in pairs:
            dg = DistanceOracle.gauge(prof).pair_distances(P, Q)
            dc = closed.pair_distances(P, Q)
            worst = max(worst, float(np.max(np.abs(dg - dc) / (1 + dc))))
        st["ok"] = worst <= 1e-9
        st["detail"] = f"max |dg - dc|/(1+d) = {worst:.2e} (need <= 1e-9)"


def test_c2_rotational_characterization():
    with criterion("c2 rotational verdicts", 30) as st:
        bad = []
        kor = checks.rotational_check(zoo_profile("koranyi"))
        if not (kor.verdict == checks.NONBCP and -1e-6 <= kor.details["sup_ratio"] <= 0):
            bad.append("koranyi")
        for name, kw, lo, hi in (
            ("d_eps", {"eps": 0.5}, 0.125 - 1e-6, np.inf),
            ("d_eps", {"eps": 1.0}, 0.5 - 1e-6, np.inf),
            ("d_alpha", {"alpha": 1.0}, 1 - 1e-6, 1 + 1e-6),
        ):
            r = checks.rotational_check(zoo_profile(name, **kw))
            if not (r.verdict == checks.BCP and lo <= r.params.m_hat <= hi):
                bad.append(f"{name}{kw}")
        d_inf = checks.rotational_check(zoo_profile("d_inf"))
        if not (d_inf.verdict == checks.NONBCP and any(w.value >= 0 for w in d_inf.witnesses)):
            bad.append("d_inf")
        rho = checks.necessary_gradient_check(zoo_profile("rho_inf"))
        if not (rho.verdict == checks.NONBCP and any(w.value == 0 for w in rho.witnesses)):
            bad.append("rho_inf")
        st["ok"] = not bad
        st["detail"] = f"6 profiles, mismatches: {bad or 'none'}"


def test_c3_example_profiles():
    with criterion("c3 phi1/phi2 verdicts", 60) as st:
        r2 = checks.sufficient_check(zoo_profile("phi2"))
        r1 = checks.hessian_check(zoo_profile("phi1"), smooth=True, points=[(0.5, 0.0)])
        at_half = any(w.condition == "strict_radial" and tuple(w.point) == (0.5, 0.0) for w in r1.witnesses)
        st["ok"] = r2.verdict == checks.BCP and r2.params.m_hat > 0 and r1.verdict == checks.NONBCP and at_half
        st["detail"] = f"phi2 {r2.verdict} m_hat={r2.params.m_hat if r2.params else None:.4g}; phi1 {r1.verdict}, witness at (1/2,0): {at_half}"


def test_c4_hessian_battery():
    with criterion("c4 Hessian battery", 60) as st:
        kor = checks.hessian_check(zoo_profile("koranyi"), smooth=True, hessian_differentiable=True)
        ek = np.array(kor.details["eigenvalues"])
        e2 = np.sort(checks.hessian_check(zoo_profile("phi2")).details["eigenvalues"])
        ok_k = bool(np.all(np.abs(ek) <= 1e-6)) and kor.verdict == checks.NONBCP
        ok_2 = bool(np.all(np.abs(e2 - [-4.0, -2.0]) <= 1e-3))
        st["ok"] = ok_k and ok_2
        st["detail"] = f"koranyi eig {ek.tolist()} -> {kor.verdict}; phi2 eig {e2.tolist()}"


def test_c5_validity_construction():
    with criterion("c5 phi1 gauge axioms", 300) as st:
        rep = axioms_check(oracle_for("phi1"), samples=100_000, seed=5)
        val = validate_profile(zoo_profile("phi1"), samples=100_000, seed=5)
        st["ok"] = rep.triangle <= 1e-8 and val.lower_bound_ok and val.concavity_ok and val.min_phi >= 0.25 - 1e-12
        st["detail"] = (
            f"triangle {rep.triangle:.2e}, min phi1 {val.min_phi:.6f} >= 1/4: {val.lower_bound_ok}, "
            f"concave: {val.concavity_ok}"
        )


@pytest.fixture(scope="module")
def zoo_searches():
    out = {}
    t0 = time.perf_counter()
    for name in ZOO_NAMES:
        o = oracle_for(name)
        for seed in SEEDS:
            out[name, seed] = search_family(o, SearchConfig(budget=BUDGET, seed=seed))
    return out, time.perf_counter() - t0


def test_c6a_search_soundness(zoo_searches):
    zoo_searches, search_secs = zoo_searches
    with criterion("c6a family soundness", 300 - search_secs) as st:
        t0 = time.perf_counter()
        bad = []
        for (name, seed), res in zoo_searches.items():
            cards = [c for _, c in res.trace]
            if not verify_family(oracle_for(name), res.family, res.config.slack) or cards != sorted(cards):
                bad.append(f"{name}/{seed}")
        kor = [len(zoo_searches["koranyi", s].family) for s in SEEDS]
        st["ok"] = not bad and min(kor) >= FROZEN["N0"]
        st["detail"] = (
            f"{len(zoo_searches)} families verified, bad: {bad or 'none'}; "
            f"koranyi sizes {kor} >= N0={FROZEN['N0']}; searches {search_secs:.1f} s, "
            f"recheck {time.perf_counter() - t0:.1f} s"
        )


@pytest.mark.xfail(strict=True, reason="d_eps(1) search finds valid 11-ball families; the lattice N1=9 is not an upper bound")
def test_c6b_d_eps_below_oracle(zoo_searches):
    zoo_searches, _ = zoo_searches
    with criterion("c6b d_eps(1) <= N1", 300) as st:
        sizes = [len(zoo_searches["d_eps", s].family) for s in SEEDS]
        st["ok"] = max(sizes) <= FROZEN["N1"]
        st["detail"] = f"d_eps(1) sizes {sizes} vs N1={FROZEN['N1']} (families re-verified in c6a)"


def test_c7_bucket_decomposition():
    with criterion("c7 scale buckets", 60) as st:
        rng = np.random.default_rng(11)
        violations = 0
        for _ in range(10_000):
            r = np.sort(np.exp(rng.uniform(-10, 0, int(rng.integers(1, 40)))))[::-1]
            eps = float(rng.uniform(0.01, 0.99))
            dec = scale_buckets(r, eps)
            for lead, b in zip(dec.leaders, dec.buckets):
                violations += sum(not (eps * r[lead] <= r[j] <= r[lead]) for j in b)
            violations += sum(not (r[b] < eps * r[a]) for a, b in zip(dec.leaders, dec.leaders[1:]))
        st["ok"] = violations == 0
        st["detail"] = f"10^4 radius vectors, {violations} violations"


SUITES = ["test_group.py", "test_dsl.py", "test_kernels.py", "test_profile.py", "test_metric.py", "test_checks.py", "test_family.py"]


def test_c8_invariant_suites():
    with criterion("c8 invariant suites", 600) as st:
        cmd = [sys.executable, "-m", "pytest", "-q", "-p", "no:cacheprovider", *SUITES]
        run = subprocess.run(cmd, cwd=HERE, capture_output=True, text=True)
        st["ok"] = run.returncode == 0
        st["detail"] = run.stdout.strip().splitlines()[-1] if run.stdout.strip() else run.stderr[-200:]


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-q", "-s", "-p", "no:cacheprovider"]))
