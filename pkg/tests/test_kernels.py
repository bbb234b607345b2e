import runpy
from pathlib import Path

import numpy as np
import pytest

from heisbcp import kernels
from heisbcp.kernels import backends
from heisbcp.profile import ZOO_NAMES, zoo_profile


def build(mod, p):
    return p.kernel_with(mod)


def pairs():
    mods = backends()
    if len(mods) < 2:
        pytest.skip("compiled kernel not built")
    return mods


def test_selected_backend_is_listed():
    assert kernels.BACKEND in [m.BACKEND for m in backends()]


@pytest.mark.parametrize("name", ZOO_NAMES)
def test_backends_agree(name):
    c_mod, py_mod = pairs()
    p = zoo_profile(name)
    kc, kp = build(c_mod, p), build(py_mod, p)
    rng = np.random.default_rng(5)
    P = rng.uniform(-1.2, 1.2, (150, 3))
    Q = rng.uniform(-1.2, 1.2, (150, 3))
    for x, y, z in P[:60]:
        assert kc.phi(x * 0.5, y * 0.5) == kp.phi(x * 0.5, y * 0.5)
        assert kc.contains(x, y, z, 1e-12) == kp.contains(x, y, z, 1e-12)
    dc = kc.pair_distances(P, Q, 1e-12, 200)
    dp = kp.pair_distances(P, Q, 1e-12, 200)
    assert np.array_equal(dc, dp)
    radii = rng.uniform(0.2, 2.0, len(Q))
    for p0 in P[:10]:
        assert np.array_equal(kc.within_mask(p0, Q, radii, 1e-12), kp.within_mask(p0, Q, radii, 1e-12))
        assert kc.first_within_radii(p0, Q, radii, 1e-12) == kp.first_within_radii(p0, Q, radii, 1e-12)
        assert kc.first_within(p0, Q, 0.7, 1e-12) == kp.first_within(p0, Q, 0.7, 1e-12)


def test_membership_agrees_with_distances():
    p = zoo_profile("koranyi")
    rng = np.random.default_rng(2)
    Q = rng.uniform(-1, 1, (300, 3))
    radii = rng.uniform(0.2, 1.5, len(Q))
    for mod in backends():
        k = build(mod, p)
        p0 = np.array([0.1, -0.2, 0.05])
        d = k.pair_distances(Q, np.repeat(p0[None], len(Q), axis=0), 1e-12, 200)
        mask = k.within_mask(p0, Q, radii, 1e-12)
        clear = np.abs(d - radii) > 1e-9
        assert np.array_equal(mask[clear], (d <= radii)[clear])
        hits = np.nonzero(mask)[0]
        assert k.first_within_radii(p0, Q, radii, 1e-12) == (hits[0] if len(hits) else -1)


def test_row_count_mismatch_rejected():
    p = zoo_profile("koranyi")
    for mod in backends():
        with pytest.raises(ValueError):
            build(mod, p).within_mask((0, 0, 0), np.zeros((3, 3)), np.ones(2), 1e-12)


def test_bad_bytecode_is_nan():
    for mod in backends():
        out = mod.eval_program((0, 0, 6), (1.0, 0.0, 0.0), np.zeros((1, 1)))  # 1 / 0
        assert np.isnan(out[0])


def test_benchmark_smoke(capsys):
    pairs()
    bench = runpy.run_path(str(Path(__file__).resolve().parents[1] / "benchmarks" / "bench_kernels.py"))
    bench["main"](["--n", "20", "--repeat", "1"])
    assert "pair_distances" in capsys.readouterr().out
