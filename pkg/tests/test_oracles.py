"""The brute-force lattice oracle against its frozen values and the package."""

import math

import numpy as np

from heisbcp.family import BesicovitchFamily, eps_net_greedy, verify_family
from heisbcp.metric import DistanceOracle, oracle_for

from oracles import lattice_oracle as lo


def test_family_oracle_values_frozen():
    n0 = lo.max_family(lo.koranyi_norm, 1.0, lo.koranyi_cap)[0]
    n1 = lo.max_family(lo.d_eps_norm, 1.0 / math.sqrt(2.0), lo.d_eps_cap)[0]
    assert (n0, n1) == (lo.FROZEN["N0"], lo.FROZEN["N1"])


def test_oracle_family_passes_package_verifier():
    n0, clique, C, R = lo.max_family(lo.koranyi_norm, 1.0, lo.koranyi_cap)
    f = BesicovitchFamily.from_arrays(C[clique], R[clique])
    assert len(f) == n0
    assert verify_family(oracle_for("koranyi"), f)


def test_net_oracle_matches_package():
    L = lo.ball_lattice()
    ref = lo.greedy_net(lo.koranyi_norm, L, 0.5)
    assert len(ref) == lo.FROZEN["N2"]
    for o in (DistanceOracle.closed("koranyi"), oracle_for("koranyi")):
        net = eps_net_greedy(o, 0.5, points=L)
        assert len(net) == lo.FROZEN["N2"]
        assert np.array_equal(net, np.asarray(ref))
