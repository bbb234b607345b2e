"""Besicovitch families, scale buckets and greedy eps-nets.

A Besicovitch family is a finite set of balls with a common point in which
no ball contains the center of another. The search below produces lower
bounds on the largest such family; it never proves an upper bound.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field

import numpy as np

from .checks import cone_margins, gradients, sample_grid
from .group import IDENTITY, GroupPoint
from .metric import Ball, DistanceOracle, dilate_rows
from .parallel import ordered_map
from .profile import Profile, zoo_profile

__all__ = [
    "BesicovitchFamily",
    "FamilyCheck",
    "SearchConfig",
    "SearchResult",
    "BucketDecomposition",
    "verify_family",
    "search_family",
    "scale_buckets",
    "eps_net_greedy",
    "unit_ball_samples",
    "trace_csv",
]

DEFAULT_SLACK = 1e-8


# -- families --------------------------------------------------------------------


@dataclass(frozen=True)
class BesicovitchFamily:
    balls: tuple[Ball, ...]
    common_point: GroupPoint = IDENTITY

    def __len__(self) -> int:
        return len(self.balls)

    @property
    def centers(self) -> np.ndarray:
        return np.array([b.center.as_tuple() for b in self.balls], dtype=np.float64).reshape(-1, 3)

    @property
    def radii(self) -> np.ndarray:
        return np.array([b.radius for b in self.balls], dtype=np.float64)

    @classmethod
    def from_arrays(cls, centers, radii, common_point: GroupPoint = IDENTITY) -> BesicovitchFamily:
        balls = tuple(Ball(GroupPoint.of(*c), float(r)) for c, r in zip(np.asarray(centers).tolist(), radii))
        return cls(balls, common_point)

    def to_json(self) -> dict:
        return {
            "common_point": list(self.common_point.as_tuple()),
            "balls": [{"center": list(b.center.as_tuple()), "radius": b.radius} for b in self.balls],
        }

    @classmethod
    def from_json(cls, doc: dict) -> BesicovitchFamily:
        balls = tuple(Ball(GroupPoint.of(*b["center"]), float(b["radius"])) for b in doc["balls"])
        return cls(balls, GroupPoint.of(*doc.get("common_point", (0.0, 0.0, 0.0))))


@dataclass
class FamilyCheck:
    ok: bool
    reason: str = ""
    pair: tuple[int, int] | None = None
    common_excess: float = -math.inf
    min_separation: float = math.inf

    def __bool__(self) -> bool:
        return self.ok


def verify_family(o: DistanceOracle, f: BesicovitchFamily, slack: float = DEFAULT_SLACK) -> FamilyCheck:
    """Check the common point and the no-center-inside condition with the given slack.

    ``common_excess`` is max(d(c_i, p) - r_i) and ``min_separation`` is
    min over i != j of d(c_i, c_j) - max(r_i, r_j).
    """
    if len(f) == 0:
        raise ValueError("family has no balls")
    C, R = f.centers, f.radii
    common = np.array(f.common_point.as_tuple())
    to_common = o.distances_to(C, common)
    excess = to_common - R
    n = len(R)
    ii, jj = np.nonzero(~np.eye(n, dtype=bool))
    sep = o.pair_distances(C[ii], C[jj]) - np.maximum(R[ii], R[jj]) if n > 1 else np.zeros(0)
    result = FamilyCheck(True, "", None, float(excess.max()), float(sep.min()) if len(sep) else math.inf)
    bad = np.nonzero(excess > slack)[0]
    if len(bad):
        i = int(bad[0])
        result.ok = False
        result.reason = f"common point is outside ball {i} (d - r = {excess[i]:.3e})"
        return result
    bad = np.nonzero(sep <= -slack)[0]
    if len(bad):
        k = int(bad[0])
        i, j = int(ii[k]), int(jj[k])
        result.ok = False
        result.pair = (i, j)
        result.reason = f"center of ball {j} lies in ball {i} (d - max r = {sep[k]:.3e})"
    return result


# -- search ---------------------------------------------------------------------


@dataclass(frozen=True)
class SearchConfig:
    """Search settings; ``budget`` counts membership tests (distance evaluations)."""

    budget: int = 100_000
    seed: int = 0
    strategy: str = "anneal"
    radius_range: tuple[float, float] = (0.05, 1.0)
    slack: float = DEFAULT_SLACK
    chains: int = 1
    bias: float = 0.5
    patience: int = 2000

    def __post_init__(self):
        if self.budget < 0:
            raise ValueError("budget must be >= 0")
        if self.strategy not in ("greedy", "anneal"):
            raise ValueError(f"unknown strategy {self.strategy!r}; use greedy or anneal")
        lo, hi = self.radius_range
        if not (0 < lo <= hi and math.isfinite(hi)):
            raise ValueError("radius_range needs 0 < r_min <= r_max")
        if not self.slack > 0:
            raise ValueError("slack must be positive")
        if self.chains < 1:
            raise ValueError("chains must be >= 1")
        if not 0 <= self.bias <= 1:
            raise ValueError("bias must lie in [0, 1]")
        if self.patience < 1:
            raise ValueError("patience must be >= 1")


@dataclass
class SearchResult:
    family: BesicovitchFamily
    trace: list[tuple[int, int]]
    evaluations: int
    config: SearchConfig
    chain: int = 0
    check: FamilyCheck | None = field(default=None, repr=False)


def _profile_of(o: DistanceOracle) -> Profile:
    if o.profile is not None:
        return o.profile
    return zoo_profile(o.closed_form, **dict(o.params))


class _Sampler:
    """Unit-sphere points through the caps of the profile, optionally biased.

    The biased pool favours planar directions where the cone margin is close
    to 0, i.e. where the sufficient condition is weakest.
    """

    def __init__(self, o: DistanceOracle, bias: float, seed: int):
        self.p = _profile_of(o)
        self.bias = bias
        pool = sample_grid(self.p.domain, 16, 64, seed=seed, min_frac=1e-3, edge_gap=1e-3, extra=0)
        if bias > 0:
            m = cone_margins(pool, gradients(self.p, pool), math.pi / 4)
            m = np.where(np.isfinite(m), np.abs(m), np.inf)
            tau = float(np.median(m[np.isfinite(m)])) if np.isfinite(m).any() else 1.0
            w = np.exp(-m / max(tau, 1e-12))
            w = w / w.sum() if w.sum() > 0 else np.full(len(pool), 1.0 / len(pool))
        else:
            w = np.full(len(pool), 1.0 / len(pool))
        self.pool, self.weights = pool, w
        self.scale = self.p.domain.inradius

    def _shrink_into(self, V: np.ndarray) -> np.ndarray:
        th = np.arctan2(V[:, 1], V[:, 0])
        r = np.sqrt((V**2).sum(axis=1))
        cap = self.p.domain.support_radii(th)
        f = np.minimum(1.0, cap / np.maximum(r, 1e-300))
        return V * f[:, None]

    def planar(self, n: int, rng: np.random.Generator) -> np.ndarray:
        th = rng.uniform(0.0, 2.0 * math.pi, n)
        r = np.sqrt(rng.uniform(0.0, 1.0, n)) * self.p.domain.support_radii(th)
        V = np.column_stack([r * np.cos(th), r * np.sin(th)])
        use = rng.uniform(0.0, 1.0, n) < self.bias
        k = int(use.sum())
        if k:
            idx = rng.choice(len(self.pool), size=k, p=self.weights)
            jitter = rng.normal(0.0, 0.02 * self.scale, (k, 2))
            V[use] = self._shrink_into(self.pool[idx] + jitter)
        return V

    def lift(self, V: np.ndarray, top: np.ndarray) -> np.ndarray:
        up = self.p.eval_many(V)
        down = self.p.eval_many(-V)
        z = np.where(top, up, -down)
        return np.column_stack([V, z])

    def sphere(self, n: int, rng: np.random.Generator) -> np.ndarray:
        V = self.planar(n, rng)
        S = self.lift(V, rng.uniform(0.0, 1.0, n) < 0.5)
        return S[np.isfinite(S[:, 2])]

    def perturb(self, center, radius, rng) -> tuple[np.ndarray, float]:
        """A sphere point near the direction of ``center`` and a nearby radius."""
        v = np.asarray(center[:2]) / radius
        V = self._shrink_into((v + rng.normal(0.0, 0.05 * self.scale, 2))[None, :])
        top = np.array([center[2] >= 0.0])
        return self.lift(V, top)[0], radius * math.exp(rng.normal(0.0, 0.2))


class _Chain:
    T0, SIGMA, COOL, MOVES = 0.01, 0.1, 0.9995, 2
    def __init__(self, o: DistanceOracle, cfg: SearchConfig, budget: int, rng: np.random.Generator, sampler: _Sampler):
        self.o, self.cfg, self.budget, self.rng, self.sampler = o, cfg, budget, rng, sampler
        self.evals = 0
        self.best_C = np.zeros((0, 3))
        self.best_R = np.zeros(0)
        self.trace: list[tuple[int, int]] = []
        self._buf = np.zeros((0, 3))
        self._rad = np.zeros(0)

    def candidate(self) -> tuple[np.ndarray, float]:
        if len(self._buf) == 0:
            lo, hi = self.cfg.radius_range
            S = self.sampler.sphere(256, self.rng)
            self._rad = np.exp(self.rng.uniform(math.log(lo), math.log(hi), len(S)))
            self._buf = dilate_rows(self._rad, S)
        c, r = self._buf[0], float(self._rad[0])
        self._buf, self._rad = self._buf[1:], self._rad[1:]
        return c, r

    def record(self, C, R):
        if len(R) > len(self.best_R):
            self.best_C, self.best_R = C.copy(), R.copy()
            self.trace.append((self.evals, len(R)))

    def seed_ball(self):
        c, r = self.candidate()
        return c[None, :], np.array([r])

    def greedy(self, budget: int | None = None):
        budget = self.budget if budget is None else budget
        C, R = self.seed_ball()
        self.record(C, R)
        stale = 0
        while True:
            remaining = budget - self.evals
            if remaining < max(1, len(R)):
                break
            c, r = self.candidate()
            hit = self.o.first_within_radii(c, C, np.maximum(R, r) + self.cfg.slack)
            self.evals += len(R) if hit < 0 else hit + 1
            if hit < 0:
                C, R = np.vstack([C, c]), np.append(R, r)
                self.record(C, R)
                stale = 0
            else:
                stale += 1
                if stale >= self.cfg.patience:
                    C, R = self.seed_ball()
                    stale = 0
        return C, R

    # penalty annealing: k balls through 0, parametrised by a planar point of
    # K, a cap sign and a log radius; energy sums the relative amount by which
    # a center falls inside another ball (plus twice the slack)

    def _penalty(self, D, Ri, Rj):
        m = np.maximum(Ri, Rj)
        return np.maximum(0.0, (m + 2.0 * self.cfg.slack - D) / m)

    def _row(self, C, i):
        others = np.r_[0:i, i + 1 : len(C)]
        d = self.o.pair_distances(np.repeat(C[i : i + 1], len(others), axis=0), C[others])
        self.evals += len(others)
        return others, d

    def _settle(self, V, S, L, moves: int) -> bool:
        """Anneal the k-ball state in place until the energy is 0; False when out of moves or budget."""
        lo, hi = (math.log(x) for x in self.cfg.radius_range)
        k = len(L)
        C = dilate_rows(np.exp(L), self.sampler.lift(V, S))
        if not np.all(np.isfinite(C)):
            return False
        R = np.exp(L)
        D = np.zeros((k, k))
        for i in range(k):
            others, d = self._row(C, i)
            D[i, others] = d
        P = self._penalty(D, R[:, None], R[None, :])
        np.fill_diagonal(P, 0.0)
        energy = P.sum() / 2.0
        temp, sigma = self.T0, self.SIGMA * self.sampler.scale
        for _ in range(moves):
            if energy <= 0.0:
                break
            if self.budget - self.evals < k - 1:
                return False
            i = int(self.rng.integers(k))
            v = V[i] + self.rng.normal(0.0, sigma, 2)
            v = self.sampler._shrink_into(v[None, :] * 0.999)[0]
            s = S[i] if self.rng.uniform() > 0.05 else not S[i]
            l = L[i] + (self.rng.normal(0.0, 0.1) if self.rng.uniform() < 0.3 else 0.0)
            l = min(hi, max(lo, l))
            c = dilate_rows(math.exp(l), self.sampler.lift(v[None, :], np.array([s])))[0]
            if not np.all(np.isfinite(c)):
                continue
            C2 = C.copy()
            C2[i] = c
            others, d = self._row(C2, i)
            row = self._penalty(d, math.exp(l), R[others])
            delta = row.sum() - P[i, others].sum()
            if delta <= 0.0 or self.rng.uniform() < math.exp(-delta / temp):
                V[i], S[i], L[i], C, R[i] = v, s, l, C2, math.exp(l)
                D[i, others] = D[others, i] = d
                P[i, others] = P[others, i] = row
                energy = P.sum() / 2.0
            temp = max(1e-4, temp * self.COOL)
        if energy > 0.0:
            return False
        self.record(C, R)
        return True

    def _fresh(self, k: int):
        V = self.sampler.planar(k, self.rng)
        S = self.rng.uniform(0.0, 1.0, k) < 0.5
        L = np.full(k, math.log(self.cfg.radius_range[1]))
        return V, S, L

    def anneal(self):
        """Greedy warm start, then penalty annealing on growing equal-radius starts.

        A settled state gains one ball and is annealed again; a state that
        does not settle within the move cap is replaced by a fresh one with
        one ball more than the incumbent (or, every other time, by the
        incumbent plus one ball).
        """
        self.greedy(self.budget // 20)
        moves = self.MOVES * self.cfg.patience
        state = self._fresh(len(self.best_R) + 1)
        attempt = 0
        while self.budget - self.evals > len(state[2]):
            V, S, L = state
            if self._settle(V, S, L, moves):
                v = self.sampler.planar(1, self.rng)
                state = (np.vstack([V, v]), np.append(S, self.rng.uniform() < 0.5), np.append(L, np.median(L)))
                continue
            attempt += 1
            k = len(self.best_R) + 1
            if attempt % 2 == 0:
                C, R = self.best_C, self.best_R
                state = (
                    np.vstack([C[:, :2] / R[:, None], self.sampler.planar(1, self.rng)]),
                    np.append(C[:, 2] >= 0.0, self.rng.uniform() < 0.5),
                    np.append(np.log(R), np.log(R).max()),
                )
            else:
                state = self._fresh(k)

    def run(self):
        if self.budget > 0:
            self.greedy() if self.cfg.strategy == "greedy" else self.anneal()
        else:
            self.record(*self.seed_ball())
        if not self.trace or self.trace[-1][0] != self.evals:
            self.trace.append((self.evals, len(self.best_R)))
        return self


def search_family(o: DistanceOracle, cfg: SearchConfig) -> SearchResult:
    """Heuristic search for a large Besicovitch family with common point 0.

    Candidate centers are dilations of unit-sphere points, so 0 lies on the
    boundary of every ball. A candidate is accepted only when the family
    property survives with margin ``cfg.slack``. Chains run on independent
    seed streams and are merged by (cardinality, chain index), so the result
    does not depend on the number of worker threads.
    """
    if cfg.slack < 10 * o.tol:
        raise ValueError(f"slack {cfg.slack} is below 10x the oracle tolerance {o.tol}")
    seqs = np.random.SeedSequence(cfg.seed).spawn(cfg.chains)
    sampler = _Sampler(o, cfg.bias, cfg.seed)
    shares = [cfg.budget // cfg.chains + (1 if k < cfg.budget % cfg.chains else 0) for k in range(cfg.chains)]

    def run(k):
        return _Chain(o, cfg, shares[k], np.random.default_rng(seqs[k]), sampler).run()

    chains = ordered_map(run, range(cfg.chains))
    best_k = max(range(len(chains)), key=lambda k: (len(chains[k].best_R), -k))
    trace, offset, best = [], 0, 0
    for ch in chains:
        for ev, card in ch.trace:
            if card > best:
                best = card
                trace.append((ev + offset, best))
        offset += ch.evals
    if trace[-1][0] != offset:
        trace.append((offset, best))
    win = chains[best_k]
    fam = BesicovitchFamily.from_arrays(win.best_C, win.best_R)
    check = verify_family(o, fam, cfg.slack)
    if not check:
        raise RuntimeError(f"search produced an invalid family: {check.reason}")
    return SearchResult(fam, trace, offset, cfg, best_k, check)


def trace_csv(trace) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["evaluations", "best_cardinality"])
    w.writerows(trace)
    return buf.getvalue()


# -- scale buckets -------------------------------------------------------------


@dataclass(frozen=True)
class BucketDecomposition:
    eps: float
    buckets: tuple[tuple[int, ...], ...]
    leaders: tuple[int, ...]


def scale_buckets(radii, eps: float) -> BucketDecomposition:
    """Split descending radii at i_{k+1} = min{j > i_k : r_j < eps r_{i_k}}."""
    r = [float(x) for x in radii]
    if not (0 < eps < 1):
        raise ValueError("eps must lie in (0, 1)")
    if not r:
        raise ValueError("radii list is empty")
    if any(not (math.isfinite(x) and x > 0) for x in r):
        raise ValueError("radii must be positive")
    if any(b > a for a, b in zip(r, r[1:])):
        raise ValueError("radii must be sorted in descending order")
    buckets, leaders = [], []
    lead, current = 0, [0]
    for j in range(1, len(r)):
        if r[j] < eps * r[lead]:
            buckets.append(tuple(current))
            leaders.append(lead)
            lead, current = j, [j]
        else:
            current.append(j)
    buckets.append(tuple(current))
    leaders.append(lead)
    return BucketDecomposition(eps, tuple(buckets), tuple(leaders))


# -- eps-nets -----------------------------------------------------------------------


def unit_ball_samples(o: DistanceOracle, n: int, seed: int = 0) -> np.ndarray:
    """``n`` points uniform in the unit ball B, by rejection from a bounding box."""
    if n <= 0:
        return np.zeros((0, 3))
    p = _profile_of(o)
    rng = np.random.default_rng(seed)
    th = np.linspace(0.0, 2.0 * math.pi, 720, endpoint=False)
    rmax = float(p.domain.support_radii(th).max())
    grid = sample_grid(p.domain, 64, 256, seed=seed, extra=0)
    vals = np.concatenate([p.eval_many(grid), p.eval_many(np.zeros((1, 2)))])
    zmax = 1.05 * float(np.nanmax(vals))
    out, have = [], 0
    kernel = p.kernel
    while have < n:
        X = rng.uniform(-1.0, 1.0, (max(1024, 2 * (n - have)), 3)) * np.array([rmax, rmax, zmax])
        keep = np.fromiter((kernel.contains(x, y, z, 0.0) for x, y, z in X.tolist()), dtype=bool, count=len(X))
        out.append(X[keep])
        have += int(keep.sum())
    return np.vstack(out)[:n]


NET_TIE_BAND = 1e-9


def eps_net_greedy(
    o: DistanceOracle, eps: float, candidates: int = 10_000, seed: int = 0, points=None
) -> np.ndarray:
    """Greedy maximal eps-separated subset of a candidate pool in the unit ball.

    The pool is ``points`` when given (used in order), else ``candidates``
    seeded uniform samples of B.
    """
    if not eps > 0:
        raise ValueError("eps must be positive")
    pool = unit_ball_samples(o, candidates, seed) if points is None else np.asarray(points, dtype=np.float64).reshape(-1, 3)
    # ties d == eps count as separated on both routes; the band absorbs
    # the gauge membership slack so both routes agree on lattice pools
    inner = eps * (1.0 - NET_TIE_BAND)
    chosen = np.zeros((len(pool), 3))
    k = 0
    for x in pool:
        if k == 0:
            chosen[0] = x
            k = 1
            continue
        if o.profile is not None:
            close = o.first_within(x, chosen[:k], inner) >= 0
        else:
            close = bool(np.any(o.distances_to(chosen[:k], x) < inner))
        if not close:
            chosen[k] = x
            k += 1
    return chosen[:k].copy()
