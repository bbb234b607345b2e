"""Homogeneous distances from profiles (gauge construction) and closed forms.

The gauge distance of a unit ball B is

    d(p, q) = inf{t > 0 : dilate(1/t, p^-1 . q) in B},

computed by exponential bracketing from t = 1 followed by bisection.
Membership in t is monotone because B is star-shaped for dilations.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .group import GroupPoint, group_inv, group_mul
from .profile import Profile

__all__ = [
    "BracketingError",
    "DistanceOracle",
    "Ball",
    "CLOSED_FORMS",
    "gauge_distance",
    "closed_form_distance",
    "closed_form_norms",
    "ball_contains_point",
    "AxiomReport",
    "axioms_check",
    "oracle_for",
    "mul_rows",
    "inv_rows",
    "dilate_rows",
]

CLOSED_FORMS = ("koranyi", "d_eps", "d_inf", "rho_inf", "quasi")


class BracketingError(RuntimeError):
    """Gauge bracketing did not terminate: the set is not a valid unit ball."""


# -- row-wise group arithmetic on n x 3 arrays --------------------------------


def mul_rows(P: np.ndarray, Q: np.ndarray) -> np.ndarray:
    om = P[:, 0] * Q[:, 1] - P[:, 1] * Q[:, 0]
    return np.column_stack([P[:, 0] + Q[:, 0], P[:, 1] + Q[:, 1], P[:, 2] + Q[:, 2] + 0.5 * om])


def inv_rows(P: np.ndarray) -> np.ndarray:
    return -P


def dilate_rows(t, P: np.ndarray) -> np.ndarray:
    t = np.asarray(t, dtype=np.float64).reshape(-1)
    return np.column_stack([t * P[:, 0], t * P[:, 1], t * t * P[:, 2]])


# -- closed forms ------------------------------------------------------------


def closed_form_norms(name: str, W: np.ndarray, eps: float | None = None) -> np.ndarray:
    """d(0, w) for the rows w of ``W`` under a closed-form distance."""
    W = np.asarray(W, dtype=np.float64).reshape(-1, 3)
    x, y, z = W[:, 0], W[:, 1], W[:, 2]
    r2 = x * x + y * y
    if name == "koranyi":
        return (r2 * r2 + 16.0 * z * z) ** 0.25
    if name == "d_eps":
        if eps is None or not eps > 0:
            raise ValueError("d_eps needs eps > 0")
        return np.sqrt(eps * eps * r2 + np.sqrt(r2 * r2 + 16.0 * z * z))
    if name == "d_inf":
        return np.maximum(np.sqrt(r2), 2.0 * np.sqrt(np.abs(z)))
    if name == "rho_inf":
        return np.maximum(np.maximum(np.abs(x), np.abs(y)), np.sqrt(np.abs(2.0 * z)))
    if name == "quasi":
        return np.sqrt(r2 + np.abs(z))
    raise ValueError(f"no closed form for {name!r}; choose from {', '.join(CLOSED_FORMS)}")


def closed_form_distance(name: str, p: GroupPoint, q: GroupPoint, eps: float | None = None) -> float:
    w = group_mul(group_inv(p), q)
    return float(closed_form_norms(name, np.array([w.as_tuple()]), eps)[0])


# -- oracle ------------------------------------------------------------------


@dataclass(frozen=True)
class DistanceOracle:
    """A homogeneous distance, either the gauge of a profile or a closed form.

    ``tol`` is the relative bisection tolerance of the gauge route.
    """

    profile: Profile | None = None
    closed_form: str | None = None
    params: tuple[tuple[str, float], ...] = ()
    tol: float = 1e-12
    max_iter: int = 200
    name: str = field(default="", compare=False)

    def __post_init__(self):
        if (self.profile is None) == (self.closed_form is None):
            raise ValueError("give exactly one of profile or closed_form")
        if not (0 < self.tol <= 1e-6):
            raise ValueError("tol must lie in (0, 1e-6]")
        if self.max_iter < 64:
            raise ValueError("max_iter must be >= 64")
        if self.closed_form is not None and self.closed_form not in CLOSED_FORMS:
            raise ValueError(f"unknown closed form {self.closed_form!r}")

    @classmethod
    def gauge(cls, profile: Profile, tol: float = 1e-12, max_iter: int = 200) -> DistanceOracle:
        return cls(profile=profile, tol=tol, max_iter=max_iter, name=profile.name)

    @classmethod
    def closed(cls, name: str, **params: float) -> DistanceOracle:
        return cls(closed_form=name, params=tuple(sorted(params.items())), name=name)

    @property
    def label(self) -> str:
        return self.name or (self.profile.name if self.profile else self.closed_form)

    @cached_property
    def _eps(self) -> float | None:
        return dict(self.params).get("eps")

    def distance(self, p: GroupPoint, q: GroupPoint) -> float:
        if self.profile is not None:
            return gauge_distance(self, p, q)
        return closed_form_distance(self.closed_form, p, q, self._eps)

    def norms(self, W: np.ndarray) -> np.ndarray:
        """d(0, w) for each row of ``W``."""
        W = np.asarray(W, dtype=np.float64).reshape(-1, 3)
        if self.profile is None:
            return closed_form_norms(self.closed_form, W, self._eps)
        return self._checked(self.profile.kernel.distances((0.0, 0.0, 0.0), W, self.tol, self.max_iter))

    def pair_distances(self, P: np.ndarray, Q: np.ndarray) -> np.ndarray:
        """d(P[i], Q[i]) row by row."""
        P = np.asarray(P, dtype=np.float64).reshape(-1, 3)
        Q = np.asarray(Q, dtype=np.float64).reshape(-1, 3)
        if self.profile is None:
            return closed_form_norms(self.closed_form, mul_rows(inv_rows(P), Q), self._eps)
        return self._checked(self.profile.kernel.pair_distances(P, Q, self.tol, self.max_iter))

    def distances_from(self, p, Q: np.ndarray) -> np.ndarray:
        """d(p, Q[i]) for each row of ``Q``."""
        Q = np.asarray(Q, dtype=np.float64).reshape(-1, 3)
        p = np.asarray(p, dtype=np.float64).reshape(3)
        if self.profile is None:
            return self.pair_distances(np.broadcast_to(p, Q.shape), Q)
        return self._checked(self.profile.kernel.distances(p, Q, self.tol, self.max_iter))

    def first_within(self, p, Q: np.ndarray, r: float) -> int:
        """Index of the first row q of ``Q`` with d(q, p) <= r, or -1.

        For gauge oracles this is a single membership test per row.
        """
        Q = np.asarray(Q, dtype=np.float64).reshape(-1, 3)
        if len(Q) == 0:
            return -1
        if self.profile is not None:
            return int(self.profile.kernel.first_within(np.asarray(p, dtype=np.float64), Q, r, 1e-12))
        hits = np.nonzero(self.distances_to(Q, p) <= r)[0]
        return int(hits[0]) if len(hits) else -1

    def first_within_radii(self, p, Q: np.ndarray, radii) -> int:
        """Index of the first row q of ``Q`` with d(q, p) <= radii[i], or -1."""
        Q = np.asarray(Q, dtype=np.float64).reshape(-1, 3)
        radii = np.asarray(radii, dtype=np.float64).reshape(-1)
        if len(Q) == 0:
            return -1
        if self.profile is not None:
            return int(self.profile.kernel.first_within_radii(np.asarray(p, dtype=np.float64), Q, radii, 1e-12))
        hits = np.nonzero(self.distances_to(Q, p) <= radii)[0]
        return int(hits[0]) if len(hits) else -1

    def within_mask(self, p, Q: np.ndarray, radii) -> np.ndarray:
        """d(Q[i], p) <= radii[i] for each row."""
        Q = np.asarray(Q, dtype=np.float64).reshape(-1, 3)
        radii = np.asarray(radii, dtype=np.float64).reshape(-1)
        if len(Q) == 0:
            return np.zeros(0, dtype=bool)
        if self.profile is not None:
            return self.profile.kernel.within_mask(np.asarray(p, dtype=np.float64), Q, radii, 1e-12)
        return self.distances_to(Q, p) <= radii

    def distances_to(self, Q: np.ndarray, p) -> np.ndarray:
        """d(Q[i], p) for each row of ``Q``."""
        Q = np.asarray(Q, dtype=np.float64).reshape(-1, 3)
        p = np.asarray(p, dtype=np.float64).reshape(1, 3)
        return self.pair_distances(Q, np.repeat(p, len(Q), axis=0))

    @staticmethod
    def _checked(values: np.ndarray) -> np.ndarray:
        if np.any(values < 0):
            raise BracketingError("gauge bracketing failed; is 0 interior to the unit ball?")
        return values


def gauge_distance(o: DistanceOracle, p: GroupPoint, q: GroupPoint) -> float:
    if o.profile is None:
        raise ValueError("gauge_distance needs a profile oracle")
    if p == q:
        return 0.0
    d = o.profile.kernel.distance(p.as_tuple(), q.as_tuple(), o.tol, o.max_iter)
    if d < 0:
        raise BracketingError(f"gauge bracketing failed after {o.max_iter} iterations")
    return d


def oracle_for(name: str, eps: float = 1.0, alpha: float = 1.0, closed: bool = False, **kw) -> DistanceOracle:
    """Oracle for a zoo name; ``closed=True`` picks the closed form when one exists."""
    from .profile import zoo_entry

    entry = zoo_entry(name, eps, alpha)
    if closed and entry.closed_form is not None:
        return DistanceOracle.closed(entry.closed_form, **dict(entry.params))
    return DistanceOracle.gauge(entry.profile, **kw)


# -- balls -------------------------------------------------------------------


@dataclass(frozen=True)
class Ball:
    center: GroupPoint
    radius: float

    def __post_init__(self):
        if not (math.isfinite(self.radius) and self.radius > 0):
            raise ValueError(f"ball radius must be positive, got {self.radius!r}")


def ball_contains_point(o: DistanceOracle, b: Ball, q: GroupPoint) -> bool:
    return o.distance(b.center, q) <= b.radius + 10.0 * o.tol * max(1.0, b.radius)


# -- axioms ------------------------------------------------------------------


@dataclass
class AxiomReport:
    oracle: str
    samples: int
    seed: int
    symmetry: float
    left_invariance: float
    homogeneity: float
    triangle: float

    def to_json(self) -> dict:
        return {
            "oracle": self.oracle,
            "samples": self.samples,
            "seed": self.seed,
            "max_violation": {
                "symmetry": self.symmetry,
                "left_invariance": self.left_invariance,
                "homogeneity": self.homogeneity,
                "triangle": self.triangle,
            },
        }


def axioms_check(o: DistanceOracle, samples: int = 10_000, seed: int = 0, box: float = 2.0) -> AxiomReport:
    """Largest sampled violation of each distance axiom over random points of [-box, box]^3."""
    if samples < 1:
        raise ValueError("samples must be >= 1")
    rng = np.random.default_rng(seed)
    P, Q, R, G = (rng.uniform(-box, box, (samples, 3)) for _ in range(4))
    t = rng.uniform(0.0, 4.0, samples)
    t[t == 0.0] = 1.0
    dpq = o.pair_distances(P, Q)
    dqp = o.pair_distances(Q, P)
    dgp_gq = o.pair_distances(mul_rows(G, P), mul_rows(G, Q))
    dtp_tq = o.pair_distances(dilate_rows(t, P), dilate_rows(t, Q))
    dpr = o.pair_distances(P, R)
    dqr = o.pair_distances(Q, R)
    return AxiomReport(
        o.label,
        samples,
        seed,
        float(np.max(np.abs(dpq - dqp))),
        float(np.max(np.abs(dgp_gq - dpq))),
        float(np.max(np.abs(dtp_tq - t * dpq))),
        float(max(0.0, np.max(dpr - dpq - dqr))),
    )
