"""Grid-sampled BCP verifiers for unit-ball profiles.

Every "for almost every v" quantifier is realised by a fixed stratified
grid (radial x angular, refined geometrically toward 0 and toward the
boundary of K) plus a seeded uniform supplement. Points where the gradient
cannot be evaluated are skipped and counted. Sampling certifies nothing
rigorously; a BCP verdict means the sufficient condition held on the grid.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import dsl
from .group import PlanarVector, omega
from .kernels import eval_program
from .parallel import chunked, ordered_map, worker_count
from .profile import Disc, Profile, ProfileError, phi_grad, radial_derivative, sample_domain

__all__ = [
    "BCP",
    "NONBCP",
    "INCONCLUSIVE",
    "VERDICTS",
    "DEFAULT_ALPHAS",
    "MARGIN_THRESHOLD",
    "WITNESS_THRESHOLD",
    "EIGEN_DEADBAND",
    "CheckUsageError",
    "VerdictConflictError",
    "Witness",
    "SufficientParams",
    "CheckReport",
    "StripWitness",
    "sample_grid",
    "gradients",
    "cone_margin",
    "cone_margins",
    "sufficient_check",
    "rotational_check",
    "necessary_gradient_check",
    "radial_monotone_check",
    "origin_regularity_check",
    "hessian_at_origin",
    "hessian_check",
    "strip_witness_check",
    "strip_gap_constants",
    "strip_report",
    "verdict_aggregate",
    "run_all",
]

BCP = "BCP_CERTIFIED_SUFFICIENT"
NONBCP = "NONBCP_NECESSARY_VIOLATION"
INCONCLUSIVE = "INCONCLUSIVE"
VERDICTS = (BCP, NONBCP, INCONCLUSIVE)

DEFAULT_ALPHAS = (math.pi / 32, math.pi / 16, math.pi / 8, math.pi / 4, 3 * math.pi / 8)
MARGIN_THRESHOLD = 1e-9
WITNESS_THRESHOLD = 1e-9
EIGEN_DEADBAND = 1e-6
STRICT_FRACTION = 0.01
SKIP_FRACTION = 0.05
MAX_WITNESSES = 20


class CheckUsageError(ValueError):
    """A checker was called outside its preconditions."""


class VerdictConflictError(RuntimeError):
    """A sufficient certificate and a necessary violation for the same profile."""


# -- report types ---------------------------------------------------------------


@dataclass(frozen=True)
class Witness:
    """A sampled point violating ``condition``; ``point`` is (x, y), or (s,) for radial checks."""

    point: tuple[float, ...]
    condition: str
    value: float
    context: str = ""
    hard: bool = True

    def to_json(self) -> dict:
        return {
            "point": [float(c) for c in self.point],
            "condition": self.condition,
            "value": float(self.value),
            "context": self.context,
            "hard": self.hard,
        }


@dataclass(frozen=True)
class SufficientParams:
    m_hat: float
    alpha_cone: float
    kappa: float
    M_hat: float

    def __post_init__(self):
        if not (0 < self.alpha_cone < math.pi / 2):
            raise ValueError("alpha_cone must lie in (0, pi/2)")
        if not self.kappa > 0:
            raise ValueError("kappa must be positive")

    @property
    def certifies(self) -> bool:
        return self.m_hat > MARGIN_THRESHOLD and math.isfinite(self.M_hat)

    def to_json(self) -> dict:
        return {
            "m_hat": self.m_hat,
            "alpha_cone": self.alpha_cone,
            "kappa": self.kappa,
            "M_hat": self.M_hat if math.isfinite(self.M_hat) else None,
        }


@dataclass
class CheckReport:
    profile: str
    verdict: str
    params: SufficientParams | None = None
    witnesses: list[Witness] = field(default_factory=list)
    grid: dict = field(default_factory=dict)
    checks_run: list[str] = field(default_factory=list)
    notes: list[str] = field(default_factory=list)
    details: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.verdict not in VERDICTS:
            raise ValueError(f"unknown verdict {self.verdict!r}")
        if self.verdict == BCP and (self.params is None or not self.params.m_hat > 0):
            raise ValueError("a BCP certificate needs params with m_hat > 0")
        if self.verdict == NONBCP and not any(w.hard for w in self.witnesses):
            raise ValueError("a NONBCP verdict needs a hard witness")

    def to_json(self) -> dict:
        return {
            "profile": self.profile,
            "verdict": self.verdict,
            "params": None if self.params is None else self.params.to_json(),
            "witnesses": [w.to_json() for w in self.witnesses],
            "grid": dict(self.grid),
            "checks_run": list(self.checks_run),
            "notes": list(self.notes),
            "details": dict(self.details),
        }


@dataclass(frozen=True)
class StripWitness:
    """Finite truncation of the sequences in the no-BCP strip criterion."""

    v: PlanarVector
    a: float
    t_plus: tuple[float, ...]
    t_minus: tuple[float, ...]
    T: float

    def __post_init__(self):
        if abs(self.v.norm() - 1.0) > 1e-9:
            raise ValueError("strip direction must be a unit vector")
        if not (math.isfinite(self.a) and self.a > 0):
            raise ValueError("a must be positive")
        tp, tm = tuple(self.t_plus), tuple(self.t_minus)
        if not tp or len(tp) != len(tm):
            raise ValueError("t_plus and t_minus must be nonempty and of equal length")
        if not all(math.isfinite(t) and t > 0 for t in tp + tm):
            raise ValueError("t_plus and t_minus must be positive (need -t_minus < 0 < t_plus)")
        if any(b >= a for a, b in zip(tp, tp[1:])):
            raise ValueError("t_plus must be strictly decreasing")
        if not (math.isfinite(self.T) and self.T >= tp[0]):
            raise ValueError("T must be at least the first t_plus")


# -- sampling -----------------------------------------------------------------


def _fractions(radial: int, min_frac: float, edge_gap: float) -> np.ndarray:
    inner = np.geomspace(min_frac, 0.5, max(2, (radial + 1) // 2))
    outer = 1.0 - np.geomspace(edge_gap, 0.5, max(2, radial // 2))
    return np.unique(np.concatenate([inner, outer]))


def sample_grid(
    domain,
    radial: int,
    angular: int,
    seed: int = 0,
    min_frac: float = 1e-6,
    edge_gap: float = 1e-6,
    extra: int | None = None,
) -> np.ndarray:
    """Points of int(K) minus 0 as an n x 2 array.

    A polar grid (theta = 2 pi k / angular, so the axes are included) with
    radial fractions refined toward 0 and toward the boundary, followed by
    ``extra`` seeded uniform points (default radial * angular // 8) whose
    fraction is at least ``min_frac``.
    """
    if radial < 1 or angular < 1:
        raise CheckUsageError("grids must be nonempty")
    theta = 2.0 * math.pi * np.arange(angular) / angular
    rhat = domain.support_radii(theta)
    fr = _fractions(radial, min_frac, edge_gap)
    F, TH = np.meshgrid(fr, theta, indexing="ij")
    R = F * np.broadcast_to(rhat, F.shape)
    grid = np.column_stack([(R * np.cos(TH)).ravel(), (R * np.sin(TH)).ravel()])
    n_extra = radial * angular // 8 if extra is None else extra
    if n_extra <= 0:
        return grid
    rng = np.random.default_rng(seed)
    th = rng.uniform(0.0, 2.0 * math.pi, n_extra)
    f = min_frac + (1.0 - edge_gap - min_frac) * np.sqrt(rng.uniform(0.0, 1.0, n_extra))
    r = f * domain.support_radii(th)
    return np.vstack([grid, np.column_stack([r * np.cos(th), r * np.sin(th)])])


def _grid_meta(radial, angular, seed, n, skipped, **more) -> dict:
    meta = {"radial": radial, "angular": angular, "seed": seed, "points": int(n), "skipped": int(skipped)}
    meta.update(more)
    return meta


def _skip_note(n, skipped) -> list[str]:
    if n and skipped / n > SKIP_FRACTION:
        return [f"gradient evaluation failed at {skipped} of {n} sampled points (> {SKIP_FRACTION:.0%})"]
    return []


# -- gradients ----------------------------------------------------------------


def _radial_derivatives(p: Profile, s: np.ndarray) -> np.ndarray:
    out = np.full(len(s), np.nan)
    for i, si in enumerate(s.tolist()):
        try:
            out[i] = radial_derivative(p, si)
        except dsl.DSLError:
            pass
    return out


def _dual_gradients(p: Profile, V: np.ndarray) -> np.ndarray:
    out = np.full((len(V), 2), np.nan)
    for i, (x, y) in enumerate(V.tolist()):
        try:
            g = phi_grad(p, PlanarVector(x, y))
        except (dsl.DSLError, ProfileError):
            continue
        out[i] = (g.x, g.y)
    return out


def gradients(p: Profile, V: np.ndarray) -> np.ndarray:
    """grad phi at the rows of ``V`` (interior points); NaN rows where it fails."""
    V = np.asarray(V, dtype=np.float64).reshape(-1, 2)
    if p.kind == "radial":
        s = np.sqrt((V**2).sum(axis=1))
        uniq, inv = np.unique(s, return_inverse=True)
        d = _radial_derivatives(p, uniq)[inv]
        with np.errstate(invalid="ignore", divide="ignore"):
            G = (d / s)[:, None] * V
        G[s == 0] = np.nan
        return G
    if p.grad is not None:
        cols = []
        for e in p.grad:
            prog = dsl.compile_expr(e, p.variables)
            cols.append(eval_program(prog.ops, prog.args, V))
        return np.column_stack(cols)
    spans = chunked(len(V), 4 * worker_count())
    parts = ordered_map(lambda ab: _dual_gradients(p, V[ab[0] : ab[1]]), spans)
    return np.vstack(parts) if parts else np.zeros((0, 2))


# -- cone margin ----------------------------------------------------------------


def _margins(dot, cross, gn, vn, alpha):
    """Cone margin from <v, g>, |omega(v, g)|, |g| and |v|.

    cos(beta - alpha) is expanded as (dot cos a + cross sin a) / (|v||g|),
    which keeps full precision when beta is close to pi; arccos does not.
    """
    beta = np.arctan2(cross, dot)
    inside = gn / vn
    with np.errstate(invalid="ignore", divide="ignore"):
        outside = (dot * math.cos(alpha) + cross * math.sin(alpha)) / (vn * vn)
    return np.where(beta <= alpha, inside, outside)


def cone_margin(p: Profile, v: PlanarVector, alpha_cone: float) -> float:
    """max of <grad phi(v), w> / |v| over unit w within angle ``alpha_cone`` of v.

    With g = grad phi(v) and beta the angle between v and g this is |g|/|v|
    when beta <= alpha and |g| cos(beta - alpha) / |v| otherwise.
    """
    if not (0 < alpha_cone < math.pi / 2):
        raise CheckUsageError("alpha_cone must lie in (0, pi/2)")
    vn = v.norm()
    if vn == 0:
        raise CheckUsageError("cone margin is not defined at 0")
    g = phi_grad(p, v)
    gn = g.norm()
    if gn == 0:
        return 0.0
    return float(_margins(v.dot(g), abs(omega(v, g)), gn, vn, alpha_cone))


def cone_margins(V: np.ndarray, G: np.ndarray, alpha_cone: float) -> np.ndarray:
    """Vectorised cone margin from points and their gradients; NaN where G is NaN."""
    vn = np.sqrt((V**2).sum(axis=1))
    gn = np.sqrt((G**2).sum(axis=1))
    dot = (V * G).sum(axis=1)
    cross = np.abs(V[:, 0] * G[:, 1] - V[:, 1] * G[:, 0])
    out = _margins(dot, cross, gn, vn, alpha_cone)
    out[gn == 0] = 0.0
    out[~np.isfinite(gn)] = np.nan
    return out


# -- near-origin gradient bound ---------------------------------------------------


def _log_slope(x: np.ndarray, y: np.ndarray) -> float:
    lx, ly = np.log(x), np.log(np.maximum(y, 1e-300))
    if len(lx) < 2 or np.ptp(lx) == 0:
        return 0.0
    return float(np.polyfit(lx, ly, 1)[0])


def _near_origin_bound(s: np.ndarray, ratio: np.ndarray, kappa: float) -> tuple[float, float]:
    """(M_hat, slope): sup of ratio over s <= kappa, inf if it blows up toward 0.

    Shell maxima over geometric bins are fitted against s on a log-log scale;
    a slope below -0.5 is read as divergence.
    """
    near = s <= kappa
    if not near.any():
        return math.nan, 0.0
    if not np.all(np.isfinite(ratio[near])):
        return math.inf, -math.inf
    edges = np.geomspace(s[near].min(), kappa, 9)
    xs, ys = [], []
    for lo, hi in zip(edges[:-1], edges[1:]):
        sel = near & (s >= lo) & (s <= hi)
        if sel.any():
            xs.append(math.sqrt(lo * hi))
            ys.append(ratio[sel].max())
    slope = _log_slope(np.array(xs), np.array(ys))
    if slope < -0.5:
        return math.inf, slope
    return float(ratio[near].max()), slope


# -- sufficient conditions ----------------------------------------------------------


def sufficient_check(
    p: Profile,
    alpha_grid=DEFAULT_ALPHAS,
    radial_grid: int = 64,
    angular_grid: int = 256,
    seed: int = 0,
) -> CheckReport:
    """Fit the cone margin m and the near-origin bound M on a grid.

    Failing a sufficient condition proves nothing, so the verdict is BCP or
    INCONCLUSIVE.
    """
    alphas = [float(a) for a in alpha_grid]
    if not alphas:
        raise CheckUsageError("alpha grid is empty")
    if any(not (0 < a < math.pi / 2) for a in alphas):
        raise CheckUsageError("every alpha must lie in (0, pi/2)")
    V = sample_grid(p.domain, radial_grid, angular_grid, seed)
    G = gradients(p, V)
    ok = np.all(np.isfinite(G), axis=1)
    skipped = int((~ok).sum())
    V, G = V[ok], G[ok]
    s = np.sqrt((V**2).sum(axis=1))

    per_alpha = {}
    best_alpha, best_m, best_i = alphas[0], -math.inf, -1
    for a in alphas:
        m = cone_margins(V, G, a)
        i = int(np.argmax(m))
        m_hat = -float(m[i])
        per_alpha[f"{a:.12g}"] = m_hat
        if m_hat > best_m:
            best_alpha, best_m, best_i = a, m_hat, i

    kappa = 0.5 * p.domain.inradius
    ratio = np.sqrt((G**2).sum(axis=1)) / s
    M_hat, slope = _near_origin_bound(s, ratio, kappa)
    params = SufficientParams(best_m, best_alpha, kappa, M_hat)

    notes = _skip_note(len(V) + skipped, skipped)
    if not math.isfinite(M_hat):
        notes.append("|grad phi(v)|/|v| appears unbounded near 0")
    witnesses = []
    if not params.certifies and best_i >= 0:
        witnesses.append(
            Witness(
                tuple(V[best_i]), "cone_margin", -best_m, f"alpha_cone={best_alpha:.12g}; margin not negative", False
            )
        )
    verdict = BCP if params.certifies else INCONCLUSIVE
    return CheckReport(
        p.name,
        verdict,
        params,
        witnesses,
        _grid_meta(radial_grid, angular_grid, seed, len(V) + skipped, skipped),
        ["sufficient"],
        notes,
        {"m_hat_by_alpha": per_alpha, "near_origin_slope": slope},
    )


def _radial_s_grid(r: float, n: int, min_frac: float = 1e-6, edge_gap: float = 1e-6) -> np.ndarray:
    return r * _fractions(n, min_frac, edge_gap)


def rotational_check(p: Profile, radial_grid: int = 4000, kappa_frac: float = 0.1) -> CheckReport:
    """Radial characterisation: BCP iff phi'(s) <= -m s for a.e. s, given phi'(s)/s bounded near 0."""
    if p.kind != "radial":
        raise CheckUsageError(f"rotational check needs a radial profile, {p.name!r} is {p.kind}")
    r = p.domain.radius
    s = _radial_s_grid(r, radial_grid)
    d = _radial_derivatives(p, s)
    ok = np.isfinite(d)
    skipped = int((~ok).sum())
    q = d / s
    kappa = kappa_frac * r
    near_ok = np.isfinite(q[s <= kappa]).all()
    M_hat, slope = _near_origin_bound(s[ok], np.abs(q[ok]), kappa) if near_ok else (math.inf, -math.inf)
    i = int(np.nanargmax(np.where(ok, q, -np.inf)))
    S = float(q[i])
    grid = {"radial": radial_grid, "angular": 1, "seed": 0, "points": int(len(s)), "skipped": skipped}
    details = {"sup_ratio": S, "argmax_s": float(s[i]), "near_origin_sup": M_hat, "near_origin_slope": slope}
    notes = _skip_note(len(s), skipped)
    if not math.isfinite(M_hat):
        notes.append("phi'(s)/s is not bounded near 0; the radial characterisation does not apply")
        return CheckReport(p.name, INCONCLUSIVE, None, [], grid, ["rotational"], notes, details)
    if S < -MARGIN_THRESHOLD:
        params = SufficientParams(-S, math.pi / 4, kappa, M_hat)
        return CheckReport(p.name, BCP, params, [], grid, ["rotational"], notes, details)
    w = Witness((float(s[i]),), "radial_ratio", S, "sup phi'(s)/s >= 0: no m > 0 with phi'(s) <= -m s")
    return CheckReport(p.name, NONBCP, None, [w], grid, ["rotational"], notes, details)


# -- necessary conditions -------------------------------------------------------------


def necessary_gradient_check(
    p: Profile, radial_grid: int = 32, angular_grid: int = 256, seed: int = 0, min_frac: float = 0.01
) -> CheckReport:
    """<grad phi(w), w> <= 0 everywhere, < 0 almost everywhere, and the two lemma inequalities at v = w/|w|."""
    V = sample_grid(p.domain, radial_grid, angular_grid, seed, min_frac=min_frac)
    G = gradients(p, V)
    ok = np.all(np.isfinite(G), axis=1)
    skipped = int((~ok).sum())
    V, G = V[ok], G[ok]
    s = np.sqrt((V**2).sum(axis=1))
    radial = (V * G).sum(axis=1)
    # with v = w/|w| the symplectic term omega(v, w) vanishes, so both lemma
    # inequalities read <grad phi(w), w>/|w| <= 0
    U = V / s[:, None]
    om = U[:, 0] * V[:, 1] - U[:, 1] * V[:, 0]
    lemma_plus = (G * U).sum(axis=1) + 0.5 * om
    lemma_minus = (G * U).sum(axis=1) - 0.5 * om

    witnesses: list[Witness] = []
    for name, vals, ctx in (
        ("radial_sign", radial, "<grad phi(w), w> > 0"),
        ("lemma_plus", lemma_plus, "<grad phi(w), v> + omega(v, w)/2 > 0 at v = w/|w|"),
        ("lemma_minus", lemma_minus, "<grad phi(w), v> - omega(v, w)/2 > 0 at v = w/|w|"),
    ):
        bad = np.nonzero(vals > WITNESS_THRESHOLD)[0]
        for j in bad[np.argsort(-vals[bad], kind="stable")][:MAX_WITNESSES]:
            witnesses.append(Witness(tuple(V[j]), name, float(vals[j]), ctx))

    flat = np.nonzero(radial >= -WITNESS_THRESHOLD)[0]
    frac = len(flat) / len(V) if len(V) else 0.0
    hard = frac > STRICT_FRACTION
    for j in flat[:MAX_WITNESSES]:
        witnesses.append(
            Witness(tuple(V[j]), "ae_strictness", float(radial[j]), f"<grad phi(w), w> >= 0 on {frac:.4%} of samples", hard)
        )
    verdict = NONBCP if any(w.hard for w in witnesses) else INCONCLUSIVE
    return CheckReport(
        p.name,
        verdict,
        None,
        witnesses,
        _grid_meta(radial_grid, angular_grid, seed, len(V) + skipped, skipped, min_frac=min_frac),
        ["necessary"],
        _skip_note(len(V) + skipped, skipped),
        {"strictness_fraction": frac, "max_radial": float(radial.max()) if len(radial) else math.nan},
    )


def radial_monotone_check(p: Profile, directions: int = 64, steps: int = 200) -> CheckReport:
    """t -> phi(t w) non-increasing on [0, 1] for boundary points w, and phi(0) maximal."""
    if directions < 2 or steps < 2:
        raise CheckUsageError("directions and steps must be >= 2")
    theta = 2.0 * math.pi * np.arange(directions) / directions
    rhat = p.domain.support_radii(theta)
    t = np.linspace(0.0, 1.0, steps)
    X = np.outer(rhat * np.cos(theta), t)
    Y = np.outer(rhat * np.sin(theta), t)
    vals = p.eval_many(np.column_stack([X.ravel(), Y.ravel()])).reshape(X.shape)
    phi0 = float(p.eval_many(np.zeros((1, 2)))[0])
    witnesses = []
    with np.errstate(invalid="ignore"):
        rise = np.diff(vals, axis=1)
    for k, j in zip(*np.nonzero(rise > WITNESS_THRESHOLD)):
        if len(witnesses) >= MAX_WITNESSES:
            break
        witnesses.append(
            Witness((float(X[k, j + 1]), float(Y[k, j + 1])), "radial_monotone", float(rise[k, j]), f"increase at t={t[j + 1]:.6g}")
        )
    with np.errstate(invalid="ignore"):
        above = vals - phi0
    for k, j in zip(*np.nonzero(above > WITNESS_THRESHOLD)):
        if len(witnesses) >= 2 * MAX_WITNESSES:
            break
        witnesses.append(Witness((float(X[k, j]), float(Y[k, j])), "max_at_origin", float(above[k, j]), "phi(v) > phi(0)"))
    skipped = int((~np.isfinite(vals)).sum())
    return CheckReport(
        p.name,
        NONBCP if witnesses else INCONCLUSIVE,
        None,
        witnesses,
        {"radial": steps, "angular": directions, "seed": 0, "points": int(vals.size), "skipped": skipped},
        ["radial_monotone"],
        _skip_note(vals.size, skipped),
        {"phi0": phi0},
    )


DEFAULT_H_GRID = (1e-1, 3e-2, 1e-2, 3e-3, 1e-3)


def origin_regularity_check(p: Profile, h_grid=DEFAULT_H_GRID, directions: int = 64) -> CheckReport:
    """R(h) = max_u |phi(h u) - phi(0)| / h should go to 0 (differentiable at 0 with zero gradient).

    Steps are taken relative to the inradius of K.
    """
    h = np.asarray(h_grid, dtype=np.float64)
    if len(h) < 2 or np.any(h <= 0) or np.any(np.diff(h) >= 0):
        raise CheckUsageError("h grid must be positive, strictly decreasing, with at least two steps")
    scale = min(1.0, 0.5 * p.domain.inradius)
    steps = h * scale
    theta = 2.0 * math.pi * np.arange(directions) / directions
    U = np.column_stack([np.cos(theta), np.sin(theta)])
    phi0 = float(p.eval_many(np.zeros((1, 2)))[0])
    R = np.empty(len(steps))
    for k, hk in enumerate(steps):
        vals = p.eval_many(hk * U)
        R[k] = np.nanmax(np.abs(vals - phi0)) / hk
    use = R > 0
    slope = _log_slope(steps[use], R[use]) if use.sum() >= 2 else math.inf
    witnesses = []
    if use.sum() >= 2 and slope <= 0.1:
        j = int(np.nonzero(use)[0][-1])
        witnesses.append(
            Witness((float(steps[j]), 0.0), "origin_regularity", float(R[j]), f"R(h) does not decay (log-log slope {slope:.4g})")
        )
    return CheckReport(
        p.name,
        NONBCP if witnesses else INCONCLUSIVE,
        None,
        witnesses,
        {"radial": len(steps), "angular": directions, "seed": 0, "points": int(len(steps) * directions), "skipped": 0},
        ["origin_regularity"],
        [],
        {"h": steps.tolist(), "R": R.tolist(), "slope": slope if math.isfinite(slope) else None},
    )


# -- second order ---------------------------------------------------------------


def _fd_hessian(p: Profile, h: float) -> np.ndarray:
    pts = np.array(
        [[0, 0], [h, 0], [-h, 0], [0, h], [0, -h], [h, h], [h, -h], [-h, h], [-h, -h]], dtype=np.float64
    )
    f = p.eval_many(pts)
    if not np.all(np.isfinite(f)):
        raise CheckUsageError("phi cannot be evaluated near 0 at this step")
    hxx = (f[1] - 2 * f[0] + f[2]) / (h * h)
    hyy = (f[3] - 2 * f[0] + f[4]) / (h * h)
    hxy = (f[5] - f[6] - f[7] + f[8]) / (4 * h * h)
    return np.array([[hxx, hxy], [hxy, hyy]])


def hessian_at_origin(p: Profile, h: float = 1e-4) -> np.ndarray:
    """Central differences at steps h and h/2 combined by Richardson extrapolation."""
    if not (1e-6 < h < 1e-2):
        raise CheckUsageError("h must lie in (1e-6, 1e-2)")
    return (4.0 * _fd_hessian(p, h / 2) - _fd_hessian(p, h)) / 3.0


def hessian_check(
    p: Profile,
    h: float = 1e-4,
    smooth: bool = False,
    hessian_differentiable: bool = False,
    radial_grid: int = 32,
    angular_grid: int = 256,
    seed: int = 0,
    points=(),
) -> CheckReport:
    """Second-order necessary conditions for C^2 profiles.

    ``smooth`` asserts that phi is C^2 on int(K); ``hessian_differentiable``
    asserts that the Hessian is differentiable at 0. Without the flags the
    conditions are still evaluated but never yield NONBCP.
    """
    H = hessian_at_origin(p, h)
    lam = np.sort(np.linalg.eigvalsh(H))[::-1]
    l1, l2 = float(lam[0]), float(lam[1])
    candidates: list[Witness] = []
    if l1 > EIGEN_DEADBAND:
        candidates.append(Witness((0.0, 0.0), "hessian_semidefinite", l1, "largest Hessian eigenvalue at 0 is positive"))
    elif l1 >= -EIGEN_DEADBAND and hessian_differentiable:
        candidates.append(Witness((0.0, 0.0), "hessian_definite", l1, "Hessian at 0 is not definite negative"))

    V = sample_grid(p.domain, radial_grid, angular_grid, seed, min_frac=0.01)
    extra = np.asarray(points, dtype=np.float64).reshape(-1, 2)
    V = np.vstack([extra, V])
    G = gradients(p, V)
    ok = np.all(np.isfinite(G), axis=1)
    radial = np.where(ok, (V * G).sum(axis=1), np.nan)
    flat = np.nonzero(ok & (radial >= -WITNESS_THRESHOLD))[0]
    for j in flat[:MAX_WITNESSES]:
        candidates.append(Witness(tuple(V[j]), "strict_radial", float(radial[j]), "<grad phi(w), w> >= 0 at a C^2 point"))

    notes = []
    if candidates and not smooth:
        notes.append("violations found but the profile is not declared C^2; verdict withheld")
        witnesses = [Witness(w.point, w.condition, w.value, w.context, False) for w in candidates]
    else:
        witnesses = candidates
    verdict = NONBCP if any(w.hard for w in witnesses) else INCONCLUSIVE
    return CheckReport(
        p.name,
        verdict,
        None,
        witnesses,
        _grid_meta(radial_grid, angular_grid, seed, len(V), int((~ok).sum()), h=h),
        ["hessian"],
        notes,
        {"hessian": H.tolist(), "eigenvalues": [l1, l2], "smooth": smooth, "hessian_differentiable": hessian_differentiable},
    )


# -- strip criterion -------------------------------------------------------------------


def _phi_at(p: Profile, pts) -> np.ndarray:
    pts = np.asarray(pts, dtype=np.float64).reshape(-1, 2)
    for x, y in pts.tolist():
        if not p.domain.contains(PlanarVector(x, y)):
            raise CheckUsageError(f"strip point ({x:.6g}, {y:.6g}) is outside K")
    return p.eval_many(pts)


def strip_gap_constants(p: Profile, w: StripWitness) -> np.ndarray:
    """a_n = (phi(-t_n^- v) - phi(t_n^+ v)) / (t_n^+ + t_n^-) for each listed n."""
    v = np.array(w.v.as_tuple())
    tp, tm = np.array(w.t_plus), np.array(w.t_minus)
    up = _phi_at(p, tp[:, None] * v)
    down = _phi_at(p, -tm[:, None] * v)
    return (down - up) / (tp + tm)


def strip_witness_check(p: Profile, w: StripWitness, grid: int = 200) -> bool:
    """True iff every listed n satisfies the gap inequality (margin 1e-12) and its strip avoids B."""
    v = np.array(w.v.as_tuple())
    tp, tm = np.array(w.t_plus), np.array(w.t_minus)
    up = _phi_at(p, tp[:, None] * v)
    down = _phi_at(p, -tm[:, None] * v)
    _phi_at(p, [w.T * v])
    if not np.all(up - down < -w.a * (tp + tm) - 1e-12):
        return False
    for t0, f0 in zip(tp.tolist(), up.tolist()):
        ts = np.linspace(t0, w.T, grid)
        vals = p.eval_many(ts[:, None] * v)
        if not np.all(vals <= f0 + 1e-12):
            return False
    return True


def strip_report(p: Profile, w: StripWitness, grid: int = 200, rel_spread: float = 0.1) -> CheckReport:
    """Wrap ``strip_witness_check``; NONBCP only when a_n is stable over the last three scales."""
    holds = strip_witness_check(p, w, grid)
    a_n = strip_gap_constants(p, w)
    last = a_n[-3:]
    stable = bool(holds and len(a_n) >= 3 and np.all(last > 0) and (last.max() - last.min()) <= rel_spread * last.max())
    witnesses, notes = [], []
    if holds:
        pt = (w.t_plus[-1] * w.v.x, w.t_plus[-1] * w.v.y)
        witnesses.append(Witness(pt, "strip_criterion", float(a_n[-1]), "gap and strip hold on the truncated sequence", stable))
        if not stable:
            notes.append("strip hypotheses hold on a finite truncation only; evidence, not a verdict")
    return CheckReport(
        p.name,
        NONBCP if stable else INCONCLUSIVE,
        None,
        witnesses,
        {"radial": grid, "angular": 1, "seed": 0, "points": len(w.t_plus), "skipped": 0},
        ["strip"],
        notes,
        {"holds": holds, "a_n": a_n.tolist(), "stable": stable},
    )


# -- aggregation ------------------------------------------------------------------


def verdict_aggregate(reports) -> CheckReport:
    reports = list(reports)
    if not reports:
        raise CheckUsageError("no reports to aggregate")
    names = {r.profile for r in reports}
    if len(names) != 1:
        raise CheckUsageError(f"reports concern different profiles: {sorted(names)}")
    certified = [r for r in reports if r.verdict == BCP]
    violated = [r for r in reports if r.verdict == NONBCP]
    if certified and violated:
        raise VerdictConflictError(
            f"{reports[0].profile}: certified by {certified[0].checks_run} but violated in {violated[0].checks_run}"
        )
    verdict = NONBCP if violated else BCP if certified else INCONCLUSIVE
    params = certified[0].params if certified else None
    witnesses = [w for r in reports for w in r.witnesses]
    checks = [c for r in reports for c in r.checks_run]
    notes = [n for r in reports for n in r.notes]
    details = {c: r.verdict for r in reports for c in r.checks_run}
    grid = dict(reports[0].grid)
    return CheckReport(reports[0].profile, verdict, params, witnesses, grid, checks, notes, {"verdicts": details})


def run_all(
    p: Profile,
    seed: int = 0,
    radial_grid: int = 64,
    angular_grid: int = 256,
    smooth: bool = False,
    hessian_differentiable: bool = False,
) -> CheckReport:
    """Every applicable checker, aggregated."""
    reports = [sufficient_check(p, radial_grid=radial_grid, angular_grid=angular_grid, seed=seed)]
    if p.kind == "radial" and isinstance(p.domain, Disc):
        reports.append(rotational_check(p))
    reports.append(necessary_gradient_check(p, angular_grid=angular_grid, seed=seed))
    reports.append(radial_monotone_check(p))
    reports.append(origin_regularity_check(p))
    try:
        reports.append(
            hessian_check(p, smooth=smooth, hessian_differentiable=hessian_differentiable, angular_grid=angular_grid, seed=seed)
        )
    except CheckUsageError as exc:
        reports.append(CheckReport(p.name, INCONCLUSIVE, None, [], {}, ["hessian"], [str(exc)]))
    return verdict_aggregate(reports)
