"""Recursive real-form chains ``M_1 < M_2 < ... < M_n`` and their verifiers.

Every level in the five implemented families is a coordinate slice of the
ambient chart: ``M_k`` is the set of chart points whose coordinates outside
``free_coords`` vanish.  Matrix families embed ``M_{2,k}`` into ``M_{2,n}`` by
zero-padding the trailing columns.  The hypersurface ``H_l`` of ``M_l`` is cut
out by one further chart coordinate.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import InvalidFamily, InvalidQ, NoMetricAvailable, NTooSmall
from .geometry import (
    ModelSpace,
    apply_complex_structure,
    bdi_domain,
    chyp_ball,
    cproj,
    euclidean_c,
    geodesic_flow,
    quadric_chart,
    random_points,
)
from .involutions import Involution, make_conjugation, make_sigma_q, make_tau_q
from .report import SKIPPED, VerificationReport

FAMILIES = ("euclidean", "hermitian_hyperbolic", "complex_projective", "quadric_dual", "quadric")
METRIC_FAMILIES = ("euclidean", "hermitian_hyperbolic", "complex_projective")


@dataclass(frozen=True)
class ChainLevel:
    level_dim: int
    free_coords: tuple[int, ...]
    hypersurface_coord: Optional[int]
    ambient_dim: int

    @property
    def fixed_coords(self) -> np.ndarray:
        mask = np.ones(self.ambient_dim, dtype=bool)
        mask[list(self.free_coords)] = False
        return np.flatnonzero(mask)

    def submanifold_membership(self, p, tol: float = 0.0):
        p = np.asarray(p, dtype=float)
        return np.all(np.abs(p[..., self.fixed_coords]) <= tol, axis=-1)

    def tangent_basis(self, p=None) -> np.ndarray:
        return np.eye(self.ambient_dim)[list(self.free_coords)]

    def hypersurface_membership(self, p, tol: float = 0.0):
        p = np.asarray(p, dtype=float)
        on = np.abs(p[..., self.hypersurface_coord]) <= tol
        return self.submanifold_membership(p, tol) & on

    def defining_function(self, p):
        return np.asarray(p, dtype=float)[..., self.hypersurface_coord]

    def drift(self, p) -> np.ndarray:
        """Chart distance from the slice."""
        p = np.asarray(p, dtype=float)
        return np.linalg.norm(p[..., self.fixed_coords], axis=-1)

    def project(self, p) -> np.ndarray:
        p = np.array(p, dtype=float)
        p[..., self.fixed_coords] = 0.0
        return p


@dataclass(frozen=True)
class RecursiveChain:
    family: str
    n: int
    ambient: ModelSpace
    real_form: Involution
    levels: tuple[ChainLevel, ...]
    q: Optional[int] = None
    notes: tuple[str, ...] = field(default=())

    def level(self, k: int) -> ChainLevel:
        return self.levels[k - 1]

    def sample(self, k: int, count: int, rng: np.random.Generator) -> np.ndarray:
        """Random chart points of ``M_k`` (inside the ambient domain)."""
        lev = self.level(k)
        pts = lev.project(random_points(self.ambient, count, rng, radius=0.9))
        bad = ~self.ambient.domain_contains(pts)
        while np.any(bad):
            pts[bad] = lev.project(random_points(self.ambient, int(bad.sum()), rng, radius=0.9))
            bad = ~self.ambient.domain_contains(pts)
        return pts

    def sample_hypersurface(self, k: int, count: int, rng: np.random.Generator) -> np.ndarray:
        pts = self.sample(k, count, rng)
        pts[..., self.level(k).hypersurface_coord] = 0.0
        return pts


def _complex_levels(n: int, hyper_part: int) -> tuple[ChainLevel, ...]:
    """Levels of a chart with interleaved complex coordinates; ``H_l`` is
    ``Im z_l = 0`` (hyper_part=1)."""
    levels = []
    for k in range(1, n + 1):
        free = tuple(range(2 * k))
        levels.append(ChainLevel(k, free, 2 * (k - 1) + hyper_part, 2 * n))
    return tuple(levels)


def build_chain(family: str, n: int, q: Optional[int] = None, branch: int = 1) -> RecursiveChain:
    """Build the chain for one of the five recursive families.

    ``levels`` holds ``M_1 .. M_{n-1}`` followed by the ambient itself as level
    ``n``, so the hypersurface used in the top induction step is available.
    """
    if family not in FAMILIES:
        raise InvalidFamily(f"unknown family {family!r}; expected one of {FAMILIES}")
    if n < 2:
        raise NTooSmall(f"chains need n >= 2, got {n}")
    needs_q = family in ("quadric_dual", "quadric")
    if needs_q and q is None:
        raise InvalidQ(f"family {family} needs q")
    if not needs_q and q is not None:
        raise InvalidQ(f"family {family} takes no q")

    if family == "euclidean":
        space = euclidean_c(n)
        return RecursiveChain(family, n, space, make_conjugation(space), _complex_levels(n, 1))
    if family == "hermitian_hyperbolic":
        space = chyp_ball(n)
        return RecursiveChain(family, n, space, make_conjugation(space), _complex_levels(n, 1))
    if family == "complex_projective":
        space = cproj(n)
        return RecursiveChain(family, n, space, make_conjugation(space), _complex_levels(n, 1))
    if family == "quadric_dual":
        if not 0 <= q <= n // 2:
            raise InvalidQ(f"quadric_dual needs 0 <= q <= [n/2], got q={q}")
        space = bdi_domain(n)
        levels = []
        for k in range(1, n + 1):
            free = tuple(range(k)) + tuple(range(n, n + k))
            # x_{1l} = 0 for l <= q, x_{2l} = 0 for l > q
            hyper = (k - 1) if k <= q else (n + k - 1)
            levels.append(ChainLevel(k, free, hyper, 2 * n))
        return RecursiveChain(family, n, space, make_sigma_q(n, q), tuple(levels), q)
    # quadric
    if not 1 <= q <= n:
        raise InvalidQ(f"quadric needs 1 <= q <= n, got q={q}")
    space = quadric_chart(n, branch)
    levels = []
    for k in range(1, n + 1):
        free = tuple(range(2 * k))
        # chi^l = 0 for l <= q, v^l = 0 for l > q
        hyper = 2 * (k - 1) + (0 if k <= q else 1)
        levels.append(ChainLevel(k, free, hyper, 2 * n))
    notes = ("single chart V%d; closure across w^1 = 0 not represented" % branch,)
    return RecursiveChain(family, n, space, make_tau_q(n, q, branch), tuple(levels), q, notes)


# ---------------------------------------------------------------------------
# verification


def check_chain_realforms(
    chain: RecursiveChain, trials: int = 100, rng: Optional[np.random.Generator] = None
) -> VerificationReport:
    """Per-level algebraic checks of the chain axioms on random samples.

    Residual names are ``L{k}:<check>``; see :data:`CHAIN_CHECKS`.
    """
    rng = np.random.default_rng(0) if rng is None else rng
    sigma = chain.real_form
    d = chain.ambient.real_dim
    rep = VerificationReport(f"chain:{chain.family}:n={chain.n}", kind="chain_check")
    for k in range(1, chain.n + 1):
        lev = chain.level(k)
        pts = chain.sample(k, trials, rng)
        tag = f"L{k}"
        rep.add(f"{tag}:in_domain", (~chain.ambient.domain_contains(pts)).astype(float), 0.5)
        if k < chain.n:
            nxt = chain.level(k + 1)
            rep.add(f"{tag}:nesting", (~nxt.submanifold_membership(pts)).astype(float), 0.5)
        # sigma maps M_k to itself
        rep.add(f"{tag}:sigma_invariance", lev.drift(sigma.apply(pts)), 1e-12)
        # fixed points of sigma inside M_k are exactly B cap M_k
        mids = sigma.midpoint_projection(pts)
        fixed = np.max(np.abs(sigma.apply(mids) - mids), axis=-1)
        in_b = sigma.fixed_set.membership(mids) & lev.submanifold_membership(mids)
        rep.add(f"{tag}:fixed_set", fixed, 1e-12)
        rep.add(f"{tag}:fixed_set_membership", (~in_b).astype(float), 0.5)
        moved = np.max(np.abs(sigma.apply(pts) - pts), axis=-1) > 1e-12
        claimed = sigma.fixed_set.membership(pts)
        rep.add(f"{tag}:fixed_iff_member", (moved == claimed).astype(float), 0.5)
        # real form of M_k: restricted differential anti-commutes with J and has
        # a +1 eigenspace of half the real dimension
        basis = lev.tangent_basis()
        a = np.stack([sigma.differential(pts[0], b) for b in basis])
        restricted = a @ basis.T
        ev = np.linalg.eigvals(restricted)
        rep.add(f"{tag}:realform_dimension", [abs(int(np.sum(np.abs(ev - 1) < 1e-9)) - k)], 0.5)
        jb = apply_complex_structure(chain.ambient, pts[0], basis)
        rep.add(f"{tag}:j_invariant_level", [np.max(np.abs(jb @ np.eye(d)[list(lev.fixed_coords)].T))]
                if len(lev.fixed_coords) else [0.0], 1e-12)
        anti = sigma.differential(pts[0], jb) + apply_complex_structure(
            chain.ambient, pts[0], np.stack([sigma.differential(pts[0], b) for b in basis])
        )
        rep.add(f"{tag}:anti_holomorphic", np.abs(anti), 1e-12)

        # hypersurface H_k: sigma-invariant, rank-1 defining equation, contains
        # (B cap M_k) and M_{k-1}
        hpts = chain.sample_hypersurface(k, trials, rng)
        himg = sigma.apply(hpts)
        rep.add(f"{tag}:H_sigma_invariance",
                np.abs(lev.defining_function(himg)) + lev.drift(himg), 1e-12)
        grad = _defining_gradient(lev, hpts[0])
        rank = np.linalg.matrix_rank(grad[None, :], tol=1e-8)
        rep.add(f"{tag}:H_rank", [abs(rank - 1)], 0.5)
        rep.add(f"{tag}:H_contains_realform", np.abs(lev.defining_function(mids)), 1e-12)
        if k > 1:
            lower = chain.sample(k - 1, trials, rng)
            rep.add(f"{tag}:H_contains_lower", np.abs(lev.defining_function(lower)), 1e-12)
    return rep.finalize()


def _defining_gradient(lev: ChainLevel, p, step: float = 1e-6) -> np.ndarray:
    """Gradient of the defining function along the level's tangent basis."""
    basis = lev.tangent_basis()
    return np.array([
        (lev.defining_function(p + step * b) - lev.defining_function(p - step * b)) / (2 * step)
        for b in basis
    ])


def submanifold_drift(space: ModelSpace, points, tangents, drift_fn, t_end=0.5, dt=0.01):
    """Integrate ambient geodesics and return max drift (per trial) from a
    submanifold described by ``drift_fn`` along with the max relative speed error."""
    times, xs, vs, left, _ = geodesic_flow(space, points, tangents, t_end, dt)
    drift = np.max(drift_fn(xs), axis=0)
    g = space.metric.eval(xs)
    speed = np.einsum("tmi,tmij,tmj->tm", vs, g, vs)
    speed_err = np.max(np.abs(speed / speed[0] - 1.0), axis=0)
    return drift, speed_err, left


def check_totally_geodesic(
    chain: RecursiveChain,
    level: int,
    trials: int = 100,
    rng: Optional[np.random.Generator] = None,
    t_end: float = 0.5,
    dt: float = 0.01,
    tol: float = 1e-6,
) -> VerificationReport:
    """Shoot ambient geodesics tangent to ``M_level`` and measure the drift off it."""
    rng = np.random.default_rng(0) if rng is None else rng
    rep = VerificationReport(f"geodesic:{chain.family}:L{level}", kind="chain_check")
    if chain.family not in METRIC_FAMILIES:
        rep.notes.append(f"{chain.family}: no metric implemented, skipped by design")
        return rep.finalize(SKIPPED)
    lev = chain.level(level)
    pts = chain.sample(level, trials, rng)
    if chain.family == "hermitian_hyperbolic":
        pts = pts * 0.9  # keep samples away from the ideal boundary
    basis = lev.tangent_basis()
    coeff = rng.normal(size=(trials, len(basis)))
    tangents = coeff @ basis
    tangents /= np.linalg.norm(tangents, axis=-1, keepdims=True)
    drift, speed_err, left = submanifold_drift(chain.ambient, pts, tangents, lev.drift, t_end, dt)
    rep.hypothesis("stays_in_chart", not bool(np.any(left)))
    rep.add("drift", drift, tol)
    rep.add("speed_conservation", speed_err, 1e-6)
    return rep.finalize()


def affine_plane_drift(
    space: ModelSpace, base, span, trials: int = 20, rng=None, t_end=0.5, dt=0.01
) -> np.ndarray:
    """Drift of geodesics started tangent to the affine plane ``base + span``.

    Used as a negative control: a generic real 2-plane through a point of a
    curved space is not totally geodesic, so the drift must be visible.
    """
    rng = np.random.default_rng(0) if rng is None else rng
    base = np.asarray(base, dtype=float)
    q, _ = np.linalg.qr(np.asarray(span, dtype=float).T)
    proj = q @ q.T

    def drift_fn(x):
        rel = x - base
        return np.linalg.norm(rel - rel @ proj, axis=-1)

    coeff = rng.normal(size=(trials, q.shape[1]))
    tangents = coeff @ q.T
    tangents /= np.linalg.norm(tangents, axis=-1, keepdims=True)
    points = np.repeat(base[None], trials, axis=0)
    drift, _, _ = submanifold_drift(space, points, tangents, drift_fn, t_end, dt)
    return drift


def restriction_cr_residual(chain: RecursiveChain, f, level: int, spacing: float = 1e-3,
                            samples: int = 50, rng=None) -> np.ndarray:
    """Discrete Cauchy-Riemann residual ``|(d_x + i d_y) f| / 2`` of ``f``
    restricted to ``M_level``, per complex direction of the level.

    ``f`` maps ambient chart points ``(..., 2n)`` to complex values.  Central
    differences give an O(spacing^2) residual for holomorphic ``f``.
    """
    rng = np.random.default_rng(0) if rng is None else rng
    lev = chain.level(level)
    pts = chain.sample(level, samples, rng)
    out = []
    for j in range(level):
        ex = np.zeros(chain.ambient.real_dim)
        ey = np.zeros(chain.ambient.real_dim)
        ex[2 * j], ey[2 * j + 1] = spacing, spacing
        dfx = (f(pts + ex) - f(pts - ex)) / (2 * spacing)
        dfy = (f(pts + ey) - f(pts - ey)) / (2 * spacing)
        out.append(np.abs(dfx + 1j * dfy) / 2)
    assert lev.level_dim == level
    return np.max(np.stack(out), axis=0)


CHAIN_CHECKS = (
    "in_domain",
    "nesting",
    "sigma_invariance",
    "fixed_set",
    "fixed_set_membership",
    "fixed_iff_member",
    "realform_dimension",
    "j_invariant_level",
    "anti_holomorphic",
    "H_sigma_invariance",
    "H_rank",
    "H_contains_realform",
    "H_contains_lower",
)


def chain_rows(chain: RecursiveChain, trials: int = 100, rng=None, tol: float = 1e-6):
    """One row per (level, check): the table printed by ``chain-check``."""
    rng = np.random.default_rng(0) if rng is None else rng
    alg = check_chain_realforms(chain, trials, rng)
    rows = []
    for name, res in alg.residuals.items():
        lvl, check = name.split(":", 1)
        rows.append({"level": int(lvl[1:]), "check": check, "residual": res.max,
                     "tolerance": res.tolerance, "status": "pass" if res.ok else "fail"})
    for k in range(1, chain.n + 1):
        geo = check_totally_geodesic(chain, k, trials, rng, tol=tol)
        if geo.conclusion_status == SKIPPED:
            rows.append({"level": k, "check": "totally_geodesic", "residual": 0.0,
                         "tolerance": tol, "status": SKIPPED})
            continue
        r = geo.residuals["drift"]
        rows.append({"level": k, "check": "totally_geodesic", "residual": r.max,
                     "tolerance": tol, "status": geo.conclusion_status})
    rows.sort(key=lambda row: row["level"])
    return rows


def require_metric_family(chain: RecursiveChain):
    if chain.family not in METRIC_FAMILIES:
        raise NoMetricAvailable(f"{chain.family} has no implemented metric")
