"""Involutive isometries, their fixed sets, and an identity checker.

All involutions built here are linear or anti-linear in chart coordinates, so
the differential at any point is the map itself.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import IndexOutOfRange, InvalidQ, UnsupportedSpace
from .geometry import (
    ModelSpace,
    apply_complex_structure,
    bdi_domain,
    random_points,
    quadric_chart,
    to_complex,
    to_real,
)
from .report import VerificationReport

ANTI_HOLOMORPHIC = "anti_holomorphic"
HOLOMORPHIC = "holomorphic"
NOT_APPLICABLE = "not_applicable"


def projection_begin(x, q: int) -> np.ndarray:
    """Keep the first ``q`` components, zero the rest."""
    x = np.asarray(x)
    n = x.shape[-1]
    if not 0 <= q <= n:
        raise IndexOutOfRange(f"q={q} outside 0..{n}")
    out = np.zeros_like(x)
    out[..., :q] = x[..., :q]
    return out


def projection_end(x, q: int) -> np.ndarray:
    """Keep the last ``n - q`` components, zero the first ``q``."""
    x = np.asarray(x)
    n = x.shape[-1]
    if not 0 <= q <= n:
        raise IndexOutOfRange(f"q={q} outside 0..{n}")
    out = np.zeros_like(x)
    out[..., q:] = x[..., q:]
    return out


@dataclass(frozen=True)
class FixedSetDescriptor:
    membership: Callable[[np.ndarray], np.ndarray]
    tangent_projector: Callable[[np.ndarray, np.ndarray], np.ndarray]
    codim: int
    tol: float = 1e-12


@dataclass(frozen=True)
class Involution:
    name: str
    space: ModelSpace
    apply: Callable[[np.ndarray], np.ndarray]
    differential: Callable[[np.ndarray, np.ndarray], np.ndarray]
    holomorphy_sign: str
    fixed_set: FixedSetDescriptor
    linear: bool = True
    flags: tuple = field(default=())

    def __call__(self, p):
        return self.apply(p)

    def matrix(self, p=None) -> np.ndarray:
        """Matrix of the differential (columns are images of coordinate vectors)."""
        d = self.space.real_dim
        p = np.zeros(d) if p is None else p
        return np.stack([self.differential(p, e) for e in np.eye(d)], axis=-1)

    def midpoint_projection(self, p):
        """``(p + sigma(p)) / 2``: a fixed point for linear involutions."""
        p = np.asarray(p, dtype=float)
        return 0.5 * (p + self.apply(p))


def _coordinate_reflection(name, space, signs, sign_kind, flags=()) -> Involution:
    """Involution ``p -> signs * p`` with fixed set ``{p_i = 0 where signs_i = -1}``."""
    signs = np.asarray(signs, dtype=float)
    flipped = signs < 0

    def apply(p):
        return np.asarray(p, dtype=float) * signs

    def differential(p, v):
        return np.asarray(v, dtype=float) * signs

    def membership(p):
        p = np.asarray(p, dtype=float)
        return np.all(np.abs(p[..., flipped]) <= 1e-12, axis=-1) & space.domain_contains(p)

    def tangent_projector(p, v):
        v = np.array(v, dtype=float)
        v[..., flipped] = 0.0
        return v

    fixed = FixedSetDescriptor(membership, tangent_projector, int(flipped.sum()))
    return Involution(name, space, apply, differential, sign_kind, fixed, True, tuple(flags))


def make_sigma_q(n: int, q: int) -> Involution:
    """``(X1; X2) -> (-p_b(X1) + p_e(X1); p_b(X2) - p_e(X2))`` on the BD I domain.

    Accepts ``0 <= q <= n``; values ``q > n // 2`` give fixed sets congruent to
    ``n - q`` and are flagged ``congruent_duplicate``.
    """
    if not 0 <= q <= n:
        raise InvalidQ(f"sigma_q needs 0 <= q <= n, got q={q}, n={n}")
    space = bdi_domain(n)

    def apply(p):
        p = np.asarray(p, dtype=float)
        x1, x2 = p[..., :n], p[..., n:]
        return np.concatenate(
            [
                -projection_begin(x1, q) + projection_end(x1, q),
                projection_begin(x2, q) - projection_end(x2, q),
            ],
            axis=-1,
        )

    def differential(p, v):
        return apply(v)

    def membership(p):
        p = np.asarray(p, dtype=float)
        x1, x2 = p[..., :n], p[..., n:]
        zero = np.all(projection_begin(x1, q) == 0, axis=-1) & np.all(
            projection_end(x2, q) == 0, axis=-1
        )
        return zero & space.domain_contains(p)

    def tangent_projector(p, v):
        v = np.asarray(v, dtype=float)
        return np.concatenate(
            [projection_end(v[..., :n], q), projection_begin(v[..., n:], q)], axis=-1
        )

    flags = ("congruent_duplicate",) if q > n // 2 else ()
    fixed = FixedSetDescriptor(membership, tangent_projector, n)
    return Involution(f"sigma_{q}[bdi {n}]", space, apply, differential, ANTI_HOLOMORPHIC,
                      fixed, True, flags)


def make_tau_q(n: int, q: int, branch: int = 1) -> Involution:
    """``zeta -> -p_b(chi) + p_e(chi) + i (p_b(v) - p_e(v))`` on a hyperquadric chart."""
    if not 1 <= q <= n:
        raise InvalidQ(f"tau_q needs 1 <= q <= n, got q={q}, n={n}")
    space = quadric_chart(n, branch)

    def apply(p):
        zeta = to_complex(p)
        chi, v = zeta.real, zeta.imag
        out = (-projection_begin(chi, q) + projection_end(chi, q)) + 1j * (
            projection_begin(v, q) - projection_end(v, q)
        )
        return to_real(out)

    def differential(p, v):
        return apply(v)

    def membership(p):
        zeta = to_complex(p)
        zero = np.all(projection_begin(zeta.real, q) == 0, axis=-1) & np.all(
            projection_end(zeta.imag, q) == 0, axis=-1
        )
        return zero & space.domain_contains(p)

    def tangent_projector(p, v):
        xi = to_complex(v)
        return to_real(projection_end(xi.real, q) + 1j * projection_begin(xi.imag, q))

    fixed = FixedSetDescriptor(membership, tangent_projector, n)
    return Involution(f"tau_{q}[quadric {n} V{branch}]", space, apply, differential,
                      ANTI_HOLOMORPHIC, fixed, True)


def make_conjugation(space: ModelSpace) -> Involution:
    """Coordinatewise complex conjugation ``z -> conj(z)`` in the chart."""
    if space.kind not in ("euclidean_c", "chyp_ball", "cproj"):
        raise UnsupportedSpace(f"conjugation is not defined here for {space.label}")
    signs = np.tile([1.0, -1.0], space.n)
    return _coordinate_reflection(f"conj[{space.label}]", space, signs, ANTI_HOLOMORPHIC)


def make_reflection(space: ModelSpace, axes) -> Involution:
    """Negate the listed real coordinates (geodesic reflection for the flat and
    conformal charts used here, which are invariant under coordinate sign flips)."""
    signs = np.ones(space.real_dim)
    signs[list(np.atleast_1d(axes))] = -1.0
    sign_kind = NOT_APPLICABLE if not space.is_complex else (
        ANTI_HOLOMORPHIC if len(np.atleast_1d(axes)) % 2 == 1 else HOLOMORPHIC
    )
    return _coordinate_reflection(f"reflect{list(np.atleast_1d(axes))}[{space.label}]", space,
                                  signs, sign_kind)


def make_negation(space: ModelSpace) -> Involution:
    """``y -> -y`` on a flat target; fixed set is the origin."""
    return _coordinate_reflection(f"neg[{space.label}]", space, -np.ones(space.real_dim),
                                  NOT_APPLICABLE)


# ---------------------------------------------------------------------------


DEFAULT_TOLERANCES = {
    "involutivity": 1e-12,
    "isometry": 1e-10,
    "holomorphy": 1e-10,
    "fixed_set": 1e-12,
    "eigenvalues": 1e-10,
}


def verify_involution(
    inv: Involution,
    samples: int = 200,
    tolerances: Optional[dict] = None,
    rng: Optional[np.random.Generator] = None,
) -> VerificationReport:
    """Check involutivity, isometry, (anti-)holomorphy and the fixed-set descriptor
    on random samples.  Failures are reported, never raised."""
    if samples < 1:
        raise ValueError("samples must be >= 1")
    tol = dict(DEFAULT_TOLERANCES, **(tolerances or {}))
    rng = np.random.default_rng(0) if rng is None else rng
    space = inv.space
    d = space.real_dim
    rep = VerificationReport(f"involution:{inv.name}", kind="verify_involution")

    pts = random_points(space, samples, rng)
    images = inv.apply(pts)
    rep.hypothesis("image_in_domain", bool(np.all(space.domain_contains(images))))
    rep.add("involutivity", np.max(np.abs(inv.apply(images) - pts), axis=-1),
            tol["involutivity"])

    v = rng.normal(size=(samples, d))
    w = rng.normal(size=(samples, d))
    dv, dw = inv.differential(pts, v), inv.differential(pts, w)
    if space.metric is not None:
        g0 = space.metric.eval(pts)
        g1 = space.metric.eval(images)
        before = np.einsum("si,sij,sj->s", v, g0, w)
        after = np.einsum("si,sij,sj->s", dv, g1, dw)
        scale = np.sqrt(np.einsum("si,sij,sj->s", v, g0, v) * np.einsum("si,sij,sj->s", w, g0, w))
        rep.add("isometry", np.abs(after - before) / scale, tol["isometry"])

    if inv.holomorphy_sign != NOT_APPLICABLE:
        jv = apply_complex_structure(space, pts, v)
        lhs = inv.differential(pts, jv)
        rhs = apply_complex_structure(space, images, dv)
        sign = -1.0 if inv.holomorphy_sign == ANTI_HOLOMORPHIC else 1.0
        rep.add("holomorphy", np.max(np.abs(lhs - sign * rhs), axis=-1), tol["holomorphy"])

    # fixed-set consistency: midpoints are fixed and recognised; members are fixed
    mids = inv.midpoint_projection(pts)
    member = inv.fixed_set.membership(mids)
    rep.add("fixed_set_membership", (~member).astype(float), 0.5)
    rep.add("fixed_set", np.max(np.abs(inv.apply(mids) - mids), axis=-1), tol["fixed_set"])

    # differential at fixed points: eigenvalues +-1 with +1 multiplicity d - codim
    eig_res, mult_res = [], []
    for m in mids[: min(samples, 20)]:
        a = inv.matrix(m)
        ev = np.linalg.eigvals(a)
        eig_res.append(np.max(np.minimum(np.abs(ev - 1), np.abs(ev + 1))))
        plus = int(np.sum(np.abs(ev - 1) < 1e-8))
        mult_res.append(abs(plus - (d - inv.fixed_set.codim)))
        # tangent projector must act as identity on the +1 eigenspace
        proj = np.stack([inv.fixed_set.tangent_projector(m, e) for e in np.eye(d)], axis=-1)
        eig_res.append(np.max(np.abs(proj - 0.5 * (np.eye(d) + a))))
    rep.add("eigenvalues", eig_res, tol["eigenvalues"])
    rep.add("plus_multiplicity", mult_res, 0.5)
    return rep.finalize()
