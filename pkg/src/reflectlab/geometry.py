"""Chart-based model spaces: metrics, Christoffel symbols, complex structures, geodesics.

Complex charts are stored as real coordinates with real and imaginary parts
interleaved, ``(x1, y1, x2, y2, ...)``, so a single tangent-vector layout serves
real and complex spaces alike.  Every metric and Christoffel routine is
vectorised over leading axes: a ``(..., d)`` array of points yields
``(..., d, d)`` metrics and ``(..., d, d, d)`` Christoffel arrays.

Conventions
-----------
* ``chyp_ball(n)``: ball of constant holomorphic curvature -1, Hermitian form
  ``4 [(1-|z|^2) I + conj(z) z^T] / (1-|z|^2)^2``.  For ``n = 1`` this is the
  Poincare disk ``4 |dz|^2 / (1-|z|^2)^2``.
* ``cproj(n)``: Fubini-Study metric in the affine chart ``z^0 != 0`` with scale
  ``FS_SCALE = 4``, i.e. ``4 [(1+|w|^2) I - conj(w) w^T] / (1+|w|^2)^2``; for
  ``n = 1`` this is the unit round sphere.
* ``bdi_domain`` and ``quadric_chart`` carry no metric; they exist for the
  algebra of involutions and chains.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import (
    NoMetricAvailable,
    NotAComplexSpace,
    PointOutsideDomain,
    StencilExitsDomain,
)

ChartPoint = np.ndarray

DOMAIN_MARGIN = 1e-12
FD_STEP = 1e-5
FS_SCALE = 4.0

SPACE_KINDS = (
    "euclidean_r",
    "euclidean_c",
    "chyp_ball",
    "cproj",
    "bdi_domain",
    "quadric_chart",
)
COMPLEX_KINDS = {"euclidean_c", "chyp_ball", "cproj", "bdi_domain", "quadric_chart"}


# ---------------------------------------------------------------------------
# complex <-> interleaved real helpers


def to_complex(p):
    """Interleaved real coordinates ``(..., 2n)`` to complex ``(..., n)``."""
    p = np.asarray(p, dtype=float)
    return p[..., 0::2] + 1j * p[..., 1::2]


def to_real(z):
    """Complex ``(..., n)`` to interleaved real coordinates ``(..., 2n)``."""
    z = np.asarray(z, dtype=complex)
    out = np.empty(z.shape[:-1] + (2 * z.shape[-1],), dtype=float)
    out[..., 0::2] = z.real
    out[..., 1::2] = z.imag
    return out


def hermitian_to_real(h):
    """Real symmetric matrix ``g(v, w) = Re sum_jk h_jk xi_j conj(eta_k)``.

    ``h`` has shape ``(..., n, n)``; the result is ``(..., 2n, 2n)`` in the
    interleaved layout.
    """
    h = np.asarray(h, dtype=complex)
    n = h.shape[-1]
    a, b = h.real, h.imag
    g = np.empty(h.shape[:-2] + (2 * n, 2 * n), dtype=float)
    g[..., 0::2, 0::2] = a
    g[..., 1::2, 1::2] = a
    g[..., 0::2, 1::2] = b
    g[..., 1::2, 0::2] = -b
    return g


def holomorphic_christoffel_to_real(gc):
    """Real Christoffel array from the holomorphic symbols of a Kahler metric.

    ``gc[..., k, i, j]`` are the complex symbols; the geodesic equation in
    holomorphic coordinates reads ``z''^k + gc^k_ij z'^i z'^j = 0``.
    """
    gc = np.asarray(gc, dtype=complex)
    n = gc.shape[-1]
    eps = np.array([1.0, 1j])
    st = eps[:, None] * eps[None, :]
    t = gc[..., :, :, None, :, None] * st[:, None, :]  # (..., k, i, s, j, t)
    parts = np.stack([t.real, t.imag], axis=-5)  # (..., k, r, i, s, j, t)
    return parts.reshape(gc.shape[:-3] + (2 * n, 2 * n, 2 * n))


# ---------------------------------------------------------------------------
# structures


@dataclass(frozen=True)
class MetricField:
    dim: int
    eval: Callable[[np.ndarray], np.ndarray]
    provenance: str = "closed_form"
    christoffel: Optional[Callable[[np.ndarray], np.ndarray]] = None

    def inverse_eval(self, p):
        return np.linalg.inv(self.eval(p))

    def sqrt_det(self, p):
        return np.sqrt(np.linalg.det(self.eval(p)))


@dataclass(frozen=True)
class ComplexStructure:
    apply: Callable[[np.ndarray, np.ndarray], np.ndarray]


@dataclass(frozen=True)
class ModelSpace:
    kind: str
    n: int
    real_dim: int
    metric: Optional[MetricField]
    complex_structure: Optional[ComplexStructure]
    contains_fn: Callable[[np.ndarray], np.ndarray] = field(repr=False)
    branch: Optional[int] = None

    @property
    def is_complex(self) -> bool:
        return self.complex_structure is not None

    def domain_contains(self, p):
        """Boolean (array) membership in the chart domain."""
        p = np.asarray(p, dtype=float)
        ok = np.all(np.isfinite(p), axis=-1)
        return ok & self.contains_fn(p)

    def check_point(self, p) -> np.ndarray:
        p = np.asarray(p, dtype=float)
        if p.shape[-1] != self.real_dim:
            raise PointOutsideDomain(
                f"{self.kind}: point has dimension {p.shape[-1]}, chart has {self.real_dim}"
            )
        if not np.all(self.domain_contains(p)):
            raise PointOutsideDomain(f"point outside the {self.kind} chart domain")
        return p

    @property
    def label(self) -> str:
        if self.branch is None:
            return f"{self.kind}({self.n})"
        return f"{self.kind}({self.n}, V{self.branch})"


def _complex_j(p, v):
    v = np.asarray(v, dtype=float)
    out = np.empty_like(v)
    out[..., 0::2] = -v[..., 1::2]
    out[..., 1::2] = v[..., 0::2]
    return out


def _bdi_j(p, v):
    v = np.asarray(v, dtype=float)
    n = v.shape[-1] // 2
    return np.concatenate([v[..., n:], -v[..., :n]], axis=-1)


def _everywhere(p):
    return np.ones(np.shape(p)[:-1], dtype=bool)


def _flat_metric(d):
    def g(p):
        p = np.asarray(p, dtype=float)
        return np.broadcast_to(np.eye(d), p.shape[:-1] + (d, d)).copy()

    def gamma(p):
        p = np.asarray(p, dtype=float)
        return np.zeros(p.shape[:-1] + (d, d, d))

    return MetricField(dim=d, eval=g, christoffel=gamma)


def euclidean_r(n: int) -> ModelSpace:
    return ModelSpace("euclidean_r", n, n, _flat_metric(n), None, _everywhere)


def euclidean_c(n: int) -> ModelSpace:
    return ModelSpace(
        "euclidean_c", n, 2 * n, _flat_metric(2 * n), ComplexStructure(_complex_j), _everywhere
    )


def _kahler_metric(n: int, sign: float) -> MetricField:
    """Constant holomorphic curvature metric; sign=-1 ball, sign=+1 projective."""

    def hermitian(p):
        z = to_complex(p)
        s = 1.0 + sign * np.sum(np.abs(z) ** 2, axis=-1)
        outer = np.conj(z)[..., :, None] * z[..., None, :]
        eye = np.eye(n)
        return FS_SCALE * (s[..., None, None] * eye - sign * outer) / s[..., None, None] ** 2

    def g(p):
        return hermitian_to_real(hermitian(p))

    def gamma(p):
        z = to_complex(p)
        s = 1.0 + sign * np.sum(np.abs(z) ** 2, axis=-1)
        c = -sign * np.conj(z) / s[..., None]
        eye = np.eye(n)
        # gc[k, i, j] = delta_ik c_j + delta_jk c_i
        gc = eye[:, :, None] * c[..., None, None, :] + eye[:, None, :] * c[..., None, :, None]
        return holomorphic_christoffel_to_real(gc)

    return MetricField(dim=2 * n, eval=g, christoffel=gamma)


def chyp_ball(n: int) -> ModelSpace:
    def inside(p):
        return np.sum(np.asarray(p) ** 2, axis=-1) < 1.0 - DOMAIN_MARGIN

    return ModelSpace(
        "chyp_ball", n, 2 * n, _kahler_metric(n, -1.0), ComplexStructure(_complex_j), inside
    )


def cproj(n: int) -> ModelSpace:
    return ModelSpace(
        "cproj", n, 2 * n, _kahler_metric(n, +1.0), ComplexStructure(_complex_j), _everywhere
    )


def bdi_domain(n: int) -> ModelSpace:
    """Bounded domain ``{X in M_{2,n}(R): X X^T < I_2}``; coordinates ``(X1, X2)`` rows."""

    def inside(p):
        p = np.asarray(p, dtype=float)
        x = p.reshape(p.shape[:-1] + (2, n))
        gram = x @ np.swapaxes(x, -1, -2)
        return np.linalg.eigvalsh(gram)[..., -1] < 1.0 - DOMAIN_MARGIN

    return ModelSpace("bdi_domain", n, 2 * n, None, ComplexStructure(_bdi_j), inside)


def quadric_chart(n: int, branch: int = 1) -> ModelSpace:
    """Chart ``V_branch`` of the hyperquadric with coordinates ``zeta = (w^2, ..., w^{n+1})``.

    The chart excludes the locus ``1 + sum zeta_k^2 = 0`` where ``w^1`` vanishes.
    """
    if branch not in (1, 2):
        raise ValueError(f"branch must be 1 or 2, got {branch}")

    def inside(p):
        zeta = to_complex(p)
        return np.abs(1.0 + np.sum(zeta**2, axis=-1)) > DOMAIN_MARGIN

    return ModelSpace(
        "quadric_chart", n, 2 * n, None, ComplexStructure(_complex_j), inside, branch=branch
    )


def quadric_homogeneous(space: ModelSpace, p) -> np.ndarray:
    """Homogeneous coordinates ``[1 : w^1 : zeta]`` of a chart point, ``z^0 = 1``."""
    zeta = to_complex(space.check_point(p))
    w1 = np.sqrt(-1.0 - np.sum(zeta**2, axis=-1) + 0j)
    if space.branch == 2:
        w1 = -w1
    ones = np.ones(zeta.shape[:-1] + (1,), dtype=complex)
    return np.concatenate([ones, w1[..., None], zeta], axis=-1)


SPACE_FACTORIES = {
    "euclidean_r": euclidean_r,
    "euclidean_c": euclidean_c,
    "chyp_ball": chyp_ball,
    "cproj": cproj,
    "bdi_domain": bdi_domain,
    "quadric_chart": quadric_chart,
}


def make_space(kind: str, n: int, branch: Optional[int] = None) -> ModelSpace:
    try:
        factory = SPACE_FACTORIES[kind]
    except KeyError:
        raise ValueError(f"unknown space kind {kind!r}; expected one of {SPACE_KINDS}") from None
    if kind == "quadric_chart":
        return factory(n, branch or 1)
    return factory(n)


# ---------------------------------------------------------------------------
# operations


def _require_metric(space: ModelSpace) -> MetricField:
    if space.metric is None:
        raise NoMetricAvailable(f"{space.label} has no implemented metric")
    return space.metric


def metric_at(space: ModelSpace, p) -> np.ndarray:
    metric = _require_metric(space)
    return metric.eval(space.check_point(p))


def metric_derivative_fd(space: ModelSpace, p, step: float = FD_STEP) -> np.ndarray:
    """``dg[..., m, i, j] = d g_ij / d x^m`` by central differences."""
    metric = _require_metric(space)
    p = np.asarray(p, dtype=float)
    d = space.real_dim
    out = np.empty(p.shape[:-1] + (d, d, d))
    for m in range(d):
        e = np.zeros(d)
        e[m] = step
        if not (np.all(space.domain_contains(p + e)) and np.all(space.domain_contains(p - e))):
            raise StencilExitsDomain("finite-difference stencil leaves the chart domain")
        out[..., m, :, :] = (metric.eval(p + e) - metric.eval(p - e)) / (2 * step)
    return out


def christoffel_fd(space: ModelSpace, p, step: float = FD_STEP) -> np.ndarray:
    """Christoffel symbols ``G[..., k, i, j]`` from finite differences of the metric."""
    p = space.check_point(p)
    dg = metric_derivative_fd(space, p, step)
    ginv = np.linalg.inv(space.metric.eval(p))
    # lowered[l, i, j] = d_i g_jl + d_j g_il - d_l g_ij
    lowered = (
        np.einsum("...ijl->...lij", dg) + np.einsum("...jil->...lij", dg) - dg
    )
    return 0.5 * np.einsum("...kl,...lij->...kij", ginv, lowered)


def christoffel_at(space: ModelSpace, p, method: str = "auto") -> np.ndarray:
    """Christoffel symbols ``Gamma^k_ij`` as ``[..., k, i, j]``.

    ``method`` is ``"closed_form"``, ``"finite_difference"`` or ``"auto"``
    (closed form when registered).
    """
    metric = _require_metric(space)
    p = space.check_point(p)
    if method == "finite_difference" or (method == "auto" and metric.christoffel is None):
        return christoffel_fd(space, p)
    if metric.christoffel is None:
        raise NoMetricAvailable(f"no closed-form Christoffel symbols for {space.label}")
    return metric.christoffel(p)


def apply_complex_structure(space: ModelSpace, p, v) -> np.ndarray:
    if space.complex_structure is None:
        raise NotAComplexSpace(f"{space.label} carries no complex structure")
    return space.complex_structure.apply(np.asarray(p, dtype=float), v)


def inner(space: ModelSpace, p, v, w) -> np.ndarray:
    g = metric_at(space, p)
    return np.einsum("...i,...ij,...j->...", v, g, w)


def distance(space: ModelSpace, p, q) -> np.ndarray:
    """Riemannian distance where a closed form is known, chart distance otherwise."""
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    if space.kind in ("chyp_ball", "cproj"):
        z, w = to_complex(p), to_complex(q)
        # |z - w|^2 -+ (|z|^2 |w|^2 - |<z, w>|^2), the second term summed as
        # |z_i w_j - z_j w_i|^2 / 2 so nearby points keep full precision
        cross = z[..., :, None] * w[..., None, :] - z[..., None, :] * w[..., :, None]
        wedge = 0.5 * np.sum(np.abs(cross) ** 2, axis=(-2, -1))
        diff = np.sum(np.abs(z - w) ** 2, axis=-1)
        sz, sw = np.sum(np.abs(z) ** 2, axis=-1), np.sum(np.abs(w) ** 2, axis=-1)
        if space.kind == "chyp_ball":
            ratio = np.maximum(diff - wedge, 0.0) / ((1.0 - sz) * (1.0 - sw))
            return 2.0 * np.arcsinh(np.sqrt(ratio))
        ratio = (diff + wedge) / ((1.0 + sz) * (1.0 + sw))
        return 2.0 * np.arcsin(np.sqrt(np.clip(ratio, 0.0, 1.0)))
    return np.linalg.norm(p - q, axis=-1)


@dataclass
class Trajectory:
    times: np.ndarray
    points: np.ndarray
    velocities: np.ndarray
    left_domain: bool = False

    def speed_squared(self, space: ModelSpace) -> np.ndarray:
        g = space.metric.eval(self.points)
        return np.einsum("ti,tij,tj->t", self.velocities, g, self.velocities)


def _acceleration(gamma, x, v):
    return -np.einsum("...kij,...i,...j->...k", gamma(x), v, v)


def geodesic_flow(space: ModelSpace, p, v, t_end: float, dt: float):
    """Batched RK4 geodesic integration.

    ``p`` and ``v`` have shape ``(m, d)``.  Returns ``(times, points, velocities,
    left, reached)`` with ``points`` of shape ``(steps + 1, m, d)``; a trajectory
    that leaves the chart is frozen at its last interior state, flagged in
    ``left``, and ``reached`` holds the index of that state.
    """
    metric = _require_metric(space)
    if dt <= 0:
        raise ValueError("dt must be positive")
    x = np.array(space.check_point(p), dtype=float, ndmin=2)
    v = np.array(v, dtype=float, ndmin=2)
    if metric.christoffel is not None:
        gamma = metric.christoffel
    else:
        gamma = lambda y: christoffel_fd(space, y)  # noqa: E731

    steps = max(1, int(round(t_end / dt)))
    h = t_end / steps
    xs = np.empty((steps + 1,) + x.shape)
    vs = np.empty_like(xs)
    xs[0], vs[0] = x, v
    left = np.zeros(x.shape[0], dtype=bool)
    reached = np.full(x.shape[0], steps)
    last = 0
    for step in range(steps):
        alive = ~left
        xa, va = x[alive], v[alive]
        k1x, k1v = va, _acceleration(gamma, xa, va)
        x2, v2 = xa + 0.5 * h * k1x, va + 0.5 * h * k1v
        ok = space.domain_contains(x2)
        x2 = np.where(ok[:, None], x2, xa)
        k2x, k2v = v2, _acceleration(gamma, x2, v2)
        x3, v3 = xa + 0.5 * h * k2x, va + 0.5 * h * k2v
        ok &= space.domain_contains(x3)
        x3 = np.where(ok[:, None], x3, xa)
        k3x, k3v = v3, _acceleration(gamma, x3, v3)
        x4, v4 = xa + h * k3x, va + h * k3v
        ok &= space.domain_contains(x4)
        x4 = np.where(ok[:, None], x4, xa)
        k4x, k4v = v4, _acceleration(gamma, x4, v4)
        xn = xa + h / 6.0 * (k1x + 2 * k2x + 2 * k3x + k4x)
        vn = va + h / 6.0 * (k1v + 2 * k2v + 2 * k3v + k4v)
        ok &= space.domain_contains(xn)
        idx = np.flatnonzero(alive)
        x[idx[ok]], v[idx[ok]] = xn[ok], vn[ok]
        left[idx[~ok]] = True
        reached[idx[~ok]] = step
        xs[step + 1], vs[step + 1] = x, v
        last = step + 1
        if left.all():
            break
    times = np.arange(last + 1) * h
    return times, xs[: last + 1], vs[: last + 1], left, np.minimum(reached, last)


def geodesic_integrate(space: ModelSpace, p, v, t_end: float, dt: float) -> Trajectory:
    """Integrate ``x'' + Gamma(x', x') = 0`` with classical RK4.

    If the trajectory leaves the chart domain the partial trajectory is
    returned with ``left_domain = True``.
    """
    times, xs, vs, left, reached = geodesic_flow(
        space, np.asarray(p)[None], np.asarray(v)[None], t_end, dt
    )
    keep = int(reached[0]) + 1
    times, xs, vs = times[:keep], xs[:keep], vs[:keep]
    return Trajectory(times, xs[:, 0], vs[:, 0], bool(left[0]))


def random_points(space: ModelSpace, count: int, rng: np.random.Generator, radius: float = 0.9):
    """Random chart points: uniform in a ball of ``radius`` for bounded charts,
    in ``[-radius, radius]^d`` (scaled by 10 for ``cproj``) otherwise."""
    d = space.real_dim
    if space.kind in ("chyp_ball", "bdi_domain"):
        out = np.empty((count, d))
        filled = 0
        while filled < count:
            cand = rng.uniform(-radius, radius, size=(2 * count, d))
            if space.kind == "chyp_ball":
                ok = np.sum(cand**2, axis=-1) < radius**2
            else:
                ok = _bdi_norm(cand, space.n) < radius
            cand = cand[ok][: count - filled]
            out[filled : filled + len(cand)] = cand
            filled += len(cand)
        return out
    scale = 10.0 if space.kind == "cproj" else 1.0
    pts = rng.uniform(-radius * scale, radius * scale, size=(count, d))
    if space.kind == "quadric_chart":
        bad = ~space.domain_contains(pts)
        while np.any(bad):
            pts[bad] = rng.uniform(-radius, radius, size=(int(bad.sum()), d))
            bad = ~space.domain_contains(pts)
    return pts


def _bdi_norm(p, n):
    x = p.reshape(p.shape[:-1] + (2, n))
    return np.sqrt(np.linalg.eigvalsh(x @ np.swapaxes(x, -1, -2))[..., -1])
