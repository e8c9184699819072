"""Discrete harmonic maps on uniform tensor grids.

The grid is stored as a graph: active nodes carry chart coordinates, and the
nearest-neighbour edges along each axis carry the stencil weights.  The energy
is a sum over edges,

    E(u) = 1/2 * sum_e  k_e * (u_b - u_a)^T G(m_e) (u_b - u_a),

with ``m_e`` the edge midpoint value, ``k_e = sqrt(g) g^{ii} * vol_e / h_i^2``
evaluated at the source edge midpoint and ``vol_e`` the trapezoid cell volume.
The tension at an interior node is ``-G(u)^{-1} dE/du / (sqrt(g) * vol)``,
which is the divergence-form Laplace-Beltrami operator plus the target
Christoffel term, second-order accurate.

Only source metrics that are diagonal in the chart are supported (flat charts
and conformal 2-d charts such as the Poincare disk).
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field, replace
from typing import Callable, Optional, Union

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import (
    InsufficientStencil,
    InvalidParams,
    NoMetricAvailable,
    NonConvergence,
    PointOutsideDomain,
    ValueLeftTargetDomain,
)
from .expr import evaluate_on_points
from .geometry import ModelSpace, christoffel_at, euclidean_r, make_space

FLAT_KINDS = ("euclidean_r", "euclidean_c")
FLAT_TOL = 1e-8
CURVED_TOL = 1e-6
SHAPES = ("box", "disk")


def is_flat(space: ModelSpace) -> bool:
    return space.kind in FLAT_KINDS


# ---------------------------------------------------------------------------
# grids


@dataclass(frozen=True, eq=False)
class GridDomain:
    """Active nodes of a uniform grid over ``bounds`` inside the source chart.

    ``shape`` is ``box`` (every node) or ``disk`` (nodes within ``radius`` of
    ``center``).  ``half = (axis, sign)`` keeps only nodes with
    ``sign * (x_axis - center_axis) >= 0``.  Boundary nodes are active nodes
    missing at least one axis neighbour; together with ``fixed`` nodes they
    carry Dirichlet data.
    """

    source: ModelSpace
    bounds: np.ndarray
    resolution: tuple
    shape: str = "box"
    radius: Optional[float] = None
    center: Optional[tuple] = None
    half: Optional[tuple] = None
    hypersurface: Optional[tuple] = None
    fixed_nodes: tuple = ()
    # derived
    spacing: np.ndarray = field(init=False)
    index_grid: np.ndarray = field(init=False)
    multi: np.ndarray = field(init=False)
    coords: np.ndarray = field(init=False)
    boundary: np.ndarray = field(init=False)
    dirichlet: np.ndarray = field(init=False)
    edges: tuple = field(init=False)

    def __post_init__(self):
        bounds = np.asarray(self.bounds, dtype=float).reshape(-1, 2)
        res = tuple(int(r) for r in np.atleast_1d(self.resolution))
        d = len(res)
        if bounds.shape[0] != d:
            raise InvalidParams(f"bounds for {bounds.shape[0]} axes but resolution for {d}")
        if d != self.source.real_dim:
            raise InvalidParams(f"grid has {d} axes but source {self.source.label} has {self.source.real_dim}")
        if min(res) < 5:
            raise InvalidParams(f"resolution must be >= 5 per axis, got {res}")
        if np.any(bounds[:, 1] <= bounds[:, 0]):
            raise InvalidParams("bounds must satisfy min < max")
        if self.shape not in SHAPES:
            raise InvalidParams(f"unknown grid shape {self.shape!r}; expected {SHAPES}")
        spacing = (bounds[:, 1] - bounds[:, 0]) / (np.array(res) - 1)
        axes = [np.linspace(lo, hi, r) for (lo, hi), r in zip(bounds, res)]
        mesh = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)
        center = np.mean(bounds, axis=1) if self.center is None else np.asarray(self.center, float)
        active = np.ones(res, dtype=bool)
        if self.shape == "disk":
            radius = np.min(bounds[:, 1] - bounds[:, 0]) / 2 if self.radius is None else self.radius
            object.__setattr__(self, "radius", float(radius))
            active &= np.linalg.norm(mesh - center, axis=-1) <= radius * (1 + 1e-12)
        if self.half is not None:
            axis, sign = self.half
            active &= sign * (mesh[..., axis] - center[axis]) >= -1e-12 * spacing[axis]
        object.__setattr__(self, "center", tuple(float(c) for c in center))

        index_grid = -np.ones(res, dtype=np.int64)
        index_grid[active] = np.arange(int(active.sum()))
        multi = np.argwhere(active)
        coords = mesh[active]
        inside = self.source.domain_contains(coords)
        if not np.all(inside):
            raise PointOutsideDomain(f"{int((~inside).sum())} grid nodes lie outside {self.source.label}")

        n = len(coords)
        boundary = np.zeros(n, dtype=bool)
        edges = []
        for i in range(d):
            step = np.zeros(d, dtype=np.int64)
            step[i] = 1
            for s in (1, -1):
                nb = multi + s * step
                ok = (nb[:, i] >= 0) & (nb[:, i] < res[i])
                nb_idx = np.full(n, -1)
                nb_idx[ok] = index_grid[tuple(nb[ok].T)]
                boundary |= nb_idx < 0
                if s == 1:
                    a = np.flatnonzero(nb_idx >= 0)
                    edges.append((a, nb_idx[a]))
        dirichlet = boundary.copy()
        if len(self.fixed_nodes):
            dirichlet[np.asarray(self.fixed_nodes, dtype=np.int64)] = True

        object.__setattr__(self, "bounds", bounds)
        object.__setattr__(self, "resolution", res)
        object.__setattr__(self, "spacing", spacing)
        object.__setattr__(self, "index_grid", index_grid)
        object.__setattr__(self, "multi", multi)
        object.__setattr__(self, "coords", coords)
        object.__setattr__(self, "boundary", boundary)
        object.__setattr__(self, "dirichlet", dirichlet)
        object.__setattr__(self, "edges", tuple(edges))

    @property
    def dim(self) -> int:
        return len(self.resolution)

    @property
    def size(self) -> int:
        return len(self.coords)

    @property
    def interior(self) -> np.ndarray:
        return ~self.dirichlet

    @property
    def cell_volume(self) -> float:
        return float(np.prod(self.spacing))

    def hypersurface_nodes(self, axis: Optional[int] = None, index: Optional[int] = None):
        """Active nodes on the coordinate hyperplane ``multi[axis] == index``."""
        if axis is None:
            if self.hypersurface is None:
                raise InvalidParams("grid has no designated hypersurface")
            axis, index = self.hypersurface
        return np.flatnonzero(self.multi[:, axis] == index)

    def node(self, multi_index) -> int:
        """Active index of a grid multi-index, or -1."""
        mi = np.asarray(multi_index)
        if np.any(mi < 0) or np.any(mi >= np.array(self.resolution)):
            return -1
        return int(self.index_grid[tuple(mi)])

    def with_fixed(self, nodes) -> "GridDomain":
        merged = tuple(sorted(set(int(i) for i in self.fixed_nodes) | set(int(i) for i in nodes)))
        return replace(self, fixed_nodes=merged)

    def header(self) -> dict:
        return {
            "source": {"kind": self.source.kind, "n": self.source.n, "branch": self.source.branch},
            "bounds": self.bounds.tolist(),
            "resolution": list(self.resolution),
            "shape": self.shape,
            "radius": self.radius,
            "center": list(self.center),
            "half": list(self.half) if self.half is not None else None,
            "hypersurface": list(self.hypersurface) if self.hypersurface is not None else None,
            "fixed_nodes": [int(i) for i in self.fixed_nodes],
        }

    @classmethod
    def from_header(cls, hdr: dict) -> "GridDomain":
        s = hdr["source"]
        source = make_space(s["kind"], s["n"], s.get("branch"))
        return cls(
            source,
            np.asarray(hdr["bounds"]),
            tuple(hdr["resolution"]),
            hdr.get("shape", "box"),
            hdr.get("radius"),
            tuple(hdr["center"]) if hdr.get("center") is not None else None,
            tuple(hdr["half"]) if hdr.get("half") is not None else None,
            tuple(hdr["hypersurface"]) if hdr.get("hypersurface") is not None else None,
            tuple(hdr.get("fixed_nodes", ())),
        )


def make_grid(
    source: ModelSpace,
    bounds,
    resolution,
    shape: str = "box",
    radius: Optional[float] = None,
    center=None,
    half=None,
    hypersurface=None,
) -> GridDomain:
    res = resolution
    if np.isscalar(res):
        res = (int(res),) * source.real_dim
    return GridDomain(source, np.asarray(bounds, float), tuple(res), shape, radius,
                      None if center is None else tuple(center),
                      None if half is None else tuple(half),
                      None if hypersurface is None else tuple(hypersurface))


# ---------------------------------------------------------------------------
# stencil weights


@dataclass(frozen=True, eq=False)
class _Stencil:
    """Per-edge energy weights and per-node volume factors for one grid."""

    edge_a: np.ndarray
    edge_b: np.ndarray
    k: np.ndarray  # energy weight per edge
    c: np.ndarray  # sqrt(g) g^{ii} / h_i^2 per edge (divergence-form coefficient)
    axis: np.ndarray
    sqrt_g: np.ndarray  # per node
    ginv_diag: np.ndarray  # per node, (N, d)
    diag: np.ndarray  # per node: sum of incident c (Jacobi diagonal of the descent)


def _diagonal_metric(source: ModelSpace, pts) -> np.ndarray:
    g = source.metric.eval(pts)
    diag = np.diagonal(g, axis1=-2, axis2=-1)
    off = g - np.einsum("...i,ij->...ij", diag, np.eye(g.shape[-1]))
    if np.max(np.abs(off), initial=0.0) > 1e-12 * max(1.0, float(np.max(np.abs(diag)))):
        raise NotImplementedError(f"source metric of {source.label} is not diagonal in the chart")
    return diag


def stencil(domain: GridDomain) -> _Stencil:
    hit = domain.__dict__.get("_stencil")
    if hit is not None:
        return hit
    if domain.source.metric is None:
        raise NoMetricAvailable(f"{domain.source.label} has no metric")
    h = domain.spacing
    res = np.array(domain.resolution)
    vol = domain.cell_volume
    a_all, b_all, k_all, c_all, ax_all = [], [], [], [], []
    for i, (a, b) in enumerate(domain.edges):
        mid = 0.5 * (domain.coords[a] + domain.coords[b])
        gd = _diagonal_metric(domain.source, mid)
        coef = np.sqrt(np.prod(gd, axis=-1)) / gd[:, i] / h[i] ** 2
        weight = np.ones(len(a))
        if domain.shape == "box":
            for j in range(domain.dim):
                if j != i:
                    on_face = (domain.multi[a, j] == 0) | (domain.multi[a, j] == res[j] - 1)
                    weight[on_face] *= 0.5
        a_all.append(a)
        b_all.append(b)
        c_all.append(coef)
        k_all.append(coef * weight * vol)
        ax_all.append(np.full(len(a), i))
    edge_a = np.concatenate(a_all)
    edge_b = np.concatenate(b_all)
    c = np.concatenate(c_all)
    gd_nodes = _diagonal_metric(domain.source, domain.coords)
    sqrt_g = np.sqrt(np.prod(gd_nodes, axis=-1))
    n = domain.size
    diag = np.bincount(edge_a, c, n) + np.bincount(edge_b, c, n)
    st = _Stencil(edge_a, edge_b, np.concatenate(k_all), c, np.concatenate(ax_all), sqrt_g,
                  1.0 / gd_nodes, diag)
    object.__setattr__(domain, "_stencil", st)
    return st


# ---------------------------------------------------------------------------
# maps


@dataclass(eq=False)
class DiscreteMap:
    domain: GridDomain
    target: ModelSpace
    values: np.ndarray  # (N, target.real_dim)
    info: dict = field(default_factory=dict)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float).reshape(self.domain.size, -1)
        if self.values.shape[1] != self.target.real_dim:
            raise InvalidParams(
                f"values have {self.values.shape[1]} components, target needs {self.target.real_dim}"
            )

    def check(self):
        ok = self.target.domain_contains(self.values)
        if not np.all(ok):
            raise ValueLeftTargetDomain(f"{int((~ok).sum())} node values outside {self.target.label}")

    def grid_values(self) -> np.ndarray:
        """Values on the full tensor grid; inactive nodes are NaN."""
        out = np.full(self.domain.resolution + (self.target.real_dim,), np.nan)
        out[tuple(self.domain.multi.T)] = self.values
        return out

    def copy(self, values=None) -> "DiscreteMap":
        return DiscreteMap(self.domain, self.target,
                           self.values.copy() if values is None else values, dict(self.info))


def boundary_values(domain: GridDomain, target: ModelSpace, boundary) -> np.ndarray:
    """Evaluate boundary data at every node.

    ``boundary`` may be an array ``(N, D)``, a callable on chart points, or
    expression text (one string or a list, one per target component).
    """
    if isinstance(boundary, np.ndarray):
        vals = np.asarray(boundary, dtype=float).reshape(domain.size, -1)
    elif callable(boundary):
        vals = np.asarray(boundary(domain.coords), dtype=float).reshape(domain.size, -1)
    else:
        vals = evaluate_on_points(boundary, domain.coords, target.real_dim, target.is_complex)
    if vals.shape[1] != target.real_dim:
        raise InvalidParams(f"boundary data has {vals.shape[1]} components, target needs {target.real_dim}")
    return vals


# ---------------------------------------------------------------------------
# energy and tension


def _target_terms(target: ModelSpace, pts):
    """Metric and its first derivatives ``dG[..., c, a, b] = d_c G_ab``."""
    if target.metric is None:
        raise NoMetricAvailable(f"{target.label} has no metric")
    g = target.metric.eval(pts)
    if is_flat(target):
        return g, None
    gam = christoffel_at(target, pts)  # [..., k, i, j]
    # d_c G_ab = G_am Gamma^m_bc + G_bm Gamma^m_ac
    t = np.einsum("...am,...mbc->...abc", g, gam)
    dg = t + np.swapaxes(t, -3, -2)
    return g, np.moveaxis(dg, -1, -3)


def _energy_and_gradient(domain: GridDomain, target: ModelSpace, u, need_grad=True):
    st = stencil(domain)
    delta = u[st.edge_b] - u[st.edge_a]
    mid = 0.5 * (u[st.edge_a] + u[st.edge_b])
    g, dg = _target_terms(target, mid)
    gd = np.einsum("eab,eb->ea", g, delta)
    energy = 0.5 * float(np.sum(st.k * np.einsum("ea,ea->e", delta, gd)))
    if not need_grad:
        return energy, None
    flux = st.k[:, None] * gd
    if dg is not None:
        quad = 0.25 * st.k[:, None] * np.einsum("ecab,ea,eb->ec", dg, delta, delta)
    else:
        quad = 0.0
    n, dim = u.shape
    grad = np.empty_like(u)
    for a in range(dim):
        fa = flux[:, a]
        qa = quad[:, a] if dg is not None else 0.0
        grad[:, a] = np.bincount(st.edge_b, fa + qa, n) + np.bincount(st.edge_a, qa - fa, n)
    return energy, grad


def energy(h: DiscreteMap) -> float:
    """Discrete energy; zero exactly for constant maps."""
    h.check()
    return _energy_and_gradient(h.domain, h.target, h.values, need_grad=False)[0]


@dataclass
class TensionReport:
    residual_field: np.ndarray  # (N, D), zero at Dirichlet nodes
    max_norm: float
    l2_norm: float
    interior: np.ndarray


def _tension_from_grad(domain: GridDomain, target: ModelSpace, u, grad):
    st = stencil(domain)
    g = target.metric.eval(u)
    vol = domain.cell_volume
    tau = -np.linalg.solve(g, grad[..., None])[..., 0] / (st.sqrt_g[:, None] * vol)
    tau[domain.dirichlet] = 0.0
    norms = np.sqrt(np.maximum(np.einsum("na,nab,nb->n", tau, g, tau), 0.0))
    inner = norms[domain.interior]
    max_norm = float(inner.max()) if inner.size else 0.0
    l2 = float(np.sqrt(np.mean(inner**2))) if inner.size else 0.0
    return TensionReport(tau, max_norm, l2, domain.interior.copy())


def tension(h: DiscreteMap) -> TensionReport:
    """Variational tension field at interior nodes (target-metric norms)."""
    h.check()
    _, grad = _energy_and_gradient(h.domain, h.target, h.values)
    return _tension_from_grad(h.domain, h.target, h.values, grad)


def tension_direct(h: DiscreteMap) -> TensionReport:
    """Non-variational central-difference form of the harmonic map system.

    ``Delta_M u^a + g^{ii} Gamma^a_bc(u) d_i u^b d_i u^c`` with the
    divergence-form Laplacian and central first derivatives.  Agrees with
    :func:`tension` to second order; used as a cross-check.
    """
    h.check()
    dom, u = h.domain, h.values
    st = stencil(dom)
    n, dim = u.shape
    lap = np.empty_like(u)
    for a in range(dim):
        flux = st.c * (u[st.edge_b, a] - u[st.edge_a, a])
        lap[:, a] = (np.bincount(st.edge_a, flux, n) - np.bincount(st.edge_b, flux, n)) / st.sqrt_g
    tau = lap
    inner_nodes = np.flatnonzero(dom.interior)
    if not is_flat(h.target) and inner_nodes.size:
        gam = christoffel_at(h.target, u[inner_nodes])
        for i in range(dom.dim):
            step = np.zeros(dom.dim, dtype=np.int64)
            step[i] = 1
            plus = dom.index_grid[tuple((dom.multi[inner_nodes] + step).T)]
            minus = dom.index_grid[tuple((dom.multi[inner_nodes] - step).T)]
            du = (u[plus] - u[minus]) / (2 * dom.spacing[i])
            tau[inner_nodes] += st.ginv_diag[inner_nodes, i, None] * np.einsum(
                "nkab,na,nb->nk", gam, du, du
            )
    tau[dom.dirichlet] = 0.0
    g = h.target.metric.eval(u)
    norms = np.sqrt(np.maximum(np.einsum("na,nab,nb->n", tau, g, tau), 0.0))
    inner = norms[dom.interior]
    return TensionReport(tau, float(inner.max(initial=0.0)),
                         float(np.sqrt(np.mean(inner**2))) if inner.size else 0.0,
                         dom.interior.copy())


# ---------------------------------------------------------------------------
# solvers


@dataclass(frozen=True)
class SolveOptions:
    tol: Optional[float] = None  # None: 1e-8 flat target, 1e-6 curved
    max_iters: int = 200_000
    step_scale: float = 0.95
    reset_after: int = 5
    step_floor: float = 1e-12
    energy_slack: float = 1e-13
    history_every: int = 50
    raise_on_failure: bool = True

    def resolved_tol(self, target: ModelSpace) -> float:
        if self.tol is not None:
            return float(self.tol)
        return FLAT_TOL if is_flat(target) else CURVED_TOL


def solve_dirichlet(
    domain: GridDomain,
    target: ModelSpace,
    boundary,
    opts: Optional[SolveOptions] = None,
    initial=None,
) -> DiscreteMap:
    """Harmonic map with the given Dirichlet data by damped gradient descent.

    The descent direction is the tension density ``sqrt(g) * tau``.  Steps that
    raise the energy or leave the target chart are halved; the step returns to
    its initial value after ``reset_after`` consecutive accepted steps.  The
    default initial guess puts every free node at the mean boundary value.
    """
    opts = opts or SolveOptions()
    tol = opts.resolved_tol(target)
    bvals = boundary_values(domain, target, boundary)
    fixed = domain.dirichlet
    if not np.all(target.domain_contains(bvals[fixed])):
        raise ValueLeftTargetDomain(f"boundary data leaves {target.label}")
    if initial is None:
        u = bvals.copy()
        u[~fixed] = bvals[fixed].mean(axis=0)
    else:
        u = np.array(boundary_values(domain, target, initial), dtype=float)
        u[fixed] = bvals[fixed]
    if not np.all(target.domain_contains(u)):
        raise ValueLeftTargetDomain("initial guess leaves the target domain")

    st = stencil(domain)
    s0 = opts.step_scale / float(np.max(st.diag[~fixed], initial=1.0))
    step = s0
    e, grad = _energy_and_gradient(domain, target, u)
    rep = _tension_from_grad(domain, target, u, grad)
    history = [(0, e, rep.max_norm)]
    it = accepted = run = 0
    status = "converged"
    while rep.max_norm >= tol:
        if it >= opts.max_iters:
            status = "max_iters"
            break
        it += 1
        direction = st.sqrt_g[:, None] * rep.residual_field
        trial = u + step * direction
        if not np.all(target.domain_contains(trial[~fixed])):
            step *= 0.5
            run = 0
            if step < opts.step_floor * s0:
                status = "left_target_domain"
                break
            continue
        e_new, g_new = _energy_and_gradient(domain, target, trial)
        if e_new > e + opts.energy_slack * max(abs(e), 1.0):
            step *= 0.5
            run = 0
            if step < opts.step_floor * s0:
                status = "stalled"
                break
            continue
        u, e = trial, e_new
        rep = _tension_from_grad(domain, target, u, g_new)
        accepted += 1
        run += 1
        if run >= opts.reset_after:
            step, run = s0, 0
        if accepted % opts.history_every == 0:
            history.append((it, e, rep.max_norm))
    if history[-1][0] != it:
        history.append((it, e, rep.max_norm))
    info = {
        "iterations": it,
        "accepted": accepted,
        "residual": rep.max_norm,
        "energy": e,
        "tol": tol,
        "converged": status == "converged",
        "status": status,
        "history": history,
        "method": "descent",
    }
    result = DiscreteMap(domain, target, u, info)
    if status != "converged" and opts.raise_on_failure:
        if status == "left_target_domain":
            raise ValueLeftTargetDomain("descent step floor reached at the target-domain boundary")
        raise NonConvergence(
            f"solve stopped ({status}) after {it} iterations with residual {rep.max_norm:.3g} >= {tol:.3g}",
            result,
        )
    return result


def laplace_beltrami_solve(
    domain: GridDomain, boundary, opts: Optional[SolveOptions] = None, method: str = "direct"
) -> DiscreteMap:
    """Harmonic function with Dirichlet data.

    ``method="direct"`` solves the linear divergence-form system with a sparse
    factorization; ``method="descent"`` runs :func:`solve_dirichlet` with a
    real-line target.
    """
    target = euclidean_r(1)
    opts = opts or SolveOptions()
    if method == "descent":
        return solve_dirichlet(domain, target, boundary, opts)
    if method != "direct":
        raise InvalidParams(f"unknown method {method!r}")
    bvals = boundary_values(domain, target, boundary)[:, 0]
    st = stencil(domain)
    n = domain.size
    free = ~domain.dirichlet
    # row p: sum_e c_e (u_q - u_p) = 0 for free p
    rows = np.concatenate([st.edge_a, st.edge_b, st.edge_a, st.edge_b])
    cols = np.concatenate([st.edge_b, st.edge_a, st.edge_a, st.edge_b])
    vals = np.concatenate([st.c, st.c, -st.c, -st.c])
    lap = sp.csr_matrix((vals, (rows, cols)), shape=(n, n))
    fidx = np.flatnonzero(free)
    didx = np.flatnonzero(~free)
    u = bvals.copy()
    if fidx.size:
        a_ff = lap[fidx][:, fidx].tocsc()
        rhs = -lap[fidx][:, didx] @ bvals[didx]
        u[fidx] = spla.spsolve(a_ff, rhs)
    result = DiscreteMap(domain, target, u[:, None])
    rep = tension(result)
    tol = opts.resolved_tol(target)
    result.info = {
        "iterations": 1,
        "residual": rep.max_norm,
        "tol": tol,
        "converged": rep.max_norm < tol,
        "status": "converged" if rep.max_norm < tol else "residual_above_tol",
        "history": [(1, energy(result), rep.max_norm)],
        "method": "direct",
    }
    if rep.max_norm >= tol and opts.raise_on_failure:
        raise NonConvergence(f"direct solve residual {rep.max_norm:.3g} >= {tol:.3g}", result)
    return result


# ---------------------------------------------------------------------------
# Cauchy data


@dataclass
class CauchyData:
    nodes: np.ndarray
    jacobian: np.ndarray  # (len(nodes), D, d)
    values: np.ndarray  # (len(nodes), D)

    def distance(self, other: "CauchyData") -> float:
        if not np.array_equal(self.nodes, other.nodes):
            raise InvalidParams("Cauchy data on different node sets")
        return float(max(np.max(np.abs(self.jacobian - other.jacobian), initial=0.0),
                         np.max(np.abs(self.values - other.values), initial=0.0)))


def _derivative(dom: GridDomain, u, nodes, axis, mode):
    """First derivative along ``axis`` at ``nodes``: central or one-sided O(h^2)."""
    step = np.zeros(dom.dim, dtype=np.int64)
    step[axis] = 1
    h = dom.spacing[axis]
    out = np.empty((len(nodes), u.shape[1]))

    def nb(node, k):
        return dom.node(dom.multi[node] + k * step)

    for r, p in enumerate(nodes):
        plus, minus = nb(p, 1), nb(p, -1)
        plus2, minus2 = nb(p, 2), nb(p, -2)
        order = {
            "central": ["c"],
            "one_sided": ["+", "-"],
            "one_sided_plus": ["+"],
            "one_sided_minus": ["-"],
            "auto": ["c", "+", "-"],
        }[mode]
        for kind in order:
            if kind == "c" and plus >= 0 and minus >= 0:
                out[r] = (u[plus] - u[minus]) / (2 * h)
                break
            if kind == "+" and plus >= 0 and plus2 >= 0:
                out[r] = (-3 * u[p] + 4 * u[plus] - u[plus2]) / (2 * h)
                break
            if kind == "-" and minus >= 0 and minus2 >= 0:
                out[r] = (3 * u[p] - 4 * u[minus] + u[minus2]) / (2 * h)
                break
        else:
            raise InsufficientStencil(f"node {p} lacks a {mode} stencil along axis {axis}")
    return out


def jacobian_at(h: DiscreteMap, nodes, mode: str = "auto") -> np.ndarray:
    """Jacobian ``(len(nodes), D, d)`` by central (else one-sided) differences."""
    nodes = np.asarray(nodes, dtype=np.int64)
    jac = np.empty((len(nodes), h.values.shape[1], h.domain.dim))
    for i in range(h.domain.dim):
        jac[:, :, i] = _derivative(h.domain, h.values, nodes, i, mode)
    return jac


def extract_cauchy_data(
    h: DiscreteMap, hypersurface_nodes=None, normal_axis: Optional[int] = None,
    transversal: str = "one_sided",
) -> CauchyData:
    """Values and Jacobian ``[d h^b / d x^i]`` on a coordinate hypersurface.

    Tangential derivatives are central (one-sided at the ends of the
    hypersurface); the transversal derivative uses ``transversal`` (``one_sided``,
    ``one_sided_plus``, ``one_sided_minus`` or ``central``).
    """
    dom = h.domain
    if hypersurface_nodes is None:
        hypersurface_nodes = dom.hypersurface_nodes()
        if normal_axis is None:
            normal_axis = dom.hypersurface[0]
    nodes = np.asarray(hypersurface_nodes, dtype=np.int64)
    if nodes.size == 0:
        raise InsufficientStencil("empty hypersurface node set")
    if normal_axis is None:
        varying = [i for i in range(dom.dim) if len(np.unique(dom.multi[nodes, i])) == 1]
        if len(varying) != 1:
            raise InvalidParams("cannot infer the normal axis of the hypersurface")
        normal_axis = varying[0]
    jac = np.empty((len(nodes), h.values.shape[1], dom.dim))
    for i in range(dom.dim):
        mode = transversal if i == normal_axis else "auto"
        jac[:, :, i] = _derivative(dom, h.values, nodes, i, mode)
    return CauchyData(nodes, jac, h.values[nodes].copy())


# ---------------------------------------------------------------------------
# refinement studies


def observed_order(spacings, errors) -> float:
    """Least-squares slope of ``log(error)`` against ``log(h)``."""
    hs = np.log(np.asarray(spacings, float))
    es = np.log(np.asarray(errors, float))
    return float(np.polyfit(hs, es, 1)[0])


def common_nodes(coarse: GridDomain, fine: GridDomain) -> np.ndarray:
    """Indices in ``fine`` of the nodes sharing coordinates with ``coarse``'s
    interior nodes (grids must be nested refinements of the same box)."""
    ratio = (np.array(fine.resolution) - 1) // (np.array(coarse.resolution) - 1)
    if not np.all((np.array(coarse.resolution) - 1) * ratio == np.array(fine.resolution) - 1):
        raise InvalidParams("grids are not nested refinements")
    multi = coarse.multi[coarse.interior] * ratio
    idx = fine.index_grid[tuple(multi.T)]
    if np.any(idx < 0):
        raise InvalidParams("coarse nodes missing from the fine grid")
    return idx


def tension_refinement(maps, on_common_nodes: bool = True):
    """Tension norms over a sequence of refined maps.

    Returns ``(spacings, norms)``.  With ``on_common_nodes`` the norm is taken
    over the coarsest grid's interior nodes, which every refinement contains, so
    the measured order is not polluted by boundary-adjacent nodes that move
    with the grid.
    """
    hs, errs = [], []
    for m in maps:
        rep = tension(m)
        g = m.target.metric.eval(m.values)
        norms = np.sqrt(np.einsum("na,nab,nb->n", rep.residual_field, g, rep.residual_field))
        idx = common_nodes(maps[0].domain, m.domain) if on_common_nodes else np.flatnonzero(m.domain.interior)
        hs.append(float(np.max(m.domain.spacing)))
        errs.append(float(np.max(norms[idx])))
    return hs, errs


def max_field_distance(a: DiscreteMap, b: DiscreteMap) -> float:
    return float(np.max(np.abs(a.values - b.values), initial=0.0))


# ---------------------------------------------------------------------------
# map files: a JSON header line prefixed by "# ", then a CSV node table


def map_to_text(h: DiscreteMap, extra: Optional[dict] = None) -> str:
    dom = h.domain
    header = {
        "format": "reflectlab-map/1",
        "domain": dom.header(),
        "target": {"kind": h.target.kind, "n": h.target.n, "branch": h.target.branch},
        "info": {k: v for k, v in h.info.items() if k != "history"},
    }
    if extra:
        header.update(extra)
    buf = io.StringIO()
    buf.write("# " + json.dumps(header, sort_keys=True, default=float) + "\n")
    writer = csv.writer(buf, lineterminator="\n")
    d, D = dom.dim, h.target.real_dim
    writer.writerow(["index"] + [f"i{k}" for k in range(d)] + [f"x{k + 1}" for k in range(d)]
                    + [f"u{k + 1}" for k in range(D)] + ["dirichlet"])
    for p in range(dom.size):
        writer.writerow([p, *dom.multi[p].tolist(), *map(repr, dom.coords[p].tolist()),
                         *map(repr, h.values[p].tolist()), int(dom.dirichlet[p])])
    return buf.getvalue()


def write_map(path, h: DiscreteMap, extra: Optional[dict] = None) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(map_to_text(h, extra))


def read_map(path) -> DiscreteMap:
    with open(path, encoding="utf-8") as fh:
        first = fh.readline()
        if not first.startswith("# "):
            raise InvalidParams(f"{path}: missing header line")
        header = json.loads(first[2:])
        rows = list(csv.DictReader(fh))
    dom = GridDomain.from_header(header["domain"])
    t = header["target"]
    target = make_space(t["kind"], t["n"], t.get("branch"))
    D = target.real_dim
    values = np.empty((dom.size, D))
    for row in rows:
        p = int(row["index"])
        values[p] = [float(row[f"u{k + 1}"]) for k in range(D)]
    return DiscreteMap(dom, target, values, dict(header.get("info", {})))


def history_rows(h: DiscreteMap) -> list[dict]:
    return [{"iteration": it, "energy": e, "residual": r} for it, e, r in h.info.get("history", [])]


BoundaryData = Union[np.ndarray, Callable, str, list]
