"""Signed source distributions: components, pairing, and grid deposition.

A source is a finite sum of components: point atoms, polynomial densities on
segments and circular arcs, monomial densities along the whole domain
boundary, and constant area densities.  Masses and pairings against test
potentials are computed by closed-form or adaptive quadrature; rasterization
deposits everything onto active grid nodes by (renormalized) bilinear
splitting and repairs the floating-point mass residue.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence, Union

import numpy as np
from scipy import integrate

from .geometry import Domain2D, Grid, domain_area, point_in_domain

BALANCE_RTOL = 1e-9


class MeasureError(ValueError):
    """Raised for unbalanced sources or components outside the domain."""


@dataclass(frozen=True)
class Atom:
    """Point mass `weight` at `point`."""
    point: tuple[float, float]
    weight: float


@dataclass(frozen=True)
class SegmentDensity:
    """Density c0 + c1*t + c2*t^2 (t = arclength from `a`) on segment [a, b]."""
    a: tuple[float, float]
    b: tuple[float, float]
    coeffs: tuple[float, float, float] = (1.0, 0.0, 0.0)

    @property
    def length(self) -> float:
        return math.hypot(self.b[0] - self.a[0], self.b[1] - self.a[1])

    def density(self, t):
        c0, c1, c2 = self.coeffs
        return c0 + c1 * t + c2 * t * t

    def point_at(self, t):
        L = self.length
        return (self.a[0] + (self.b[0] - self.a[0]) * t / L,
                self.a[1] + (self.b[1] - self.a[1]) * t / L)


@dataclass(frozen=True)
class ArcDensity:
    """Density c0 + c1*theta + c2*theta^2 against arclength on a circular arc.

    The arc is {center + R(cos t, sin t) : theta0 <= t <= theta1}; a mass
    element is density(t) * R dt.
    """
    center: tuple[float, float]
    radius: float
    theta0: float
    theta1: float
    coeffs: tuple[float, float, float] = (1.0, 0.0, 0.0)

    def __post_init__(self):
        if not self.theta0 < self.theta1:
            raise MeasureError("arc needs theta0 < theta1")
        if self.radius <= 0:
            raise MeasureError("arc radius must be positive")

    def density(self, t):
        c0, c1, c2 = self.coeffs
        return c0 + c1 * t + c2 * t * t

    def point_at(self, t):
        return (self.center[0] + self.radius * np.cos(t),
                self.center[1] + self.radius * np.sin(t))


@dataclass(frozen=True)
class BoundaryDensity:
    """Density coef * x1^i * x2^j integrated along the whole outer boundary."""
    coef: float
    i: int = 0
    j: int = 0

    def __post_init__(self):
        if self.i < 0 or self.j < 0 or self.i + self.j > 2:
            raise MeasureError("boundary density must be a monomial of degree <= 2")

    def density(self, x, y):
        return self.coef * np.asarray(x) ** self.i * np.asarray(y) ** self.j


@dataclass(frozen=True)
class AreaDensity:
    """Constant density over a subregion of the domain."""
    region: Domain2D
    value: float


SourceComponent = Union[Atom, SegmentDensity, ArcDensity, BoundaryDensity, AreaDensity]


@dataclass(frozen=True, eq=False)
class SourceMeasure:
    """A balanced signed measure given as a list of components."""
    components: tuple[SourceComponent, ...]
    domain: Domain2D

    def __post_init__(self):
        object.__setattr__(self, "components", tuple(self.components))
        for k, comp in enumerate(self.components):
            for pt in _component_anchor_points(comp):
                if not point_in_domain(self.domain, pt):
                    raise MeasureError(
                        f"component {k} has a point {tuple(pt)} outside the domain")
        tv = total_variation(self)
        if tv > 0 and abs(total_mass(self)) > BALANCE_RTOL * tv:
            raise MeasureError(
                f"source is not balanced: residual mass {total_mass(self):.3e}")


def _component_anchor_points(comp: SourceComponent):
    if isinstance(comp, Atom):
        return [comp.point]
    if isinstance(comp, SegmentDensity):
        return [comp.a, comp.b, comp.point_at(0.5 * comp.length)]
    if isinstance(comp, ArcDensity):
        mid = 0.5 * (comp.theta0 + comp.theta1)
        return [comp.point_at(comp.theta0), comp.point_at(comp.theta1),
                (float(comp.point_at(mid)[0]), float(comp.point_at(mid)[1]))]
    return []  # boundary and area components live on the domain by construction


# ---------------------------------------------------------------------------
# Component integrals
# ---------------------------------------------------------------------------

def _component_mass(comp: SourceComponent, domain: Domain2D) -> float:
    if isinstance(comp, Atom):
        return comp.weight
    if isinstance(comp, SegmentDensity):
        L = comp.length
        c0, c1, c2 = comp.coeffs
        return c0 * L + c1 * L * L / 2 + c2 * L ** 3 / 3
    if isinstance(comp, ArcDensity):
        t0, t1 = comp.theta0, comp.theta1
        c0, c1, c2 = comp.coeffs
        prim = lambda t: c0 * t + c1 * t * t / 2 + c2 * t ** 3 / 3
        return comp.radius * (prim(t1) - prim(t0))
    if isinstance(comp, BoundaryDensity):
        return _boundary_integral(comp, domain, lambda x, y: np.ones_like(x))
    if isinstance(comp, AreaDensity):
        return comp.value * domain_area(comp.region)
    raise TypeError(f"unknown component {type(comp).__name__}")


def _component_tv(comp: SourceComponent, domain: Domain2D) -> float:
    """Total variation |component|, by quadrature where signs may change."""
    if isinstance(comp, Atom):
        return abs(comp.weight)
    if isinstance(comp, SegmentDensity):
        val, _ = integrate.quad(lambda t: abs(comp.density(t)), 0, comp.length,
                                limit=200)
        return val
    if isinstance(comp, ArcDensity):
        val, _ = integrate.quad(lambda t: comp.radius * abs(comp.density(t)),
                                comp.theta0, comp.theta1, limit=200)
        return val
    if isinstance(comp, BoundaryDensity):
        return _boundary_integral(comp, domain, lambda x, y: np.ones_like(x),
                                  absolute=True)
    if isinstance(comp, AreaDensity):
        return abs(comp.value) * domain_area(comp.region)
    raise TypeError(f"unknown component {type(comp).__name__}")


def _boundary_integral(comp: BoundaryDensity, domain: Domain2D,
                       u: Callable, absolute: bool = False) -> float:
    """Integral of density * u (or |density| * u) along the outer boundary."""
    if domain.is_disc:
        cx, cy = domain.center
        R = domain.radius

        def f(t):
            x, y = cx + R * math.cos(t), cy + R * math.sin(t)
            g = comp.coef * x ** comp.i * y ** comp.j
            if absolute:
                g = abs(g)
            return g * float(u(np.array([x]), np.array([y]))[0]) * R

        total = 0.0
        # split at quadrant boundaries to help the adaptive rule
        knots = np.linspace(0, 2 * math.pi, 9)
        for a, b in zip(knots[:-1], knots[1:]):
            val, _ = integrate.quad(f, a, b, limit=200, epsabs=1e-13, epsrel=1e-12)
            total += val
        return total
    total = 0.0
    poly = domain.outer
    for k in range(len(poly)):
        p, q = poly[k], poly[(k + 1) % len(poly)]
        L = math.hypot(q[0] - p[0], q[1] - p[1])
        if L == 0:
            continue

        def f(t, p=p, q=q, L=L):
            x = p[0] + (q[0] - p[0]) * t / L
            y = p[1] + (q[1] - p[1]) * t / L
            g = comp.coef * x ** comp.i * y ** comp.j
            if absolute:
                g = abs(g)
            return g * float(u(np.array([x]), np.array([y]))[0])

        val, _ = integrate.quad(f, 0, L, limit=200, epsabs=1e-13, epsrel=1e-12)
        total += val
    return total


def total_mass(Q: SourceMeasure) -> float:
    """Net mass of the source; zero for admissible (balanced) sources."""
    return math.fsum(_component_mass(c, Q.domain) for c in Q.components)


def total_variation(Q: SourceMeasure) -> float:
    return math.fsum(_component_tv(c, Q.domain) for c in Q.components)


# ---------------------------------------------------------------------------
# Pairing <Q, u>
# ---------------------------------------------------------------------------

def _as_evaluator(u) -> Callable[[np.ndarray, np.ndarray], np.ndarray]:
    """Accept a callable u(x, y) or an object with interpolate(x, y)."""
    if hasattr(u, "interpolate"):
        return u.interpolate
    if callable(u):
        def ev(x, y):
            return np.asarray(u(np.asarray(x, float), np.asarray(y, float)), float)
        return ev
    raise TypeError("u must be callable or expose interpolate(x, y)")


def pair(Q: SourceMeasure, u, grid_h: float | None = None) -> float:
    """The duality pairing <Q, u>.

    Atoms evaluate u pointwise.  Curve components integrate density * u with
    an adaptive rule for analytic evaluators, or a fixed Gauss rule with at
    least 8 points per `grid_h` of arclength when u is a grid field (whose
    own accuracy is the limiting factor anyway).
    """
    ev = _as_evaluator(u)
    h = grid_h
    if h is None and hasattr(u, "grid"):
        h = u.grid.h
    parts = []
    for comp in Q.components:
        parts.append(_pair_component(comp, Q.domain, ev, h))
    return math.fsum(parts)


def _gauss_panels(f: Callable, a: float, b: float, n_panels: int, order: int = 4) -> float:
    xs, ws = np.polynomial.legendre.leggauss(order)
    edges = np.linspace(a, b, n_panels + 1)
    mid = 0.5 * (edges[:-1] + edges[1:])
    half = 0.5 * (edges[1:] - edges[:-1])
    pts = (mid[:, None] + half[:, None] * xs[None, :]).ravel()
    wts = (half[:, None] * ws[None, :]).ravel()
    return float(np.dot(wts, f(pts)))


def _pair_component(comp, domain, ev, h) -> float:
    if isinstance(comp, Atom):
        x, y = comp.point
        return comp.weight * float(ev(np.array([x]), np.array([y]))[0])
    if isinstance(comp, SegmentDensity):
        L = comp.length
        ax, ay = comp.a
        tx, ty = (comp.b[0] - ax) / L, (comp.b[1] - ay) / L

        def f(t):
            t = np.asarray(t, float)
            return comp.density(t) * ev(ax + tx * t, ay + ty * t)

        if h is None:
            val, _ = integrate.quad(lambda t: float(f(np.array([t]))[0]), 0, L,
                                    limit=400, epsabs=1e-13, epsrel=1e-12)
            return val
        return _gauss_panels(f, 0.0, L, max(2, int(math.ceil(2 * L / h))))
    if isinstance(comp, ArcDensity):
        R, (cx, cy) = comp.radius, comp.center

        def f(t):
            t = np.asarray(t, float)
            return R * comp.density(t) * ev(cx + R * np.cos(t), cy + R * np.sin(t))

        if h is None:
            val, _ = integrate.quad(lambda t: float(f(np.array([t]))[0]),
                                    comp.theta0, comp.theta1,
                                    limit=400, epsabs=1e-13, epsrel=1e-12)
            return val
        arclen = R * (comp.theta1 - comp.theta0)
        return _gauss_panels(f, comp.theta0, comp.theta1,
                             max(2, int(math.ceil(2 * arclen / h))))
    if isinstance(comp, BoundaryDensity):
        if h is None:
            return _boundary_integral(comp, domain, ev)
        return _boundary_pair_fixed(comp, domain, ev, h)
    if isinstance(comp, AreaDensity):
        return _area_pair(comp, ev)
    raise TypeError(f"unknown component {type(comp).__name__}")


def _boundary_pair_fixed(comp: BoundaryDensity, domain: Domain2D, ev, h: float) -> float:
    total = 0.0
    for x, y, w in _boundary_quadrature(comp, domain, h):
        total += float(np.dot(w, ev(x, y)))
    return total


def _boundary_quadrature(comp: BoundaryDensity, domain: Domain2D, h: float):
    """Yield (x, y, weight) quadrature arrays along the outer boundary.

    Weights already include the density factor; at least 8 points per h of
    arclength.
    """
    xs, ws = np.polynomial.legendre.leggauss(4)
    if domain.is_disc:
        cx, cy = domain.center
        R = domain.radius
        arclen = 2 * math.pi * R
        n_panels = max(8, int(math.ceil(2 * arclen / h)))
        edges = np.linspace(0, 2 * math.pi, n_panels + 1)
        mid = 0.5 * (edges[:-1] + edges[1:])
        half = 0.5 * (edges[1:] - edges[:-1])
        t = (mid[:, None] + half[:, None] * xs[None, :]).ravel()
        w = (half[:, None] * ws[None, :]).ravel() * R
        x, y = cx + R * np.cos(t), cy + R * np.sin(t)
        yield x, y, w * comp.density(x, y)
        return
    poly = domain.outer
    for k in range(len(poly)):
        p, q = poly[k], poly[(k + 1) % len(poly)]
        L = math.hypot(q[0] - p[0], q[1] - p[1])
        if L == 0:
            continue
        n_panels = max(2, int(math.ceil(2 * L / h)))
        edges = np.linspace(0, L, n_panels + 1)
        mid = 0.5 * (edges[:-1] + edges[1:])
        half = 0.5 * (edges[1:] - edges[:-1])
        t = (mid[:, None] + half[:, None] * xs[None, :]).ravel()
        w = (half[:, None] * ws[None, :]).ravel()
        x = p[0] + (q[0] - p[0]) * t / L
        y = p[1] + (q[1] - p[1]) * t / L
        yield x, y, w * comp.density(x, y)


def _area_pair(comp: AreaDensity, ev) -> float:
    """Integral of value * u over the region, by centroid-fan triangulation.

    Exact layout only for star-shaped-from-centroid polygons and discs, which
    covers every region this package constructs.
    """
    region = comp.region
    # degree-4 triangle rule (6 points)
    bary = np.array([
        [0.10810301816807, 0.44594849091597, 0.44594849091597],
        [0.44594849091597, 0.10810301816807, 0.44594849091597],
        [0.44594849091597, 0.44594849091597, 0.10810301816807],
        [0.81684757298046, 0.09157621350977, 0.09157621350977],
        [0.09157621350977, 0.81684757298046, 0.09157621350977],
        [0.09157621350977, 0.09157621350977, 0.81684757298046],
    ])
    wts = np.array([0.22338158967801] * 3 + [0.10995174365532] * 3)
    if region.is_disc:
        th = 2 * np.pi * np.arange(512) / 512
        cx, cy = region.center
        verts = np.column_stack([cx + region.radius * np.cos(th),
                                 cy + region.radius * np.sin(th)])
        # correct the polygon shortfall so the disc area is matched
        scale = math.sqrt(math.pi / (0.5 * 512 * math.sin(2 * math.pi / 512)))
        verts = np.array([cx, cy]) + (verts - np.array([cx, cy])) * scale
    else:
        verts = region.outer
    centroid = verts.mean(axis=0)
    total = 0.0
    n = len(verts)
    for k in range(n):
        tri = np.array([centroid, verts[k], verts[(k + 1) % n]])
        area = 0.5 * abs((tri[1, 0] - tri[0, 0]) * (tri[2, 1] - tri[0, 1])
                         - (tri[2, 0] - tri[0, 0]) * (tri[1, 1] - tri[0, 1]))
        pts = bary @ tri
        total += area * float(np.dot(wts, ev(pts[:, 0], pts[:, 1])))
    return comp.value * total


# ---------------------------------------------------------------------------
# Rasterization
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class RasterSource:
    """Node weights q_i on a grid, summing to zero."""
    weights: np.ndarray  # (nx+1, ny+1), zero at inactive nodes
    grid: Grid

    @property
    def total(self) -> float:
        return float(math.fsum(self.weights.ravel()))

    @property
    def abs_total(self) -> float:
        return float(np.abs(self.weights).sum())


def _nearest_cell(grid: Grid, i: int, j: int, x: float, y: float,
                  require_full: bool):
    """Closest cell (by center) to (x, y) within a bounded ring search.

    With require_full, only cells whose four corners are all active count.
    Returns (i, j) or None.
    """
    h = grid.h
    for radius in range(0, 4):
        best = None
        for di in range(-radius, radius + 1):
            for dj in range(-radius, radius + 1):
                if max(abs(di), abs(dj)) != radius:
                    continue
                ii, jj = i + di, j + dj
                if not (0 <= ii < grid.nx and 0 <= jj < grid.ny):
                    continue
                corners = grid.active_nodes[ii:ii + 2, jj:jj + 2]
                ok = corners.all() if require_full else corners.any()
                if not ok:
                    continue
                cx = grid.origin[0] + (ii + 0.5) * h
                cy = grid.origin[1] + (jj + 0.5) * h
                d = (cx - x) ** 2 + (cy - y) ** 2
                if best is None or d < best[0]:
                    best = (d, ii, jj)
        if best is not None:
            return best[1], best[2]
    return None


def _deposit(weights: np.ndarray, grid: Grid, x: float, y: float, w: float,
             comp_index: int) -> None:
    """Bilinearly split mass w at (x, y) over active corner nodes.

    Falls back to nudging the deposit point toward the nearest cell with at
    least one active corner (bounded search), so sources sitting exactly on a
    curved boundary still land on the grid.
    """
    h = grid.h
    i, j = grid.locate_cell(x, y)
    # Two passes: prefer cells all four of whose corners carry unknowns, so the
    # deposited mass is visible to the cell-based solver; only then settle for
    # a cell with some active corner (boundary slivers).
    for require_full in (True, False):
        best = _nearest_cell(grid, i, j, x, y, require_full)
        if best is not None:
            ii, jj = best
            fx = np.clip((x - grid.origin[0]) / h - ii, 0.0, 1.0)
            fy = np.clip((y - grid.origin[1]) / h - jj, 0.0, 1.0)
            wmat = np.array([[(1 - fx) * (1 - fy), (1 - fx) * fy],
                             [fx * (1 - fy), fx * fy]])
            mask = grid.active_nodes[ii:ii + 2, jj:jj + 2]
            wmat = np.where(mask, wmat, 0.0)
            s = wmat.sum()
            if s <= 0:
                # all active corners got zero bilinear weight; spread evenly
                wmat = np.where(mask, 1.0, 0.0)
                s = wmat.sum()
            weights[ii:ii + 2, jj:jj + 2] += w * wmat / s
            return
    raise MeasureError(
        f"component {comp_index} touches no active nodes near ({x:.4g}, {y:.4g})")


def rasterize(Q: SourceMeasure, grid: Grid) -> RasterSource:
    """Deposit the source onto active grid nodes, conserving mass exactly."""
    weights = np.zeros((grid.nx + 1, grid.ny + 1))
    h = grid.h
    for k, comp in enumerate(Q.components):
        if isinstance(comp, Atom):
            _deposit(weights, grid, comp.point[0], comp.point[1], comp.weight, k)
        elif isinstance(comp, SegmentDensity):
            L = comp.length
            n_panels = max(2, int(math.ceil(2 * L / h)))
            xs, ws = np.polynomial.legendre.leggauss(4)
            edges = np.linspace(0, L, n_panels + 1)
            for a, b in zip(edges[:-1], edges[1:]):
                mid, half = 0.5 * (a + b), 0.5 * (b - a)
                for xg, wg in zip(xs, ws):
                    t = mid + half * xg
                    px, py = comp.point_at(t)
                    _deposit(weights, grid, px, py, half * wg * comp.density(t), k)
        elif isinstance(comp, ArcDensity):
            arclen = comp.radius * (comp.theta1 - comp.theta0)
            n_panels = max(2, int(math.ceil(2 * arclen / h)))
            xs, ws = np.polynomial.legendre.leggauss(4)
            edges = np.linspace(comp.theta0, comp.theta1, n_panels + 1)
            for a, b in zip(edges[:-1], edges[1:]):
                mid, half = 0.5 * (a + b), 0.5 * (b - a)
                for xg, wg in zip(xs, ws):
                    t = mid + half * xg
                    px, py = comp.point_at(t)
                    _deposit(weights, grid, float(px), float(py),
                             comp.radius * half * wg * comp.density(t), k)
        elif isinstance(comp, BoundaryDensity):
            for x, y, w in _boundary_quadrature(comp, Q.domain, h):
                for px, py, pw in zip(x, y, w):
                    _deposit(weights, grid, float(px), float(py), float(pw), k)
        elif isinstance(comp, AreaDensity):
            _rasterize_area(weights, grid, comp, k)
        else:
            raise TypeError(f"unknown component {type(comp).__name__}")
    weights[~grid.active_nodes] = 0.0
    # Proportional residue repair keeps the support unchanged.
    residue = math.fsum(weights.ravel())
    absw = np.abs(weights)
    scale = absw.sum()
    if scale > 0 and residue != 0.0:
        weights -= residue * absw / scale
        leftover = math.fsum(weights.ravel())
        if leftover != 0.0:
            idx = np.unravel_index(int(np.argmax(absw)), weights.shape)
            weights[idx] -= leftover
    return RasterSource(weights=weights, grid=grid)


def _rasterize_area(weights: np.ndarray, grid: Grid, comp: AreaDensity, k: int) -> None:
    """Cell-subsampled deposition of a constant area density."""
    sub = 4
    offs = (np.arange(sub) + 0.5) / sub
    CX, CY = grid.cell_centers()
    cells = np.argwhere(grid.active_cells)
    for ci, cj in cells:
        x0 = grid.origin[0] + ci * grid.h
        y0 = grid.origin[1] + cj * grid.h
        hits = 0
        for fx in offs:
            for fy in offs:
                if point_in_domain(comp.region, (x0 + fx * grid.h, y0 + fy * grid.h)):
                    hits += 1
        if hits:
            mass = comp.value * grid.h ** 2 * hits / (sub * sub)
            _deposit(weights, grid, CX[ci, cj], CY[ci, cj], mass, k)
