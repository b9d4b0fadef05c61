"""Planar domains, masked structured grids, and geodesic distances.

A domain is a single outer boundary (simple polygon or disc) minus a list of
polygonal holes.  Grids are uniform, axis-aligned, and carry node/cell
membership masks.  Geodesic distances between points of the closed domain are
computed exactly on a visibility graph over the two query points and the
reflex vertices of the boundary; disc boundaries are replaced by an inscribed
256-gon for visibility purposes only (membership tests stay exact).
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

# Relative tolerance used for closed-set membership; scaled by a local length.
MEMBERSHIP_RTOL = 1e-9

# Number of sides of the polygon standing in for a disc in visibility graphs.
DISC_NGON = 256


class GeometryError(ValueError):
    """Raised for degenerate domains or points outside the domain."""


@dataclass(frozen=True, eq=False)
class Domain2D:
    """A closed planar region: polygon or disc outer boundary, minus holes.

    Polygon vertices are counterclockwise; hole chains are clockwise.  Either
    `outer` (an (N, 2) vertex array) or `center` and `radius` must be given,
    never both.
    """

    outer: Optional[np.ndarray] = None
    center: Optional[tuple[float, float]] = None
    radius: Optional[float] = None
    holes: tuple[np.ndarray, ...] = ()

    def __post_init__(self):
        if (self.outer is None) == (self.center is None):
            raise GeometryError("domain needs either a polygon or a disc, not both")
        if self.outer is not None:
            arr = np.asarray(self.outer, dtype=float)
            if arr.ndim != 2 or arr.shape[1] != 2 or arr.shape[0] < 3:
                raise GeometryError("outer polygon needs at least 3 vertices")
            if abs(_signed_area(arr)) < 1e-14 * (np.ptp(arr) or 1.0) ** 2:
                raise GeometryError("degenerate domain: outer polygon has zero area")
            if _signed_area(arr) < 0:
                raise GeometryError("outer polygon must be counterclockwise")
            object.__setattr__(self, "outer", arr)
        else:
            if self.radius is None or self.radius <= 0:
                raise GeometryError("degenerate domain: disc radius must be positive")
        holes = []
        for hole in self.holes:
            arr = np.asarray(hole, dtype=float)
            if arr.ndim != 2 or arr.shape[1] != 2 or arr.shape[0] < 3:
                raise GeometryError("hole needs at least 3 vertices")
            if _signed_area(arr) > 0:
                raise GeometryError("hole chains must be clockwise")
            holes.append(arr)
        object.__setattr__(self, "holes", tuple(holes))

    @property
    def is_disc(self) -> bool:
        return self.center is not None

    @property
    def bounding_box(self) -> tuple[float, float, float, float]:
        """(xmin, ymin, xmax, ymax) of the outer boundary."""
        if self.is_disc:
            cx, cy = self.center
            r = self.radius
            return (cx - r, cy - r, cx + r, cy + r)
        xs, ys = self.outer[:, 0], self.outer[:, 1]
        return (xs.min(), ys.min(), xs.max(), ys.max())

    def length_scale(self) -> float:
        xmin, ymin, xmax, ymax = self.bounding_box
        return max(xmax - xmin, ymax - ymin)


def _signed_area(poly: np.ndarray) -> float:
    x, y = poly[:, 0], poly[:, 1]
    xn, yn = np.roll(x, -1), np.roll(y, -1)
    return 0.5 * float(np.sum(x * yn - xn * y))


def _point_in_polygon(poly: np.ndarray, px: float, py: float, tol: float) -> bool:
    """Closed membership: true on the boundary (within tol) and inside."""
    n = len(poly)
    # Boundary proximity first: distance to each edge segment.
    ax, ay = poly[:, 0], poly[:, 1]
    bx, by = np.roll(ax, -1), np.roll(ay, -1)
    dx, dy = bx - ax, by - ay
    seg2 = dx * dx + dy * dy
    t = np.clip(((px - ax) * dx + (py - ay) * dy) / np.where(seg2 > 0, seg2, 1.0), 0.0, 1.0)
    cx, cy = ax + t * dx, ay + t * dy
    d2 = (px - cx) ** 2 + (py - cy) ** 2
    if d2.min() <= tol * tol:
        return True
    # Ray cast (crossing number), robust because boundary cases were caught above.
    inside = False
    for i in range(n):
        x1, y1 = poly[i]
        x2, y2 = poly[(i + 1) % n]
        if (y1 > py) != (y2 > py):
            xint = x1 + (py - y1) * (x2 - x1) / (y2 - y1)
            if px < xint:
                inside = not inside
    return inside


def _points_in_polygon_bulk(poly: np.ndarray, X: np.ndarray, Y: np.ndarray,
                            tol: float) -> np.ndarray:
    """Vectorized closed-membership test for many points at once."""
    X = np.asarray(X, dtype=float)
    Y = np.asarray(Y, dtype=float)
    shape = X.shape
    px, py = X.ravel(), Y.ravel()
    n = len(poly)
    near = np.zeros(px.shape, dtype=bool)
    inside = np.zeros(px.shape, dtype=bool)
    for i in range(n):
        x1, y1 = poly[i]
        x2, y2 = poly[(i + 1) % n]
        dx, dy = x2 - x1, y2 - y1
        seg2 = dx * dx + dy * dy
        if seg2 > 0:
            t = np.clip(((px - x1) * dx + (py - y1) * dy) / seg2, 0.0, 1.0)
        else:
            t = 0.0
        d2 = (px - (x1 + t * dx)) ** 2 + (py - (y1 + t * dy)) ** 2
        near |= d2 <= tol * tol
        cross = (y1 > py) != (y2 > py)
        if np.any(cross):
            xint = x1 + (py - y1) * dx / dy
            inside[cross] ^= px[cross] < xint[cross]
    return (near | inside).reshape(shape)


def _chain_proximity_bulk(poly: np.ndarray, X: np.ndarray, Y: np.ndarray,
                          tol: float) -> np.ndarray:
    """True where a point lies within tol of the closed chain."""
    px, py = np.asarray(X, float).ravel(), np.asarray(Y, float).ravel()
    near = np.zeros(px.shape, dtype=bool)
    n = len(poly)
    for i in range(n):
        x1, y1 = poly[i]
        x2, y2 = poly[(i + 1) % n]
        dx, dy = x2 - x1, y2 - y1
        seg2 = dx * dx + dy * dy
        t = np.clip(((px - x1) * dx + (py - y1) * dy) / seg2, 0.0, 1.0) if seg2 > 0 else 0.0
        d2 = (px - (x1 + t * dx)) ** 2 + (py - (y1 + t * dy)) ** 2
        near |= d2 <= tol * tol
    return near.reshape(np.asarray(X).shape)


def point_in_domain(domain: Domain2D, x: Sequence[float], tol: Optional[float] = None) -> bool:
    """Membership in the closed set, with a small boundary tolerance.

    The default tolerance is length_scale * 1e-9, matching the node-activation
    convention of build_grid.
    """
    px, py = float(x[0]), float(x[1])
    if tol is None:
        tol = domain.length_scale() * MEMBERSHIP_RTOL
    if domain.is_disc:
        cx, cy = domain.center
        if math.hypot(px - cx, py - cy) > domain.radius + tol:
            return False
    else:
        if not _point_in_polygon(domain.outer, px, py, tol):
            return False
    for hole in domain.holes:
        # Strictly inside a hole (beyond tol of its boundary) means excluded.
        if _point_in_polygon(hole, px, py, 0.0) and not _point_on_chain(hole, px, py, tol):
            return False
    return True


def _point_on_chain(poly: np.ndarray, px: float, py: float, tol: float) -> bool:
    ax, ay = poly[:, 0], poly[:, 1]
    bx, by = np.roll(ax, -1), np.roll(ay, -1)
    dx, dy = bx - ax, by - ay
    seg2 = dx * dx + dy * dy
    t = np.clip(((px - ax) * dx + (py - ay) * dy) / np.where(seg2 > 0, seg2, 1.0), 0.0, 1.0)
    cx, cy = ax + t * dx, ay + t * dy
    d2 = (px - cx) ** 2 + (py - cy) ** 2
    return bool(d2.min() <= tol * tol)


@dataclass(frozen=True, eq=False)
class Grid:
    """Uniform grid over the domain's bounding box with membership masks.

    Nodes sit at origin + (i*h, j*h) for i in 0..nx, j in 0..ny; cell (i, j)
    has corner nodes (i, j), (i+1, j), (i, j+1), (i+1, j+1).  active_nodes and
    active_cells are boolean arrays of shapes (nx+1, ny+1) and (nx, ny); a
    cell is active iff all four corners are.
    """

    nx: int
    ny: int
    h: float
    origin: tuple[float, float]
    active_nodes: np.ndarray
    active_cells: np.ndarray
    domain: Domain2D = field(repr=False, compare=False, default=None)

    def node_xy(self, i: int, j: int) -> tuple[float, float]:
        return (self.origin[0] + i * self.h, self.origin[1] + j * self.h)

    def node_coords(self) -> tuple[np.ndarray, np.ndarray]:
        """Meshgrid arrays X, Y of node positions, shape (nx+1, ny+1)."""
        xs = self.origin[0] + self.h * np.arange(self.nx + 1)
        ys = self.origin[1] + self.h * np.arange(self.ny + 1)
        return np.meshgrid(xs, ys, indexing="ij")

    def cell_centers(self) -> tuple[np.ndarray, np.ndarray]:
        xs = self.origin[0] + self.h * (np.arange(self.nx) + 0.5)
        ys = self.origin[1] + self.h * (np.arange(self.ny) + 0.5)
        return np.meshgrid(xs, ys, indexing="ij")

    def locate_cell(self, x: float, y: float) -> tuple[int, int]:
        """Index of the cell containing (x, y), clamped to the grid."""
        i = int(np.clip(math.floor((x - self.origin[0]) / self.h), 0, self.nx - 1))
        j = int(np.clip(math.floor((y - self.origin[1]) / self.h), 0, self.ny - 1))
        return i, j


def build_grid(domain: Domain2D, resolution: int) -> Grid:
    """Mask a uniform grid of the given resolution onto the domain.

    The spacing is the longest bounding-box side divided by `resolution`;
    the grid covers the whole box.  Node activation uses point_in_domain with
    tolerance h * 1e-9.
    """
    if resolution < 4:
        raise GeometryError("resolution must be at least 4")
    xmin, ymin, xmax, ymax = domain.bounding_box
    w, hgt = xmax - xmin, ymax - ymin
    if w <= 0 or hgt <= 0:
        raise GeometryError("degenerate domain: empty bounding box")
    h = max(w, hgt) / resolution
    nx = max(1, int(math.ceil(w / h - 1e-9)))
    ny = max(1, int(math.ceil(hgt / h - 1e-9)))
    tol = h * MEMBERSHIP_RTOL
    X, Y = np.meshgrid(xmin + h * np.arange(nx + 1), ymin + h * np.arange(ny + 1),
                       indexing="ij")
    if domain.is_disc:
        cx, cy = domain.center
        active = np.hypot(X - cx, Y - cy) <= domain.radius + tol
    else:
        active = _points_in_polygon_bulk(domain.outer, X, Y, tol)
    for hole in domain.holes:
        strict = _points_in_polygon_bulk(hole, X, Y, 0.0)
        active &= ~strict | _chain_proximity_bulk(hole, X, Y, tol)
    cells = active[:-1, :-1] & active[1:, :-1] & active[:-1, 1:] & active[1:, 1:]
    if not cells.any():
        raise GeometryError("degenerate domain: no active cells at this resolution")
    return Grid(nx=nx, ny=ny, h=h, origin=(xmin, ymin),
                active_nodes=active, active_cells=cells, domain=domain)


# ---------------------------------------------------------------------------
# Geodesics
# ---------------------------------------------------------------------------

def _boundary_chains(domain: Domain2D) -> list[np.ndarray]:
    """All boundary chains as CCW-for-outer / CW-for-holes vertex arrays.

    Discs are replaced by an inscribed regular DISC_NGON polygon.
    """
    if domain.is_disc:
        cx, cy = domain.center
        th = 2 * np.pi * np.arange(DISC_NGON) / DISC_NGON
        outer = np.column_stack([cx + domain.radius * np.cos(th),
                                 cy + domain.radius * np.sin(th)])
    else:
        outer = domain.outer
    return [outer] + list(domain.holes)


def _reflex_vertices(domain: Domain2D) -> np.ndarray:
    """Vertices at which the interior angle exceeds pi.

    For the outer CCW chain that means a right turn; for CW holes a right turn
    as well (the interior of the domain is on the right of a hole chain).
    Convex outer vertices cannot carry a geodesic corner, so they are dropped;
    for discs the inscribed polygon is convex and contributes nothing.
    """
    pts = []
    chains = _boundary_chains(domain)
    for k, chain in enumerate(chains):
        n = len(chain)
        for i in range(n):
            a, b, c = chain[i - 1], chain[i], chain[(i + 1) % n]
            cross = (b[0] - a[0]) * (c[1] - b[1]) - (b[1] - a[1]) * (c[0] - b[0])
            if k == 0 and not domain.is_disc:
                if cross < -1e-14:
                    pts.append(b)
            elif k > 0:
                # hole chains are CW; every vertex with a left turn pokes into
                # the domain
                if cross > 1e-14:
                    pts.append(b)
        if k > 0 and not pts:
            # Convex hole: all its vertices block straight lines.
            pts.extend(chain)
    if not pts:
        return np.zeros((0, 2))
    return np.array(pts, dtype=float)


def segment_in_domain(domain: Domain2D, a: Sequence[float], b: Sequence[float],
                      samples: int = 0) -> bool:
    """Whether the closed segment [a, b] stays inside the closed domain.

    The segment is cut at every parameter where it crosses a boundary edge
    (or the circle), and each piece's midpoint is membership-tested.  The
    optional `samples` adds evenly spaced extra checks, useful for stress
    tests.
    """
    ax, ay = float(a[0]), float(a[1])
    bx, by = float(b[0]), float(b[1])
    tol = domain.length_scale() * MEMBERSHIP_RTOL
    if not (point_in_domain(domain, (ax, ay)) and point_in_domain(domain, (bx, by))):
        return False
    params = {0.0, 1.0}
    dx, dy = bx - ax, by - ay
    if domain.is_disc:
        # Intersections with the circle |x - c| = r.
        cx, cy = domain.center
        fx, fy = ax - cx, ay - cy
        A = dx * dx + dy * dy
        B = 2 * (fx * dx + fy * dy)
        C = fx * fx + fy * fy - domain.radius ** 2
        disc = B * B - 4 * A * C
        if A > 0 and disc > 0:
            sq = math.sqrt(disc)
            for t in ((-B - sq) / (2 * A), (-B + sq) / (2 * A)):
                if 0.0 < t < 1.0:
                    params.add(t)
    for chain in ([] if domain.is_disc else [domain.outer]) + list(domain.holes):
        n = len(chain)
        for i in range(n):
            p, q = chain[i], chain[(i + 1) % n]
            ex, ey = q[0] - p[0], q[1] - p[1]
            denom = dx * ey - dy * ex
            if abs(denom) < 1e-30:
                continue
            t = ((p[0] - ax) * ey - (p[1] - ay) * ex) / denom
            s = ((p[0] - ax) * dy - (p[1] - ay) * dx) / denom
            if 0.0 < t < 1.0 and -1e-12 <= s <= 1 + 1e-12:
                params.add(t)
    cuts = sorted(params)
    for t0, t1 in zip(cuts[:-1], cuts[1:]):
        tm = 0.5 * (t0 + t1)
        if not point_in_domain(domain, (ax + tm * dx, ay + tm * dy), tol):
            return False
    for k in range(1, samples):
        t = k / samples
        if not point_in_domain(domain, (ax + t * dx, ay + t * dy), tol):
            return False
    return True


def geodesic_distance(domain: Domain2D, a: Sequence[float], b: Sequence[float]) -> float:
    """Length of the shortest path between a and b inside the closed domain.

    Exact for polygonal domains: Dijkstra on the visibility graph over
    {a, b} plus the reflex boundary vertices.  Returns math.inf when a and b
    are in different components.  Raises GeometryError if either endpoint is
    outside.
    """
    if not point_in_domain(domain, a):
        raise GeometryError(f"point {tuple(a)} outside the domain")
    if not point_in_domain(domain, b):
        raise GeometryError(f"point {tuple(b)} outside the domain")
    ax, ay = float(a[0]), float(a[1])
    bx, by = float(b[0]), float(b[1])
    if ax == bx and ay == by:
        return 0.0
    if segment_in_domain(domain, (ax, ay), (bx, by)):
        return math.hypot(bx - ax, by - ay)
    nodes = [(ax, ay), (bx, by)]
    for v in _reflex_vertices(domain):
        nodes.append((float(v[0]), float(v[1])))
    n = len(nodes)
    adj: list[list[tuple[int, float]]] = [[] for _ in range(n)]
    for i in range(n):
        for j in range(i + 1, n):
            if segment_in_domain(domain, nodes[i], nodes[j]):
                d = math.hypot(nodes[j][0] - nodes[i][0], nodes[j][1] - nodes[i][1])
                adj[i].append((j, d))
                adj[j].append((i, d))
    dist = [math.inf] * n
    dist[0] = 0.0
    pq = [(0.0, 0)]
    while pq:
        d, i = heapq.heappop(pq)
        if d > dist[i]:
            continue
        if i == 1:
            return d
        for j, w in adj[i]:
            nd = d + w
            if nd < dist[j]:
                dist[j] = nd
                heapq.heappush(pq, (nd, j))
    return math.inf


def grid_geodesic_distance(domain: Domain2D, a: Sequence[float], b: Sequence[float],
                           resolution: int = 128) -> float:
    """Brute-force 16-neighborhood Dijkstra on a masked grid.

    A deliberately independent cross-check for geodesic_distance; the
    16-neighborhood keeps the metrication error near 1%.
    """
    grid = build_grid(domain, resolution)
    nx, ny, h = grid.nx, grid.ny, grid.h
    idx = -np.ones((nx + 1, ny + 1), dtype=np.int64)
    act = np.argwhere(grid.active_nodes)
    idx[act[:, 0], act[:, 1]] = np.arange(len(act))

    def nearest(p):
        i = int(round((p[0] - grid.origin[0]) / h))
        j = int(round((p[1] - grid.origin[1]) / h))
        best, bd = None, math.inf
        for di in range(-3, 4):
            for dj in range(-3, 4):
                ii, jj = i + di, j + dj
                if 0 <= ii <= nx and 0 <= jj <= ny and grid.active_nodes[ii, jj]:
                    d = (ii * h + grid.origin[0] - p[0]) ** 2 + \
                        (jj * h + grid.origin[1] - p[1]) ** 2
                    if d < bd:
                        best, bd = (ii, jj), d
        if best is None:
            raise GeometryError(f"no active node near {tuple(p)}")
        return best

    # Knight moves included: 16-neighborhood.
    steps = [(1, 0), (0, 1), (-1, 0), (0, -1), (1, 1), (1, -1), (-1, 1), (-1, -1),
             (2, 1), (2, -1), (-2, 1), (-2, -1), (1, 2), (1, -2), (-1, 2), (-1, -2)]
    start, goal = nearest(a), nearest(b)
    dist = {start: 0.0}
    pq = [(0.0, start)]
    while pq:
        d, (i, j) = heapq.heappop(pq)
        if (i, j) == goal:
            return d
        if d > dist.get((i, j), math.inf):
            continue
        for di, dj in steps:
            ii, jj = i + di, j + dj
            if not (0 <= ii <= nx and 0 <= jj <= ny and grid.active_nodes[ii, jj]):
                continue
            if max(abs(di), abs(dj)) > 1:
                # Knight steps must not tunnel: the two nodes flanking the
                # segment midpoint must both be active.
                if abs(di) == 2:
                    n1 = (i + di // 2, j)
                    n2 = (i + di // 2, j + dj)
                else:
                    n1 = (i, j + dj // 2)
                    n2 = (i + di, j + dj // 2)
                if not (grid.active_nodes[n1] and grid.active_nodes[n2]):
                    continue
            nd = d + h * math.hypot(di, dj)
            if nd < dist.get((ii, jj), math.inf):
                dist[(ii, jj)] = nd
                heapq.heappush(pq, (nd, (ii, jj)))
    return math.inf


def domain_area(domain: Domain2D) -> float:
    """Exact area of the domain (outer minus holes)."""
    if domain.is_disc:
        area = math.pi * domain.radius ** 2
    else:
        area = _signed_area(domain.outer)
    for hole in domain.holes:
        area -= abs(_signed_area(hole))
    return area


def unit_square() -> Domain2D:
    return Domain2D(outer=np.array([[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]]))


def box(xmin: float, ymin: float, xmax: float, ymax: float) -> Domain2D:
    return Domain2D(outer=np.array([[xmin, ymin], [xmax, ymin],
                                    [xmax, ymax], [xmin, ymax]]))
