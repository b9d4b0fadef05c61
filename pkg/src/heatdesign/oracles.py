"""Closed-form optima for five benchmark problems, used as ground truth.

Each constructor returns the full analytic solution of one Kantorovich /
conductivity-design problem: the source measure, the exact value of the dual
norm, the optimal potential with its gradient, the unit flux direction field
sigma, the transport density mu (with a precomputed quadrature rule), and the
rank-one conductivity evaluator.  The solvers never see these objects; the
test suite compares against them.

The five problems:

* ``nonconvex``  -- two unit atoms separated by a reentrant notch, so the
  optimal flux bends around the notch tip.  Value sqrt(2).
* ``brothers``   -- a quadratic density on the unit circle whose transport
  density fills four circular caps and vanishes on the inscribed square.
  Value 8*sqrt(2)/3.
* ``diagonals``  -- opposite line measures on the two diagonals of a square;
  the transport density is an area measure on the cone |x2| <= |x1| (a
  second optimum lives on the complementary cone, which shows the
  minimizer is not unique).  Value 2*sqrt(2).
* ``arc``        -- a uniform probability on a circular arc against a unit
  atom at the centre; the flux is purely radial on the wedge it spans.
  Value R.
* ``segments``   -- two offset vertical segments; the flux is a constant
  diagonal field on the parallelogram between them.  Value 4*sqrt(2).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from scipy.spatial import ConvexHull

from .geometry import Domain2D, box
from .measures import (Atom, ArcDensity, BoundaryDensity, SegmentDensity,
                       SourceMeasure, pair)

_SQH = math.sqrt(2.0) / 2.0  # half of sqrt(2); shows up in every example

# Tolerance for "is this point on the (measure-zero) curve support".
CURVE_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class MuMeasure:
    """The optimal transport density mu together with its direction field.

    kind is "curve" (density per unit arclength on segments) or "area"
    (density against Lebesgue measure).  The q* arrays hold a fixed
    Gauss-Legendre rule: qw are d|mu| weights and qsigma the direction at
    each node, so smooth vector fields integrate against sigma*mu to about
    1e-12 without touching the geometry again.
    """

    kind: str
    mass: float
    density: Callable[[np.ndarray, np.ndarray], np.ndarray]
    qx: np.ndarray
    qy: np.ndarray
    qw: np.ndarray
    qsigma: np.ndarray

    def integrate(self, field) -> float:
        """Integral of sigma . F d|mu| for a vector field F(x, y) -> (Fx, Fy)."""
        fx, fy = field(self.qx, self.qy)
        dots = self.qsigma[:, 0] * np.asarray(fx, float) \
            + self.qsigma[:, 1] * np.asarray(fy, float)
        return float(np.dot(self.qw, dots))


@dataclass(frozen=True, eq=False)
class AnalyticSolution:
    """Everything the paper-and-pencil optimum of one benchmark pins down.

    u_hat is the optimal 1-Lipschitz potential (Lipschitz with respect to
    `distance`, the geodesic metric of the domain); sigma is the unit flux
    direction, zero where the flux vanishes; mu carries the transport
    density.  c_hat produces the optimal conductivity (rho, n) for any trace
    budget.  v_witness / f_trace are only set where the construction came
    with an auxiliary function of bounded variation and its boundary trace.
    """

    name: str
    domain: Domain2D
    Q: SourceMeasure
    value_Q1: float
    u_hat: Callable
    grad_u_hat: Callable
    sigma: Callable
    sigma_defined: Callable
    mu: MuMeasure
    in_support: Callable
    sample_mu: Callable
    distance: Callable
    v_witness: Optional[Callable] = None
    f_trace: Optional[Callable] = None

    def c_hat(self, x, y, lambda0: float):
        """Optimal conductivity at trace budget lambda0: density rho and axis n.

        rho scales the transport density by lambda0 / value_Q1 (same kind as
        mu: per arclength for curve supports, per area otherwise); n is the
        rank-one axis, equal to sigma up to sign.
        """
        if lambda0 <= 0:
            raise ValueError("trace budget lambda0 must be positive")
        rho = (lambda0 / self.value_Q1) * self.mu.density(x, y)
        nx, ny = self.sigma(x, y)
        return rho, (nx, ny)

    def sample_domain(self, rng, n: int) -> np.ndarray:
        """n random points of the closed domain (rejection from the box)."""
        xmin, ymin, xmax, ymax = self.domain.bounding_box
        xs, ys = [], []
        got = 0
        while got < n:
            m = max(128, 2 * (n - got))
            x = rng.uniform(xmin, xmax, m)
            y = rng.uniform(ymin, ymax, m)
            keep = _members(self.domain, x, y)
            xs.append(x[keep])
            ys.append(y[keep])
            got += int(keep.sum())
        return np.column_stack([np.concatenate(xs)[:n], np.concatenate(ys)[:n]])


def _members(domain: Domain2D, x: np.ndarray, y: np.ndarray) -> np.ndarray:
    if domain.is_disc:
        cx, cy = domain.center
        return np.hypot(x - cx, y - cy) <= domain.radius
    from .geometry import _points_in_polygon_bulk
    return _points_in_polygon_bulk(domain.outer, x, y, 0.0)


def _gl(a: float, b: float, n: int):
    xs, ws = np.polynomial.legendre.leggauss(n)
    return 0.5 * (a + b) + 0.5 * (b - a) * xs, 0.5 * (b - a) * ws


def _segment_dist(px, py, a, b):
    ax, ay = a
    dx, dy = b[0] - ax, b[1] - ay
    L2 = dx * dx + dy * dy
    t = np.clip(((px - ax) * dx + (py - ay) * dy) / L2, 0.0, 1.0)
    return np.hypot(px - (ax + t * dx), py - (ay + t * dy))


# ---------------------------------------------------------------------------
# Two atoms around a notch
# ---------------------------------------------------------------------------

_NOTCH_E1 = (-1.0, 0.5)   # outer ends of the notch edges; the tip is the origin
_NOTCH_E2 = (-1.0, -0.5)


def _wedge_domain() -> Domain2D:
    """The square (-1,1)^2 minus the triangular notch |x2| <= -x1/2."""
    return Domain2D(outer=np.array([
        [-1.0, -1.0], [1.0, -1.0], [1.0, 1.0], [-1.0, 1.0],
        list(_NOTCH_E1), [0.0, 0.0], list(_NOTCH_E2),
    ]))


def _wedge_distance(px, py, qx, qy):
    """Geodesic distance in the notched square, vectorized.

    The domain has a single reflex vertex (the notch tip at the origin), so
    every non-straight geodesic is the two-leg path through it: the distance
    is |p - q| when the segment avoids the notch and |p| + |q| otherwise.
    Crossing is tested against the interiors of the two notch edges.
    """
    px, py = np.asarray(px, float), np.asarray(py, float)
    qx, qy = np.asarray(qx, float), np.asarray(qy, float)
    dx, dy = qx - px, qy - py
    blocked = np.zeros(np.broadcast(px, qx).shape, bool)
    for ex, ey in (_NOTCH_E1, _NOTCH_E2):
        denom = dx * ey - dy * ex
        safe = np.where(np.abs(denom) < 1e-30, 1.0, denom)
        t = (-px * ey + py * ex) / safe
        s = (-px * dy + py * dx) / safe
        hit = (np.abs(denom) >= 1e-30) & (t >= -1e-12) & (t <= 1 + 1e-12) \
            & (s > 1e-9) & (s < 1 - 1e-9)
        blocked |= hit
    straight = np.hypot(dx, dy)
    via_tip = np.hypot(px, py) + np.hypot(qx, qy)
    return np.where(blocked, via_tip, straight)


def example_nonconvex() -> AnalyticSolution:
    """Unit atoms at (-1/2, 1/2) and (-1/2, -1/2) in the notched square.

    The straight segment between the atoms crosses the notch, so the optimal
    flux runs along the two legs meeting at the tip and the value is the
    geodesic distance sqrt(2) rather than the Euclidean 1.
    """
    domain = _wedge_domain()
    A, B = (-0.5, 0.5), (-0.5, -0.5)
    Q = SourceMeasure(components=(Atom(A, 1.0), Atom(B, -1.0)), domain=domain)
    value = math.sqrt(2.0)
    sig_up = (-_SQH, _SQH)    # along the upper leg, pointing at the positive atom
    sig_dn = (_SQH, _SQH)     # along the lower leg, pointing from B to the tip

    def u_hat(x, y):
        x, y = np.asarray(x, float), np.asarray(y, float)
        up = (y > 0) & (y > x)
        dn = (y < 0) & (y < -x)
        return np.where(up, _SQH * (y - x), np.where(dn, _SQH * (y + x), 0.0))

    def grad_u_hat(x, y):
        x, y = np.asarray(x, float), np.asarray(y, float)
        up = (y > 0) & (y > x)
        dn = (y < 0) & (y < -x)
        gx = np.where(up, -_SQH, np.where(dn, _SQH, 0.0))
        gy = np.where(up | dn, _SQH, 0.0)
        return gx, gy

    def in_support(x, y, pad: float = 0.0):
        x, y = np.asarray(x, float), np.asarray(y, float)
        d = np.minimum(_segment_dist(x, y, A, (0.0, 0.0)),
                       _segment_dist(x, y, (0.0, 0.0), B))
        return d <= pad + CURVE_TOL

    def sigma(x, y):
        x, y = np.asarray(x, float), np.asarray(y, float)
        on = in_support(x, y)
        sx = np.where(on, np.where(y >= 0, sig_up[0], sig_dn[0]), 0.0)
        sy = np.where(on, _SQH, 0.0)
        return sx, sy

    def sample_mu(rng, n):
        t = rng.uniform(0.0, 1.0, n)
        upper = rng.uniform(size=n) < 0.5
        return np.column_stack([-0.5 * t, np.where(upper, 0.5 * t, -0.5 * t)])

    # 64-point rule per leg; the integrands downstream are smooth.
    leg = math.sqrt(0.5)
    tq, tw = _gl(0.0, 1.0, 64)
    qx = np.concatenate([-0.5 * tq, -0.5 * tq])
    qy = np.concatenate([0.5 * tq, -0.5 * tq])
    qw = np.concatenate([leg * tw, leg * tw])
    qs = np.vstack([np.tile(sig_up, (64, 1)), np.tile(sig_dn, (64, 1))])

    def density(x, y):
        return np.where(in_support(x, y), 1.0, 0.0)

    mu = MuMeasure(kind="curve", mass=2 * leg, density=density,
                   qx=qx, qy=qy, qw=qw, qsigma=qs)
    return AnalyticSolution(
        name="nonconvex", domain=domain, Q=Q, value_Q1=value,
        u_hat=u_hat, grad_u_hat=grad_u_hat, sigma=sigma,
        sigma_defined=lambda x, y: in_support(x, y),
        mu=mu, in_support=in_support, sample_mu=sample_mu,
        distance=_wedge_distance)


# ---------------------------------------------------------------------------
# Quadratic boundary density on the unit disc
# ---------------------------------------------------------------------------

def example_brothers() -> AnalyticSolution:
    """Source -4*x1*x2 on the unit circle; transport density on four caps.

    The potential is the distance to the nearest "cross" arm and the density
    4*max(|x1|, |x2|) lives outside the inscribed square, where the flux runs
    parallel to the nearest pair of axes.  Carries the classical bounded
    variation witness v and its boundary trace f = x2^2 - x1^2, whose
    rotated gradient reproduces sigma * mu.
    """
    domain = Domain2D(center=(0.0, 0.0), radius=1.0)
    Q = SourceMeasure(components=(BoundaryDensity(coef=-4.0, i=1, j=1),),
                      domain=domain)
    value = 8.0 * math.sqrt(2.0) / 3.0
    c = _SQH

    def u_hat(x, y):
        x, y = np.asarray(x, float), np.asarray(y, float)
        return np.select([x >= np.abs(y), y >= np.abs(x), -x >= np.abs(y)],
                         [-y, -x, y], default=x)

    def grad_u_hat(x, y):
        x, y = np.asarray(x, float), np.asarray(y, float)
        conds = [x >= np.abs(y), y >= np.abs(x), -x >= np.abs(y)]
        gx = np.select(conds, [0.0, -1.0, 0.0], default=1.0)
        gy = np.select(conds, [-1.0, 0.0, 1.0], default=0.0)
        return gx + 0.0 * x, gy + 0.0 * x

    def _regions(x, y):
        inside = np.hypot(x, y) <= 1.0 + CURVE_TOL
        horiz = (np.abs(x) >= c) & inside          # flux parallel to e2
        vert = (np.abs(y) >= c) & inside & ~horiz  # flux parallel to e1
        return horiz, vert

    def sigma(x, y):
        x, y = np.asarray(x, float), np.asarray(y, float)
        horiz, vert = _regions(x, y)
        sx = np.where(vert, -np.sign(y), 0.0)
        sy = np.where(horiz, -np.sign(x), 0.0)
        return sx, sy

    def density(x, y):
        x, y = np.asarray(x, float), np.asarray(y, float)
        horiz, vert = _regions(x, y)
        return np.where(horiz | vert, 4.0 * np.maximum(np.abs(x), np.abs(y)), 0.0)

    def in_support(x, y, pad: float = 0.0):
        x, y = np.asarray(x, float), np.asarray(y, float)
        return (np.hypot(x, y) <= 1.0 + pad) \
            & (np.maximum(np.abs(x), np.abs(y)) >= c - pad)

    def sample_mu(rng, n):
        pts = np.empty((0, 2))
        while len(pts) < n:
            cand = rng.uniform(-1.0, 1.0, (4 * n, 2))
            keep = (np.hypot(cand[:, 0], cand[:, 1]) < 1.0) \
                & (np.maximum(np.abs(cand[:, 0]), np.abs(cand[:, 1])) > c)
            pts = np.vstack([pts, cand[keep]])
        return pts[:n]

    # One polar patch per cap: theta spans the quarter turn around the cap
    # axis, r from the inscribed-square chord to the circle.
    qx, qy, qw, qs = [], [], [], []
    for k, sig in enumerate([(0.0, -1.0), (-1.0, 0.0), (0.0, 1.0), (1.0, 0.0)]):
        phi = 0.5 * math.pi * k
        tn, tw = _gl(phi - math.pi / 4, phi + math.pi / 4, 48)
        for th, wth in zip(tn, tw):
            r0 = c / math.cos(th - phi)
            rn, rw = _gl(r0, 1.0, 48)
            x, y = rn * math.cos(th), rn * math.sin(th)
            qx.append(x)
            qy.append(y)
            qw.append(wth * rw * rn * 4.0 * np.maximum(np.abs(x), np.abs(y)))
            qs.append(np.tile(sig, (48, 1)))
    mu = MuMeasure(kind="area", mass=value, density=density,
                   qx=np.concatenate(qx), qy=np.concatenate(qy),
                   qw=np.concatenate(qw), qsigma=np.vstack(qs))

    def v_witness(x, y):
        x, y = np.asarray(x, float), np.asarray(y, float)
        return np.select([np.abs(x) >= c, np.abs(y) >= c],
                         [1.0 - 2.0 * x * x, 2.0 * y * y - 1.0], default=0.0)

    def f_trace(x, y):
        x, y = np.asarray(x, float), np.asarray(y, float)
        return y * y - x * x

    return AnalyticSolution(
        name="brothers", domain=domain, Q=Q, value_Q1=value,
        u_hat=u_hat, grad_u_hat=grad_u_hat, sigma=sigma,
        sigma_defined=lambda x, y: in_support(np.asarray(x, float),
                                              np.asarray(y, float)),
        mu=mu, in_support=in_support, sample_mu=sample_mu,
        distance=lambda px, py, qx_, qy_: np.hypot(qx_ - px, qy_ - py),
        v_witness=v_witness, f_trace=f_trace)


# ---------------------------------------------------------------------------
# Opposite line measures on the diagonals of a square
# ---------------------------------------------------------------------------

def example_diagonals(alternate: bool = False) -> AnalyticSolution:
    """Unit density on the rising diagonal minus the falling one.

    The optimal flux is a vertical field of density sqrt(2) filling the cone
    |x2| <= |x1|.  With ``alternate`` the horizontal field on the
    complementary cone |x2| >= |x1| is returned instead; both are optimal,
    which is the standard demonstration that the minimizer is not unique.
    """
    domain = box(-1.0, -1.0, 1.0, 1.0)
    Q = SourceMeasure(components=(
        SegmentDensity((-1.0, -1.0), (1.0, 1.0)),
        SegmentDensity((-1.0, 1.0), (1.0, -1.0), coeffs=(-1.0, 0.0, 0.0)),
    ), domain=domain)
    value = 2.0 * math.sqrt(2.0)
    rt2 = math.sqrt(2.0)

    def u_hat(x, y):
        x, y = np.asarray(x, float), np.asarray(y, float)
        return 0.5 * (np.abs(x + y) - np.abs(x - y))

    def grad_u_hat(x, y):
        x, y = np.asarray(x, float), np.asarray(y, float)
        cone = np.abs(y) <= np.abs(x)
        return (np.where(cone, 0.0, np.sign(y)), np.where(cone, np.sign(x), 0.0))

    if not alternate:
        def cone_gap(x, y):
            return (np.abs(y) - np.abs(x)) / rt2

        def sigma(x, y):
            x, y = np.asarray(x, float), np.asarray(y, float)
            on = (cone_gap(x, y) <= 0) & (np.abs(x) <= 1.0)
            return np.where(on, 0.0 * x, 0.0), np.where(on, np.sign(x), 0.0)
    else:
        def cone_gap(x, y):
            return (np.abs(x) - np.abs(y)) / rt2

        def sigma(x, y):
            x, y = np.asarray(x, float), np.asarray(y, float)
            on = (cone_gap(x, y) <= 0) & (np.abs(y) <= 1.0)
            return np.where(on, np.sign(y), 0.0), np.where(on, 0.0 * x, 0.0)

    def in_support(x, y, pad: float = 0.0):
        x, y = np.asarray(x, float), np.asarray(y, float)
        inside_box = (np.abs(x) <= 1.0 + pad) & (np.abs(y) <= 1.0 + pad)
        return inside_box & (cone_gap(x, y) <= pad)

    def density(x, y):
        return np.where(in_support(x, y), rt2, 0.0)

    def sample_mu(rng, n):
        pts = np.empty((0, 2))
        while len(pts) < n:
            cand = rng.uniform(-1.0, 1.0, (3 * n, 2))
            keep = cone_gap(cand[:, 0], cand[:, 1]) < 0
            pts = np.vstack([pts, cand[keep]])
        return pts[:n]

    # Each half-cone maps from the unit square: s is the axis coordinate,
    # t sweeps the cross-section y = (2t-1)s, with area element 2s ds dt.
    sn, sw = _gl(0.0, 1.0, 48)
    tn, tw = _gl(0.0, 1.0, 48)
    S, T = np.meshgrid(sn, tn, indexing="ij")
    W = np.outer(sw, tw) * 2.0 * S * rt2
    qx, qy, qw, qs = [], [], [], []
    for side in (1.0, -1.0):
        ax = side * S.ravel()
        cr = ((2.0 * T - 1.0) * S).ravel()
        if not alternate:
            qx.append(ax)
            qy.append(cr)
            qs.append(np.column_stack([np.zeros(ax.size), np.full(ax.size, side)]))
        else:
            qx.append(cr)
            qy.append(ax)
            qs.append(np.column_stack([np.full(ax.size, side), np.zeros(ax.size)]))
        qw.append(W.ravel())
    mu = MuMeasure(kind="area", mass=value, density=density,
                   qx=np.concatenate(qx), qy=np.concatenate(qy),
                   qw=np.concatenate(qw), qsigma=np.vstack(qs))
    return AnalyticSolution(
        name="diagonals-alt" if alternate else "diagonals",
        domain=domain, Q=Q, value_Q1=value,
        u_hat=u_hat, grad_u_hat=grad_u_hat, sigma=sigma,
        sigma_defined=lambda x, y: in_support(x, y) & (cone_gap(
            np.asarray(x, float), np.asarray(y, float)) < 0),
        mu=mu, in_support=in_support, sample_mu=sample_mu,
        distance=lambda px, py, qx_, qy_: np.hypot(qx_ - px, qy_ - py))


# ---------------------------------------------------------------------------
# Uniform arc probability against an atom at the centre
# ---------------------------------------------------------------------------

def example_arc(R: float, theta0: float, theta1: float) -> AnalyticSolution:
    """Arc of radius R between two angles, drained by a unit atom at 0.

    The flux is radial with area density 1 / ((theta1 - theta0) r) on the
    wedge spanned by the arc, and the value equals R: every unit of source
    travels straight to the centre.  The domain is a convex polygon grown
    around the hull of the wedge.
    """
    if not 0.0 < theta0 < theta1 < 2.0 * math.pi:
        raise ValueError("arc angles must satisfy 0 < theta0 < theta1 < 2*pi")
    span = theta1 - theta0
    arclen = R * span

    th = np.linspace(theta0, theta1, 65)
    rim = np.column_stack([R * np.cos(th), R * np.sin(th)])
    cloud = np.vstack([[0.0, 0.0], rim])
    hull = ConvexHull(cloud)
    verts = cloud[hull.vertices]
    centroid = verts.mean(axis=0)
    domain = Domain2D(outer=centroid + 1.3 * (verts - centroid))

    Q = SourceMeasure(components=(
        ArcDensity((0.0, 0.0), R, theta0, theta1, coeffs=(1.0 / arclen, 0.0, 0.0)),
        Atom((0.0, 0.0), -1.0),
    ), domain=domain)

    def u_hat(x, y):
        return np.hypot(np.asarray(x, float), np.asarray(y, float))

    def grad_u_hat(x, y):
        x, y = np.asarray(x, float), np.asarray(y, float)
        r = np.hypot(x, y)
        safe = np.where(r > 0, r, 1.0)
        return np.where(r > 0, x / safe, 0.0), np.where(r > 0, y / safe, 0.0)

    def _in_wedge(x, y):
        r = np.hypot(x, y)
        ang = np.mod(np.arctan2(y, x), 2.0 * math.pi)
        return (r <= R + CURVE_TOL) & (ang >= theta0) & (ang <= theta1)

    def sigma(x, y):
        x, y = np.asarray(x, float), np.asarray(y, float)
        on = _in_wedge(x, y) & (np.hypot(x, y) > 0)
        gx, gy = grad_u_hat(x, y)
        return np.where(on, gx, 0.0), np.where(on, gy, 0.0)

    def density(x, y):
        x, y = np.asarray(x, float), np.asarray(y, float)
        r = np.hypot(x, y)
        on = _in_wedge(x, y) & (r > CURVE_TOL)
        return np.where(on, 1.0 / (span * np.where(on, r, 1.0)), 0.0)

    def in_support(x, y, pad: float = 0.0):
        return _wedge_dist_to(np.asarray(x, float), np.asarray(y, float),
                              R, theta0, theta1) <= pad + CURVE_TOL

    def sample_mu(rng, n):
        rr = rng.uniform(0.0, R, n)
        tt = rng.uniform(theta0, theta1, n)
        return np.column_stack([rr * np.cos(tt), rr * np.sin(tt)])

    rn, rw = _gl(0.0, R, 48)
    tn, tw = _gl(theta0, theta1, 48)
    RR, TT = np.meshgrid(rn, tn, indexing="ij")
    # d|mu| in polar coordinates is dr dtheta / span: the 1/r density cancels
    # the polar Jacobian, which is what makes the radial flux divergence-free.
    WW = np.outer(rw, tw) / span
    mu = MuMeasure(kind="area", mass=R, density=density,
                   qx=(RR * np.cos(TT)).ravel(), qy=(RR * np.sin(TT)).ravel(),
                   qw=WW.ravel(),
                   qsigma=np.column_stack([np.cos(TT).ravel(), np.sin(TT).ravel()]))
    return AnalyticSolution(
        name="arc", domain=domain, Q=Q, value_Q1=R,
        u_hat=u_hat, grad_u_hat=grad_u_hat, sigma=sigma,
        sigma_defined=lambda x, y: _in_wedge(np.asarray(x, float),
                                             np.asarray(y, float))
        & (np.hypot(np.asarray(x, float), np.asarray(y, float)) > 0),
        mu=mu, in_support=in_support, sample_mu=sample_mu,
        distance=lambda px, py, qx_, qy_: np.hypot(qx_ - px, qy_ - py))


def _wedge_dist_to(x, y, R, t0, t1):
    """Euclidean distance to the closed circular wedge, exact and vectorized."""
    r = np.hypot(x, y)
    ang = np.mod(np.arctan2(y, x), 2.0 * math.pi)
    aligned = (ang >= t0) & (ang <= t1)
    d = np.where(aligned, np.maximum(r - R, 0.0), np.inf)
    for t in (t0, t1):
        ex, ey = math.cos(t), math.sin(t)
        proj = np.clip(x * ex + y * ey, 0.0, R)
        d = np.minimum(d, np.hypot(x - proj * ex, y - proj * ey))
    return d


# ---------------------------------------------------------------------------
# Two offset vertical segments
# ---------------------------------------------------------------------------

def example_segments() -> AnalyticSolution:
    """Vertical unit-density segments at x = 1 and x = -1, offset by (2, 2).

    Every source point reaches its sink by a translation along (1, 1), so
    the flux is the constant field (1, 1) on the parallelogram between the
    segments and the value is 4*sqrt(2).
    """
    domain = box(-1.25, -2.25, 1.25, 2.25)
    Q = SourceMeasure(components=(
        SegmentDensity((1.0, 0.0), (1.0, 2.0)),
        SegmentDensity((-1.0, -2.0), (-1.0, 0.0), coeffs=(-1.0, 0.0, 0.0)),
    ), domain=domain)
    value = 4.0 * math.sqrt(2.0)
    rt2 = math.sqrt(2.0)

    def u_hat(x, y):
        x, y = np.asarray(x, float), np.asarray(y, float)
        return _SQH * (x + y)

    def grad_u_hat(x, y):
        x = np.asarray(x, float)
        return np.full_like(x, _SQH), np.full_like(x, _SQH)

    def in_support(x, y, pad: float = 0.0):
        x, y = np.asarray(x, float), np.asarray(y, float)
        # The hull is the slab |x| <= 1 cut by the diagonal slab |y - x| <= 1;
        # each contributes its own normal distance.  (Corner fans shave the
        # dilated set slightly, which only widens the accepted region.)
        return (np.abs(x) - 1.0 <= pad) & ((np.abs(y - x) - 1.0) / rt2 <= pad)

    def sigma(x, y):
        on = in_support(x, y)
        return np.where(on, _SQH, 0.0), np.where(on, _SQH, 0.0)

    def density(x, y):
        return np.where(in_support(x, y), rt2, 0.0)

    def sample_mu(rng, n):
        s = rng.uniform(0.0, 1.0, n)
        t = rng.uniform(0.0, 1.0, n)
        x = 2.0 * s - 1.0
        return np.column_stack([x, x + 2.0 * t - 1.0])

    sn, sw = _gl(0.0, 1.0, 48)
    tn, tw = _gl(0.0, 1.0, 48)
    S, T = np.meshgrid(sn, tn, indexing="ij")
    X = 2.0 * S - 1.0
    Y = X + 2.0 * T - 1.0
    W = np.outer(sw, tw) * 4.0 * rt2  # affine Jacobian 4 times density sqrt(2)
    m = X.size
    mu = MuMeasure(kind="area", mass=value, density=density,
                   qx=X.ravel(), qy=Y.ravel(), qw=W.ravel(),
                   qsigma=np.column_stack([np.full(m, _SQH), np.full(m, _SQH)]))
    return AnalyticSolution(
        name="segments", domain=domain, Q=Q, value_Q1=value,
        u_hat=u_hat, grad_u_hat=grad_u_hat, sigma=sigma,
        sigma_defined=in_support,
        mu=mu, in_support=in_support, sample_mu=sample_mu,
        distance=lambda px, py, qx_, qy_: np.hypot(qx_ - px, qy_ - py))


# ---------------------------------------------------------------------------
# Registry and shared checks
# ---------------------------------------------------------------------------

EXAMPLE_BUILDERS: dict[str, Callable[[], AnalyticSolution]] = {
    "nonconvex": example_nonconvex,
    "brothers": example_brothers,
    "diagonals": example_diagonals,
    "arc": lambda: example_arc(0.8, math.pi / 6.0, math.pi / 2.0),
    "segments": example_segments,
}


def get_example(name: str) -> AnalyticSolution:
    """Look up a benchmark by name; raises with the list of known names."""
    try:
        builder = EXAMPLE_BUILDERS[name]
    except KeyError:
        known = ", ".join(sorted(EXAMPLE_BUILDERS))
        raise KeyError(f"unknown example {name!r}; available: {known}") from None
    return builder()


def bump_functions(domain: Domain2D, count: int = 20, seed: int = 7):
    """`count` fixed Gaussian bumps with analytic gradients over the domain.

    Deterministic given the seed, so the divergence identity is always tested
    against the same family.
    """
    rng = np.random.default_rng(seed)
    xmin, ymin, xmax, ymax = domain.bounding_box
    scale = max(xmax - xmin, ymax - ymin)
    out = []
    for _ in range(count):
        cx = rng.uniform(xmin, xmax)
        cy = rng.uniform(ymin, ymax)
        s2 = (rng.uniform(0.15, 0.35) * scale) ** 2

        def phi(x, y, cx=cx, cy=cy, s2=s2):
            x, y = np.asarray(x, float), np.asarray(y, float)
            return np.exp(-((x - cx) ** 2 + (y - cy) ** 2) / (2.0 * s2))

        def grad_phi(x, y, cx=cx, cy=cy, s2=s2):
            x, y = np.asarray(x, float), np.asarray(y, float)
            p = np.exp(-((x - cx) ** 2 + (y - cy) ** 2) / (2.0 * s2))
            return -(x - cx) / s2 * p, -(y - cy) / s2 * p

        out.append((phi, grad_phi))
    return out


def weak_divergence_defect(sol: AnalyticSolution, count: int = 20,
                           seed: int = 7) -> float:
    """Largest mismatch of <flux, grad phi> = <Q, phi> over the bump family.

    Zero (up to quadrature) exactly when sigma * mu balances the source, so
    this is the measure-theoretic feasibility check for the claimed optimum.
    """
    worst = 0.0
    for phi, grad_phi in bump_functions(sol.domain, count=count, seed=seed):
        lhs = sol.mu.integrate(grad_phi)
        rhs = pair(sol.Q, phi)
        worst = max(worst, abs(lhs - rhs))
    return worst
