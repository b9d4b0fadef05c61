"""Primal-dual grid solver for the minimal-flow / Kantorovich saddle point.

The discrete problem is min over cell fluxes p of sum |p_c| subject to
div p + q = 0, whose dual is the maximization of <q, u> over grid potentials
with cell gradients of length at most one.  A Chambolle-Pock iteration drives
both; rigorous certificates are built at checkpoints by projecting the flux
onto the divergence constraint (prefactorized sparse solve) and radially
rescaling the potential into the Lipschitz ball, so the reported duality gap
is a true upper bound on the distance to optimality.

The one-sided corner gradient stencil only annihilates potentials that are
constant on each stencil-connected node component; the source is projected
onto the orthogonal complement of those indicators once at setup, which is
also what makes the certificate projection solvable.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy import sparse
from scipy.sparse.csgraph import connected_components
from scipy.sparse.linalg import splu
from scipy.spatial import cKDTree

from .geometry import Grid
from .measures import RasterSource

FLUX_FLOOR_REL = 1e-12


class SolverError(ValueError):
    """Raised for invalid solver inputs (unbalanced sources, bad params)."""


@dataclass(frozen=True, eq=False)
class PotentialField:
    """Node-sampled potential, pinned to zero at the anchor node."""
    values: np.ndarray  # (nx+1, ny+1); zero at nodes outside the solve
    grid: Grid
    anchor: tuple[int, int]

    def interpolate(self, x, y) -> np.ndarray:
        """Bilinear interpolation, weights renormalized over active corners."""
        x = np.atleast_1d(np.asarray(x, float))
        y = np.atleast_1d(np.asarray(y, float))
        g = self.grid
        fi = np.clip((x - g.origin[0]) / g.h, 0, g.nx - 1e-12)
        fj = np.clip((y - g.origin[1]) / g.h, 0, g.ny - 1e-12)
        i = np.minimum(fi.astype(int), g.nx - 1)
        j = np.minimum(fj.astype(int), g.ny - 1)
        fx, fy = fi - i, fj - j
        out = np.zeros_like(x)
        wsum = np.zeros_like(x)
        for di, dj, w in ((0, 0, (1 - fx) * (1 - fy)), (1, 0, fx * (1 - fy)),
                          (0, 1, (1 - fx) * fy), (1, 1, fx * fy)):
            act = self.grid.active_nodes[i + di, j + dj]
            w = np.where(act, w, 0.0)
            out += w * self.values[i + di, j + dj]
            wsum += w
        if np.any(wsum <= 0):
            k = int(np.argmax(wsum <= 0))
            raise SolverError(f"potential undefined at ({x[k]:.4g}, {y[k]:.4g})")
        return out / wsum


@dataclass(frozen=True, eq=False)
class FluxMeasure:
    """Cell-integrated flux vectors p_c; the value of the measure on a cell."""
    p: np.ndarray  # (nx, ny, 2)
    grid: Grid

    def density(self) -> np.ndarray:
        """Per-cell mass |p_c|."""
        return np.hypot(self.p[:, :, 0], self.p[:, :, 1])

    def direction(self) -> np.ndarray:
        """Unit directions where the density is positive, zero elsewhere."""
        mu = self.density()
        safe = np.where(mu > 0, mu, 1.0)
        sig = self.p / safe[:, :, None]
        sig[mu == 0] = 0.0
        return sig

    def total_mass(self) -> float:
        return float(math.fsum(self.density().ravel()))


@dataclass
class SolverParams:
    """Step sizes and tolerances for the primal-dual iteration.

    tau and s default to h/sqrt(8) at solve time (the spectral bound of the
    gradient stencil is 2/h, so tau*s*L^2 <= 1/2).  step_ratio rescales
    tau -> tau/step_ratio, s -> s*step_ratio, preserving the product; the
    dual variable lives on O(1) potentials while cell fluxes are O(h) masses,
    so a large ratio is what actually makes the iteration move.
    """
    max_iter: Optional[int] = None
    tol_gap: float = 1e-3
    tol_div: float = 1e-6
    tau: Optional[float] = None
    s: Optional[float] = None
    theta: float = 1.0
    step_ratio: float = 1.0
    check_every: int = 100
    anchor: Optional[tuple[int, int]] = None

    def __post_init__(self):
        if self.tol_gap <= 0 or self.tol_div <= 0:
            raise SolverError("tolerances must be positive")
        if not 0.0 <= self.theta <= 1.0:
            raise SolverError("theta must lie in [0, 1]")
        if self.step_ratio <= 0:
            raise SolverError("step_ratio must be positive")
        for v in (self.tau, self.s):
            if v is not None and v <= 0:
                raise SolverError("step sizes must be positive")


@dataclass(frozen=True, eq=False)
class KantorovichSolution:
    u: PotentialField
    p: FluxMeasure
    value: float
    gap: float
    residual_div: float
    iterations: int
    converged: bool
    history: tuple[dict, ...] = field(default=())


# ---------------------------------------------------------------------------
# Discrete operators
# ---------------------------------------------------------------------------

def _grad_arrays(u: np.ndarray, cells: np.ndarray, h: float) -> np.ndarray:
    """One-sided cell gradient from the cell's low corner; zero on inactive cells.

    Each cell constrains the three nodes (i, j), (i+1, j), (i, j+1).  The
    alternative stencil that averages the two one-sided differences per
    coordinate is blind to the node-parity checkerboard, which lets the
    discrete problem overshoot the continuum value by an amount that does not
    vanish with h whenever the source couples to that mode; the corner stencil
    has no such kernel.
    """
    g = np.empty(cells.shape + (2,))
    g[:, :, 0] = (u[1:, :-1] - u[:-1, :-1]) / h
    g[:, :, 1] = (u[:-1, 1:] - u[:-1, :-1]) / h
    g[~cells] = 0.0
    return g


def _div_arrays(p: np.ndarray, cells: np.ndarray, h: float) -> np.ndarray:
    """Exact negative adjoint of _grad_arrays (Neumann via masking)."""
    px = np.where(cells, p[:, :, 0], 0.0)
    py = np.where(cells, p[:, :, 1], 0.0)
    d = np.zeros((p.shape[0] + 1, p.shape[1] + 1))
    d[:-1, :-1] += px + py
    d[1:, :-1] -= px
    d[:-1, 1:] -= py
    return d / h


def discrete_grad(u: PotentialField) -> np.ndarray:
    """Cell gradients of a potential, shape (nx, ny, 2)."""
    return _grad_arrays(u.values, u.grid.active_cells, u.grid.h)


def discrete_div(p: FluxMeasure) -> np.ndarray:
    """Node divergence of a flux, shape (nx+1, ny+1)."""
    return _div_arrays(p.p, p.grid.active_cells, p.grid.h)


def _solver_nodes(grid: Grid) -> np.ndarray:
    """Nodes that are corners of at least one active cell."""
    c = grid.active_cells
    nodes = np.zeros((grid.nx + 1, grid.ny + 1), dtype=bool)
    nodes[:-1, :-1] |= c
    nodes[1:, :-1] |= c
    nodes[:-1, 1:] |= c
    nodes[1:, 1:] |= c
    return nodes


def _node_components(nodes: np.ndarray, cells: np.ndarray) -> np.ndarray:
    """Label solver nodes by stencil connectivity; -1 outside.

    Two nodes talk to each other when some active cell couples them through
    its one-sided differences (low corner with its right and upper
    neighbors).  An upper-right corner that no other cell claims ends up in
    a component of its own: no flux can reach it.
    """
    nidx = -np.ones(nodes.shape, dtype=np.int64)
    flat = np.argwhere(nodes)
    nidx[flat[:, 0], flat[:, 1]] = np.arange(len(flat))
    ci, cj = np.nonzero(cells)
    a = nidx[ci, cj]
    rows = np.concatenate([a, a])
    cols = np.concatenate([nidx[ci + 1, cj], nidx[ci, cj + 1]])
    adj = sparse.coo_matrix((np.ones(len(rows)), (rows, cols)),
                            shape=(len(flat), len(flat)))
    _, lab = connected_components(adj, directed=False)
    out = -np.ones(nodes.shape, dtype=np.int64)
    out[flat[:, 0], flat[:, 1]] = lab
    return out


def _kernel_basis(grid: Grid, nodes: np.ndarray) -> list[np.ndarray]:
    """Orthonormal basis of the gradient stencil's kernel on solver nodes:
    one normalized indicator per stencil-connected component."""
    lab = _node_components(nodes, grid.active_cells)
    basis = []
    for comp in range(int(lab.max()) + 1):
        v = np.where(lab == comp, 1.0, 0.0)
        basis.append(v / np.linalg.norm(v))
    return basis


def _project_out(q: np.ndarray, basis: list[np.ndarray]) -> np.ndarray:
    out = q.copy()
    for v in basis:
        out -= v * float(np.vdot(v, out))
    return out


def _gather_minor_mass(q: np.ndarray, nodes: np.ndarray, cells: np.ndarray) -> np.ndarray:
    """Move source weight off minor stencil components onto the main one.

    Rasterization can land weight on nodes the stencil never couples (for
    instance the lone upper-right corner of a fringe cell on a curved
    boundary).  Deleting that weight would bias the value, so it is shifted
    to the nearest node of the largest component instead; each shift is at
    most a cell diagonal.
    """
    lab = _node_components(nodes, cells)
    ncomp = int(lab.max()) + 1
    if ncomp <= 1:
        return q
    counts = np.bincount(lab[lab >= 0], minlength=ncomp)
    main = int(np.argmax(counts))
    minor = (lab >= 0) & (lab != main) & (q != 0.0)
    if not minor.any():
        return q
    tree = cKDTree(np.argwhere(lab == main))
    src = np.argwhere(minor)
    _, nearest = tree.query(src)
    dst = np.argwhere(lab == main)[nearest]
    out = q.copy()
    np.add.at(out, (dst[:, 0], dst[:, 1]), q[src[:, 0], src[:, 1]])
    out[src[:, 0], src[:, 1]] = 0.0
    return out


def effective_source(q: RasterSource) -> RasterSource:
    """The node weights the grid solver actually balances.

    Matches the preprocessing inside `solve`: weight on minor stencil
    components is rerouted onto the main one and the kernel part is removed.
    Energies and pairings should use this raster; weight stranded on
    decoupled corner nodes would otherwise pair against potentials frozen
    at zero (on a curved boundary that can be a double-digit share of the
    source).
    """
    grid = q.grid
    nodes = _solver_nodes(grid)
    qw = _gather_minor_mass(np.where(nodes, q.weights, 0.0), nodes,
                            grid.active_cells)
    qproj = _project_out(qw, _kernel_basis(grid, nodes))
    return RasterSource(weights=qproj, grid=grid)


class _Certifier:
    """Builds rigorously feasible primal/dual pairs from raw iterates."""

    def __init__(self, grid: Grid, nodes: np.ndarray, q: np.ndarray):
        self.grid = grid
        self.nodes = nodes
        self.q = q
        self.h = grid.h
        self.cells = grid.active_cells
        self._build_projection()

    def _build_projection(self):
        grid, nodes = self.grid, self.nodes
        nidx = -np.ones(nodes.shape, dtype=np.int64)
        flat = np.argwhere(nodes)
        nidx[flat[:, 0], flat[:, 1]] = np.arange(len(flat))
        self.nidx = nidx
        self.nflat = flat
        ci, cj = np.nonzero(self.cells)
        ncell = len(ci)
        coef = 1.0 / self.h
        rows, cols, vals = [], [], []
        for r_shift, di, dj, sgn in ((0, 0, 0, -coef), (0, 1, 0, coef),
                                     (ncell, 0, 0, -coef), (ncell, 0, 1, coef)):
            rows.append(np.arange(ncell) + r_shift)
            cols.append(nidx[ci + di, cj + dj])
            vals.append(np.full(ncell, sgn))
        G = sparse.csr_matrix(
            (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
            shape=(2 * ncell, len(flat)))
        self.G = G
        self.ci, self.cj = ci, cj
        L = (G.T @ G).tocsc()
        # Ground one node per stencil component; for a consistent right-hand
        # side the residual at grounded nodes vanishes.
        lab = _node_components(nodes, self.cells)
        pins = []
        for comp in range(int(lab.max()) + 1):
            ii, jj = np.nonzero(lab == comp)
            pins.append(self.nidx[ii[0], jj[0]])
        keep = np.setdiff1d(np.arange(len(flat)), np.array(pins))
        self.keep = keep
        Lr = L[keep][:, keep]
        self.lu = splu(Lr.tocsc())

    def project_flux(self, p: np.ndarray) -> np.ndarray:
        """Return p + grad(psi) satisfying div + q = 0 to round-off.

        With div = -G^T, requiring div(p + G psi) = -q gives the normal
        system (G^T G) psi = div p + q, singular only along the stencil
        kernel that q was projected off.
        """
        div = _div_arrays(p, self.cells, self.h)
        rhs_full = div + self.q
        rhs = rhs_full[self.nflat[:, 0], self.nflat[:, 1]]
        psi_r = self.lu.solve(rhs[self.keep])
        psi = np.zeros(len(self.nflat))
        psi[self.keep] = psi_r
        gpsi = self.G @ psi
        ncell = len(self.ci)
        out = p.copy()
        out[self.ci, self.cj, 0] += gpsi[:ncell]
        out[self.ci, self.cj, 1] += gpsi[ncell:]
        return out

    def feasible_potential(self, u: np.ndarray, anchor: tuple[int, int]) -> np.ndarray:
        g = _grad_arrays(u, self.cells, self.h)
        gmax = float(np.max(np.hypot(g[:, :, 0], g[:, :, 1]))) if g.size else 0.0
        out = u / max(1.0, gmax)
        out = np.where(self.nodes, out - out[anchor], 0.0)
        return out

    def divergence_residual(self, p: np.ndarray) -> float:
        div = _div_arrays(p, self.cells, self.h)
        return float(np.abs(div + self.q)[self.nodes].sum())


def _validate_balance(q: RasterSource) -> None:
    tot = math.fsum(q.weights.ravel())
    scale = float(np.abs(q.weights).sum())
    if scale > 0 and abs(tot) > 1e-9 * scale:
        raise SolverError(f"raster source is unbalanced: residual {tot:.3e}")


def solve(q: RasterSource, params: Optional[SolverParams] = None) -> KantorovichSolution:
    """Run the primal-dual iteration until the certified gap closes.

    Returns the best certified pair seen: a divergence-feasible flux and a
    1-Lipschitz potential.  Non-convergence within max_iter is reported via
    `converged`, not raised.
    """
    if params is None:
        params = SolverParams()
    _validate_balance(q)
    grid = q.grid
    h = grid.h
    nodes = _solver_nodes(grid)
    resolution = max(grid.nx, grid.ny)
    max_iter = params.max_iter if params.max_iter is not None else 200 * resolution
    tau = params.tau if params.tau is not None else h / math.sqrt(8.0)
    s = params.s if params.s is not None else h / math.sqrt(8.0)
    tau = tau / params.step_ratio
    s = s * params.step_ratio
    if tau * s * (8.0 / h ** 2) > 1.0 + 1e-9:
        raise SolverError("step sizes violate tau*s*L^2 <= 1")
    anchor = params.anchor
    if anchor is None:
        flat = np.argwhere(nodes)
        anchor = (int(flat[0, 0]), int(flat[0, 1]))
    elif not nodes[anchor]:
        raise SolverError(f"anchor {anchor} is not a solver node")

    scale_q = float(np.abs(q.weights).sum())
    if scale_q == 0.0:
        zero_u = PotentialField(np.zeros(nodes.shape), grid, anchor)
        zero_p = FluxMeasure(np.zeros(grid.active_cells.shape + (2,)), grid)
        return KantorovichSolution(zero_u, zero_p, 0.0, 0.0, 0.0, 1, True, ())

    qproj = effective_source(q).weights
    cert = _Certifier(grid, nodes, qproj)
    qnorm = float(np.abs(qproj).sum())

    cells = grid.active_cells
    u = np.zeros(nodes.shape)
    p = np.zeros(cells.shape + (2,))
    theta = params.theta

    best_mass = math.inf
    best_pair = -math.inf
    best_p = p.copy()
    best_u = u.copy()
    best_resid = math.inf
    history = []
    converged = False
    iterations = 0

    for k in range(1, max_iter + 1):
        iterations = k
        du = _div_arrays(p, cells, h) + qproj
        u_new = np.where(nodes, u + s * du, 0.0)
        u_new -= u_new[anchor]
        u_new = np.where(nodes, u_new, 0.0)
        u_bar = u_new + theta * (u_new - u)
        g = _grad_arrays(u_bar, cells, h)
        v = p + tau * g
        nv = np.hypot(v[:, :, 0], v[:, :, 1])
        shrink = np.maximum(0.0, 1.0 - tau / np.where(nv > 0, nv, 1.0))
        p = v * shrink[:, :, None]
        u = u_new

        if k % params.check_every == 0 or k == max_iter:
            p_f = cert.project_flux(p)
            u_f = cert.feasible_potential(u, anchor)
            mass = math.fsum(np.hypot(p_f[:, :, 0], p_f[:, :, 1]).ravel())
            pairing = float(np.vdot(qproj, u_f))
            resid = cert.divergence_residual(p_f)
            if mass < best_mass:
                best_mass, best_p, best_resid = mass, p_f, resid
            if pairing > best_pair:
                best_pair, best_u = pairing, u_f
            gap = best_mass - best_pair
            rel_resid = best_resid / qnorm if qnorm > 0 else 0.0
            history.append({"iteration": k, "mass": best_mass, "pair": best_pair,
                            "gap": gap, "residual_div": rel_resid})
            if gap <= params.tol_gap * max(abs(best_mass), 1e-300) \
                    and rel_resid <= params.tol_div:
                converged = True
                break

    u_field = PotentialField(best_u, grid, anchor)
    p_field = FluxMeasure(best_p, grid)
    value = best_mass
    gap = best_mass - best_pair
    rel_resid = best_resid / qnorm if qnorm > 0 else 0.0
    return KantorovichSolution(u_field, p_field, value, gap, rel_resid,
                               iterations, converged, tuple(history))


def duality_gap(q: RasterSource, u: PotentialField, p: FluxMeasure) -> float:
    """Primal mass minus dual pairing for the given (not necessarily
    optimal) fields; nonnegative whenever both are feasible."""
    mass = p.total_mass()
    pairing = float(np.vdot(q.weights, u.values))
    return mass - pairing


def feasibility_slack(u: PotentialField, p: FluxMeasure, q: RasterSource) -> tuple[float, float]:
    """(Lipschitz excess of u, L1 divergence defect of p against q)."""
    g = discrete_grad(u)
    lip = float(np.max(np.hypot(g[:, :, 0], g[:, :, 1]))) - 1.0
    div = discrete_div(p)
    nodes = _solver_nodes(q.grid)
    defect = float(np.abs(div + np.where(nodes, q.weights, 0.0))[nodes].sum())
    return max(lip, 0.0), defect
