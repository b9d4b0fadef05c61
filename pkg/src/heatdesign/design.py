"""Optimal conductivity assembly and the compliance identities.

The minimal-flow solution (u, p) determines the best conductivity layout
under a trace budget: put all material along the flux, with density
proportional to |p| and the rank-one orientation of the flux direction.
The temperature field solving the conduction problem for that layout is the
potential rescaled by value/budget.  The functions here assemble the tensor
field, evaluate the quadratic energy, and quantify how far a candidate pair
is from the predicted optimality identities.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .measures import RasterSource
from .solver_grid import (FLUX_FLOOR_REL, FluxMeasure, PotentialField,
                          discrete_grad)


class DesignError(ValueError):
    """Raised for invalid budgets, degenerate fluxes, or grid mismatches."""


@dataclass(frozen=True, eq=False)
class TensorField:
    """Rank-one conductivity per cell: C_c = rho_c n_c (x) n_c.

    rho carries conductivity-times-area units (the cell's share of the trace
    budget); n is unit length wherever rho > 0 and zero elsewhere.
    """
    rho: np.ndarray   # (nx, ny)
    n: np.ndarray     # (nx, ny, 2)
    lambda0: float
    value_Q1: float
    grid: object

    def trace_total(self) -> float:
        return float(math.fsum(self.rho.ravel()))

    def rank_one_max_violation(self) -> float:
        """Largest second eigenvalue of C_c/rho_c over cells with material.

        Zero for an exactly assembled field; kept as a checkable witness
        because downstream serialization rebuilds tensors from (rho, n).
        """
        live = self.rho > 0
        if not live.any():
            return 0.0
        nv = self.n[live]
        a = self.rho[live] * nv[:, 0] * nv[:, 0]
        b = self.rho[live] * nv[:, 0] * nv[:, 1]
        c = self.rho[live] * nv[:, 1] * nv[:, 1]
        half = 0.5 * (a + c)
        rad = np.sqrt(np.maximum(0.25 * (a - c) ** 2 + b * b, 0.0))
        lam2 = half - rad
        return float(np.max(np.abs(lam2) / self.rho[live]))


@dataclass(frozen=True)
class ComplianceReport:
    """The scalar identities tying a design to its predicted optimum."""
    Y_formula: float
    Y_energy: float
    compliance_gap: float
    flux_mismatch: float


def build_optimal_tensor(u: PotentialField, p: FluxMeasure,
                         lambda0: float) -> TensorField:
    """Distribute the trace budget along the flux: rho ~ |p|, n = p/|p|.

    Cells below the relative flux floor are cut; the budget is normalized
    over the surviving cells so the total trace equals lambda0 exactly.
    """
    if lambda0 <= 0:
        raise DesignError(f"trace budget must be positive, got {lambda0}")
    mu = p.density()
    value = float(math.fsum(mu.ravel()))
    if value <= 0:
        raise DesignError("flux has no mass; tensor undefined")
    keep = mu > FLUX_FLOOR_REL * mu.max()
    kept_mass = float(math.fsum(mu[keep]))
    # multiply by the budget last so rescaling lambda0 rescales rho exactly
    rho = np.where(keep, (mu / kept_mass) * lambda0, 0.0)
    n = np.zeros_like(p.p)
    n[keep] = p.p[keep] / mu[keep, None]
    return TensorField(rho=rho, n=n, lambda0=float(lambda0),
                       value_Q1=value, grid=p.grid)


def optimal_temperature(u: PotentialField, value_Q1: float,
                        lambda0: float) -> PotentialField:
    """Scale the unit-Lipschitz potential to the conduction temperature."""
    if lambda0 <= 0:
        raise DesignError(f"trace budget must be positive, got {lambda0}")
    return PotentialField(values=u.values * (value_Q1 / lambda0),
                          grid=u.grid, anchor=u.anchor)


def _require_same_grid(*objs) -> None:
    grids = {id(o.grid) for o in objs}
    if len(grids) > 1:
        shapes = {(o.grid.nx, o.grid.ny, o.grid.h) for o in objs}
        if len(shapes) > 1:
            raise DesignError(f"fields live on different grids: {shapes}")


def energy(C: TensorField, u: PotentialField, Q: RasterSource) -> float:
    """E(C, u) = half the conductivity quadratic form minus the source work."""
    _require_same_grid(C, u, Q)
    g = discrete_grad(u)
    along = C.n[:, :, 0] * g[:, :, 0] + C.n[:, :, 1] * g[:, :, 1]
    quad = float(math.fsum((C.rho * along * along).ravel()))
    work = float(np.vdot(Q.weights, u.values))
    return 0.5 * quad - work


def compliance_lower_bound(C: TensorField, u: PotentialField,
                           Q: RasterSource) -> float:
    """Best -2E over scalar multiples of u: <Q,u>^2 / <C, grad u x grad u>."""
    _require_same_grid(C, u, Q)
    g = discrete_grad(u)
    along = C.n[:, :, 0] * g[:, :, 0] + C.n[:, :, 1] * g[:, :, 1]
    quad = float(math.fsum((C.rho * along * along).ravel()))
    work = float(np.vdot(Q.weights, u.values))
    if quad <= 0:
        if abs(work) > 0:
            raise DesignError(
                "conductivity is blind to this potential but the source "
                "works against it: compliance is unbounded")
        return 0.0
    return work * work / quad


def predicted_flux(C: TensorField, u: PotentialField) -> FluxMeasure:
    """The conduction flux C grad(u) of the design at the given temperature."""
    _require_same_grid(C, u)
    g = discrete_grad(u)
    along = C.rho * (C.n[:, :, 0] * g[:, :, 0] + C.n[:, :, 1] * g[:, :, 1])
    return FluxMeasure(p=C.n * along[:, :, None], grid=u.grid)


def flux_consistency(C: TensorField, u_tilde: PotentialField,
                     p: FluxMeasure) -> float:
    """Relative L1 distance between the conduction flux and the target flux."""
    _require_same_grid(C, u_tilde, p)
    pt = predicted_flux(C, u_tilde)
    denom = p.total_mass()
    if denom == 0:
        return 0.0
    diff = np.hypot(pt.p[:, :, 0] - p.p[:, :, 0], pt.p[:, :, 1] - p.p[:, :, 1])
    return float(math.fsum(diff.ravel())) / denom


def support_condition(u: PotentialField, p: FluxMeasure) -> float:
    """Mass-weighted average of 1 - sigma . grad(u); zero when aligned."""
    _require_same_grid(u, p)
    mu = p.density()
    total = float(math.fsum(mu.ravel()))
    if total == 0:
        return 0.0
    g = discrete_grad(u)
    sig = p.direction()
    align = sig[:, :, 0] * g[:, :, 0] + sig[:, :, 1] * g[:, :, 1]
    return float(math.fsum((mu * (1.0 - align)).ravel())) / total


def compliance_report(C: TensorField, u_tilde: PotentialField,
                      Q: RasterSource, p: FluxMeasure) -> ComplianceReport:
    """Assemble the identity suite for a solved problem."""
    y_formula = C.value_Q1 ** 2 / C.lambda0
    y_energy = -2.0 * energy(C, u_tilde, Q)
    return ComplianceReport(Y_formula=y_formula, Y_energy=y_energy,
                            compliance_gap=abs(y_formula - y_energy),
                            flux_mismatch=flux_consistency(C, u_tilde, p))
