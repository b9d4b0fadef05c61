import math

import numpy as np
import pytest

from heatdesign import oracles
from heatdesign.design import (DesignError, build_optimal_tensor,
                               compliance_lower_bound, compliance_report,
                               energy, flux_consistency, optimal_temperature,
                               predicted_flux, support_condition)
from heatdesign.geometry import box, build_grid
from heatdesign.measures import rasterize
from heatdesign.solver_grid import (FluxMeasure, PotentialField,
                                    effective_source)

SQRT2 = math.sqrt(2.0)


def segments_fields(res=64):
    """Exact optimum of the two-segment example, sampled on the grid.

    u is globally affine and the flux is the constant diagonal field on the
    transport corridor, so every design identity holds to round-off.
    """
    ex = oracles.get_example("segments")
    grid = build_grid(ex.domain, res)
    X, Y = grid.node_coords()
    u = PotentialField(values=(X + Y) / SQRT2, grid=grid, anchor=(0, 0))
    xc, yc = grid.cell_centers()
    inside = ex.in_support(xc.ravel(), yc.ravel(), pad=0.0).reshape(xc.shape)
    p = np.zeros(xc.shape + (2,))
    p[inside] = grid.h ** 2
    # cell-counting the corridor misses area by O(h); normalize the mass to
    # the closed-form value so the identities below are exact, not near-exact
    p *= ex.value_Q1 / (inside.sum() * grid.h ** 2 * SQRT2)
    return ex, grid, u, FluxMeasure(p=p, grid=grid)


# ---------------------------------------------------------------------------
# Tensor assembly
# ---------------------------------------------------------------------------

def test_trace_matches_budget_exactly():
    _, _, u, p = segments_fields()
    for lam in (0.5, 1.0, 3.0, 7.25):
        C = build_optimal_tensor(u, p, lam)
        assert abs(C.trace_total() - lam) <= 1e-9 * lam


def test_tensors_are_rank_one():
    _, _, u, p = segments_fields()
    C = build_optimal_tensor(u, p, 1.0)
    assert C.rank_one_max_violation() <= 1e-12


def test_direction_vectors_are_unit():
    _, _, u, p = segments_fields()
    C = build_optimal_tensor(u, p, 2.0)
    live = C.rho > 0
    norms = np.hypot(C.n[:, :, 0][live], C.n[:, :, 1][live])
    assert np.allclose(norms, 1.0, atol=1e-12)
    assert not C.n[~live].any()


def test_budget_rescale_is_bitwise_linear():
    _, _, u, p = segments_fields()
    base = build_optimal_tensor(u, p, 1.0)
    for c in (0.5, 3.0):
        scaled = build_optimal_tensor(u, p, c)
        # multiply-by-budget-last makes this float-exact, not just close
        assert np.array_equal(scaled.rho, base.rho * c)
        assert np.array_equal(scaled.n, base.n)


def test_rejects_bad_budget_and_empty_flux():
    _, grid, u, p = segments_fields()
    with pytest.raises(DesignError):
        build_optimal_tensor(u, p, 0.0)
    with pytest.raises(DesignError):
        build_optimal_tensor(u, p, -2.0)
    empty = FluxMeasure(p=np.zeros_like(p.p), grid=grid)
    with pytest.raises(DesignError):
        build_optimal_tensor(u, empty, 1.0)


# ---------------------------------------------------------------------------
# Energy identities on the exact optimum
# ---------------------------------------------------------------------------

def test_compliance_identity_on_exact_fields():
    ex, grid, u, p = segments_fields()
    q = effective_source(rasterize(ex.Q, grid))
    for lam in (0.5, 1.0, 3.0):
        C = build_optimal_tensor(u, p, lam)
        ut = optimal_temperature(u, C.value_Q1, lam)
        rep = compliance_report(C, ut, q, p)
        assert rep.Y_energy == pytest.approx(rep.Y_formula, rel=1e-9)
        assert rep.Y_formula == pytest.approx(C.value_Q1 ** 2 / lam, rel=1e-12)


def test_predicted_flux_reproduces_input_flux():
    _, _, u, p = segments_fields()
    C = build_optimal_tensor(u, p, 1.0)
    ut = optimal_temperature(u, C.value_Q1, 1.0)
    assert flux_consistency(C, ut, p) <= 1e-6


def test_predicted_flux_direction():
    _, _, u, p = segments_fields()
    C = build_optimal_tensor(u, p, 1.0)
    ut = optimal_temperature(u, C.value_Q1, 1.0)
    pt = predicted_flux(C, ut)
    live = C.rho > 0
    assert np.allclose(pt.p[live], p.p[live], atol=1e-12)


def test_support_condition_zero_when_aligned():
    _, _, u, p = segments_fields()
    assert support_condition(u, p) <= 1e-12


def test_energy_of_zero_potential_is_zero():
    ex, grid, _, p = segments_fields()
    q = effective_source(rasterize(ex.Q, grid))
    C = build_optimal_tensor(
        PotentialField(np.zeros((grid.nx + 1, grid.ny + 1)), grid, (0, 0)), p, 1.0)
    u0 = PotentialField(np.zeros((grid.nx + 1, grid.ny + 1)), grid, (0, 0))
    assert energy(C, u0, q) == 0.0


# ---------------------------------------------------------------------------
# Compliance bound as a variational certificate
# ---------------------------------------------------------------------------

def test_random_test_potentials_never_beat_the_optimum():
    """-2E maximized over multipliers of u stays below Y for any trial u."""
    ex, grid, u, p = segments_fields(48)
    q = effective_source(rasterize(ex.Q, grid))
    C = build_optimal_tensor(u, p, 1.0)
    Y = C.value_Q1 ** 2 / 1.0
    rng = np.random.default_rng(3)
    X, Yn = grid.node_coords()
    beaten = 0.0
    for _ in range(50):
        a, b, cx, cy, s = rng.uniform(-1.0, 1.0, 5)
        trial = a * X + b * Yn + s * np.sin(2.0 * cx + X) * np.cos(cy + Yn)
        ut = PotentialField(values=trial, grid=grid, anchor=(0, 0))
        lb = compliance_lower_bound(C, ut, q)
        beaten = max(beaten, (lb - Y) / Y)
    assert beaten <= 5e-3


def test_blind_design_with_working_source_raises():
    from heatdesign.geometry import unit_square
    from heatdesign.measures import Atom, SourceMeasure
    grid = build_grid(unit_square(), 16)
    # material conducts only along e1, but the source pair sits along e2
    p = np.zeros((16, 16, 2))
    p[:, :, 0] = grid.h ** 2
    pf = FluxMeasure(p=p, grid=grid)
    X, Y = grid.node_coords()
    u = PotentialField(values=X, grid=grid, anchor=(0, 0))
    C = build_optimal_tensor(u, pf, 1.0)
    Q = SourceMeasure((Atom((0.5, 0.25), 1.0), Atom((0.5, 0.75), -1.0)),
                      unit_square())
    q = effective_source(rasterize(Q, grid))
    # u varying only across the conduction direction: the quadratic form
    # vanishes but the source still does work against it
    ut = PotentialField(values=Y, grid=grid, anchor=(0, 0))
    with pytest.raises(DesignError, match="blind"):
        compliance_lower_bound(C, ut, q)


def test_mismatched_grids_rejected():
    _, grid, u, p = segments_fields(32)
    other = build_grid(box(-1.25, -2.25, 1.25, 2.25), 16)
    u2 = PotentialField(np.zeros((other.nx + 1, other.ny + 1)), other, (0, 0))
    C = build_optimal_tensor(u, p, 1.0)
    with pytest.raises(DesignError):
        predicted_flux(C, u2)
