import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from heatdesign.geometry import Domain2D, box, build_grid, unit_square
from heatdesign.measures import (ArcDensity, Atom, AreaDensity,
                                 BoundaryDensity, MeasureError, SegmentDensity,
                                 SourceMeasure, pair, rasterize, total_mass,
                                 total_variation)

SQRT2 = math.sqrt(2.0)


def unit_disc():
    return Domain2D(center=(0.0, 0.0), radius=1.0)


def two_atoms(w=1.0):
    dom = unit_square()
    return SourceMeasure(components=(
        Atom((0.2, 0.3), w), Atom((0.8, 0.7), -w)), domain=dom)


# ---------------------------------------------------------------------------
# Component masses and total variation
# ---------------------------------------------------------------------------

def test_atom_mass_is_weight():
    Q = two_atoms(2.5)
    assert total_mass(Q) == pytest.approx(0.0, abs=1e-15)
    assert total_variation(Q) == pytest.approx(5.0, abs=1e-15)


def test_segment_constant_density_mass_is_length():
    seg = SegmentDensity((0.0, 0.0), (1.0, 1.0))
    dom = unit_square()
    Q = SourceMeasure((seg, Atom((0.5, 0.0), -SQRT2)), dom)
    assert total_variation(Q) == pytest.approx(2 * SQRT2, rel=1e-10)


def test_segment_polynomial_mass():
    # density t^2 on a segment of length 2: mass 8/3
    seg = SegmentDensity((-1.0, 0.0), (1.0, 0.0), coeffs=(0.0, 0.0, 1.0))
    Q = SourceMeasure((seg, Atom((0.0, 1.0), -8.0 / 3.0)), box(-1, -1, 1, 1))
    assert total_mass(Q) == pytest.approx(0.0, abs=1e-12)


def test_sign_changing_segment_tv():
    # density t - 1/2 on a unit segment: mass 0, |mass| = 1/4
    seg = SegmentDensity((0.0, 0.5), (1.0, 0.5), coeffs=(-0.5, 1.0, 0.0))
    Q = SourceMeasure((seg,), unit_square())
    assert total_mass(Q) == pytest.approx(0.0, abs=1e-15)
    assert total_variation(Q) == pytest.approx(0.25, rel=1e-9)


def test_arc_constant_density_mass():
    arc = ArcDensity((0.0, 0.0), 0.8, 0.0, math.pi / 2)
    Q = SourceMeasure((arc, Atom((0.0, 0.0), -0.4 * math.pi)),
                      unit_disc())
    assert total_mass(Q) == pytest.approx(0.0, abs=1e-12)


def test_boundary_monomial_on_disc():
    # x^2 on the unit circle integrates to pi
    comp = BoundaryDensity(coef=1.0, i=2, j=0)
    Q = SourceMeasure((comp, Atom((0.0, 0.0), -math.pi)), unit_disc())
    assert total_mass(Q) == pytest.approx(0.0, abs=1e-10)


def test_brothers_boundary_density_is_balanced_by_symmetry():
    # -4 x1 x2 on the unit circle has zero net mass and tv 8
    comp = BoundaryDensity(coef=-4.0, i=1, j=1)
    Q = SourceMeasure((comp,), unit_disc())
    assert total_mass(Q) == pytest.approx(0.0, abs=1e-12)
    assert total_variation(Q) == pytest.approx(8.0, rel=1e-9)


def test_area_density_mass():
    patch = box(0.0, 0.0, 0.5, 0.5)
    comp = AreaDensity(region=patch, value=4.0)
    Q = SourceMeasure((comp, Atom((0.9, 0.9), -1.0)), unit_square())
    assert total_mass(Q) == pytest.approx(0.0, abs=1e-12)


# ---------------------------------------------------------------------------
# Validation
# ---------------------------------------------------------------------------

def test_unbalanced_source_rejected():
    with pytest.raises(MeasureError, match="balanced"):
        SourceMeasure((Atom((0.2, 0.2), 1.0), Atom((0.8, 0.8), -0.9)),
                      unit_square())


def test_component_outside_domain_rejected():
    with pytest.raises(MeasureError, match="outside"):
        SourceMeasure((Atom((2.0, 2.0), 1.0), Atom((0.5, 0.5), -1.0)),
                      unit_square())


def test_segment_midpoint_outside_nonconvex_domain_rejected():
    verts = np.array([
        [-1.0, -1.0], [1.0, -1.0], [1.0, 1.0], [-1.0, 1.0],
        [-1.0, 0.5], [0.0, 0.0], [-1.0, -0.5],
    ])
    wedge = Domain2D(outer=verts)
    # endpoints are in the domain but the chord crosses the notch
    with pytest.raises(MeasureError):
        SourceMeasure((SegmentDensity((-0.9, 0.6), (-0.9, -0.6)),
                       Atom((0.5, 0.0), -1.2)), wedge)


def test_tiny_imbalance_within_tolerance_accepted():
    w = 1.0 + 1e-12
    Q = SourceMeasure((Atom((0.2, 0.2), w), Atom((0.8, 0.8), -1.0)),
                      unit_square())
    assert total_variation(Q) > 0


# ---------------------------------------------------------------------------
# Pairing
# ---------------------------------------------------------------------------

def test_pair_atoms_against_coordinate():
    Q = two_atoms(3.0)
    val = pair(Q, lambda x, y: x)
    assert val == pytest.approx(3.0 * (0.2 - 0.8), abs=1e-14)


def test_pair_segment_against_affine():
    # int_0^L (x(t) + 2 y(t)) dt along the diagonal of the unit square
    seg = SegmentDensity((0.0, 0.0), (1.0, 1.0))
    Q = SourceMeasure((seg, Atom((0.5, 0.5), -SQRT2)), unit_square())
    val = pair(Q, lambda x, y: x + 2.0 * y)
    exact = SQRT2 * (0.5 + 1.0) - SQRT2 * 1.5
    assert val == pytest.approx(exact, abs=1e-10)


def test_pair_picks_up_grid_field():
    grid = build_grid(unit_square(), 32)
    Q = two_atoms()
    from heatdesign.solver_grid import PotentialField
    X, Y = grid.node_coords()
    u = PotentialField(values=X - Y, grid=grid, anchor=(0, 0))
    # bilinear interpolation reproduces affine fields exactly
    assert pair(Q, u) == pytest.approx((0.2 - 0.3) - (0.8 - 0.7), abs=1e-12)


# ---------------------------------------------------------------------------
# Rasterization
# ---------------------------------------------------------------------------

def test_rasterize_atoms_conserves_weights():
    grid = build_grid(unit_square(), 16)
    q = rasterize(two_atoms(1.5), grid)
    assert q.total == pytest.approx(0.0, abs=1e-15)
    assert q.abs_total == pytest.approx(3.0, rel=1e-12)


def test_rasterize_atom_lands_near_its_point():
    grid = build_grid(unit_square(), 16)
    q = rasterize(two_atoms(), grid)
    i, j = np.unravel_index(np.argmax(q.weights), q.weights.shape)
    x, y = grid.node_xy(int(i), int(j))
    assert math.hypot(x - 0.2, y - 0.3) <= grid.h * SQRT2 + 1e-12


def test_rasterize_zeroes_inactive_nodes():
    grid = build_grid(unit_disc(), 32)
    comp = BoundaryDensity(coef=-4.0, i=1, j=1)
    q = rasterize(SourceMeasure((comp,), unit_disc()), grid)
    assert not q.weights[~grid.active_nodes].any()
    assert q.total == pytest.approx(0.0, abs=1e-12 * q.abs_total)


def test_rasterize_segment_mass_matches_continuum():
    grid = build_grid(unit_square(), 64)
    seg = SegmentDensity((0.1, 0.1), (0.9, 0.9))
    Q = SourceMeasure((seg, Atom((0.5, 0.1), -seg.length)), unit_square())
    q = rasterize(Q, grid)
    assert q.total == pytest.approx(0.0, abs=1e-12)
    pos = q.weights[q.weights > 0].sum()
    assert pos == pytest.approx(seg.length, rel=1e-9)


def test_rasterize_area_density_mass():
    grid = build_grid(unit_square(), 32)
    patch = box(0.25, 0.25, 0.75, 0.75)
    Q = SourceMeasure((AreaDensity(patch, 4.0), Atom((0.1, 0.1), -1.0)),
                      unit_square())
    q = rasterize(Q, grid)
    assert q.total == pytest.approx(0.0, abs=1e-12)
    neg = q.weights[q.weights < 0].sum()
    assert neg == pytest.approx(-1.0, rel=1e-6)


coord_st = st.floats(0.05, 0.95)


@settings(max_examples=30, deadline=None)
@given(ax=coord_st, ay=coord_st, bx=coord_st, by=coord_st,
       w=st.floats(0.1, 10.0))
def test_rasterize_random_atom_pairs_balance(ax, ay, bx, by, w):
    if math.hypot(ax - bx, ay - by) < 0.2:
        return
    grid = build_grid(unit_square(), 24)
    Q = SourceMeasure((Atom((ax, ay), w), Atom((bx, by), -w)), unit_square())
    q = rasterize(Q, grid)
    assert q.total == pytest.approx(0.0, abs=1e-13 * max(w, 1.0))
    assert q.abs_total == pytest.approx(2 * w, rel=1e-12)
