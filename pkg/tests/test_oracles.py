import math

import numpy as np
import pytest

from heatdesign.geometry import geodesic_distance, point_in_domain
from heatdesign.measures import pair, total_variation
from heatdesign.oracles import (EXAMPLE_BUILDERS, example_diagonals,
                                get_example, weak_divergence_defect)

SQRT2 = math.sqrt(2.0)
NAMES = sorted(EXAMPLE_BUILDERS)

EXACT_VALUES = {
    "nonconvex": SQRT2,
    "brothers": 8.0 * SQRT2 / 3.0,
    "diagonals": 2.0 * SQRT2,
    "arc": 0.8,
    "segments": 4.0 * SQRT2,
}


@pytest.fixture(scope="module", params=NAMES)
def example(request):
    return get_example(request.param)


# ---------------------------------------------------------------------------
# Frozen constants
# ---------------------------------------------------------------------------

def test_closed_form_values(example):
    assert example.value_Q1 == pytest.approx(EXACT_VALUES[example.name],
                                             abs=1e-15)


def test_mu_mass_equals_value(example):
    assert example.mu.mass == pytest.approx(example.value_Q1, rel=1e-12)
    assert float(example.mu.qw.sum()) == pytest.approx(example.value_Q1,
                                                       rel=1e-9)


def test_unknown_example_lists_names():
    with pytest.raises(KeyError, match="nonconvex"):
        get_example("wedge")


# ---------------------------------------------------------------------------
# Self-consistency: the three oracle identities
# ---------------------------------------------------------------------------

def test_pairing_recovers_value(example):
    assert pair(example.Q, example.u_hat) == \
        pytest.approx(example.value_Q1, abs=1e-9)


def test_sigma_aligns_with_gradient_on_support(example):
    rng = np.random.default_rng(42)
    pts = example.sample_mu(rng, 10_000)
    x, y = pts[:, 0], pts[:, 1]
    ok = example.sigma_defined(x, y)
    assert ok.mean() > 0.99
    gx, gy = example.grad_u_hat(x[ok], y[ok])
    sx, sy = example.sigma(x[ok], y[ok])
    dots = sx * gx + sy * gy
    assert np.abs(dots - 1.0).max() <= 1e-9


def test_weak_divergence_identity(example):
    assert weak_divergence_defect(example, count=20) <= 1e-6


# ---------------------------------------------------------------------------
# Structural properties
# ---------------------------------------------------------------------------

def test_potential_is_lipschitz_for_the_domain_metric(example):
    rng = np.random.default_rng(7)
    pts = example.sample_domain(rng, 300)
    u = example.u_hat(pts[:, 0], pts[:, 1])
    a = pts[: len(pts) // 2]
    b = pts[len(pts) // 2:]
    ua, ub = u[: len(pts) // 2], u[len(pts) // 2:]
    d = example.distance(a[:, 0], a[:, 1], b[:, 0], b[:, 1])
    assert np.all(np.abs(ua - ub) <= d + 1e-9)


def test_oracle_distance_matches_geodesic(example):
    rng = np.random.default_rng(13)
    pts = example.sample_domain(rng, 40)
    for k in range(0, 38, 2):
        a, b = pts[k], pts[k + 1]
        d_oracle = float(np.atleast_1d(
            example.distance(a[0], a[1], b[0], b[1]))[0])
        d_geo = geodesic_distance(example.domain, tuple(a), tuple(b))
        assert d_oracle == pytest.approx(d_geo, abs=1e-9)


def test_support_contains_mu_sample_points(example):
    rng = np.random.default_rng(3)
    pts = example.sample_mu(rng, 500)
    inside = example.in_support(pts[:, 0], pts[:, 1], pad=1e-9)
    assert inside.all()


def test_sample_domain_points_are_members(example):
    rng = np.random.default_rng(5)
    pts = example.sample_domain(rng, 200)
    for x, y in pts:
        assert point_in_domain(example.domain, (x, y))


def test_source_is_balanced(example):
    assert total_variation(example.Q) > 0  # construction validated balance


def test_c_hat_scales_with_budget(example):
    rng = np.random.default_rng(11)
    pts = example.sample_mu(rng, 50)
    x, y = pts[:, 0], pts[:, 1]
    rho1, n1 = example.c_hat(x, y, 1.0)
    rho3, n3 = example.c_hat(x, y, 3.0)
    assert np.allclose(rho3, 3.0 * rho1, rtol=1e-12)
    assert np.allclose(n1[0], n3[0]) and np.allclose(n1[1], n3[1])
    with pytest.raises(ValueError):
        example.c_hat(x, y, -1.0)


def test_diagonals_alternate_is_also_optimal():
    alt = example_diagonals(alternate=True)
    assert alt.value_Q1 == pytest.approx(2.0 * SQRT2, abs=1e-15)
    assert pair(alt.Q, alt.u_hat) == pytest.approx(alt.value_Q1, abs=1e-9)
    assert weak_divergence_defect(alt, count=20) <= 1e-6
