import numpy as np
import pytest

from dirne.envelope import lower_hull
from dirne.errors import BudgetError, DomainError
from dirne.lower import (CertifiedPoint, GridSpec, Staircase, default_00_grid, one_sided_bounds,
                         one_sided_lb, shifted_convex_lb, staircase, two_sided_00_bounds,
                         two_sided_00_lb, two_sided_xye_lb)
from dirne.strategy import OMEGA_MAX
from dirne.upper import OptimizerConfig, heuristic_min
from oracles import direct_oracle

FAST = OptimizerConfig(restarts=64)


def test_grid_spec():
    g = GridSpec((2, 3))
    assert g.ndim == 2 and g.resolution == (2, 3)
    assert g.doubled().resolution == (4, 6)
    axes = g.axes([(0, 1), (0, 3)])
    assert np.allclose(axes[1], [0, 1, 2, 3])
    b = GridSpec(breaks=((0.0, 0.5, 1.0),))
    assert b.doubled().breaks == ((0.0, 0.25, 0.5, 0.75, 1.0),)
    assert np.allclose(GridSpec((4,)).axes([(1, 1)])[0], [1, 1])
    with pytest.raises(DomainError):
        GridSpec((2,), ((0, 1),))
    with pytest.raises(DomainError):
        GridSpec(breaks=((0.0, 0.0),))
    with pytest.raises(DomainError):
        b.axes([(0, 2)])


def test_certified_point_range():
    with pytest.raises(DomainError):
        CertifiedPoint(0.8, 2.5, "x", (1,), 0.0)


@pytest.mark.parametrize("omega", [0.78, 0.80, 0.82, 0.84, 0.85])
def test_engines_sound_against_direct_oracle(omega):
    g = GridSpec((20, 20, 20))
    assert one_sided_lb(omega, g).value <= direct_oracle("A_XYE", omega) + 1e-9
    assert two_sided_00_lb(omega, GridSpec((256, 256, 16))).value <= direct_oracle("AB_00E", omega) + 1e-9
    xye = two_sided_xye_lb(omega, GridSpec((4, 4)), GridSpec((4, 16, 16, 16))).value
    assert xye <= direct_oracle("AB_XYE", omega) + 1e-9


def test_one_sided_default_grid_gap():
    val = one_sided_lb(0.84).value
    up, _ = heuristic_min("A_XYE", 0.84, cfg=FAST)
    assert val <= up + 1e-9
    assert val >= up - 0.05


def test_one_sided_near_classical():
    assert one_sided_lb(0.7501).value <= 0.02


@pytest.mark.parametrize("omega", [0.80, 0.84])
def test_one_sided_refinement(omega):
    g = GridSpec((10, 10, 10))
    assert one_sided_lb(omega, g.doubled()).value >= one_sided_lb(omega, g).value - 1e-12


def test_one_sided_branches():
    g = GridSpec((12, 12, 12))
    both = one_sided_lb(0.82, g).value
    assert both <= one_sided_lb(0.82, g, ("+",)).value
    assert both <= one_sided_lb(0.82, g, ("-",)).value
    with pytest.raises(DomainError):
        one_sided_lb(0.82, g, ())


def test_box_bounds_capped():
    for arr in one_sided_bounds(0.82, GridSpec((6, 6, 6))):
        assert np.all(arr <= 2.0)
    assert np.all(two_sided_00_bounds(0.82, GridSpec((16, 16, 4))) <= 2.0)


@pytest.mark.parametrize("omega", [0.80, 0.84])
def test_two_sided_00_refinement(omega):
    g = GridSpec((64, 64, 8))
    assert two_sided_00_lb(omega, g.doubled()).value >= two_sided_00_lb(omega, g).value - 1e-12


def test_two_sided_00_at_max_score():
    val = two_sided_00_lb(OMEGA_MAX, GridSpec((32, 32, 4))).value
    assert 0.0 <= val <= 2.0


def test_two_sided_00_monotone_in_score():
    ws = np.linspace(0.78, 0.85, 5)
    vals = [two_sided_00_lb(w, GridSpec((512, 512, 32))).value for w in ws]
    assert np.all(np.diff(vals) >= -1e-9)


def test_default_00_grid_shape():
    g = default_00_grid(0.84)
    assert g.ndim == 3


@pytest.mark.parametrize("omega", [0.80, 0.84])
def test_two_sided_xye_refinement(omega):
    rt, ang = GridSpec((4, 4)), GridSpec((4, 16, 16, 16))
    coarse = two_sided_xye_lb(omega, rt, ang).value
    fine = two_sided_xye_lb(omega, rt.doubled(), ang.doubled()).value
    assert fine >= coarse - 1e-12


def test_two_sided_xye_near_classical():
    assert two_sided_xye_lb(0.7501, GridSpec((4, 4)), GridSpec((4, 16, 16, 16))).value <= 0.05


def test_two_sided_xye_scan_matches_oracle():
    scan = two_sided_xye_lb(0.84, GridSpec((8, 8)), GridSpec((8, 16, 16, 16)),
                            n_poly=None, slack=False).value
    oracle = direct_oracle("AB_XYE", 0.84)
    assert scan == pytest.approx(oracle, abs=0.05)


def test_two_sided_xye_arguments():
    with pytest.raises(DomainError):
        two_sided_xye_lb(0.84, n_poly=None)
    with pytest.raises(DomainError):
        two_sided_xye_lb(0.84, n_poly=1)
    with pytest.raises(DomainError):
        two_sided_xye_lb(0.84, GridSpec((4, 4, 4)))
    with pytest.raises(BudgetError):
        two_sided_xye_lb(0.84, max_cells=10)


def test_engines_reject_bad_score():
    with pytest.raises(DomainError):
        one_sided_lb(0.7)
    with pytest.raises(DomainError):
        two_sided_00_lb(0.9)


def test_staircase_single_point():
    s = staircase([(0.84, 0.5)])
    assert s(0.80) == 0.0
    assert s(0.84) == 0.5
    assert s(OMEGA_MAX) == 0.5


def test_staircase_two_points():
    s = staircase([(0.80, 0.3), (0.84, 0.2)])
    assert isinstance(s, Staircase)
    assert s.values == (0.3, 0.3)
    assert s(0.79) == 0.0 and s(0.81) == 0.3 and s(0.85) == 0.3
    pts = [(0.80, 0.3), (0.84, 0.7)]
    s = staircase(pts)
    for w, v in pts:
        assert s(w) <= v
    with pytest.raises(DomainError):
        staircase([(0.84, 0.1), (0.80, 0.2)])


def test_shifted_convex_lb():
    pts = [(0.75, 0.0), (0.80, 0.3), (0.84, 0.6), (0.85, 0.7)]
    c = shifted_convex_lb(pts)
    s = staircase(pts)
    for w in np.linspace(0.75, 0.85, 41):
        assert c(w) <= s(w) + 1e-12
    assert c.direction == "lower"
    assert tuple(lower_hull(c.samples)) == c.samples
    linear = [(0.75, 0.0), (0.80, 0.5), (0.85, 1.0)]
    shifted = [(0.75, 0.0), (0.80, 0.0), (0.85, 0.5)]
    assert shifted_convex_lb(linear).samples == tuple(lower_hull(shifted))
    with pytest.raises(DomainError):
        shifted_convex_lb([(0.8, 0.1)])
