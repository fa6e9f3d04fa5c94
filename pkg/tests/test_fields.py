"""Field containers, derivative routes, operators, and decay functionals."""

import csv
import math

import numpy as np
import pytest

from conelab.errors import (
    InvalidInput,
    MissingDerivative,
    RegionOutOfGrid,
    WeightOverflow,
)
from conelab.fields import (
    AnalyticField,
    GridSpec,
    ScalarField,
    box,
    conjugate,
    conjugated_wave_residual,
    decay_functionals,
    diff_u,
    diff_v,
    field_to_csv,
    from_expr,
    materialize,
    scaling,
    scaling_star,
)
from conelab.geometry import AdmissibleRegion, metric_data
from conelab.solver import exact_spherical_wave, static_multipole
from conelab.weights import PowerLog

REGION = AdmissibleRegion(0.1, 10.0, 0.1, 10.0)


def mkgrid(m=96, n=3, ell=0):
    return GridSpec.from_region(REGION, m, m, n, ell=ell)


# ---------------------------------------------------------------------------
# grid bookkeeping
# ---------------------------------------------------------------------------

def test_grid_coordinate_consistency():
    g = mkgrid(48)
    assert np.allclose(g.F, -g.U * g.V)
    assert np.allclose(g.H, -g.V / g.U)
    assert np.allclose(g.R, g.V - g.U)
    assert np.allclose(g.T, g.U + g.V)
    assert np.allclose(g.F, np.exp(g.S))
    assert np.allclose(g.H, np.exp(g.Y))
    # log-uniform spacing and region corners
    assert math.isclose(g.s[0], math.log(REGION.rho))
    assert math.isclose(g.s[-1], math.log(REGION.omega))


def test_grid_refine_and_covers():
    g = mkgrid(32)
    g2 = g.refine()
    # refinement keeps existing nodes: (m - 1) * 2 + 1
    assert g2.n_s == 63 and g2.n_y == 63
    assert g.covers(REGION)
    assert not g.covers(AdmissibleRegion(0.05, 10.0, 0.1, 10.0))


# ---------------------------------------------------------------------------
# wave operator against closed forms
# ---------------------------------------------------------------------------

def test_box_of_f_matches_metric_constant():
    # box f = (n+1)/2, matching the metric-level constant
    for n in (2, 3, 4, 7):
        g = mkgrid(48, n=n)
        fld = ScalarField.from_analytic(g, from_expr("-u*v"))
        got = box(fld).values
        assert np.allclose(got, (n + 1) / 2.0, atol=1e-12)
        md = metric_data(-1.0, 2.0, n)
        assert math.isclose(md["box_f"], (n + 1) / 2.0)


def test_from_expr_tr_route_matches_uv_route():
    # same function entered in (t, r) and in (u, v) coordinates
    a_uv = from_expr("exp(u - v) * (-u*v)")
    a_tr = from_expr("exp(-r) * (r**2 - t**2)/4", variables="tr")
    g = mkgrid(24)
    for slot in ("value", "du", "dv", "duu", "duv", "dvv"):
        x = getattr(a_uv, slot)(g.U, g.V)
        y = getattr(a_tr, slot)(g.U, g.V)
        assert np.allclose(x, y, rtol=1e-12, atol=1e-12)


def test_dalembert_solution_annihilated():
    # phi = [g(2u) - g(2v)] / r solves the n=3 radial wave equation exactly
    wave = exact_spherical_wave(width=4.0, power=6)
    g = mkgrid(64, n=3)
    fld = ScalarField.from_analytic(g, wave)
    res = box(fld).values
    assert np.max(np.abs(res)) < 1e-11


def test_static_multipole_annihilated():
    # r^{-(n-2+ell)} on the ell-th mode is a static solution
    for n, ell in ((3, 1), (3, 2), (4, 1)):
        g = mkgrid(48, n=n, ell=ell)
        fld = ScalarField.from_analytic(g, static_multipole(ell, n))
        res = box(fld).values
        scale = np.max(np.abs(fld.values) / g.R**2)
        assert np.max(np.abs(res)) < 1e-10 * scale


def test_mode_coupling_term_sign():
    # on a mode the operator picks up +lam/r^2 relative to ell=0
    g0 = mkgrid(32, n=3, ell=0)
    g2 = mkgrid(32, n=3, ell=2)
    assert g0.lam == 0.0 and g2.lam == 2 * (2 + 3 - 2)
    fld0 = ScalarField.from_analytic(g0, from_expr("sin(u)*cos(v)"))
    fld2 = ScalarField.from_analytic(g2, from_expr("sin(u)*cos(v)"))
    diff = box(fld2).values - box(fld0).values
    expect = -g2.lam * fld2.values / g2.R**2
    assert np.allclose(diff, expect, atol=1e-13)


# ---------------------------------------------------------------------------
# scaling fields
# ---------------------------------------------------------------------------

def test_scaling_operator_closed_forms():
    g = mkgrid(48)
    f_fld = ScalarField.from_analytic(g, from_expr("-u*v"))
    h_fld = ScalarField.from_analytic(g, from_expr("-v/u"))
    one = ScalarField.from_analytic(g, from_expr("1 + 0*u"))
    # S f = f, S h = 0, S* 1 = (n-1)/4
    assert np.allclose(scaling(f_fld).values, g.F, atol=1e-12)
    assert np.allclose(scaling(h_fld).values, 0.0, atol=1e-12)
    assert np.allclose(scaling_star(one).values, (g.n - 1) / 4.0, atol=1e-14)


def test_scaling_finite_difference_route():
    g = mkgrid(128)
    fld = ScalarField.from_function(g, lambda u, v: np.sin(u) * np.cos(v / 3))
    sa = scaling(ScalarField.from_analytic(g, from_expr("sin(u)*cos(v/3)"))).values
    sf = scaling(fld, analytic=False).values
    ii, jj = g.interior(1)
    assert np.max(np.abs((sa - sf)[ii, jj])) < 5e-4


# ---------------------------------------------------------------------------
# derivative routes and convergence
# ---------------------------------------------------------------------------

def fd_order(source, deriv_fn, levels=(48, 96, 192)):
    errs = []
    for m in levels:
        g = mkgrid(m)
        fld = ScalarField.from_function(g, source.value)
        got = deriv_fn(fld, analytic=False).values
        ref = deriv_fn(ScalarField.from_analytic(g, source)).values
        ii, jj = g.interior(2)
        errs.append(np.max(np.abs((got - ref)[ii, jj])))
    rates = [math.log2(errs[k] / errs[k + 1]) for k in range(len(errs) - 1)]
    return rates, errs


def test_fd_first_derivative_order():
    src = from_expr("sin(u) * cos(v/3)")
    rates_u, errs_u = fd_order(src, diff_u)
    rates_v, errs_v = fd_order(src, diff_v)
    # order-4 stencils composed through the chain rule; the coarsest
    # segment is pre-asymptotic so judge the fine one
    assert rates_u[-1] > 3.2 and errs_u[-1] < 1e-5
    assert rates_v[-1] > 3.2 and errs_v[-1] < 1e-5


def test_fd_box_convergence():
    src = from_expr("(-u*v)**(4/5) * (-v/u)**(3/10)")
    rates, errs = fd_order(src, box)
    assert errs[-1] < 1e-6
    assert min(rates) > 3.3


def test_derivs_auto_prefers_closed_form():
    g = mkgrid(24)
    fld = ScalarField.from_analytic(g, from_expr("u**2 * v"))
    phi, pu, pv = fld.derivs1()
    assert np.allclose(pu, 2 * g.U * g.V, atol=1e-13)
    assert np.allclose(pv, g.U**2, atol=1e-13)


def test_materialize_accepts_analytic_field_and_factory():
    g = mkgrid(16)
    a = materialize(from_expr("u + v"), g)
    b = materialize(lambda grid: ScalarField.from_function(grid, lambda u, v: u + v), g)
    assert np.allclose(a.values, b.values)
    assert a.closed_form is not None and a.closed_form.has_second
    assert materialize(a, g) is a                    # same grid: passthrough
    d = materialize(a, g.refine())                   # resample through evaluator
    assert d.grid.n_s == 31
    assert np.allclose(d.values, d.grid.U + d.grid.V, atol=1e-12)
    with pytest.raises(InvalidInput):
        materialize("u + v", g)


# ---------------------------------------------------------------------------
# conjugation
# ---------------------------------------------------------------------------

def test_conjugate_power_weight_is_f_power():
    # with F = a log f + log(1 + a log f / 1) truncated to pure power via b=0
    g = mkgrid(32)
    rep = PowerLog(1.0)
    fld = ScalarField.from_analytic(g, from_expr("1 + 0*u"))
    psi = conjugate(fld, rep, sign=-1)
    assert np.allclose(psi.values, np.exp(-rep.F(g.F)), atol=1e-14)
    back = conjugate(psi, rep, sign=+1)
    assert np.allclose(back.values, fld.values, atol=1e-13)
    assert psi.closed_form is not None and psi.closed_form.has_second


def test_conjugated_wave_expansion_closes():
    # direct e^{-F} box(e^F psi) equals the expanded operator
    g = mkgrid(64)
    rep = PowerLog(0.7)
    psi = ScalarField.from_analytic(g, from_expr("sin(u) * exp(-v/5)"))
    res = conjugated_wave_residual(psi, rep).values
    assert np.max(np.abs(res)) < 1e-11


def test_conjugate_rejects_bad_sign_and_overflow():
    g = mkgrid(16)
    fld = ScalarField.from_analytic(g, from_expr("1 + 0*u"))
    with pytest.raises(InvalidInput):
        conjugate(fld, PowerLog(1.0), sign=2)
    wide = GridSpec.from_region(AdmissibleRegion(1e-4, 1e4, 0.1, 10.0), 16, 16, 3)
    big = ScalarField.from_analytic(wide, from_expr("1 + 0*u"))
    with pytest.raises(WeightOverflow):
        conjugate(big, PowerLog(100.0))


# ---------------------------------------------------------------------------
# evaluator
# ---------------------------------------------------------------------------

def test_spline_evaluator_matches_inside_and_raises_outside():
    g = mkgrid(96)
    fld = ScalarField.from_function(g, lambda u, v: np.sin(u) * np.cos(v / 2))
    ev = fld.evaluator()
    u0, v0 = -0.7, 1.3
    assert abs(ev.value(u0, v0) - math.sin(u0) * math.cos(v0 / 2)) < 1e-8
    with pytest.raises(RegionOutOfGrid):
        ev.value(-20.0, 1.0)


def test_closed_form_evaluator_passthrough():
    g = mkgrid(16)
    fld = ScalarField.from_analytic(g, from_expr("u * v"))
    ev = fld.evaluator()
    assert ev is fld.closed_form
    assert ev.value(-3.0, 7.0) == pytest.approx(-21.0)


# ---------------------------------------------------------------------------
# decay functionals
# ---------------------------------------------------------------------------

def test_decay_dalembert_consistent_at_beta_zero():
    # a compact-profile outgoing wave decays like r^{-1}: exactly beta = 0
    wave = exact_spherical_wave(width=4.0, power=6)
    g = mkgrid(96, n=3)
    fld = ScalarField.from_analytic(g, wave)
    rep = decay_functionals(fld, beta=0.0)
    assert rep.classifications["field"] == "consistent"
    assert rep.classifications["derivative"] == "consistent"
    assert rep.sup_field > 0


def test_decay_multipole_flags_divergence():
    # r^{-(1+ell)} on mode ell is singular where the expanding window
    # approaches the cone tip, so its weighted supremum must be flagged
    g = mkgrid(64, n=3, ell=1)
    fld = ScalarField.from_analytic(g, static_multipole(1, 3))
    bad = decay_functionals(fld, beta=2.5)
    assert bad.classifications["field"] == "violated"
    assert bad.trends["field"] > 0.05


def test_decay_product_null_weight_saturation():
    # ((1-u)(1+v))^{-3/2} saturates the beta = 1 weight in n = 3:
    # (1 + r + f) factors as (1-u)(1+v), so w |phi| == 1 identically
    g = mkgrid(48, n=3)
    fld = ScalarField.from_analytic(g, from_expr("((1-u)*(1+v))**(-3/2)"))
    rep = decay_functionals(fld, beta=1.0)
    assert abs(rep.sup_field - 1.0) < 1e-12
    assert rep.classifications["field"] == "consistent"


def test_decay_rejects_negative_beta():
    g = mkgrid(16)
    fld = ScalarField.from_analytic(g, from_expr("1 + 0*u"))
    with pytest.raises(InvalidInput):
        decay_functionals(fld, beta=-1.0)


def test_decay_sampled_field_uses_nested_windows():
    # sampled (no closed form): windows nest inward instead of expanding;
    # a profile that saturates the weight exactly stays flat either way
    g = mkgrid(64)
    fld = ScalarField.from_function(g, lambda u, v: ((1 - u) * (1 + v)) ** -1.0)
    rep = decay_functionals(fld, beta=0.0, levels=4)
    assert len(rep.levels) >= 3
    assert abs(rep.sup_field - 1.0) < 1e-10
    assert rep.classifications["field"] == "consistent"


# ---------------------------------------------------------------------------
# serialization
# ---------------------------------------------------------------------------

def test_field_to_csv_round_trip(tmp_path):
    g = mkgrid(8)
    fld = ScalarField.from_analytic(g, from_expr("u + 2*v"))
    path = tmp_path / "field.csv"
    field_to_csv(fld, path)
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["u", "v", "f", "h", "value"]
    assert len(rows) == 1 + 8 * 8
    u, v, f, h, val = (float(x) for x in rows[1])
    assert math.isclose(val, u + 2 * v, rel_tol=1e-15)
    assert math.isclose(f, -u * v, rel_tol=1e-15)


def test_missing_derivative_guard():
    af = AnalyticField(value=lambda u, v: u + v, label="bare")
    assert not af.has_first
    with pytest.raises(MissingDerivative):
        af.derivs1(-1.0, 1.0)
