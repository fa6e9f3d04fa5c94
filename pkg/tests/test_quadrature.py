"""Level-set and bulk quadrature against independent routes and closed forms."""

import math

import numpy as np
import pytest

from conelab.currents import PowerU, current_general, current_nl
from conelab.errors import InvalidInput, RegionMismatch
from conelab.fields import GridSpec, ScalarField, from_expr
from conelab.geometry import AdmissibleRegion
from conelab.quadrature import (
    boundary_sum,
    bulk_integral,
    cone_integral,
    cone_r_window,
    divergence_residual,
    gl_nodes,
    hyperboloid_integral,
    hyperboloid_t_window,
    inverted_hyperboloid_integral,
)
from conelab.weights import Potential, PowerLog

from _oracles import bulk_simpson, fixed_f_surface_integral, fixed_h_surface_integral

REGION = AdmissibleRegion(0.1, 10.0, 0.1, 10.0)


def smooth(u, v):
    f = -u * v
    h = -v / u
    return np.exp(-np.log(h) ** 2 / 2.0) / (1.0 + f * f)


# ---------------------------------------------------------------------------
# surface measures vs embedded-arc-length oracles
# ---------------------------------------------------------------------------

def test_hyperboloid_measure_against_embedding():
    for omega in (0.3, 1.0, 4.0):
        got = hyperboloid_integral(smooth, omega, (0.2, 5.0), n=3, nodes=160)
        ref = fixed_f_surface_integral(smooth, omega, (0.2, 5.0), n=3)
        assert abs(got - ref) < 1e-8 * max(1.0, abs(ref))


def test_cone_measure_against_embedding():
    for tau in (0.5, 2.0, 7.0):
        got = cone_integral(smooth, tau, (0.2, 5.0), n=3, nodes=160)
        ref = fixed_h_surface_integral(smooth, tau, (0.2, 5.0), n=3)
        assert abs(got - ref) < 1e-8 * max(1.0, abs(ref))


def test_bulk_measure_against_simpson():
    def bump(u, v):
        s = np.log(-u * v)
        y = np.log(-v / u)
        return np.exp(-(s**2 + y**2))

    got = bulk_integral(bump, REGION, n=3, nodes=384)
    ref = bulk_simpson(bump, REGION, n=3)
    assert abs(got - ref) < 1e-6 * abs(ref)


def test_bulk_closed_form_unit_integrand():
    # int r^2 f ds dy factorizes over a product window
    reg = AdmissibleRegion(1.0, math.e, 1.0, math.e)
    got = bulk_integral(lambda u, v: np.ones_like(u), reg, n=3, nodes=64)
    expect = ((math.e**2 - 1.0) / 2.0) * (math.e + 2.0 - 1.0 / math.e)
    assert abs(got - expect) < 1e-12 * expect


def test_mode_factor_scales_linearly():
    area = 4.0 * math.pi
    a = bulk_integral(smooth, REGION, n=3, nodes=64)
    b = bulk_integral(smooth, REGION, n=3, nodes=64, mode_factor=area)
    assert math.isclose(b, area * a, rel_tol=1e-15)


# ---------------------------------------------------------------------------
# window plumbing
# ---------------------------------------------------------------------------

def test_window_helpers_match_implicit_windows():
    omega, sigma, tau = 2.0, 0.3, 6.0
    tw = hyperboloid_t_window(omega, sigma, tau)
    a = hyperboloid_integral(smooth, omega, (sigma, tau), n=3)
    b = hyperboloid_integral(smooth, omega, t_window=tw, n=3)
    assert math.isclose(a, b, rel_tol=1e-15)

    rho = 0.3
    rw = cone_r_window(tau, rho, omega)
    c = cone_integral(smooth, tau, (rho, omega), n=3)
    d = cone_integral(smooth, tau, r_window=rw, n=3)
    assert math.isclose(c, d, rel_tol=1e-15)


def test_empty_windows_integrate_to_zero():
    assert hyperboloid_integral(smooth, 1.0, (2.0, 2.0), n=3) == 0.0
    assert cone_integral(smooth, 1.0, (3.0, 3.0), n=3) == 0.0
    assert hyperboloid_integral(smooth, 1.0, t_window=(1.0, -1.0), n=3) == 0.0


def test_quadrature_input_guards():
    with pytest.raises(InvalidInput):
        gl_nodes(0.0, 1.0, 1)
    with pytest.raises(InvalidInput):
        gl_nodes(0.0, math.inf, 8)
    with pytest.raises(InvalidInput):
        gl_nodes(1.0, 0.0, 8)
    with pytest.raises(InvalidInput):
        hyperboloid_integral(smooth, -1.0, (0.5, 2.0), n=3)
    with pytest.raises(InvalidInput):
        cone_integral(smooth, 0.0, (0.5, 2.0), n=3)
    with pytest.raises(InvalidInput):
        hyperboloid_integral(smooth, 1.0, (-0.5, 2.0), n=3)
    with pytest.raises(InvalidInput):
        cone_integral(smooth, 1.0, (3.0, 2.0), n=3)


# ---------------------------------------------------------------------------
# inversion duality
# ---------------------------------------------------------------------------

def test_inverted_route_matches_direct():
    # (u, v) -> (-1/v, -1/u) sends f -> 1/f and fixes h: the same surface
    # integral can be computed on either chart
    for omega in (0.25, 1.0, 9.0):
        direct = hyperboloid_integral(smooth, omega, (0.2, 5.0), n=3, nodes=160)
        inverted = inverted_hyperboloid_integral(smooth, omega, (0.2, 5.0),
                                                 n=3, nodes=160)
        assert abs(direct - inverted) <= 1e-10 * max(1.0, abs(direct))
        assert abs(direct) > 1e-6  # non-degenerate check


def test_inverted_route_guards():
    with pytest.raises(InvalidInput):
        inverted_hyperboloid_integral(smooth, -2.0, (0.5, 2.0), n=3)


# ---------------------------------------------------------------------------
# boundary sums: closed-form currents
# ---------------------------------------------------------------------------

def test_flux_total_radial_current_closed_form():
    # P = f grad f: P.grad f = f^2, u^2 P.grad h = 0; in n = 3 the signed
    # flux total has the closed form (w^3 - r^3)[(tau-sigma) + 2 log(tau/sigma)
    # + 1/sigma - 1/tau], equal to the bulk integral of div P = 3 f
    rho, omega, sigma, tau = 0.2, 3.0, 0.4, 5.0
    reg = AdmissibleRegion(rho, omega, sigma, tau)

    def cf(u, v):
        return (-u * v) ** 2

    def ch(u, v):
        return np.zeros_like(u)

    bnd = boundary_sum(cf, ch, reg, n=3, nodes=96)
    expect = (omega**3 - rho**3) * ((tau - sigma) + 2.0 * math.log(tau / sigma)
                                    + 1.0 / sigma - 1.0 / tau)
    assert abs(bnd.total - expect) < 1e-11 * abs(expect)
    assert bnd.h_tau == 0.0 and bnd.h_sigma == 0.0

    bulk = bulk_integral(lambda u, v: 3.0 * (-u * v), reg, n=3, nodes=96)
    assert abs(bulk - expect) < 1e-11 * abs(expect)


def test_flux_total_cone_current_closed_form():
    # P = grad h: P.grad f = 0, u^2 P.grad h = u^2 |grad h|^2 = -h;
    # the signed flux total equals the bulk integral of box h
    rho, omega, sigma, tau = 0.2, 3.0, 0.4, 5.0
    reg = AdmissibleRegion(rho, omega, sigma, tau)

    def cf(u, v):
        return np.zeros_like(u)

    def ch(u, v):
        return v / u

    bnd = boundary_sum(cf, ch, reg, n=3, nodes=96)
    expect = (omega - rho) * (sigma**2 + 2 * sigma - tau**2 - 2 * tau)
    assert abs(bnd.total - expect) < 1e-11 * abs(expect)
    assert bnd.f_omega == 0.0 and bnd.f_rho == 0.0


def test_boundary_additivity_across_seam():
    # splitting the region at f = 1 must telescope: the shared face enters
    # the two halves with opposite orientations
    full = AdmissibleRegion(0.1, 10.0, 0.4, 5.0)
    lo = AdmissibleRegion(0.1, 1.0, 0.4, 5.0)
    hi = AdmissibleRegion(1.0, 10.0, 0.4, 5.0)

    def cf(u, v):
        f = -u * v
        return np.sin(f) / (1.0 + f)

    def ch(u, v):
        return np.cos(-v / u)

    b_full = boundary_sum(cf, ch, full, n=3, nodes=128)
    b_lo = boundary_sum(cf, ch, lo, n=3, nodes=128)
    b_hi = boundary_sum(cf, ch, hi, n=3, nodes=128)
    assert abs(b_lo.f_omega - b_hi.f_rho) < 1e-12 * max(1.0, abs(b_lo.f_omega))
    scale = sum(abs(x) for x in (b_full.f_omega, b_full.f_rho,
                                 b_full.h_tau, b_full.h_sigma))
    assert abs((b_lo.total + b_hi.total) - b_full.total) < 1e-11 * scale
    assert set(b_full.as_dict()) == {"f_omega", "f_rho", "h_tau", "h_sigma", "total"}


# ---------------------------------------------------------------------------
# divergence residual on assembled currents
# ---------------------------------------------------------------------------

def test_divergence_residual_analytic_route():
    g = GridSpec.from_region(REGION, 96, 96, 3)
    fld = ScalarField.from_analytic(g, from_expr("sin(u) * exp(-v/4)"))
    cur = current_general(fld, PowerLog(0.8))
    res = divergence_residual(cur, nodes=160)
    assert res.route == "analytic"
    assert res.rel_residual < 1e-9


def test_divergence_residual_fd_route():
    g = GridSpec.from_region(REGION, 192, 192, 3)
    fld = ScalarField.from_analytic(g, from_expr("sin(u) * exp(-v/4)"))
    cur = current_general(fld, PowerLog(0.8))
    res = divergence_residual(cur, nodes=160, route="fd")
    assert res.route == "fd"
    assert res.rel_residual < 1e-3
    with pytest.raises(InvalidInput):
        divergence_residual(cur, route="simpson")


def test_divergence_residual_subregion_and_mismatch():
    g = GridSpec.from_region(REGION, 96, 96, 3)
    fld = ScalarField.from_analytic(g, from_expr("(-u*v)**(4/5)"))
    cur = current_general(fld, PowerLog(0.8))
    sub = AdmissibleRegion(0.2, 5.0, 0.2, 5.0)
    res = divergence_residual(cur, region=sub, nodes=160)
    assert res.rel_residual < 1e-9
    with pytest.raises(RegionMismatch):
        divergence_residual(cur, region=AdmissibleRegion(0.01, 10.0, 0.1, 10.0))


def test_divergence_residual_auto_falls_back_to_fd():
    # a saturating potential has no closed-form log-gradient, so the
    # analytic route is unavailable and auto must pick fd
    g = GridSpec.from_region(REGION, 128, 128, 3)
    fld = ScalarField.from_analytic(g, from_expr("(-u*v)**(3/5)"))
    sat = Potential.saturating(1.0, 3.0, 1.0)
    cur = current_nl(fld, 0.4, PowerU(1, 1.0, sat))
    res = divergence_residual(cur, nodes=96)
    assert res.route == "fd"
    with pytest.raises(InvalidInput):
        divergence_residual(cur, route="analytic")
