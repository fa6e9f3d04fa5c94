"""Gauss-Legendre quadrature over level sets of f and h and over bulk regions.

Surface measures (sphere-averaged; a single normalized mode contributes
factor 1 to quadratic integrands, a mode-independent integrand carries the
full sphere area):

    level set f = omega (parametrized by t, r = sqrt(t^2 + 4 omega)):
        integral = 2 sqrt(omega) * int Psi r^{n-2} dt,
        t from sqrt(omega)(sqrt(sigma) - 1/sqrt(sigma))
          to sqrt(omega)(sqrt(tau)  - 1/sqrt(tau));

    level set h = tau (parametrized by r, t = r (tau-1)/(tau+1)):
        integral = 2 * int sqrt(f) Psi r^{n-2} dr,
        r from sqrt(rho)(sqrt(tau) + 1/sqrt(tau))
          to sqrt(omega)(sqrt(tau) + 1/sqrt(tau));

    bulk: integral = int int Psi r^{n-1} f ds dy  (s = log f, y = log h).

The inverted-chart route maps (u, v) -> (-1/v, -1/u), under which f -> 1/f
and h -> h, and evaluates the same f-level integral near the inverted light
cone:  int_{f=omega} Psi = 2 omega^{n-1/2} int Psi(point map) rbar^{n-2} dtbar
on the chart level fbar = 1/omega.

`boundary_sum` assembles the four oriented flux terms whose total equals the
bulk integral of div P over the region (outward orientation, inner terms
subtracted); `divergence_residual` is that comparison.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .errors import InvalidInput, RegionMismatch
from .geometry import AdmissibleRegion

__all__ = [
    "gl_nodes",
    "hyperboloid_t_window",
    "cone_r_window",
    "hyperboloid_integral",
    "inverted_hyperboloid_integral",
    "cone_integral",
    "bulk_integral",
    "BoundarySum",
    "boundary_sum",
    "DivergenceResidual",
    "divergence_residual",
]

DEFAULT_NODES = 128


def gl_nodes(lo: float, hi: float, m: int):
    """Gauss-Legendre nodes and weights mapped to [lo, hi]."""
    if m < 2:
        raise InvalidInput(f"need at least 2 quadrature nodes, got {m}")
    if not (np.isfinite(lo) and np.isfinite(hi)):
        raise InvalidInput("quadrature window must be finite")
    if hi < lo:
        raise InvalidInput(f"empty quadrature window [{lo}, {hi}]")
    x, w = np.polynomial.legendre.leggauss(m)
    mid, half = 0.5 * (lo + hi), 0.5 * (hi - lo)
    return mid + half * x, half * w


def hyperboloid_t_window(omega: float, sigma: float, tau: float):
    """t-range cut out of the level set f = omega by sigma <= h <= tau."""
    ro = math.sqrt(omega)
    return (ro * (math.sqrt(sigma) - 1.0 / math.sqrt(sigma)),
            ro * (math.sqrt(tau) - 1.0 / math.sqrt(tau)))


def cone_r_window(tau: float, rho: float, omega: float):
    """r-range cut out of the level set h = tau by rho <= f <= omega."""
    c = math.sqrt(tau) + 1.0 / math.sqrt(tau)
    return (math.sqrt(rho) * c, math.sqrt(omega) * c)


def _window_args(level, window, explicit, which):
    if explicit is not None:
        lo, hi = explicit
    elif which == "t":
        sigma, tau = window
        if not (0 < sigma <= tau):
            raise InvalidInput(f"need 0 < sigma <= tau, got ({sigma}, {tau})")
        lo, hi = hyperboloid_t_window(level, sigma, tau)
    else:
        rho, omega = window
        if not (0 < rho <= omega):
            raise InvalidInput(f"need 0 < rho <= omega, got ({rho}, {omega})")
        lo, hi = cone_r_window(level, rho, omega)
    return float(lo), float(hi)


def hyperboloid_integral(fn: Callable, omega: float, window=None, *, n: int,
                         nodes: int = DEFAULT_NODES, mode_factor: float = 1.0,
                         t_window=None) -> float:
    """Integral of fn(u, v) over the f = omega level set.

    The cut is given either as a hyperbolic window (sigma, tau) or directly
    as `t_window` (used when a fixed time window must be held while omega or
    the cuts move).
    """
    if omega <= 0:
        raise InvalidInput(f"need omega > 0, got {omega}")
    tlo, thi = _window_args(omega, window, t_window, "t")
    if thi <= tlo:
        return 0.0
    t, w = gl_nodes(tlo, thi, nodes)
    r = np.sqrt(t * t + 4.0 * omega)
    u = 0.5 * (t - r)
    v = 0.5 * (t + r)
    vals = np.asarray(fn(u, v), float)
    return mode_factor * 2.0 * math.sqrt(omega) * float(np.sum(w * vals * r ** (n - 2)))


def inverted_hyperboloid_integral(fn: Callable, omega: float, window=None, *, n: int,
                                  nodes: int = DEFAULT_NODES, mode_factor: float = 1.0,
                                  tbar_window=None) -> float:
    """Same f = omega integral computed on the inverted chart fbar = 1/omega.

    The point map u = -1/vbar, v = -1/ubar preserves h, so the hyperbolic
    window transfers verbatim; a fixed `tbar_window` plays the role of a
    fixed time cut near the inverted cone tip as omega grows.
    """
    if omega <= 0:
        raise InvalidInput(f"need omega > 0, got {omega}")
    fbar = 1.0 / omega
    tlo, thi = _window_args(fbar, window, tbar_window, "t")
    if thi <= tlo:
        return 0.0
    tb, w = gl_nodes(tlo, thi, nodes)
    rb = np.sqrt(tb * tb + 4.0 * fbar)
    ub = 0.5 * (tb - rb)
    vb = 0.5 * (tb + rb)
    u = -1.0 / vb
    v = -1.0 / ub
    vals = np.asarray(fn(u, v), float)
    return mode_factor * 2.0 * omega ** (n - 0.5) * float(np.sum(w * vals * rb ** (n - 2)))


def cone_integral(fn: Callable, tau: float, window=None, *, n: int,
                  nodes: int = DEFAULT_NODES, mode_factor: float = 1.0,
                  r_window=None) -> float:
    """Integral of fn(u, v) over the h = tau level set, cut by rho <= f <= omega."""
    if tau <= 0:
        raise InvalidInput(f"need tau > 0, got {tau}")
    rlo, rhi = _window_args(tau, window, r_window, "r")
    if rhi <= rlo:
        return 0.0
    r, w = gl_nodes(rlo, rhi, nodes)
    t = r * (tau - 1.0) / (tau + 1.0)
    u = 0.5 * (t - r)
    v = 0.5 * (t + r)
    f = -u * v
    vals = np.asarray(fn(u, v), float)
    return mode_factor * 2.0 * float(np.sum(w * np.sqrt(f) * vals * r ** (n - 2)))


def bulk_integral(fn: Callable, region: AdmissibleRegion, *, n: int,
                  nodes: int = DEFAULT_NODES, mode_factor: float = 1.0) -> float:
    """Integral of fn(u, v) over the region with the spacetime volume measure."""
    s, ws = gl_nodes(math.log(region.rho), math.log(region.omega), nodes)
    y, wy = gl_nodes(math.log(region.sigma), math.log(region.tau), nodes)
    S, Y = np.meshgrid(s, y, indexing="ij")
    F = np.exp(S)
    H = np.exp(Y)
    u = -np.sqrt(F / H)
    v = np.sqrt(F * H)
    r = v - u
    vals = np.asarray(fn(u, v), float)
    return mode_factor * float(ws @ (vals * r ** (n - 1) * F) @ wy)


@dataclass(frozen=True)
class BoundarySum:
    """Oriented flux terms over the four faces of an admissible region."""

    f_omega: float
    f_rho: float
    h_tau: float
    h_sigma: float

    @property
    def total(self) -> float:
        return self.f_omega - self.f_rho + self.h_tau - self.h_sigma

    def as_dict(self) -> dict:
        return {"f_omega": self.f_omega, "f_rho": self.f_rho,
                "h_tau": self.h_tau, "h_sigma": self.h_sigma,
                "total": self.total}


def boundary_sum(contract_f_fn: Callable, contract_h_fn: Callable,
                 region: AdmissibleRegion, *, n: int,
                 nodes: int = DEFAULT_NODES, mode_factor: float = 1.0) -> BoundarySum:
    """Unit-normal flux integrals of a current over the region's faces.

    Takes the scalar contractions P.grad f and u^2 P.grad h as point
    functions; the unit-normal weight f^{-1/2} is applied here.  The signed
    total (outer minus inner on each foliation) equals the bulk integral of
    div P for any differentiable current.
    """

    def wf(u, v):
        return np.asarray(contract_f_fn(u, v), float) / np.sqrt(-u * v)

    def wh(u, v):
        return np.asarray(contract_h_fn(u, v), float) / np.sqrt(-u * v)

    hw = (region.sigma, region.tau)
    fw = (region.rho, region.omega)
    return BoundarySum(
        f_omega=hyperboloid_integral(wf, region.omega, hw, n=n, nodes=nodes,
                                     mode_factor=mode_factor),
        f_rho=hyperboloid_integral(wf, region.rho, hw, n=n, nodes=nodes,
                                   mode_factor=mode_factor),
        h_tau=cone_integral(wh, region.tau, fw, n=n, nodes=nodes,
                            mode_factor=mode_factor),
        h_sigma=cone_integral(wh, region.sigma, fw, n=n, nodes=nodes,
                              mode_factor=mode_factor),
    )


@dataclass(frozen=True)
class DivergenceResidual:
    bulk: float
    boundary: BoundarySum
    residual: float
    rel_residual: float
    route: str


def divergence_residual(cur, region: Optional[AdmissibleRegion] = None, *,
                        nodes: int = DEFAULT_NODES, route: str = "auto") -> DivergenceResidual:
    """Bulk integral of div P minus the oriented boundary flux total.

    route 'analytic' differentiates the current in closed form, 'fd' uses
    finite differences of the sampled components, 'auto' prefers analytic.
    """
    g = cur.grid
    if region is None:
        region = g.region
    elif not g.covers(region):
        raise RegionMismatch("requested region is not covered by the current's grid")

    if route == "auto":
        route = "analytic" if cur.eval_divergence is not None else "fd"
    if route == "analytic":
        if cur.eval_divergence is None:
            raise InvalidInput("no analytic divergence available for this current")
        div_fn = cur.eval_divergence
    elif route == "fd":
        from .currents import divergence_fd

        div_fn = divergence_fd(cur).evaluator().value
    else:
        raise InvalidInput(f"route must be 'auto', 'analytic' or 'fd', got {route!r}")

    comp = cur.eval_components
    if comp is None:
        raise InvalidInput("current has no point evaluator")

    def cf(u, v):
        pu, pv = comp(u, v)
        return 0.5 * (u * pu + v * pv)

    def ch(u, v):
        pu, pv = comp(u, v)
        return 0.5 * (u * pu - v * pv)

    bulk = bulk_integral(div_fn, region, n=g.n, nodes=nodes)
    bnd = boundary_sum(cf, ch, region, n=g.n, nodes=nodes)
    resid = bulk - bnd.total
    scale = max(abs(bulk), sum(abs(x) for x in
                               (bnd.f_omega, bnd.f_rho, bnd.h_tau, bnd.h_sigma)),
                1e-300)
    return DivergenceResidual(bulk=bulk, boundary=bnd, residual=resid,
                              rel_residual=abs(resid) / scale, route=route)
