"""Radial time-domain evolution of wave fields, plus reference solutions.

A single angular mode phi_hat(t, r) obeys

    d_t^2 phi = d_r^2 phi + ((n-1)/r) d_r phi - lam phi / r^2
                + sign * V(t, r) |phi|^{p-1} phi,        lam = ell (ell + n - 2),

discretized leapfrog on a staggered radial grid r_j = (j + 1/2) dr with mirror
parity phi(-r) = (-1)^ell phi(r) at the origin and a homogeneous outer value
that causality keeps irrelevant (enforced by a domain-size check).  Runs go
both forward and backward in time (the backward leg evolves with negated
initial velocity and the potential sampled at negative times), so the result
covers a symmetric time strip around the data surface.

Also here: the closed-form spherical-wave solution used as a convergence and
finite-speed reference, static multipole profiles, and the construction of a
compactly supported bounded potential admitting a nontrivial static solution
with two-sided power decay (the obstruction example for the estimates).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field as dc_field
from typing import Callable, Optional

import numpy as np
from scipy.interpolate import BPoly, RectBivariateSpline

from .currents import PowerU
from .errors import (
    DomainTooSmall,
    InvalidInput,
    ModeNotSupported,
    RegionOutOfGrid,
    UnstableStep,
)
from .fields import AnalyticField, GridSpec, ScalarField, from_expr

__all__ = [
    "CauchyData",
    "EvolutionResult",
    "solve",
    "exact_spherical_wave",
    "spherical_wave_data",
    "static_multipole",
    "CounterexampleBundle",
    "counterexample_build",
]

MAX_STORED_SLICES = 1024
_CFL_LIMIT = 0.9


@dataclass(frozen=True)
class CauchyData:
    """Initial profile and velocity for one angular mode at t = 0."""

    profile: Callable  # phi(0, r)
    velocity: Callable  # d_t phi(0, r)
    ell: int = 0
    label: str = "data"

    def __post_init__(self):
        if self.ell < 0 or self.ell != int(self.ell):
            raise InvalidInput(f"ell must be a nonnegative integer, got {self.ell}")


@dataclass
class EvolutionResult:
    """Sampled evolution phi(t_i, r_j) over a symmetric time strip."""

    times: np.ndarray
    r: np.ndarray
    slices: np.ndarray  # (len(times), len(r))
    n: int
    ell: int
    dr: float
    dt: float
    energy_drift: float
    meta: dict = dc_field(default_factory=dict)

    def spline(self) -> RectBivariateSpline:
        kx = min(5, len(self.times) - 1)
        ky = min(5, len(self.r) - 1)
        return RectBivariateSpline(self.times, self.r, self.slices, kx=kx, ky=ky)

    def field_on(self, grid: GridSpec) -> ScalarField:
        """Resample onto an exterior-region grid (raises if not covered)."""
        if grid.ell != self.ell or grid.n != self.n:
            raise InvalidInput("grid mode/dimension does not match the evolution")
        T, R = grid.T, grid.R
        if (np.max(np.abs(T)) > self.times[-1] + 1e-12
                or np.max(R) > self.r[-1] + 1e-12
                or np.min(R) < self.r[0] - 1e-12):
            raise RegionOutOfGrid("grid extends beyond the sampled evolution")
        sp = self.spline()
        vals = sp.ev(np.ravel(T), np.ravel(R)).reshape(T.shape)
        return ScalarField(grid=grid, values=vals, name=self.meta.get("label", "evolved"))


def _rhs(phi, r, dr, lam, n, ell):
    """Spatial operator with mirror parity at the origin, zero outer ghost."""
    up = np.empty_like(phi)
    dn = np.empty_like(phi)
    up[:-1] = phi[1:]
    up[-1] = 0.0
    dn[1:] = phi[:-1]
    dn[0] = (-1.0) ** ell * phi[0]
    lap = (up - 2.0 * phi + dn) / dr**2 + (n - 1) / r * (up - dn) / (2.0 * dr)
    return lap - lam * phi / r**2


def solve(data: CauchyData, *, T: float, R: float, dr: float, n: int,
          U: Optional[PowerU] = None, cfl: float = _CFL_LIMIT,
          support_radius: Optional[float] = None, pad: float = 1.0) -> EvolutionResult:
    """Evolve Cauchy data over t in [-T, T].

    The outer radius must exceed the data's support radius plus T plus a pad,
    so the zero outer value is never reached by the domain of influence.
    """
    if T <= 0 or R <= 0 or dr <= 0:
        raise InvalidInput("T, R, dr must be positive")
    if cfl > _CFL_LIMIT:
        raise UnstableStep(f"time step ratio {cfl} exceeds the stable limit {_CFL_LIMIT}")
    if cfl <= 0:
        raise InvalidInput("cfl must be positive")
    if U is not None and U.p != 1.0 and data.ell != 0:
        raise ModeNotSupported("power nonlinearity requires the spherically symmetric mode")

    nr = int(round(R / dr))
    r = (np.arange(nr) + 0.5) * dr
    lam = float(data.ell * (data.ell + n - 2))
    phi0 = np.asarray(data.profile(r), float)
    phi1 = np.asarray(data.velocity(r), float)
    if phi0.shape != r.shape or phi1.shape != r.shape:
        raise InvalidInput("data callables must return one value per radius")

    if support_radius is None:
        amp = np.abs(phi0) + np.abs(phi1)
        nz = np.nonzero(amp > 1e-14 * max(np.max(amp), 1e-300))[0]
        support_radius = float(r[nz[-1]]) if nz.size else 0.0
    if R < support_radius + T + pad:
        raise DomainTooSmall(
            f"outer radius {R} < support {support_radius} + T {T} + pad {pad}")

    dt = cfl * dr
    nsteps = int(math.ceil(T / dt))
    dt = T / nsteps  # land exactly on t = +-T
    if dt > _CFL_LIMIT * dr * (1 + 1e-12):
        nsteps += 1
        dt = T / nsteps

    per_dir = min(MAX_STORED_SLICES // 2, nsteps + 1)
    store_idx = np.unique(np.round(np.linspace(0, nsteps, per_dir)).astype(int))

    scale0 = max(float(np.max(np.abs(phi0))), float(np.max(np.abs(phi1))), 1e-300)

    def nonlin(phi, t):
        if U is None:
            return 0.0
        V = np.asarray(U.V.value_tr(t, r), float)
        return U.sign * V * np.abs(phi) ** (U.p - 1.0) * phi

    mass = r ** (n - 1) * dr

    def half_step_energy(phi_a, phi_b):
        """Leapfrog energy at the half step between consecutive slices."""
        vel = (phi_b - phi_a) / dt
        mid = 0.5 * (phi_a + phi_b)
        return (float(np.sum((0.5 * vel**2 + lam * 0.5 * mid**2 / r**2) * mass))
                + _grad_energy(mid, r, dr, n))

    def run(direction: int):
        """direction +1: forward; -1: backward (velocity negated, t -> -t)."""
        phi_prev = phi0.copy()
        vel = direction * phi1
        acc0 = _rhs(phi_prev, r, dr, lam, n, data.ell) + nonlin(phi_prev, 0.0)
        phi_cur = phi_prev + dt * vel + 0.5 * dt**2 * acc0
        out = {}
        energies = []
        if 0 in store_idx:
            out[0] = phi_prev.copy()
        with np.errstate(over="ignore", invalid="ignore"):
            for m in range(1, nsteps + 1):
                if m > 1:
                    t_here = direction * (m - 1) * dt
                    acc = _rhs(phi_cur, r, dr, lam, n, data.ell) + nonlin(phi_cur, t_here)
                    phi_cur, phi_prev = (2.0 * phi_cur - phi_prev + dt**2 * acc), phi_cur
                if m in store_idx:
                    mx = float(np.max(np.abs(phi_cur)))
                    if not np.isfinite(mx) or mx > 1e12 * scale0:
                        raise UnstableStep(f"field blew up at step {m} (max {mx:.3e})")
                    out[m] = phi_cur.copy()
                    if U is None:
                        energies.append(half_step_energy(phi_prev, phi_cur))
        return out, energies

    fwd, fwd_e = run(+1)
    bwd, bwd_e = run(-1)

    times = []
    slices = []
    for m in sorted(store_idx, reverse=True):
        if m == 0:
            continue
        times.append(-m * dt)
        slices.append(bwd[m])
    times.append(0.0)
    slices.append(phi0)
    for m in sorted(store_idx):
        if m == 0:
            continue
        times.append(m * dt)
        slices.append(fwd[m])

    times = np.asarray(times)
    slices = np.asarray(slices)

    energies = np.asarray(fwd_e + bwd_e)
    if energies.size and np.mean(energies) > 0:
        drift = float((np.max(energies) - np.min(energies)) / np.mean(energies))
    else:
        drift = math.nan

    return EvolutionResult(times=times, r=r, slices=slices, n=n, ell=data.ell,
                           dr=dr, dt=dt, energy_drift=drift,
                           meta={"label": data.label, "support_radius": support_radius,
                                 "nsteps": nsteps, "cfl": cfl,
                                 "nonlinearity": getattr(U, "label", None)})


def _grad_energy(phi, r, dr, n):
    dphi = np.gradient(phi, dr)
    return float(np.sum(0.5 * dphi**2 * r ** (n - 1) * dr))


# ---------------------------------------------------------------------------
# reference solutions
# ---------------------------------------------------------------------------

def exact_spherical_wave(width: float = 1.0, power: int = 6) -> AnalyticField:
    """Outgoing-plus-ingoing spherical wave (n = 3, ell = 0).

    phi = [g(2u) - g(2v)] / r with the even compactly supported profile
    g(x) = (1 - (x/width)^2)^power on |x| < width.  Exact solution of the
    free wave equation; its Cauchy data at t = 0 are (0, -2 g'(r)/r).
    """
    w = float(width)
    g = f"Piecewise(((1 - (X/{w})**2)**{power}, X**2 < {w}**2), (0, True))"
    expr = f"({g.replace('X', '(2*u)')} - {g.replace('X', '(2*v)')}) / (v - u)"
    return from_expr(expr, label="spherical-wave")


def spherical_wave_data(width: float = 1.0, power: int = 6) -> CauchyData:
    """Cauchy data whose evolution is `exact_spherical_wave` (n = 3)."""
    w = float(width)

    def profile(r):
        return np.zeros_like(np.asarray(r, float))

    def velocity(r):
        r = np.asarray(r, float)
        inside = r**2 < w**2
        # g'(x) = -2 power x / w^2 (1 - x^2/w^2)^{power-1}
        gp = np.where(inside,
                      -2.0 * power * r / w**2 * np.clip(1 - r**2 / w**2, 0, None) ** (power - 1),
                      0.0)
        return -2.0 * gp / r

    return CauchyData(profile=profile, velocity=velocity, ell=0, label="spherical-wave")


def static_multipole(ell: int, n: int) -> AnalyticField:
    """Static decaying multipole profile r^{-(n-2+ell)} (free-wave solution)."""
    if ell < 1 or n < 3:
        raise InvalidInput("decaying static multipole needs ell >= 1 and n >= 3")
    return from_expr(f"(v - u)**(-{n - 2 + ell})", label=f"multipole(ell={ell})")


# ---------------------------------------------------------------------------
# obstruction example: bounded compactly supported potential with a
# two-sided-power static solution
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CounterexampleBundle:
    q_plus: float
    q_minus: float
    ell: int
    a: float
    n: int
    beta: Callable
    dbeta: Callable
    d2beta: Callable
    potential: Callable  # U(r), supported in [1, 2]
    support: tuple

    def residual(self, r) -> np.ndarray:
        """Static-equation residual beta'' + (n-1)/r beta' - a beta / r^2 + U beta."""
        r = np.asarray(r, float)
        return (self.d2beta(r) + (self.n - 1) / r * self.dbeta(r)
                - self.a * self.beta(r) / r**2 + self.potential(r) * self.beta(r))


def counterexample_build(n: int = 3, a: float = 6.0) -> CounterexampleBundle:
    """Glue the growing and decaying power solutions of the a/r^2 mode equation.

    q(q + n - 2) = a has roots q_+ > 0 > q_-; beta follows r^{q_+} for r <= 1
    and r^{q_-} for r >= 2, bridged on [1, 2] by a quintic Hermite interpolant
    of log beta matching value and two derivatives at both ends.  The bounded
    potential U = -(w'' + w'^2) - (n-1) w'/r + a/r^2 (w = log beta) vanishes
    identically outside [1, 2] and makes beta an exact static solution.
    """
    if n < 3:
        raise InvalidInput("need n >= 3 for a decaying branch")
    disc = (n - 2) ** 2 + 4.0 * a
    if disc <= 0 or a <= 0:
        raise InvalidInput(f"need a > 0 (got {a})")
    q_plus = (-(n - 2) + math.sqrt(disc)) / 2.0
    q_minus = (-(n - 2) - math.sqrt(disc)) / 2.0
    ell = int(round(q_plus))
    if abs(ell * (ell + n - 2) - a) > 1e-12:
        ell = -1  # no integer mode carries this a; the bundle is still valid

    # quintic Hermite bridge for w = log beta on [1, 2]
    lb2 = math.log(2.0)
    bp = BPoly.from_derivatives(
        [1.0, 2.0],
        [[0.0, q_plus, -q_plus],
         [q_minus * lb2, q_minus / 2.0, -q_minus / 4.0]],
    )
    bp1 = bp.derivative()
    bp2 = bp1.derivative()

    def _w(r):
        return bp(r)

    def beta(r):
        r = np.asarray(r, float)
        return np.where(r <= 1.0, r**q_plus,
                        np.where(r >= 2.0, r**q_minus, np.exp(bp(np.clip(r, 1.0, 2.0)))))

    def dbeta(r):
        r = np.asarray(r, float)
        mid = np.exp(bp(np.clip(r, 1.0, 2.0))) * bp1(np.clip(r, 1.0, 2.0))
        return np.where(r <= 1.0, q_plus * r ** (q_plus - 1),
                        np.where(r >= 2.0, q_minus * r ** (q_minus - 1), mid))

    def d2beta(r):
        r = np.asarray(r, float)
        rc = np.clip(r, 1.0, 2.0)
        mid = np.exp(bp(rc)) * (bp2(rc) + bp1(rc) ** 2)
        return np.where(r <= 1.0, q_plus * (q_plus - 1) * r ** (q_plus - 2),
                        np.where(r >= 2.0, q_minus * (q_minus - 1) * r ** (q_minus - 2), mid))

    def potential(r):
        r = np.asarray(r, float)
        rc = np.clip(r, 1.0, 2.0)
        wp = bp1(rc)
        wpp = bp2(rc)
        inside = (r > 1.0) & (r < 2.0)
        return np.where(inside, -(wpp + wp**2) - (n - 1) * wp / r + a / r**2, 0.0)

    return CounterexampleBundle(q_plus=q_plus, q_minus=q_minus, ell=ell, a=a, n=n,
                                beta=beta, dbeta=dbeta, d2beta=d2beta,
                                potential=potential, support=(1.0, 2.0))
