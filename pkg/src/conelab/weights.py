"""Radial weights F(f), their derived coefficients, and admissible potentials.

A reparametrization is a function F of the hyperbolic distance f used to
conjugate the wave operator.  The derived coefficients are

    G = -(f F')'        and        H = (f G)' / 2,

and the split pair used by the low/high estimates is

    F_- = -(a - b) log f - (b/p) f^{ p}     (f <= 1),
    F_+ = -(a + b) log f - (b/p) f^{-p}     (f >= 1),

with a > 0, 0 < p < 2a and 0 <= b < min(2a - p, 4p)/4.  Both branches share
F, F' and G at f = 1, which is what makes the matched estimate glue.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .errors import (
    DomainError,
    InvalidInput,
    InvalidPotential,
    InvalidWeightParams,
    MissingDerivative,
    NotInwardDirected,
)

__all__ = [
    "SplitWeightParams",
    "Reparametrization",
    "PowerLog",
    "SplitLow",
    "SplitHigh",
    "CustomWeight",
    "eval_weight",
    "gh",
    "envelope_check",
    "bulk_coefficient",
    "BulkCoefficient",
    "Potential",
    "gamma_v",
    "classify_potential",
    "PotentialReport",
]


@dataclass(frozen=True)
class SplitWeightParams:
    """Admissible triple (a, b, p) for the split weights."""

    a: float
    b: float
    p: float

    def __post_init__(self):
        for name, val in (("a", self.a), ("b", self.b), ("p", self.p)):
            if not np.isfinite(val):
                raise InvalidWeightParams(f"{name} must be finite, got {val}")
        if not self.a > 0:
            raise InvalidWeightParams(f"need a > 0, got a={self.a}")
        if not 0 < self.p < 2 * self.a:
            raise InvalidWeightParams(f"need 0 < p < 2a, got p={self.p}, a={self.a}")
        cap = 0.25 * min(2 * self.a - self.p, 4 * self.p)
        if not 0 <= self.b < cap:
            raise InvalidWeightParams(
                f"need 0 <= b < min(2a - p, 4p)/4 = {cap}, got b={self.b}"
            )


def _asf(f):
    f = np.asarray(f, dtype=float)
    if np.any(~np.isfinite(f)):
        raise InvalidInput("f must be finite")
    if np.any(f <= 0):
        raise DomainError("weights are defined for f > 0 only")
    return f


class Reparametrization:
    """Interface: F, dF, d2F always; dG optionally (needed for H)."""

    name = "base"

    def F(self, f):
        raise NotImplementedError

    def dF(self, f):
        raise NotImplementedError

    def d2F(self, f):
        raise NotImplementedError

    def G(self, f):
        # G = -(f F')' = -(F' + f F'')
        f = _asf(f)
        return -(self.dF(f) + f * self.d2F(f))

    def dG(self, f):
        raise MissingDerivative(f"{self.name}: G' not available (needs third derivative)")

    def H(self, f):
        # H = (f G)'/2 = (G + f G')/2
        f = _asf(f)
        return 0.5 * (self.G(f) + f * self.dG(f))

    def inward_on(self, f) -> bool:
        """True when F' < 0 at every sample (gradient of F points inward)."""
        return bool(np.all(self.dF(_asf(f)) < 0))


@dataclass(frozen=True)
class PowerLog(Reparametrization):
    """F = -a log f, the pure power weight e^{-2F} = f^{2a}."""

    a: float
    name = "power_log"

    def __post_init__(self):
        if not (np.isfinite(self.a) and self.a > 0):
            raise InvalidWeightParams(f"need a > 0, got {self.a}")

    def F(self, f):
        return -self.a * np.log(_asf(f))

    def dF(self, f):
        return -self.a / _asf(f)

    def d2F(self, f):
        return self.a / _asf(f) ** 2

    def G(self, f):
        return np.zeros_like(_asf(f))

    def dG(self, f):
        return np.zeros_like(_asf(f))


@dataclass(frozen=True)
class SplitLow(Reparametrization):
    """Low branch F_- = -(a-b) log f - (b/p) f^p, intended for f <= 1."""

    params: SplitWeightParams
    name = "split_low"

    @property
    def a(self):
        return self.params.a

    @property
    def b(self):
        return self.params.b

    @property
    def p(self):
        return self.params.p

    def F(self, f):
        f = _asf(f)
        return -(self.a - self.b) * np.log(f) - (self.b / self.p) * f**self.p

    def dF(self, f):
        f = _asf(f)
        return -(self.a - self.b) / f - self.b * f ** (self.p - 1)

    def d2F(self, f):
        f = _asf(f)
        return (self.a - self.b) / f**2 - self.b * (self.p - 1) * f ** (self.p - 2)

    def G(self, f):
        f = _asf(f)
        return self.b * self.p * f ** (self.p - 1)

    def dG(self, f):
        f = _asf(f)
        return self.b * self.p * (self.p - 1) * f ** (self.p - 2)

    def H(self, f):
        f = _asf(f)
        return 0.5 * self.b * self.p**2 * f ** (self.p - 1)


@dataclass(frozen=True)
class SplitHigh(Reparametrization):
    """High branch F_+ = -(a+b) log f - (b/p) f^{-p}, intended for f >= 1."""

    params: SplitWeightParams
    name = "split_high"

    @property
    def a(self):
        return self.params.a

    @property
    def b(self):
        return self.params.b

    @property
    def p(self):
        return self.params.p

    def F(self, f):
        f = _asf(f)
        return -(self.a + self.b) * np.log(f) - (self.b / self.p) * f ** (-self.p)

    def dF(self, f):
        f = _asf(f)
        return -(self.a + self.b) / f + self.b * f ** (-self.p - 1)

    def d2F(self, f):
        f = _asf(f)
        return (self.a + self.b) / f**2 - self.b * (self.p + 1) * f ** (-self.p - 2)

    def G(self, f):
        f = _asf(f)
        return self.b * self.p * f ** (-self.p - 1)

    def dG(self, f):
        f = _asf(f)
        return -self.b * self.p * (self.p + 1) * f ** (-self.p - 2)

    def H(self, f):
        f = _asf(f)
        return -0.5 * self.b * self.p**2 * f ** (-self.p - 1)


class CustomWeight(Reparametrization):
    """User-supplied F with explicit derivatives; d3F is optional (enables H)."""

    name = "custom"

    def __init__(self, F, dF, d2F=None, d3F=None):
        self._F, self._dF, self._d2F, self._d3F = F, dF, d2F, d3F

    def F(self, f):
        return np.asarray(self._F(_asf(f)), dtype=float)

    def dF(self, f):
        return np.asarray(self._dF(_asf(f)), dtype=float)

    def d2F(self, f):
        if self._d2F is None:
            raise MissingDerivative("custom weight lacks a second derivative")
        return np.asarray(self._d2F(_asf(f)), dtype=float)

    def dG(self, f):
        if self._d3F is None:
            raise MissingDerivative("custom weight lacks a third derivative (G')")
        f = _asf(f)
        return -(2.0 * self.d2F(f) + f * np.asarray(self._d3F(f), dtype=float))


def eval_weight(rep: Reparametrization, f):
    """(F, F', F'') at f; raises DomainError for f <= 0."""
    f = _asf(f)
    return rep.F(f), rep.dF(f), rep.d2F(f)


def gh(rep: Reparametrization, f):
    """(G, H) at f, from closed forms where the kind provides them."""
    f = _asf(f)
    return rep.G(f), rep.H(f)


def envelope_check(params: SplitWeightParams, f, branch: str):
    """Power-law envelopes of the split weight on its own branch.

    Returns a dict with the ratio e^{-F}/f^{a -+ b} (must lie in (1, e]) and
    the bracket margins for F' (low: -a/f <= F' < -(a-b)/f; high:
    -(a+b)/f < F' <= -a/f).  All entries are elementwise arrays.
    """
    f = _asf(f)
    a, b = params.a, params.b
    if branch == "low":
        if np.any(f > 1.0):
            raise DomainError("low-branch envelope holds for f <= 1")
        rep = SplitLow(params)
        ratio = np.exp(-rep.F(f)) / f ** (a - b)
        dF = rep.dF(f)
        lo, hi = -a / f, -(a - b) / f
    elif branch == "high":
        if np.any(f < 1.0):
            raise DomainError("high-branch envelope holds for f >= 1")
        rep = SplitHigh(params)
        ratio = np.exp(-rep.F(f)) / f ** (a + b)
        dF = rep.dF(f)
        lo, hi = -(a + b) / f, -a / f
    else:
        raise InvalidInput(f"branch must be 'low' or 'high', got {branch!r}")
    return {
        "ratio": ratio,
        "ratio_ok": bool(np.all((ratio > 1.0) & (ratio <= math.e + 1e-15))),
        "dF": dF,
        "dF_lower_margin": dF - lo,
        "dF_upper_margin": hi - dF,
        "dF_ok": bool(np.all(dF >= lo) and np.all(dF <= hi)),
    }


@dataclass(frozen=True)
class BulkCoefficient:
    value: np.ndarray
    bound: np.ndarray
    degenerate: bool


def bulk_coefficient(params: SplitWeightParams, f, branch: str) -> BulkCoefficient:
    """f |F'| G - H on the given branch, with the positivity bound b^2 p f^{+-p-1}.

    For b = 0 both value and bound vanish identically; the result is flagged
    degenerate instead of raising.
    """
    f = _asf(f)
    a, b, p = params.a, params.b, params.p
    if branch == "low":
        rep = SplitLow(params)
        bound = b * b * p * f ** (p - 1)
    elif branch == "high":
        rep = SplitHigh(params)
        bound = b * b * p * f ** (-p - 1)
    else:
        raise InvalidInput(f"branch must be 'low' or 'high', got {branch!r}")
    dF = rep.dF(f)
    if np.any(dF >= 0):
        raise NotInwardDirected("split weight has F' >= 0 at a sample")
    value = f * np.abs(dF) * rep.G(f) - rep.H(f)
    return BulkCoefficient(value=value, bound=bound, degenerate=(b == 0.0))


@dataclass(frozen=True)
class Potential:
    """Potential V(u, v) with its scaling log-derivative (u d_u + v d_v) log V.

    `du_log`/`dv_log` are the separate partials of log V; they are optional
    and unlock analytic current divergences for nonlinear terms.  `value_tr`
    evaluates V as a function of (t, r) for the time-domain solver; the
    default assumes the (u, v) form is safe there too.
    """

    value: Callable
    scaling_log_derivative: Callable
    du_log: Optional[Callable] = None
    dv_log: Optional[Callable] = None
    sup_bound: Optional[float] = None
    label: str = "potential"
    _tr: Optional[Callable] = None

    def value_tr(self, t, r):
        if self._tr is not None:
            return self._tr(np.asarray(t, float), np.asarray(r, float))
        t = np.asarray(t, float)
        r = np.asarray(r, float)
        return self.value((t - r) / 2.0, (t + r) / 2.0)

    @staticmethod
    def constant(c: float, label: Optional[str] = None) -> "Potential":
        if not (np.isfinite(c)):
            raise InvalidPotential(f"constant potential must be finite, got {c}")
        return Potential(
            value=lambda u, v: np.full_like(np.asarray(u, float), c),
            scaling_log_derivative=lambda u, v: np.zeros_like(np.asarray(u, float)),
            du_log=lambda u, v: np.zeros_like(np.asarray(u, float)),
            dv_log=lambda u, v: np.zeros_like(np.asarray(u, float)),
            sup_bound=abs(c),
            label=label or f"const({c})",
            _tr=lambda t, r: np.full_like(np.asarray(t, float), c),
        )

    @staticmethod
    def power_of_f(c: float, amplitude: float = 1.0, floor: float = 0.0) -> "Potential":
        """V = amplitude * max(f, floor)^c.  (u d_u + v d_v) log f = 2, so the
        scaling log-derivative is 2c wherever the floor is inactive."""
        if amplitude == 0 or not np.isfinite(amplitude) or not np.isfinite(c):
            raise InvalidPotential("power_of_f needs finite c and nonzero amplitude")

        def _f(u, v):
            return np.maximum(-np.asarray(u, float) * np.asarray(v, float), floor)

        def _ftr(t, r):
            t = np.asarray(t, float)
            r = np.asarray(r, float)
            return np.maximum((r * r - t * t) / 4.0, floor)

        return Potential(
            value=lambda u, v: amplitude * _f(u, v) ** c,
            scaling_log_derivative=lambda u, v: np.where(
                _f(u, v) > floor, 2.0 * c, 0.0
            ),
            du_log=lambda u, v: np.where(_f(u, v) > floor, c / np.asarray(u, float), 0.0),
            dv_log=lambda u, v: np.where(_f(u, v) > floor, c / np.asarray(v, float), 0.0),
            label=f"{amplitude}*f^{c}",
            _tr=lambda t, r: amplitude * _ftr(t, r) ** c,
        )

    @staticmethod
    def saturating(B: float, beta: float, p: float, floor: float = 0.0) -> "Potential":
        """V = B p min(beta - p, p) min(f^{-1+p/2}, f^{-1-p/2}): extremal for
        the admissible-decay bound.  `floor` caps f away from the cone so the
        time-domain solver can cross f = 0."""
        if not (np.isfinite(B) and B > 0):
            raise InvalidPotential(f"amplitude bound B must be positive, got {B}")
        if not (0 < p < beta):
            raise InvalidPotential(f"need 0 < p < beta, got p={p}, beta={beta}")
        eps = B * p * min(beta - p, p)

        def _f(u, v):
            return np.maximum(-np.asarray(u, float) * np.asarray(v, float), floor)

        def _val_from_f(f):
            return eps * np.minimum(f ** (-1 + p / 2.0), f ** (-1 - p / 2.0))

        def _slog(u, v):
            f = _f(u, v)
            # log V = log eps + (-1 +- p/2) log f; scaling derivative of log f is 2
            expo = np.where(f <= 1.0, -1 + p / 2.0, -1 - p / 2.0)
            return np.where(f > floor, 2.0 * expo, 0.0)

        return Potential(
            value=lambda u, v: _val_from_f(_f(u, v)),
            scaling_log_derivative=_slog,
            sup_bound=None,
            label=f"saturating(B={B},beta={beta},p={p})",
            _tr=lambda t, r: _val_from_f(
                np.maximum((np.asarray(r, float) ** 2 - np.asarray(t, float) ** 2) / 4.0, floor)
            ),
        )


def gamma_v(V: Potential, a: float, p: float, u, v, n: int):
    """Gamma_V = (1/2)(u d_u + v d_v) log V - ((n-1+4a)/4)(p - 1 - 4/(n-1+4a))."""
    if not (np.isfinite(a) and a > 0):
        raise InvalidInput(f"need a > 0, got {a}")
    if not (np.isfinite(p) and p > 0):
        raise InvalidInput(f"need p > 0, got {p}")
    m = n - 1 + 4.0 * a
    shift = (m / 4.0) * (p - 1.0 - 4.0 / m)
    return 0.5 * np.asarray(V.scaling_log_derivative(u, v), dtype=float) - shift


@dataclass(frozen=True)
class PotentialReport:
    decay_margin: float
    decay_ok: bool
    strong_mono_margin: float
    strong_mono_ok: bool
    focusing_mono_margin: float
    focusing_mono_ok: bool
    defocusing_mono_margin: float
    defocusing_mono_ok: bool
    worst_decay_point: tuple


def classify_potential(
    V: Potential, u, v, n: int, p: float, beta: float, B: float, mu: float = 0.0
) -> PotentialReport:
    """Sample the admissibility conditions for V on the given points.

    decay:      |V| <= B p min(beta-p, p) min(f^{-1+p/2}, f^{-1-p/2})
    strong:     (u d_u + v d_v) log V > -2 + mu          (V > 0)
    focusing:   ... > -((n-1)/2)(1 + 4/(n-1) - p) + mu
    defocusing: ... <= ((n-1)/2)(p - 1 - 4/(n-1))
    """
    if not (0 < p < beta):
        raise InvalidInput(f"need 0 < p < beta, got p={p}, beta={beta}")
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    f = -u * v
    vals = np.asarray(V.value(u, v), dtype=float)
    if np.any(~np.isfinite(vals)):
        raise InvalidPotential("potential is non-finite at a sample point")
    cap = B * p * min(beta - p, p) * np.minimum(f ** (-1 + p / 2.0), f ** (-1 - p / 2.0))
    decay_margins = cap - np.abs(vals)
    iworst = int(np.argmin(decay_margins))
    slog = np.asarray(V.scaling_log_derivative(u, v), dtype=float)

    positive = bool(np.all(vals > 0))
    strong_margin = float(np.min(slog - (-2.0 + mu))) if positive else -math.inf
    foc_floor = -((n - 1) / 2.0) * (1.0 + 4.0 / (n - 1) - p) + mu
    focusing_margin = float(np.min(slog - foc_floor)) if positive else -math.inf
    defoc_cap = ((n - 1) / 2.0) * (p - 1.0 - 4.0 / (n - 1))
    defocusing_margin = float(np.min(defoc_cap - slog)) if positive else -math.inf

    return PotentialReport(
        decay_margin=float(np.min(decay_margins)),
        decay_ok=bool(np.all(decay_margins >= -1e-12 * np.maximum(cap, 1.0))),
        strong_mono_margin=strong_margin,
        strong_mono_ok=positive and strong_margin > 0,
        focusing_mono_margin=focusing_margin,
        focusing_mono_ok=positive and focusing_margin > 0,
        defocusing_mono_margin=defocusing_margin,
        defocusing_mono_ok=positive and defocusing_margin >= 0,
        worst_decay_point=(float(u.flat[iworst]), float(v.flat[iworst])),
    )
