"""
Bipolar Green's function, Cauchy kernel and the (2,-1) Cauchy kernel.

Three backends share one interface.  Each works in a *surface chart*:

* ``SphereBackend``: the plane coordinate z, with the sink at infinity.
* ``TorusBackend``: the flat coordinate u on C / (Z + tau Z), sink at u = 0.
* ``CurveBackend``: the torus of an ``EllipticCurve``; curve points
  (z, sheet) are sent to the surface chart by the Abel map.

Differentials are returned as coefficients in the surface chart unless a
``KernelValue`` with an explicit chart is requested.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .elliptic import (
    DEFAULT_TOL,
    GUARD,
    CurvePoint,
    EllipticCurve,
    Lattice,
    PoleProximityError,
    _theta1_series,
    theta1,
    theta1_prime0,
)


class SingularityError(ValueError):
    pass


@dataclass(frozen=True)
class KernelValue:
    """Coefficient of a differential together with the chart it refers to.

    ``chart`` is ``"z"`` (plane), ``"u"`` (torus) or ``"z1"`` / ``"z2"`` for
    the z coordinate on sheet 1 or 2 of a curve.  ``kind`` is the pair of
    weights, (1, 0) for a one-form in the first variable and (2, -1) for a
    quadratic differential in the first and vector field in the second.
    """

    value: complex
    chart: str
    kind: tuple = (1, 0)

    def transported(self, chart: str, factor_p: complex, factor_q: complex = 1.0) -> "KernelValue":
        """Re-express in another chart.

        ``factor_p`` and ``factor_q`` are d(old)/d(new) at the two points.
        """
        k1, k2 = self.kind
        return KernelValue(self.value * factor_p ** k1 * factor_q ** k2, chart, self.kind)


class SphereBackend:
    """Genus-zero reference backend: G = log 1/|p - q|."""

    name = "sphere"
    genus = 0

    def __init__(self, guard: float = GUARD):
        self.guard = guard

    def distance(self, p, q):
        return np.abs(np.asarray(p) - np.asarray(q))

    def distance_to_sink(self, p):
        # the sink is at infinity; report a reciprocal distance
        return 1.0 / np.maximum(np.abs(np.asarray(p)), 1e-300)

    def green(self, p, q):
        return -np.log(np.abs(np.asarray(p, complex) - np.asarray(q, complex)))

    def green_regular(self, p):
        """lim_{q -> p} G(p, q) + log|p - q|."""
        return np.zeros(np.shape(p))

    def cauchy(self, p, q):
        return 1.0 / (np.asarray(p, complex) - np.asarray(q, complex))

    def cauchy_regular_pair(self, p, q):
        """C(p, q) - 1/(p - q), the part that stays bounded on the diagonal."""
        return np.zeros(np.broadcast(np.asarray(p), np.asarray(q)).shape, dtype=complex)

    def sink_term(self, p):
        """The part of C(p,q) depending only on p (plus q-linear corrections)."""
        return np.zeros(np.shape(p), dtype=complex)

    def log_abs_sink(self, p):
        return np.log(np.abs(np.asarray(p, complex)))


class TorusBackend:
    """The flat torus C / (Z + tau Z) with the sink at u = 0."""

    name = "torus"
    genus = 1

    def __init__(self, tau, guard: float = GUARD, tol: float = DEFAULT_TOL):
        self.lattice = Lattice(tau)
        self.tau = self.lattice.tau
        self.guard = guard
        self.tol = tol
        self.T = self.tau.imag
        self.kappa = 2.0 * math.pi / self.T
        self._th1p0 = theta1_prime0(self.tau, tol)

    # -- helpers -------------------------------------------------------------

    def reduce(self, u):
        return self.lattice.reduce(u)

    def distance(self, p, q):
        return self.lattice.distance(p, q)

    def distance_to_sink(self, p):
        return self.lattice.distance_to_lattice(p)

    def _th(self, z, derivs=(0,)):
        return _theta1_series(np.asarray(z, complex), self.tau, self.tol, derivs)

    def log_abs_theta(self, z):
        return np.log(np.abs(self._th(z)[0]))

    def logderiv(self, z):
        t0, t1 = self._th(z, (0, 1))
        return t1 / t0

    # -- kernels ---------------------------------------------------------------

    def green(self, p, q):
        """log|th(p) th(q) / th(p - q)| - (2 pi / Im tau) Im p Im q."""
        p = self.reduce(p)
        q = self.reduce(q)
        return (
            self.log_abs_theta(p)
            + self.log_abs_theta(q)
            - self.log_abs_theta(p - q)
            - self.kappa * p.imag * q.imag
        )

    def green_regular(self, p):
        p = self.reduce(p)
        return 2.0 * self.log_abs_theta(p) - math.log(abs(self._th1p0)) - self.kappa * p.imag ** 2

    def cauchy(self, p, q):
        """Coefficient of dp in C(p, q) = -2 d_p G(p, q)."""
        p = self.reduce(p)
        q = self.reduce(q)
        return -(self.logderiv(p) - self.logderiv(p - q) + 1j * self.kappa * q.imag)

    def cauchy_regular_pair(self, p, q):
        """C(p, q) - 1/(p - q) for representatives with p - q small.

        The formula is invariant under lattice shifts of either argument, so
        unreduced representatives may be used directly.
        """
        p = np.asarray(p, complex)
        q = np.asarray(q, complex)
        d = p - q
        return -(self.logderiv(p) - (self.logderiv(d) - 1.0 / d) + 1j * self.kappa * q.imag)

    def c21(self, u, v, a):
        """Coefficient of du^2/dv of the (2,-1) Cauchy kernel with parameter a."""
        u = np.asarray(u, complex)
        v = np.asarray(v, complex)
        a = np.asarray(a, complex)
        th = lambda z: self._th(z)[0]
        num = self._th1p0 * th(u - a) ** 2 * th(v) ** 2 * th(u - v + 2 * a)
        den = th(u - v) * th(v - a) ** 2 * th(u) ** 2 * th(2 * a)
        return num / den

    def log_abs_sink(self, p):
        return self.log_abs_theta(self.reduce(p))


class CurveBackend(TorusBackend):
    """Torus backend attached to a curve; curve points enter via the Abel map."""

    name = "curve"

    def __init__(self, curve: EllipticCurve, guard: float = GUARD, tol: float = DEFAULT_TOL):
        self.curve = curve
        super().__init__(curve.tau, guard=guard, tol=tol)

    def to_surface(self, z, sheet=1):
        return self.curve.abel(z, sheet)

    def chart_factor(self, z, sheet=1):
        """du/dz at the curve point."""
        return self.curve.du_dz(z, sheet)


# ---------------------------------------------------------------------------
# point-level API


def _as_surface(p, backend):
    if isinstance(p, CurvePoint):
        if not isinstance(backend, CurveBackend):
            raise TypeError("curve points need a CurveBackend")
        if p.is_infinity:
            return 0j
        return complex(backend.to_surface(p.z, p.sheet))
    return complex(p)


def _check_guard(backend, ps, qs):
    if isinstance(backend, SphereBackend):
        if abs(ps - qs) < backend.guard:
            raise SingularityError("p within guard distance of q")
        if not (np.isfinite(ps) and np.isfinite(qs)):
            raise SingularityError("point at the sink")
        return
    if backend.distance(ps, qs) < backend.guard:
        raise SingularityError("p within guard distance of q")
    if backend.distance_to_sink(ps) < backend.guard or backend.distance_to_sink(qs) < backend.guard:
        raise SingularityError("point within guard distance of the sink")


def bipolar_green(p, q, backend, tol=None) -> float:
    """G(p, q): log singularity -log|p - q| at q and +log at the sink."""
    ps, qs = _as_surface(p, backend), _as_surface(q, backend)
    _check_guard(backend, ps, qs)
    return float(backend.green(ps, qs))


def _chart_of(p, backend):
    if isinstance(p, CurvePoint):
        return f"z{p.sheet}"
    return "z" if isinstance(backend, SphereBackend) else "u"


def cauchy_kernel(p, q, backend, tol=None) -> KernelValue:
    """C(p, q) as a one-form in p, expressed in the chart of ``p``."""
    ps, qs = _as_surface(p, backend), _as_surface(q, backend)
    _check_guard(backend, ps, qs)
    val = complex(backend.cauchy(ps, qs))
    if isinstance(p, CurvePoint):
        val *= complex(backend.chart_factor(p.z, p.sheet))
    return KernelValue(val, _chart_of(p, backend), (1, 0))


def c21_kernel(u, v, a, backend, tol=None) -> KernelValue:
    """(2,-1) Cauchy kernel as the coefficient of du^2/dv in the torus chart.

    Residue 1 at u = v; in v a double zero at 0, a double pole at a and a
    simple zero at u + 2a; in u a double zero at a, a double pole at 0 and
    a simple zero at v - 2a.
    """
    if isinstance(backend, SphereBackend):
        raise TypeError("the (2,-1) kernel is defined on genus one backends")
    us, vs, as_ = (_as_surface(x, backend) for x in (u, v, a))
    if backend.distance_to_sink(as_) < backend.guard:
        raise SingularityError("parameter a on the lattice")
    if backend.distance(us, vs) < backend.guard or backend.distance_to_sink(us) < backend.guard:
        raise SingularityError("u within guard distance of a pole")
    if backend.distance(vs, as_) < backend.guard:
        raise SingularityError("v within guard distance of a")
    return KernelValue(complex(backend.c21(us, vs, as_)), "u", (2, -1))


def c21_algebraic_value(curve: EllipticCurve, z, s, zt, st, z0, s0):
    """Coefficient of dz^2/dzt of the (2,-1) kernel from the algebraic formula."""
    w = curve.w(z, s)
    wt = curve.w(zt, st)
    w0 = curve.w(z0, s0)
    w0p = curve.dw_dz(z0, s0)
    # f(z) - f(z0) - f'(z0)(z - z0) with f = (w + wt)/(z - zt): the linear
    # term enters with a minus sign so that p = a is a double zero
    br = (w + wt) / (z - zt) - (w0 + wt) / (z0 - zt) - (w0p / (z0 - zt) - (w0 + wt) / (z0 - zt) ** 2) * (z - z0)
    return br * wt / (2.0 * w ** 2)


def c21_kernel_algebraic(p: CurvePoint, q: CurvePoint, a: CurvePoint, curve: EllipticCurve,
                         guard: float = GUARD) -> KernelValue:
    """(2,-1) kernel from the (w, z) formula, as the coefficient of dz^2/dz~."""
    pts = (p, q, a)
    for x in pts:
        if x.is_infinity:
            raise SingularityError("point at infinity")
        for b in (0.0, curve.x1, curve.x2):
            if abs(x.z - b) < guard:
                raise SingularityError("point within guard distance of a branch point")
    if abs(p.z - q.z) < guard and p.sheet == q.sheet:
        raise SingularityError("p within guard distance of q")
    val = c21_algebraic_value(curve, p.z, p.sheet, q.z, q.sheet, a.z, a.sheet)
    return KernelValue(complex(val), f"z{p.sheet}", (2, -1))


def c21_theta_in_curve_chart(p: CurvePoint, q: CurvePoint, a: CurvePoint, backend: CurveBackend) -> KernelValue:
    """Theta form transported to the z charts of p and q."""
    c = backend.curve
    val = c21_kernel(p, q, a, backend)
    fp = complex(c.du_dz(p.z, p.sheet))
    fq = complex(c.du_dz(q.z, q.sheet))
    return val.transported(f"z{p.sheet}", fp, fq)


def contour_residue(f, center, radius=1e-2, n=64):
    """(1 / 2 pi i) times the trapezoid-rule integral of f over a circle."""
    th = 2.0 * math.pi * np.arange(n) / n
    zs = center + radius * np.exp(1j * th)
    dz = 1j * radius * np.exp(1j * th)
    return complex(np.sum(f(zs) * dz) * (2.0 * math.pi / n) / (2j * math.pi))
