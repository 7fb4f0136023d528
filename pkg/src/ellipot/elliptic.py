"""
Jacobi theta functions, lattice arithmetic and the Abel map.

The curve is ``w**2 = z (z - x1) (z - x2)`` with ``x1 < x2 < 0``.  Its
sheets are two copies of the plane cut along ``(-inf, x1] U [x2, 0]`` and
sheet 1 is the one where ``w > 0`` for ``z > 0``.  Points on a cut are
identified with the limit from the upper half plane of the stated sheet.

The Abel map integrates the holomorphic differential ``dz / (2 w)`` from
the point at infinity, scaled so that the real period is 1.  With this
normalization the modulus ``tau`` is purely imaginary, the point at
infinity goes to 0, ``(0, 0)`` goes to 1/2 and the two negative branch
points go to ``tau/2`` and ``tau/2 + 1/2``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

DEFAULT_TOL = 1e-16
GUARD = 1e-6


class NonConvergenceError(RuntimeError):
    pass


class PoleProximityError(ValueError):
    pass


class DegenerateCurveError(ValueError):
    pass


def _check_tau(tau) -> complex:
    tau = complex(tau)
    if not tau.imag > 0:
        raise NonConvergenceError(f"theta series diverges for Im(tau) = {tau.imag} <= 0")
    return tau


def theta_terms(tau, tol=DEFAULT_TOL) -> int:
    """Half-width K of the summation window ``k in [-K, K]``."""
    tau = _check_tau(tau)
    return int(math.ceil(math.sqrt(math.log(1.0 / tol) / (math.pi * tau.imag)))) + 2


def _theta1_series(z, tau, tol, nderiv):
    z = np.asarray(z, dtype=complex)
    tau = _check_tau(tau)
    K = theta_terms(tau, tol)
    # centre the window on the dominant term so unreduced arguments stay accurate
    k0 = np.floor(-z.imag / tau.imag)
    k = k0[..., None] + np.arange(-K, K + 1)
    m = 2.0 * k + 1.0
    expo = 1j * math.pi * tau * (k + 0.5) ** 2 + 1j * math.pi * m * z[..., None]
    sign = 1.0 - 2.0 * np.mod(k, 2.0)
    terms = sign * np.exp(expo)
    out = []
    for d in nderiv:
        if d == 0:
            out.append(-1j * terms.sum(axis=-1))
        else:
            out.append(-1j * (terms * (1j * math.pi * m) ** d).sum(axis=-1))
    return out


def theta1(z, tau, tol=DEFAULT_TOL, deriv: int = 0):
    """Jacobi theta function theta_1(z; tau) or one of its z-derivatives.

    Parameters
    ----------
    z : array_like
        Complex argument(s).
    tau : complex
        Modulus with ``Im(tau) > 0``.
    tol : float
        Truncation tolerance relative to the largest retained term.
    deriv : int
        Order of the derivative in ``z``.
    """
    return _theta1_series(z, tau, tol, (deriv,))[0]


def theta1_prime0(tau, tol=DEFAULT_TOL) -> complex:
    return complex(theta1(0.0, tau, tol, deriv=1))


def theta1_logderiv(z, tau, tol=DEFAULT_TOL, guard=GUARD):
    """theta_1'(z) / theta_1(z); raises within ``guard`` of a lattice point."""
    z = np.asarray(z, dtype=complex)
    lat = Lattice(tau)
    if np.any(lat.distance_to_lattice(z) < guard):
        raise PoleProximityError("argument within guard distance of a lattice point")
    t0, t1 = _theta1_series(z, tau, tol, (0, 1))
    return t1 / t0


@dataclass(frozen=True)
class Lattice:
    """The lattice Z + tau Z."""

    tau: complex

    def __post_init__(self):
        object.__setattr__(self, "tau", _check_tau(self.tau))

    def reduce(self, u):
        """Representative in the half-open box spanned by 1 and tau."""
        u = np.asarray(u, dtype=complex)
        n = np.floor(u.imag / self.tau.imag)
        u = u - n * self.tau
        # guard against rounding pushing Im u to exactly Im tau
        top = u.imag >= self.tau.imag
        u = np.where(top, u - self.tau, u)
        u = u - np.floor(u.real)
        return np.where(u.real >= 1.0, u - 1.0, u)

    def nearest_difference(self, u):
        """The lattice-equivalent of ``u`` closest to the origin."""
        r = self.reduce(u)
        best = r.copy()
        for m in (-1, 0, 1):
            for n in (-1, 0, 1):
                cand = r + m + n * self.tau
                best = np.where(np.abs(cand) < np.abs(best), cand, best)
        return best

    def distance_to_lattice(self, u):
        return np.abs(self.nearest_difference(u))

    def distance(self, u, v):
        return np.abs(self.nearest_difference(np.asarray(u) - np.asarray(v)))


@dataclass(frozen=True)
class TorusPoint:
    u: complex
    lattice: Lattice

    def reduced(self) -> "TorusPoint":
        return TorusPoint(complex(self.lattice.reduce(self.u)), self.lattice)


# ---------------------------------------------------------------------------
# Carlson's symmetric integral, used for straight-ray Abel integrals


def carlson_rf(x, y, z, rtol=1e-16):
    """Carlson's R_F(x, y, z) by the duplication algorithm.

    Arguments may be complex and must lie off the closed negative real
    axis (at most one of them may vanish).
    """
    x, y, z = np.broadcast_arrays(np.asarray(x, complex), np.asarray(y, complex), np.asarray(z, complex))
    x, y, z = x.copy(), y.copy(), z.copy()
    A0 = (x + y + z) / 3.0
    Q = (3.0 * rtol) ** (-1.0 / 6.0) * np.maximum(np.maximum(np.abs(A0 - x), np.abs(A0 - y)), np.abs(A0 - z))
    A = A0.copy()
    scale = np.ones(x.shape)
    for _ in range(60):
        if np.all(Q * scale < np.abs(A)):
            break
        sx, sy, sz = np.sqrt(x), np.sqrt(y), np.sqrt(z)
        lam = sx * sy + sx * sz + sy * sz
        x = 0.25 * (x + lam)
        y = 0.25 * (y + lam)
        z = 0.25 * (z + lam)
        A = 0.25 * (A + lam)
        scale = 0.25 * scale
    X = 1.0 - x / A
    Y = 1.0 - y / A
    Z = -(X + Y)
    E2 = X * Y - Z * Z
    E3 = X * Y * Z
    return (1.0 - E2 / 10.0 + E3 / 14.0 + E2 * E2 / 24.0 - 3.0 * E2 * E3 / 44.0) / np.sqrt(A)


def _real_segment_integral(a, b, lo, hi):
    """Integral of 1/sqrt(prod(a_i + b_i t)) over [lo, hi].

    All three linear factors must be positive on the open interval.
    """
    a = np.asarray(a, float)
    b = np.asarray(b, float)
    X = np.sqrt(np.maximum(a + b * hi, 0.0))
    Y = np.sqrt(np.maximum(a + b * lo, 0.0))
    d = hi - lo
    U12 = (X[0] * X[1] * Y[2] + Y[0] * Y[1] * X[2]) / d
    U13 = (X[0] * X[2] * Y[1] + Y[0] * Y[2] * X[1]) / d
    U23 = (X[1] * X[2] * Y[0] + Y[1] * Y[2] * X[0]) / d
    return 2.0 * carlson_rf(U12 ** 2, U13 ** 2, U23 ** 2).real


# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CurvePoint:
    """A point on the curve stored as (z, sheet); infinity is ``z = inf``."""

    z: complex
    sheet: int = 1

    @property
    def is_infinity(self) -> bool:
        return not np.isfinite(self.z)

    def conj(self) -> "CurvePoint":
        return CurvePoint(complex(np.conj(self.z)), self.sheet) if not self.is_infinity else self


INFINITY = CurvePoint(complex(np.inf), 1)


def _gauss_legendre(n, a, b):
    x, w = np.polynomial.legendre.leggauss(n)
    return 0.5 * (b - a) * x + 0.5 * (b + a), 0.5 * (b - a) * w


@dataclass(frozen=True)
class EllipticCurve:
    """The curve ``w**2 = z (z - x1) (z - x2)`` with ``x1 < x2 < 0``."""

    x1: float
    x2: float
    n_quad: int = 64
    tol: float = 1e-12
    _cache: dict = field(default_factory=dict, compare=False, repr=False)

    def __post_init__(self):
        x1, x2 = float(self.x1), float(self.x2)
        if not (x1 < x2 < 0):
            raise DegenerateCurveError(f"need x1 < x2 < 0, got x1={x1}, x2={x2}")
        if min(x2 - x1, -x2) < self.tol:
            raise DegenerateCurveError("branch points too close to each other")
        object.__setattr__(self, "x1", x1)
        object.__setattr__(self, "x2", x2)

    # -- algebraic data ----------------------------------------------------

    @property
    def branch_points(self):
        return (0.0, self.x1, self.x2)

    def w(self, z, sheet=1):
        """w on the given sheet (upper-side limit on the cuts)."""
        z = np.asarray(z, dtype=complex)
        z = np.where(z.imag == 0, z.real + 0j, z)  # normalise -0.0 imaginary parts
        w1 = np.sqrt(z) * np.sqrt(z - self.x1) * np.sqrt(z - self.x2)
        return np.where(np.asarray(sheet) == 2, -w1, w1)

    def dw_dz(self, z, sheet=1):
        z = np.asarray(z, dtype=complex)
        w = self.w(z, sheet)
        return 0.5 * w * (1.0 / z + 1.0 / (z - self.x1) + 1.0 / (z - self.x2))

    def sigma(self, p: CurvePoint) -> CurvePoint:
        """The antiholomorphic involution (w, z) -> (conj w, conj z)."""
        if p.is_infinity:
            return p
        z = complex(p.z)
        if z.imag == 0.0 and self._on_cut(z.real):
            # conj of the upper-side limit is the lower-side limit, i.e. the other sheet
            return CurvePoint(z, 3 - p.sheet)
        return CurvePoint(z.conjugate(), p.sheet)

    def _on_cut(self, x: float) -> bool:
        return x <= self.x1 or self.x2 <= x <= 0.0

    # -- periods -----------------------------------------------------------

    def periods(self, n=None):
        """(tau, scale) computed by Gauss-Legendre after a cosine substitution."""
        n = self.n_quad if n is None else n
        key = ("periods", n)
        if key in self._cache:
            return self._cache[key]
        x1, x2 = self.x1, self.x2
        th, wt = _gauss_legendre(n, 0.0, math.pi)
        # real period over [x1, x2]: x = m + d cos(th) removes both sqrt endpoints
        m, d = 0.5 * (x1 + x2), 0.5 * (x2 - x1)
        omega = float(np.sum(wt / np.sqrt(-(m + d * np.cos(th)))))
        # imaginary half period over [x2, 0]
        m, d = 0.5 * x2, -0.5 * x2
        half = float(np.sum(wt / np.sqrt(m + d * np.cos(th) - x1)))
        scale = 1.0 / omega
        tau = 1j * half / omega
        self._cache[key] = (tau, scale)
        return tau, scale

    @property
    def tau(self) -> complex:
        return self.periods()[0]

    @property
    def scale(self) -> float:
        return self.periods()[1]

    @property
    def lattice(self) -> Lattice:
        return Lattice(self.tau)

    # -- Abel map ----------------------------------------------------------

    def _constants(self):
        if "abel" in self._cache:
            return self._cache["abel"]
        x1, x2 = self.x1, self.x2
        F0 = float(2.0 * carlson_rf(0.0, -x1, -x2).real)
        # complete integrals along the cuts and the oval
        I_half = float(2.0 * carlson_rf(0.0, x2 - x1, -x1).real)  # int_0^{|x2|} dt / sqrt(t(|x2|-t)(|x1|-t))
        # int_{|x2|}^{|x1|} dt / sqrt(t (t - |x2|) (|x1| - t)), the oval integral
        oval = float(_real_segment_integral([0.0, x2, -x1], [1.0, 1.0, -1.0], -x2, -x1))
        out = dict(F0=F0, oval=oval, Fx2=F0 - 1j * I_half, Fx1=F0 - 1j * I_half - oval)
        self._cache["abel"] = out
        return out

    def _F_sheet1(self, z):
        """int_z^{z+inf} ds / w_1(s) along the horizontal ray (upper-side on the axis)."""
        z = np.atleast_1d(np.asarray(z, dtype=complex))
        x1, x2 = self.x1, self.x2
        out = np.empty(z.shape, dtype=complex)
        c = self._constants()
        up = z.imag > 0
        lo = z.imag < 0
        real = ~(up | lo)
        if np.any(up):
            zz = z[up]
            out[up] = 2.0 * carlson_rf(zz, zz - x1, zz - x2)
        if np.any(lo):
            zz = np.conj(z[lo])
            out[lo] = np.conj(2.0 * carlson_rf(zz, zz - x1, zz - x2))
        if np.any(real):
            xr = z[real].real
            res = np.empty(xr.shape, dtype=complex)
            pos = xr >= 0
            res[pos] = 2.0 * carlson_rf(xr[pos], xr[pos] - x1, xr[pos] - x2).real
            seg = (xr < 0) & (xr >= x2)
            for i in np.flatnonzero(seg):
                t = -xr[i]
                # int_0^t ds / sqrt(s (|x2| - s) (|x1| - s))
                val = _real_segment_integral([0.0, -x2, -x1], [1.0, -1.0, -1.0], 0.0, t) if t > 0 else 0.0
                res[i] = c["F0"] - 1j * val
            oval = (xr < x2) & (xr > x1)
            for i in np.flatnonzero(oval):
                t = -xr[i]
                # int_{|x2|}^t ds / sqrt(s (s - |x2|) (|x1| - s))
                val = _real_segment_integral([0.0, x2, -x1], [1.0, 1.0, -1.0], -x2, t)
                res[i] = c["Fx2"] - val
            left = xr <= x1
            for i in np.flatnonzero(left):
                t = -xr[i]
                if t == -x1:
                    res[i] = c["Fx1"]
                    continue
                # int_{|x1|}^t ds / sqrt(s (s - |x2|) (s - |x1|))
                val = _real_segment_integral([0.0, x2, x1], [1.0, 1.0, 1.0], -x1, t)
                res[i] = c["Fx1"] + 1j * val
            out[real] = res
        return out

    def abel_unreduced(self, z, sheet=1):
        """scale * int_{p_inf}^{(z, sheet)} dz / (2 w), before lattice reduction."""
        z = np.asarray(z, dtype=complex)
        sheet = np.broadcast_to(np.asarray(sheet), z.shape)
        shape = z.shape
        zf = z.ravel()
        sf = sheet.ravel()
        res = np.zeros(zf.shape, dtype=complex)
        fin = np.isfinite(zf)
        if np.any(fin):
            F = self._F_sheet1(zf[fin])
            sgn = np.where(sf[fin] == 2, 1.0, -1.0)
            res[fin] = sgn * 0.5 * self.scale * F
        return res.reshape(shape)

    def abel(self, z, sheet=1):
        """Abel map reduced into the fundamental box [0,1) x [0, Im tau)."""
        return self.lattice.reduce(self.abel_unreduced(z, sheet))

    def abel_map(self, p: CurvePoint) -> TorusPoint:
        if p.is_infinity:
            return TorusPoint(0j, self.lattice)
        return TorusPoint(complex(self.abel(p.z, p.sheet)), self.lattice)

    def du_dz(self, z, sheet=1):
        return self.scale / (2.0 * self.w(z, sheet))

    # -- inverse -----------------------------------------------------------

    def _z_const(self):
        if "zc" not in self._cache:
            tau = self.tau
            r = theta1(0.5 * tau + 0.5, tau) / theta1(0.5 * tau, tau)
            self._cache["zc"] = complex(self.x1 / r ** 2)
        return self._cache["zc"]

    def z_of_u(self, u):
        """The degree-two elliptic function z(u), with a double pole at 0."""
        u = np.asarray(u, dtype=complex)
        tau = self.tau
        return self._z_const() * (theta1(u + 0.5, tau) / theta1(u, tau)) ** 2

    def w_of_u(self, u):
        u = np.asarray(u, dtype=complex)
        tau = self.tau
        t0, t1 = _theta1_series(u, tau, DEFAULT_TOL, (0, 1))
        s0, s1 = _theta1_series(u + 0.5, tau, DEFAULT_TOL, (0, 1))
        z = self._z_const() * (s0 / t0) ** 2
        return self.scale * z * (s1 / s0 - t1 / t0)

    def _sheet_of(self, z, w):
        w1 = self.w(z, 1)
        branch = np.abs(w1) < 1e-10 * (1.0 + np.abs(z)) ** 1.5
        return np.where(branch | (np.abs(w - w1) <= np.abs(w + w1)), 1, 2)

    def abel_inverse(self, u, tol=1e-8, max_iter=8):
        """(z, sheet) arrays with abel(z, sheet) = u.

        The seed comes from the closed-form theta quotient for z(u); it is
        then polished by Newton steps on the Abel map.
        """
        u = np.atleast_1d(np.asarray(u, dtype=complex))
        lat = self.lattice
        u = lat.reduce(u)
        near0 = lat.distance_to_lattice(u) < 1e-12
        safe = np.where(near0, 0.25 + 0.25j, u)
        z = self.z_of_u(safe)
        w = self.w_of_u(safe)
        # points that sit on the real axis up to rounding are snapped onto it, so
        # that the upper-side convention on the cuts picks the sheet
        snap = np.abs(z.imag) < 1e-12 * (1.0 + np.abs(z))
        z = np.where(snap, z.real + 0j, z)
        sheet = self._sheet_of(z, w)
        for _ in range(max_iter):
            err = lat.nearest_difference(self.abel_unreduced(z, sheet) - u)
            bad = (np.abs(err) > 1e-13) & ~near0
            if not np.any(bad):
                break
            with np.errstate(divide="ignore", invalid="ignore"):
                step = np.where(bad, err / self.du_dz(z, sheet), 0.0)
            z_new = np.where(np.isfinite(step), z - step, z)
            err_new = lat.nearest_difference(self.abel_unreduced(z_new, sheet) - u)
            improve = np.abs(err_new) < np.abs(err)
            z = np.where(improve, z_new, z)
        err = lat.nearest_difference(self.abel_unreduced(z, sheet) - u)
        if np.any((np.abs(err) > tol) & ~near0):
            raise NonConvergenceError(f"abel_inverse residual {np.max(np.abs(err)):.3e}")
        z = np.where(near0, np.inf + 0j, z)
        sheet = np.where(near0, 1, sheet)
        return z, sheet

    def abel_inverse_point(self, u) -> CurvePoint:
        z, s = self.abel_inverse(np.asarray([u]))
        return CurvePoint(complex(z[0]), int(s[0]))

    # -- real ovals ----------------------------------------------------------

    def oval_c1(self, t):
        """Parametrization t in [0,1) -> torus point tau/2 + t of the bounded oval."""
        return self.lattice.reduce(0.5 * self.tau + np.asarray(t, float))

    def oval_c2(self, t):
        return self.lattice.reduce(np.asarray(t, float) + 0j)


# ---------------------------------------------------------------------------
# function-style entry points


def curve_periods(curve: EllipticCurve, n=None):
    """(tau, scale) of the curve."""
    return curve.periods(n)


def abel_map(p: CurvePoint, curve: EllipticCurve) -> TorusPoint:
    return curve.abel_map(p)


def abel_inverse(u, curve: EllipticCurve) -> CurvePoint:
    u = u.u if isinstance(u, TorusPoint) else u
    return curve.abel_inverse_point(u)
