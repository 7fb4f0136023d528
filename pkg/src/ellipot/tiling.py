"""
Periodic lozenge tilings of a hexagon: weights, transition symbols, the
spectral curve, its external field, matrix orthogonal polynomials and the
correlation kernel at desk scale, plus the two-periodic Aztec check.

Conventions: red lozenges carry weight 1.  Blue (square) lozenges at (x, y)
keep a path at height y, yellow ones move it from y to y + 1, so the
transition matrix T_x has w_blue(x, y) on the diagonal and w_yellow(x, y)
on the superdiagonal.
"""
from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # python < 3.11
    import tomli as tomllib

from .elliptic import DegenerateCurveError, EllipticCurve
from .fields import ExternalField, FieldError, Rational, ThetaQuotient

TWO_PI = 2.0 * math.pi


class WeightingError(ValueError):
    pass


class DegreeGapError(ValueError):
    """The monic matrix orthogonal polynomial of some degree does not exist."""


# ---------------------------------------------------------------------------
# weights


@dataclass
class PeriodicWeighting:
    """Weights indexed mod (p, q); tables are p x q, entry [x][y]."""

    p: int
    q: int
    blue: list
    yellow: list

    def __post_init__(self):
        if self.p < 1 or self.q < 1:
            raise WeightingError("periods must be positive")
        for name in ("blue", "yellow"):
            tab = getattr(self, name)
            if len(tab) != self.p or any(len(row) != self.q for row in tab):
                raise WeightingError(f"{name} table must have shape {self.p} x {self.q}")
            conv = [[_as_number(v) for v in row] for row in tab]
            for x, row in enumerate(conv):
                for y, v in enumerate(row):
                    if not v > 0:
                        raise WeightingError(f"{name}[{x}][{y}] = {v} is not positive")
            setattr(self, name, conv)

    def w_blue(self, x, y):
        return self.blue[x % self.p][y % self.q]

    def w_yellow(self, x, y):
        return self.yellow[x % self.p][y % self.q]

    @property
    def exact(self):
        return all(isinstance(v, Fraction) for row in self.blue + self.yellow for v in row)

    @classmethod
    def uniform(cls, p, q):
        one = [[Fraction(1)] * q for _ in range(p)]
        return cls(p, q, one, [r[:] for r in one])

    @classmethod
    def from_dict(cls, d):
        try:
            return cls(int(d["p"]), int(d["q"]), d["blue"], d["yellow"])
        except KeyError as e:
            raise WeightingError(f"missing key {e.args[0]!r}") from None

    @classmethod
    def from_file(cls, path):
        path = Path(path)
        text = path.read_text()
        if path.suffix == ".toml":
            d = tomllib.loads(text)
        else:
            d = json.loads(text)
        return cls.from_dict(d)

    def to_dict(self):
        enc = lambda v: str(v) if isinstance(v, Fraction) else v
        return dict(p=self.p, q=self.q, blue=[[enc(v) for v in r] for r in self.blue],
                    yellow=[[enc(v) for v in r] for r in self.yellow])


def _as_number(v):
    if isinstance(v, Fraction):
        return v
    if isinstance(v, int):
        return Fraction(v)
    if isinstance(v, str):
        try:
            return Fraction(v)
        except ValueError:
            raise WeightingError(f"cannot parse weight {v!r}") from None
    if isinstance(v, float):
        return v
    raise WeightingError(f"weight {v!r} has unsupported type")


@dataclass(frozen=True)
class HexagonDims:
    """A = q N, C = q M, B + C = p L."""

    A: int
    B: int
    C: int
    p: int
    q: int

    def __post_init__(self):
        if min(self.A, self.B, self.C) < 1:
            raise ValueError("hexagon sides must be positive")
        if self.A % self.q or self.C % self.q or (self.B + self.C) % self.p:
            raise ValueError("need A = qN, C = qM and B + C = pL")

    @property
    def N(self):
        return self.A // self.q

    @property
    def M(self):
        return self.C // self.q

    @property
    def L(self):
        return (self.B + self.C) // self.p

    @classmethod
    def from_NML(cls, N, M, L, p, q):
        return cls(q * N, p * L - q * M, q * M, p, q)


# ---------------------------------------------------------------------------
# polynomial helpers (coefficient lists, lowest degree first)


def _padd(a, b):
    n = max(len(a), len(b))
    return [(a[k] if k < len(a) else 0) + (b[k] if k < len(b) else 0) for k in range(n)]


def _pmul(a, b):
    out = [0] * (len(a) + len(b) - 1)
    for i, x in enumerate(a):
        for j, y in enumerate(b):
            out[i + j] += x * y
    return out


def _pscale(a, c):
    return [c * x for x in a]


def _ptrim(a):
    a = list(a)
    while len(a) > 1 and a[-1] == 0:
        a.pop()
    return a


class MatrixPolynomial:
    """Sum_k C_k z^k with q x q coefficient matrices."""

    def __init__(self, coeffs, monic=False):
        self.coeffs = [np.asarray(c) for c in coeffs]
        q = self.coeffs[0].shape[0]
        if monic and not np.allclose(self.coeffs[-1].astype(complex), np.eye(q)):
            raise ValueError("monic polynomial must have identity leading coefficient")
        self.monic = monic

    @property
    def degree(self):
        return len(self.coeffs) - 1

    @property
    def q(self):
        return self.coeffs[0].shape[0]

    def __call__(self, z):
        z = np.asarray(z, complex)
        out = np.zeros(z.shape + (self.q, self.q), complex)
        for k in range(self.degree, -1, -1):
            out = out * z[..., None, None] + self.coeffs[k].astype(complex)
        return out

    def __mul__(self, other):
        out = [np.zeros_like(self.coeffs[0] @ other.coeffs[0]) for _ in range(self.degree + other.degree + 1)]
        for i, a in enumerate(self.coeffs):
            for j, b in enumerate(other.coeffs):
                out[i + j] = out[i + j] + a @ b
        return MatrixPolynomial(out)

    def power(self, n):
        res = MatrixPolynomial([np.eye(self.q, dtype=self.coeffs[0].dtype)])
        for _ in range(n):
            res = res * self
        return res

    def trace(self):
        return [sum(c[i, i] for i in range(self.q)) for c in self.coeffs]

    def det2(self):
        if self.q != 2:
            raise ValueError("det2 needs q = 2")
        a = [c[0, 0] for c in self.coeffs]
        b = [c[0, 1] for c in self.coeffs]
        cc = [c[1, 0] for c in self.coeffs]
        d = [c[1, 1] for c in self.coeffs]
        return _padd(_pmul(a, d), _pscale(_pmul(b, cc), -1))


# ---------------------------------------------------------------------------
# symbols


def symbol_coeffs(weighting: PeriodicWeighting, x) -> MatrixPolynomial:
    """A_x(z) = (T_x(y, y'))_{y,y'<q} + z (T_x(y, y' + q))_{y,y'<q}."""
    q = weighting.q
    dtype = object if weighting.exact else float
    c0 = np.zeros((q, q), dtype=dtype)
    c1 = np.zeros((q, q), dtype=dtype)
    if dtype is object:
        c0[:] = Fraction(0)
        c1[:] = Fraction(0)
    for y in range(q):
        c0[y, y] = weighting.w_blue(x, y)
        if y + 1 < q:
            c0[y, y + 1] = weighting.w_yellow(x, y)
        else:
            c1[y, 0] = weighting.w_yellow(x, y)
    return MatrixPolynomial([c0, c1])


def symbol_Ax(weighting: PeriodicWeighting, x, z):
    """Per-column symbol evaluated at z (q x q complex array)."""
    return symbol_coeffs(weighting, x)(z)


def full_symbol_coeffs(weighting: PeriodicWeighting) -> MatrixPolynomial:
    out = symbol_coeffs(weighting, 0)
    for x in range(1, weighting.p):
        out = out * symbol_coeffs(weighting, x)
    return out


def full_symbol(weighting: PeriodicWeighting, z):
    """A(z) = A_0(z) A_1(z) ... A_{p-1}(z)."""
    return full_symbol_coeffs(weighting)(z)


# ---------------------------------------------------------------------------
# spectral curve


@dataclass
class SpectralCurve:
    """det(lambda I - A(z)) = sum_k c_k(z) lambda^k, with c_q = 1.

    For p = 3, q = 2 the discriminant tr(A)^2 - 4 det(A) is a cubic
    4 Y (z - x1)(z - x2)(z - x3) with Y = prod y0 y1 > 0, and the curve
    is w^2 = (z - x1)(z - x2)(z - x3).
    """

    weighting: PeriodicWeighting
    char_poly: list
    trace: list | None = None
    det: list | None = None
    discriminant: list | None = None
    branch_points: tuple | None = None
    leading: object = None
    genus_drop: bool = False
    notes: list = field(default_factory=list)

    def to_dict(self):
        enc = lambda v: str(v) if isinstance(v, (Fraction, int)) else float(v)
        d = dict(
            p=self.weighting.p,
            q=self.weighting.q,
            char_poly=[[enc(c) for c in co] for co in self.char_poly],
            genus_drop=self.genus_drop,
            notes=list(self.notes),
        )
        if self.trace is not None:
            d["trace"] = [enc(c) for c in self.trace]
            d["det"] = [enc(c) for c in self.det]
            d["discriminant"] = [enc(c) for c in self.discriminant]
        if self.branch_points is not None:
            d["branch_points"] = [float(v) for v in self.branch_points]
        return d


def _cubic_discriminant(c):
    d, cc, b, a = c  # a z^3 + b z^2 + cc z + d
    return b * b * cc * cc - 4 * a * cc ** 3 - 4 * b ** 3 * d - 27 * a * a * d * d + 18 * a * b * cc * d


def spectral_curve(weighting: PeriodicWeighting) -> SpectralCurve:
    """Characteristic polynomial of the full symbol; Weierstrass data for p=3, q=2."""
    A = full_symbol_coeffs(weighting)
    q = weighting.q
    if q == 1:
        cp = [[-c[0, 0] for c in A.coeffs], [1]]
        return SpectralCurve(weighting, cp)
    if q != 2:
        # Faddeev-LeVerrier on polynomial entries is not needed here; report
        # coefficients at sample points only for q > 2
        raise NotImplementedError("characteristic polynomial implemented for q <= 2")
    tr = _ptrim(A.trace())
    det = _ptrim(A.det2())
    cp = [det, _pscale(tr, -1), [1]]
    disc = _ptrim(_padd(_pmul(tr, tr), _pscale(det, -4)))
    sc = SpectralCurve(weighting, cp, tr, det, disc)
    if weighting.p != 3:
        sc.notes.append("Weierstrass reduction only for p = 3, q = 2")
        return sc
    if len(disc) != 4:
        sc.genus_drop = True
        sc.notes.append(f"discriminant has degree {len(disc) - 1}, not 3")
        return sc
    Y = disc[3] / 4
    sc.leading = Y
    if _cubic_discriminant(disc) == 0:
        sc.genus_drop = True
        sc.notes.append("branch points collide: the curve has genus zero")
    roots = np.roots([float(c) for c in disc[::-1]])
    if np.max(np.abs(roots.imag)) > 1e-8 * max(1.0, np.max(np.abs(roots))):
        sc.notes.append("non-real branch points")
        sc.genus_drop = True
        return sc
    r = np.sort(roots.real)
    # polish on the cubic
    f = lambda z: sum(float(c) * z ** k for k, c in enumerate(disc))
    df = lambda z: sum(k * float(c) * z ** (k - 1) for k, c in enumerate(disc) if k)
    for k in range(3):
        for _ in range(3):
            d = df(r[k])
            if d != 0:
                r[k] -= f(r[k]) / d
    if disc[0] == 0:
        r[np.argmin(np.abs(r))] = 0.0
    if weighting.exact:
        # snap onto exact rational roots when there are any
        for k in range(3):
            fr = Fraction(float(r[k])).limit_denominator(10 ** 6)
            if sum(c * fr ** j for j, c in enumerate(disc)) == 0:
                r[k] = float(fr)
    sc.branch_points = tuple(float(v) for v in r)
    if r[2] > 1e-12:
        sc.notes.append("largest branch point is positive")
    return sc


def genus_one_curve(sc: SpectralCurve, n_quad=64) -> EllipticCurve:
    """The curve w^2 = z (z - x1)(z - x2) when x3 = 0."""
    if sc.genus_drop or sc.branch_points is None:
        raise DegenerateCurveError("spectral curve is degenerate")
    x1, x2, x3 = sc.branch_points
    if x3 != 0.0:
        raise DegenerateCurveError("x3 must vanish to use the curve w^2 = z (z - x1)(z - x2)")
    return EllipticCurve(x1, x2, n_quad=n_quad)


# ---------------------------------------------------------------------------
# the eigenvalue lambda as a function on the torus


class EigenvalueFunction:
    """lambda = (tr A(z) + 2 sqrt(Y) w) / 2 in the surface chart u.

    On sheet 1 (w > 0 for z > 0) this is the larger eigenvalue.  Zeros sit
    at the roots of det A on the sheet where the other eigenvalue is
    nonzero; there is a pole of order p at infinity.
    """

    def __init__(self, sc: SpectralCurve, curve: EllipticCurve, tag="lambda"):
        self.sc = sc
        self.curve = curve
        self.tr = np.array([float(c) for c in sc.trace])
        self.det = np.array([float(c) for c in sc.det])
        self.sqY = math.sqrt(float(sc.leading))
        self.tag = tag
        self._divisor = None

    def _zw(self, s):
        s = np.asarray(s, complex)
        z = self.curve.z_of_u(s)
        w = self.curve.w_of_u(s)
        return z, w

    def value_zw(self, z, w):
        return 0.5 * (np.polyval(self.tr[::-1], z) + 2.0 * self.sqY * w)

    def value(self, s):
        z, w = self._zw(s)
        return self.value_zw(z, w)

    def log_abs(self, s):
        return np.log(np.abs(self.value(s)))

    def dlog(self, s):
        z, w = self._zw(s)
        c = self.curve
        P = np.polynomial.Polynomial([0.0, c.x1 * c.x2, -(c.x1 + c.x2), 1.0])
        dtr = np.polynomial.Polynomial(self.tr).deriv()
        # dz/du = 2 w / scale and d(w)/du = P'(z) / scale
        dlam = 0.5 * (dtr(z) * 2.0 * w + 2.0 * self.sqY * P.deriv()(z)) / c.scale
        return dlam / self.value_zw(z, w)

    def divisor(self):
        if self._divisor is not None:
            return self._divisor
        c = self.curve
        W = self.sc.weighting
        roots = []
        for x in range(W.p):
            d = _ptrim(symbol_coeffs(W, x).det2())
            if len(d) == 2:
                roots.append(float(-d[0] / d[1]))
        div = []
        for r in roots:
            tr = np.polyval(self.tr[::-1], r)
            sheet = 2 if tr > 0 else 1
            u = complex(c.abel(r, sheet))
            for item in div:
                if c.lattice.distance(item[0], u) < 1e-8:
                    item[1] += 1
                    break
            else:
                div.append([u, 1])
        div.append([0j, -self._pole_order()])
        self._divisor = [(complex(u), int(k)) for u, k in div]
        return self._divisor

    def _pole_order(self):
        # lambda ~ z^{deg(det)/2} at the branched point at infinity and z has
        # a double pole in u there
        return len(self.det) - 1


def tiling_field(curve: EllipticCurve, lam: EigenvalueFunction, b, c) -> ExternalField:
    """phi = -(b/2) log|lambda| + ((1 + c)/2) log|z|, requiring 3b > 2c."""
    b = float(b)
    c = float(c)
    if not 3 * b > 2 * c:
        raise FieldError("need 3b > 2c")
    from .fields import curve_z_function

    zf = curve_z_function(curve)
    return ExternalField([(-0.5 * b, lam), (0.5 * (1.0 + c), zf)], sigma_invariant=True)


def hexagon_preset_weighting() -> PeriodicWeighting:
    """3 x 2 weights with x3 = 0 and a double zero of lambda.

    prod blue(., 0) = prod blue(., 1) puts a branch point at z = 0, and
    columns 0 and 1 share the root z = 1 of det A_x.  The curve has
    branch points -4, -3/2, 0.
    """
    blue = [[1, 1], [1, 1], [1, 1]]
    yellow = [[1, 1], [1, 1], [1, 2]]
    return PeriodicWeighting(3, 2, blue, yellow)


# ---------------------------------------------------------------------------
# matrix orthogonal polynomials
#
# The weight is W(z) = A(z)^L / z^(M+N) on a circle around 0.  All
# integrands below are Laurent polynomials, so the trapezoid rule on any
# circle |z| = radius is exact once the number of nodes exceeds the spread
# of exponents; ``_nodes`` picks such a count and the certificate doubles it.


def _circle(n, radius=1.0):
    return radius * np.exp(2j * np.pi * np.arange(n) / n)


def _power_values(weighting, z, L):
    """A(z)^L at the points z, shape (len(z), q, q)."""
    Az = full_symbol(weighting, z)
    out = np.broadcast_to(np.eye(weighting.q, dtype=complex), Az.shape).copy()
    for _ in range(L):
        out = out @ Az
    return out


def _nodes(weighting, L, M, N, extra=0):
    span = weighting.p * L + M + N + 2 * N + extra + 2
    return 2 * span + 16


def moments(weighting: PeriodicWeighting, L, M, N, count, n_nodes=None, radius=1.0):
    """M_k = (1/2 pi i) int z^k A(z)^L / z^(M+N) dz for k < count, by the trapezoid rule."""
    n = n_nodes or _nodes(weighting, L, M, N, count)
    z = _circle(n, radius)
    AL = _power_values(weighting, z, L)
    out = []
    for k in range(count):
        out.append(np.tensordot(z ** (k - M - N + 1), AL, axes=(0, 0)) / n)
    return out


def moment_certificate(weighting, L, M, N, count, radius=1.0) -> float:
    """Largest change of any moment when the number of nodes is doubled."""
    n = _nodes(weighting, L, M, N, count)
    a = moments(weighting, L, M, N, count, n, radius)
    b = moments(weighting, L, M, N, count, 2 * n, radius)
    return float(max(np.max(np.abs(x - y)) for x, y in zip(a, b)))


def exact_moments(weighting: PeriodicWeighting, L, M, N, count):
    """Moments as coefficients of A^L: M_k = [z^(M+N-1-k)] A(z)^L."""
    AL = full_symbol_coeffs(weighting).power(L)
    q = weighting.q
    out = []
    for k in range(count):
        j = M + N - 1 - k
        if 0 <= j <= AL.degree:
            out.append(np.array(AL.coeffs[j], dtype=object if weighting.exact else float))
        else:
            out.append(np.zeros((q, q)))
    return out


def _block_hankel(mom, n, shift=0):
    q = mom[0].shape[0]
    H = np.zeros((n * q, n * q), complex)
    for i in range(n):
        for k in range(n):
            H[i * q:(i + 1) * q, k * q:(k + 1) * q] = mom[i + k + shift]
    return H


def _check_regular(H, rel=1e-10):
    if H.size == 0:
        return
    s = np.linalg.svd(H, compute_uv=False)
    if s[-1] <= rel * s[0]:
        raise DegreeGapError(f"block moment matrix is singular (sigma_min/sigma_max = {s[-1] / s[0]:.2e})")


def mvop(weighting: PeriodicWeighting, L, M, N, n, radius=1.0, transpose=False, rel=1e-10):
    """Monic P_n with (1/2 pi i) int P_n(z) W(z) z^k dz = H_n delta_{nk}, k <= n.

    With ``transpose`` the weight W^T is used instead.  Raises
    DegreeGapError when the degree does not exist (singular block moment
    matrix or singular H_n).
    """
    mom = moments(weighting, L, M, N, 2 * n + 1, radius=radius)
    if transpose:
        mom = [m.T for m in mom]
    q = weighting.q
    if n == 0:
        P = MatrixPolynomial([np.eye(q, dtype=complex)], monic=True)
        H = mom[0]
    else:
        Hk = _block_hankel(mom, n)
        _check_regular(Hk, rel)
        rhs = -np.hstack([mom[n + k] for k in range(n)])
        # c Hk = rhs with c = [c_0 ... c_{n-1}] (q x nq)
        c = np.linalg.solve(Hk.T, rhs.T).T
        coeffs = [c[:, i * q:(i + 1) * q] for i in range(n)] + [np.eye(q, dtype=complex)]
        P = MatrixPolynomial(coeffs, monic=True)
        H = sum(coeffs[i] @ mom[i + n] for i in range(n + 1))
    s = np.linalg.svd(H, compute_uv=False)
    if s[-1] <= rel * max(1.0, s[0]):
        raise DegreeGapError(f"H_{n} is singular")
    return P, H


def orthogonality_residual(weighting, L, M, N, P: MatrixPolynomial, H, radius=1.0, relative=True) -> float:
    """max_k || (1/2 pi i) int P(z) W(z) z^k dz - H delta_{nk} || for k <= n.

    With ``relative`` the value is divided by sum_i |P_i| max_k |M_k|, the
    size of the terms that cancel.
    """
    n = P.degree
    nn = _nodes(weighting, L, M, N, 2 * n + 2)
    z = _circle(nn, radius)
    vals = P(z) @ _power_values(weighting, z, L)
    worst = 0.0
    for k in range(n + 1):
        I = np.tensordot(z ** (k - M - N + 1), vals, axes=(0, 0)) / nn
        target = H if k == n else 0.0
        worst = max(worst, float(np.max(np.abs(I - target))))
    if relative:
        mom = moments(weighting, L, M, N, 2 * n + 1, radius=radius)
        scale = sum(float(np.max(np.abs(c))) for c in P.coeffs) * max(float(np.max(np.abs(m))) for m in mom)
        worst /= max(scale, 1e-300)
    return worst


def radius_sweep(weighting, L, M, N, count, radii=(0.25, 0.5, 1.0, 2.0, 4.0)) -> dict:
    """Node-doubling certificate of the moments on several circles.

    The integrands are Laurent polynomials with their only finite
    singularity at 0, so every circle gives the same moments up to
    rounding; the sweep reports the rounding level and the best radius.
    """
    cert = {float(r): moment_certificate(weighting, L, M, N, count, r) for r in radii}
    best = min(cert, key=cert.get)
    return dict(certificates=cert, best=best)


# ---------------------------------------------------------------------------
# reproducing kernel


class ReproducingKernel:
    """R_N(w, z) = sum_{j,k < N} w^j C_jk z^k with q x q blocks C_jk.

    (1/2 pi i) int P(w) W(w) R_N(w, z) dw = P(z) for matrix polynomials
    of degree < N.
    """

    def __init__(self, blocks, route):
        self.blocks = np.asarray(blocks)  # shape (N, N, q, q)
        self.route = route

    @property
    def N(self):
        return self.blocks.shape[0]

    def __call__(self, w, z):
        w = np.asarray(w, complex)
        z = np.asarray(z, complex)
        Wp = w[..., None] ** np.arange(self.N)
        Zp = z[..., None] ** np.arange(self.N)
        return np.einsum("...j,jkab,...k->...ab", Wp, self.blocks, Zp)

    def grid(self, w, z):
        """R_N(w_a, z_b) for all pairs, shape (len(w), len(z), q, q)."""
        Wp = np.asarray(w, complex)[:, None] ** np.arange(self.N)
        Zp = np.asarray(z, complex)[:, None] ** np.arange(self.N)
        return np.einsum("aj,jkxy,bk->abxy", Wp, self.blocks, Zp)


def reproducing_kernel(weighting: PeriodicWeighting, L, M, N, route="moments", radius=1.0) -> ReproducingKernel:
    """Coefficient form of R_N.

    "moments": inverse of the block Hankel matrix (M_{j+k})_{j,k<N}; needs
    only that matrix to be regular.  "sum": sum_n Q_n(w) H_n^{-1} P_n(z)
    over n < N, where P_n are the MVOP of W and Q_n = Phat_n^T with Phat_n
    the MVOP of W^T; raises DegreeGapError when some degree is missing.
    """
    q = weighting.q
    if route == "moments":
        mom = moments(weighting, L, M, N, 2 * N - 1, radius=radius)
        Hk = _block_hankel(mom, N)
        _check_regular(Hk)
        C = np.linalg.inv(Hk)
        blocks = C.reshape(N, q, N, q).transpose(0, 2, 1, 3)
        return ReproducingKernel(blocks, route)
    if route == "sum":
        blocks = np.zeros((N, N, q, q), complex)
        for n in range(N):
            P, H = mvop(weighting, L, M, N, n, radius)
            Ph, _ = mvop(weighting, L, M, N, n, radius, transpose=True)
            Hinv = np.linalg.inv(H)
            for j, a in enumerate(Ph.coeffs):
                for k, b in enumerate(P.coeffs):
                    blocks[j, k] += np.asarray(a, complex).T @ Hinv @ np.asarray(b, complex)
        return ReproducingKernel(blocks, route)
    raise ValueError(f"unknown route {route!r}")


def _cauchy_row(weighting, L, M, N, P, z, n_nodes, radius):
    """(1/2 pi i) int P(s) A(s)^L s^-(M+N) ds / (s - z) on |s| = radius."""
    s = _circle(n_nodes, radius)
    f = P(s) @ _power_values(weighting, s, L) * (s ** (-(M + N)))[:, None, None]
    z = np.atleast_1d(np.asarray(z, complex))
    ker = (s[None, :] / (s[None, :] - z[:, None])) / n_nodes
    return np.tensordot(ker, f, axes=(1, 0))


def rh_Y(weighting, L, M, N, z, n_nodes=256, radius=None):
    """The 2q x 2q matrix Y(z) built from P_N, P_{N-1} and H_{N-1}.

    The circle for the Cauchy transforms is taken outside all the points,
    so Y is the boundary value from the interior.
    """
    z = np.atleast_1d(np.asarray(z, complex))
    if radius is None:
        radius = 2.0 * max(1.0, float(np.max(np.abs(z))))
    PN, _ = mvop(weighting, L, M, N, N)
    PN1, HN1 = mvop(weighting, L, M, N, N - 1)
    Hinv = np.linalg.inv(HN1)
    q = weighting.q
    Y = np.zeros((len(z), 2 * q, 2 * q), complex)
    Y[:, :q, :q] = PN(z)
    Y[:, :q, q:] = _cauchy_row(weighting, L, M, N, PN, z, n_nodes, radius)
    Y[:, q:, :q] = -Hinv @ PN1(z)
    Y[:, q:, q:] = -Hinv @ _cauchy_row(weighting, L, M, N, PN1, z, n_nodes, radius)
    return Y


def christoffel_darboux(weighting, L, M, N, w, z, n_nodes=256):
    """R_N(w, z) = (0 I) Y(w)^{-1} Y(z) (I 0)^T / (z - w), for w != z.

    With Y normalized as in :func:`rh_Y` the prefactor 1/(z - w) is the one
    compatible with the reproducing property (for N = 1 the product of the
    Y factors is (z - w) H_0^{-1}).
    """
    w = np.atleast_1d(np.asarray(w, complex))
    z = np.atleast_1d(np.asarray(z, complex))
    if np.any(np.abs(w - z) < 1e-12):
        raise ValueError("the Christoffel-Darboux form needs w != z")
    radius = 2.0 * max(1.0, float(np.max(np.abs(np.concatenate([w, z])))))
    Yw = rh_Y(weighting, L, M, N, w, n_nodes, radius)
    Yz = rh_Y(weighting, L, M, N, z, n_nodes, radius)
    q = weighting.q
    out = np.linalg.solve(Yw, Yz[:, :, :q])[:, q:, :]
    return out / (z - w)[:, None, None]


def reproducing_residual(weighting, L, M, N, R: ReproducingKernel, polys, z, radius=1.0) -> float:
    """max || (1/2 pi i) int P(w) W(w) R_N(w, z) dw - P(z) || over polys and points z."""
    n = _nodes(weighting, L, M, N, 2 * N + 2)
    w = _circle(n, radius)
    Ww = _power_values(weighting, w, L) * (w ** (-(M + N)) * w / n)[:, None, None]
    Rg = R.grid(w, np.atleast_1d(z))
    worst = 0.0
    for P in polys:
        left = np.einsum("axy,abyz->bxz", P(w) @ Ww, Rg)
        worst = max(worst, float(np.max(np.abs(left - P(np.atleast_1d(z))))))
    return worst


# ---------------------------------------------------------------------------
# correlation kernel


def correlation_kernel(weighting: PeriodicWeighting, L, M, N, pt, pt2, R: ReproducingKernel | None = None,
                       n_nodes=None, radius=1.0):
    """q x q matrix whose (j, j') entry is K((p x, q y + j), (p x', q y' + j')).

    ``pt`` = (x, y) and ``pt2`` = (x', y') are block coordinates: x counts
    periods horizontally and y blocks of q levels.  The single and double
    contour integrals are evaluated by the trapezoid rule on |z| = radius.
    """
    x, y = pt
    xp, yp = pt2
    if not (0 <= x <= L and 0 <= xp <= L):
        raise ValueError("columns must lie in 0..L")
    if R is None:
        R = reproducing_kernel(weighting, L, M, N)
    n = n_nodes or _nodes(weighting, L, M, N, 2 * N + abs(y) + abs(yp) + M + N)
    z = _circle(n, radius)
    out = np.zeros((weighting.q, weighting.q), complex)
    if x > xp:
        Ad = _power_values(weighting, z, x - xp)
        out -= np.tensordot(z ** (yp - y), Ad, axes=(0, 0)) / n
    Aw = _power_values(weighting, z, L - xp) * (z ** (yp - M - N + 1) / n)[:, None, None]
    Az = _power_values(weighting, z, x) * (z ** (-y) / n)[:, None, None]
    Rg = R.grid(z, z)
    out += np.einsum("axy,abyz,bzw->xw", Aw, Rg, Az)
    return _transpose_entries(out)


def _transpose_entries(K):
    # entry (j, j') of the matrix integral belongs to the levels (q y' + j, q y + j')
    # of the transition from x' to x; the particle kernel reads it transposed
    return K.T


# ---------------------------------------------------------------------------
# exhaustive enumeration (non-intersecting paths)


@dataclass
class Enumeration:
    """All tilings of a small hexagon as families of non-intersecting paths.

    ``configs[t]`` lists the path heights on columns 0..B+C of tiling t and
    ``weights[t]`` its weight (exact when the weighting is).
    """

    dims: HexagonDims
    configs: list
    weights: list

    @property
    def count(self):
        return len(self.configs)

    @property
    def Z(self):
        return sum(self.weights, Fraction(0) if isinstance(self.weights[0], Fraction) else 0.0)

    def occupation(self, sites):
        """0/1 matrix: tiling t has a path through site (column, height) s."""
        idx = {s: k for k, s in enumerate(sites)}
        O = np.zeros((self.count, len(sites)))
        for t, cfg in enumerate(self.configs):
            for col, heights in enumerate(cfg):
                for h in heights:
                    k = idx.get((col, h))
                    if k is not None:
                        O[t, k] = 1.0
        return O

    def correlations(self, sites):
        """One-point densities and the matrix of two-point densities at ``sites``."""
        O = self.occupation(sites)
        w = np.array([float(v) for v in self.weights])
        w = w / w.sum()
        rho1 = w @ O
        rho2 = O.T @ (w[:, None] * O)
        return rho1, rho2


def enumerate_tilings(weighting: PeriodicWeighting, dims: HexagonDims, limit=10 ** 6) -> Enumeration:
    """A = qN paths from heights 0..A-1 on column 0 to C..C+A-1 on column B+C.

    A path through (x, y) takes a blue lozenge (stays at y) or a yellow one
    (moves to y + 1); red lozenges fill the rest.
    """
    A, B, C = dims.A, dims.B, dims.C
    width = B + C
    target = tuple(range(C, C + A))
    configs, weights = [], []
    one = Fraction(1) if weighting.exact else 1.0

    def rec(col, heights, path, wt):
        if len(configs) > limit:
            raise ValueError("too many tilings for exhaustive enumeration")
        if col == width:
            if heights == target:
                configs.append(path)
                weights.append(wt)
            return
        left = width - col
        for moves in itertools.product((0, 1), repeat=A):
            nxt = tuple(h + m for h, m in zip(heights, moves))
            if any(nxt[i] >= nxt[i + 1] for i in range(A - 1)):
                continue
            if any(t - h > left - 1 or h > t for h, t in zip(nxt, target)):
                continue
            f = wt
            for h, m in zip(heights, moves):
                f = f * (weighting.w_yellow(col, h) if m else weighting.w_blue(col, h))
            rec(col + 1, nxt, path + (nxt,), f)

    start = tuple(range(A))
    rec(0, start, (start,), one)
    return Enumeration(dims, configs, weights)


def _transfer(weighting, col, size):
    T = [[Fraction(0) if weighting.exact else 0.0 for _ in range(size)] for _ in range(size)]
    for y in range(size):
        T[y][y] = weighting.w_blue(col, y)
        if y + 1 < size:
            T[y][y + 1] = weighting.w_yellow(col, y)
    return T


def _matmul(a, b):
    return [[sum(a[i][k] * b[k][j] for k in range(len(b))) for j in range(len(b[0]))] for i in range(len(a))]


def _det(m):
    m = [row[:] for row in m]
    n = len(m)
    d = Fraction(1) if isinstance(m[0][0], Fraction) else 1.0
    for i in range(n):
        piv = next((r for r in range(i, n) if m[r][i] != 0), None)
        if piv is None:
            return 0 * d
        if piv != i:
            m[i], m[piv] = m[piv], m[i]
            d = -d
        d = d * m[i][i]
        for r in range(i + 1, n):
            f = m[r][i] / m[i][i]
            for c in range(i, n):
                m[r][c] = m[r][c] - f * m[i][c]
    return d


def transfer_partition_function(weighting: PeriodicWeighting, dims: HexagonDims):
    """Z = det of the path-count matrix (T_0 ... T_{B+C-1})(i, C + j)."""
    A, B, C = dims.A, dims.B, dims.C
    size = A + C
    T = _transfer(weighting, 0, size)
    for col in range(1, B + C):
        T = _matmul(T, _transfer(weighting, col, size))
    return _det([[T[i][C + j] for j in range(A)] for i in range(A)])


def kernel_sites(weighting: PeriodicWeighting, dims: HexagonDims):
    """Sites (p x, level) on the period columns x = 0..L, all levels 0..A+C-1."""
    return [(weighting.p * x, h) for x in range(dims.L + 1) for h in range(dims.A + dims.C)]


def kernel_matrix(weighting: PeriodicWeighting, dims: HexagonDims, sites, R=None):
    """K(s, t) for all pairs of sites on period columns."""
    p, q = weighting.p, weighting.q
    N, M, L = dims.N, dims.M, dims.L
    if R is None:
        R = reproducing_kernel(weighting, L, M, N)
    K = np.zeros((len(sites), len(sites)), complex)
    cache = {}
    for a, (xa, ha) in enumerate(sites):
        for b, (xb, hb) in enumerate(sites):
            key = (xa // p, ha // q, xb // p, hb // q)
            if key not in cache:
                cache[key] = correlation_kernel(weighting, L, M, N, key[:2], key[2:], R)
            K[a, b] = cache[key][ha % q, hb % q]
    return K


def enumeration_check(weighting: PeriodicWeighting, dims: HexagonDims, R=None) -> dict:
    """Kernel one- and two-point functions against exhaustive enumeration."""
    en = enumerate_tilings(weighting, dims)
    Z_lgv = transfer_partition_function(weighting, dims)
    sites = kernel_sites(weighting, dims)
    rho1, rho2 = en.correlations(sites)
    K = kernel_matrix(weighting, dims, sites, R)
    d = np.real_if_close(np.diag(K))
    k1 = np.diag(K)
    k2 = np.outer(k1, k1) - K * K.T
    off = ~np.eye(len(sites), dtype=bool)
    return dict(
        tilings=en.count,
        Z=str(en.Z) if isinstance(en.Z, Fraction) else float(en.Z),
        Z_transfer=str(Z_lgv) if isinstance(Z_lgv, Fraction) else float(Z_lgv),
        Z_agree=bool(abs(float(en.Z) - float(Z_lgv)) <= 1e-12 * abs(float(Z_lgv))),
        one_point_error=float(np.max(np.abs(k1 - rho1))),
        two_point_error=float(np.max(np.abs(k2 - rho2)[off])),
        density_range=[float(np.min(np.real(d))), float(np.max(np.real(d)))],
        sites=len(sites),
    )


# ---------------------------------------------------------------------------
# two-periodic Aztec diamond
#
# On w^2 = z (z + alpha^2)(z + alpha^-2) the function lambda has a double
# pole at p1 = (1, sheet 1) and a double zero at p2 = (1, sheet 2), so
# G(p, p1) = log|lambda|/4 - log|z - 1|/2 + const.  The uniform measure on
# |z - 1| = r (sheet 1) is the balayage of the point mass at p1.


@dataclass
class AztecSetup:
    alpha: float
    curve: EllipticCurve
    backend: object
    lam: ThetaQuotient
    field: ExternalField
    p1: complex
    p2: complex

    def explicit_green(self, u):
        """log|lambda|/4 - log|z - 1|/2 at surface points u."""
        u = np.asarray(u, complex)
        return 0.25 * self.lam.log_abs(u) - 0.5 * np.log(np.abs(self.curve.z_of_u(u) - 1.0))

    def circle(self, r):
        from .energy import Component, Contour

        return Contour([Component.circle(1.0, r, chart="z1")], self.backend)


def aztec_setup(alpha) -> AztecSetup:
    from .kernels import CurveBackend

    alpha = float(alpha)
    if not alpha > 1:
        raise ValueError("alpha must exceed 1")
    curve = EllipticCurve(-alpha ** 2, -alpha ** -2)
    be = CurveBackend(curve)
    u1 = complex(curve.abel(1.0, 1))
    u2 = complex(curve.abel(1.0, 2))
    lam = ThetaQuotient(curve.tau, zeros=[u2, u2], poles=[u1, u1], tag="lambda")
    fld = ExternalField([(-0.5, lam)], sigma_invariant=True)
    return AztecSetup(alpha, curve, be, lam, fld, u1, u2)


def _exterior_points(setup: AztecSetup, r, count=20, seed=0):
    """Half on sheet 1 outside |z - 1| = r, half on sheet 2."""
    rng = np.random.default_rng(seed)
    k = count // 2
    ang = rng.uniform(0, TWO_PI, count)
    rad = rng.uniform(r + 0.15, r + 1.5, count)
    z = 1.0 + rad * np.exp(1j * ang)
    # keep clear of the branch points and the cuts
    z = np.where(np.abs(z.imag) < 0.05, z + 0.1j, z)
    sheets = np.array([1] * k + [2] * (count - k))
    return setup.curve.abel(z, sheets), z, sheets


def aztec_verify(alpha, r, n=200, h=0.05, seed=0) -> dict:
    """Numerical checks of the explicit Green's function and the circle F_r.

    (i) log|lambda|/4 - log|z - 1|/2 is harmonic (mean value over circles of
    radius ``h`` in the surface chart), has log coefficients -1 at p1 and +1
    at the point at infinity, and differs from the bipolar Green's function
    G(., p1) by a constant.  (ii) the uniform measure on F_r has potential
    G(., p1) at exterior points of both sheets.  (iii) F_r carries the
    equilibrium measure in the field -log|lambda|/2 and has the S-property.
    """
    from .energy import equilibrium_measure, s_property_check, uniform_measure, variational_check

    r = float(r)
    if not 0 < r <= 1:
        raise ValueError("need 0 < r <= 1")
    st = aztec_setup(alpha)
    be, lat = st.backend, st.backend.lattice
    rng = np.random.default_rng(seed)

    # (i) harmonicity away from p1 and the sink
    pts = []
    while len(pts) < 12:
        u = rng.uniform(0, 1) + 1j * rng.uniform(0, lat.tau.imag)
        if min(lat.distance(u, st.p1), lat.distance(u, 0j)) > 4 * h:
            pts.append(u)
    pts = np.array(pts)
    ring = h * np.exp(1j * TWO_PI * np.arange(64) / 64)
    H = st.explicit_green(pts)
    means = st.explicit_green(pts[:, None] + ring[None, :]).mean(axis=1)
    harmonic = float(np.max(np.abs(means - H)))

    def log_coef(center):
        eps = np.array([1e-3, 1e-4])
        vals = [np.mean(st.explicit_green(center + e * np.exp(1j * TWO_PI * np.arange(16) / 16))) for e in eps]
        return float((vals[0] - vals[1]) / math.log(eps[0] / eps[1]))

    coef_p1 = log_coef(st.p1)
    coef_inf = log_coef(0j)
    diff = st.explicit_green(pts) - be.green(pts, np.full(pts.shape, st.p1))
    green_const = float(np.mean(diff))
    green_spread = float(np.max(np.abs(diff - green_const)))

    # (ii) balayage
    contour = st.circle(r)
    mu_r = uniform_measure(contour, n)
    ext, _, sheets = _exterior_points(st, r, seed=seed)
    pot = mu_r.disc.potential_off(mu_r.density, ext)
    target = be.green(ext, np.full(ext.shape, st.p1))
    balayage = float(np.max(np.abs(pot - target)))

    # (iii) equilibrium measure in the field and the S-property
    eq = equilibrium_measure(contour, st.field, n)
    mu = eq.measure
    density_error = float(np.max(np.abs(mu.density - mu_r.density)) / np.max(mu_r.density))
    var = variational_check(mu, st.field)
    sp = s_property_check(mu, st.field, method="pv")
    return dict(alpha=st.alpha, r=r, tau=[lat.tau.real, lat.tau.imag],
                harmonicity=harmonic, log_coefficient_p1=coef_p1, log_coefficient_inf=coef_inf,
                green_constant=green_const, green_spread=green_spread,
                balayage=balayage, balayage_points=int(len(ext)), second_sheet_points=int(np.sum(sheets == 2)),
                density_error=density_error, variational=var.sup_on_support,
                s_property_real=sp.real_residual, s_property_imag=sp.imag_residual)
