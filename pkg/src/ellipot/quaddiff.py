"""
Quadratic differentials attached to critical measures.

On the symmetric genus-one curve the differential is

    omega(u) = (dV/2)^2 - int (C(u,q) dV(u) - C21(u,q;a) dV(q)) dmu(q)

with a on the bounded real oval C1 chosen so that int C(a,q) dmu(q) = 0.
On the sphere C21 is replaced by 1/(u - q), which gives the classical
Q(z) = (V'/2)^2 - int (V'(z) - V'(s)) / (z - s) dmu(s).

For a discrete measure the quadrature sum has removable singularities at
the nodes, so omega is evaluated by the plain product rule even on the
support.
"""
from __future__ import annotations

import csv
import io
import logging
import math
import warnings
from dataclasses import dataclass, field as dc_field

import numpy as np
from scipy.optimize import brentq

from .elliptic import CurvePoint, EllipticCurve
from .energy import DiscreteMeasure
from .fields import ExternalField
from .kernels import CurveBackend, SphereBackend, TorusBackend
from .maxmin import pair_integral

log = logging.getLogger(__name__)

TWO_PI = 2.0 * math.pi


class NoSignChangeError(ValueError):
    """Both extrema of G^mu on C1 sit at branch points (or no extremum was bracketed)."""


class QuadratureWarning(UserWarning):
    pass


class BranchUndeterminedError(ValueError):
    pass


class StepCollapseError(RuntimeError):
    pass


class OrderMismatchError(ValueError):
    pass


# ---------------------------------------------------------------------------
# the point a on C1


@dataclass
class OvalRoot:
    t: float
    u: complex
    point: CurvePoint | None
    candidates: list
    values: list


def _oval_cauchy(mu: DiscreteMeasure, t):
    be = mu.disc.contour.backend
    u = 0.5 * be.lattice.tau + np.asarray(t, float)
    return mu.disc.cauchy_transform(mu.density, u)


def find_a_on_oval(mu: DiscreteMeasure, curve: EllipticCurve | None = None, n_scan=400, tol=1e-14,
                   branch_tol=1e-9) -> OvalRoot:
    """Zero of the tangential derivative of G^mu along C1 = {tau/2 + t}.

    The tangential derivative is -Re int C(u,q) dmu(q).  All sign changes
    of a uniform scan are refined by Brent's method; the returned root is
    the one where G^mu is largest (a maximum of G^mu on C1).
    """
    be = mu.disc.contour.backend
    if not isinstance(be, TorusBackend):
        raise TypeError("the oval C1 needs a genus-one backend")
    ts = (np.arange(n_scan) + 0.5) / n_scan
    f = _oval_cauchy(mu, ts).real
    g = lambda t: float(_oval_cauchy(mu, [t])[0].real)
    roots = []
    fe = np.append(f, f[0])
    te = np.append(ts, ts[0] + 1.0)
    for k in range(n_scan):
        if fe[k] == 0.0:
            roots.append(te[k] % 1.0)
        elif fe[k] * fe[k + 1] < 0:
            roots.append(brentq(g, te[k], te[k + 1], xtol=tol) % 1.0)
    if not roots:
        raise NoSignChangeError("no extremum of G^mu on C1 was bracketed")
    # a root at t = 0 or 1/2 is a branch point of the curve
    interior = [t for t in roots if min(abs(t), abs(t - 0.5), abs(t - 1.0)) > branch_tol]
    if not interior:
        raise NoSignChangeError("extrema of G^mu on C1 only at branch points")
    u = 0.5 * be.lattice.tau + np.asarray(interior)
    G = mu.disc.potential_off(mu.density, u)
    k = int(np.argmax(G))
    point = None
    if curve is not None:
        point = curve.abel_inverse_point(u[k])
    return OvalRoot(float(interior[k]), complex(u[k]), point, [float(t) for t in interior], [float(x) for x in G])


# ---------------------------------------------------------------------------
# kernels used by the identities


def _c21_and_dv(be, u, v, a):
    """C21(u, v; a) and its derivative in v (sphere: 1/(u - v))."""
    u = np.asarray(u, complex)
    v = np.asarray(v, complex)
    if isinstance(be, SphereBackend):
        val = 1.0 / (u - v)
        return val, val ** 2
    val = be.c21(u, v, a)
    L = be.logderiv
    dlog = 2.0 * L(v) - L(u - v + 2.0 * a) + L(u - v) - 2.0 * L(v - a)
    return val, val * dlog


def _near_support(mu, u, factor=3.0):
    d = mu.disc
    plen = np.max(np.abs(d.q_ds)) * np.max(d.q_w) * d.m
    dist = d.contour.backend.distance(np.asarray(u)[:, None], d.q_s[None, :])
    return np.min(dist, axis=1) < factor * plen


def cmqd_identity_residual(mu: DiscreteMeasure, a, points) -> dict:
    """Both sides of the Cauchy-kernel identity for sigma-invariant measures.

    left(u)  = int int (C(p,q) C21(u,p;a) + C(q,p) C21(u,q;a)) dmu dmu
    right(u) = [int C(u,q) dmu(q)]^2

    On the sphere C21(u,p;a) is 1/(u - p) and ``a`` is ignored.  The
    reported ``residual`` is max |left - right| / max(1, |right|).
    """
    d = mu.disc
    be = d.contour.backend
    points = np.atleast_1d(np.asarray(points, complex))
    if np.any(_near_support(mu, points)):
        warnings.warn("test point close to the support; product quadrature may be inaccurate", QuadratureWarning)
    W = d.density_at_quad(mu.density) * d.q_w
    left = np.empty(len(points), complex)
    for k, u in enumerate(points):
        h, dh = _c21_and_dv(be, u, d.q_s, a)
        left[k] = pair_integral(d, W, h, dh)
    right = d.cauchy_transform(mu.density, points) ** 2
    res = np.abs(left - right) / np.maximum(1.0, np.abs(right))
    return dict(residual=float(np.max(res)), left=left, right=right, per_point=res)


# ---------------------------------------------------------------------------
# the quadratic differential


@dataclass
class QuadDifferential:
    """Coefficient of du^2 of a meromorphic quadratic differential.

    Built either from (mu, field, a) or from a plain callable.  Zeros and
    poles are lists of (point, order) filled by :meth:`locate`.
    """

    func: object
    backend: object = None
    measure: DiscreteMeasure | None = None
    field: ExternalField | None = None
    a: complex | None = None
    zeros: list = dc_field(default_factory=list)
    poles: list = dc_field(default_factory=list)
    pole_candidates: list = dc_field(default_factory=list)

    def __call__(self, u):
        return self.func(np.asarray(u, complex))

    def derivative(self, u, h=1e-5):
        u = np.asarray(u, complex)
        return (self(u + h) - self(u - h)) / (2 * h)

    @classmethod
    def from_function(cls, f, backend=None, pole_candidates=()):
        return cls(f, backend or SphereBackend(), pole_candidates=list(pole_candidates))

    # -- zeros and poles -----------------------------------------------------

    def locate(self, grid=8, min_cell=2e-3, region=None, offsets=(0.0371, 0.0523), tries=4):
        """Zeros and poles by the argument principle on a quadtree.

        On a torus the fundamental domain is covered; on the sphere
        ``region`` = (xmin, xmax, ymin, ymax) must be given.
        """
        be = self.backend
        lat = be.lattice if isinstance(be, TorusBackend) else None
        poles = []
        for p in self.pole_candidates:
            order = -self._winding_circle(p, self._probe_radius(p))
            if order > 0:
                poles.append((complex(p), int(order)))
        total_poles = sum(o for _, o in poles)
        for attempt in range(tries):
            ox = offsets[0] * (1 + 0.37 * attempt)
            oy = offsets[1] * (1 + 0.29 * attempt)
            if lat is not None:
                origin = -ox - oy * lat.tau
                e1, e2 = 1.0 + 0j, lat.tau
            else:
                x0, x1, y0, y1 = region
                origin = complex(x0 - ox, y0 - oy)
                e1, e2 = complex(x1 - x0), complex(0, y1 - y0)
            zeros = []
            cells = [(origin + i / grid * e1 + j / grid * e2, e1 / grid, e2 / grid)
                     for i in range(grid) for j in range(grid)]
            ok = True
            while cells:
                c0, d1, d2 = cells.pop()
                try:
                    wnd = self._winding_cell(c0, d1, d2)
                except FloatingPointError:
                    ok = False
                    break
                inside = sum(o for p, o in poles if _in_cell(p, c0, d1, d2, lat))
                nz = wnd + inside
                if nz < 0:
                    ok = False
                    break
                if nz == 0:
                    continue
                if max(abs(d1), abs(d2)) > min_cell:
                    h1, h2 = d1 / 2, d2 / 2
                    cells += [(c0, h1, h2), (c0 + h1, h1, h2), (c0 + h2, h1, h2), (c0 + h1 + h2, h1, h2)]
                    continue
                z = c0 + (d1 + d2) / 2
                if nz == 1:
                    z = self._newton(z)
                zeros.append((complex(lat.reduce(z)) if lat is not None else complex(z), int(nz)))
            if ok and (lat is None or sum(o for _, o in zeros) == total_poles):
                self.zeros = _merge(zeros, lat)
                self.poles = poles
                return self.zeros, self.poles
        raise RuntimeError("zero count does not match the pole count; refine the grid")

    def _probe_radius(self, p):
        r = 0.02
        for q in self.pole_candidates:
            if q != p:
                r = min(r, 0.3 * _dist(self.backend, p, q))
        if self.measure is not None:
            d = self.measure.disc
            r = min(r, 0.3 * float(np.min(d.contour.backend.distance(d.q_s, p))))
        return r

    def _winding_circle(self, c, r, n=256):
        th = TWO_PI * np.arange(n + 1) / n
        v = self(c + r * np.exp(1j * th))
        return int(np.rint(np.sum(np.angle(v[1:] / v[:-1])) / TWO_PI))

    def _winding_cell(self, c0, d1, d2):
        total = 0.0
        for a, b in ((c0, c0 + d1), (c0 + d1, c0 + d1 + d2), (c0 + d1 + d2, c0 + d2), (c0 + d2, c0)):
            total += self._phase_change(a, b)
        return int(np.rint(total / TWO_PI))

    def _phase_change(self, a, b, n0=16, max_pts=8192):
        t = np.linspace(0, 1, n0 + 1)
        v = self(a + (b - a) * t)
        while True:
            if not np.all(np.isfinite(v)) or np.any(v == 0):
                raise FloatingPointError("zero or pole on a cell edge")
            dphi = np.angle(v[1:] / v[:-1])
            bad = np.abs(dphi) > 0.5
            if not np.any(bad):
                return float(np.sum(dphi))
            if len(t) > max_pts:
                raise FloatingPointError("phase not resolved on a cell edge")
            mid = 0.5 * (t[:-1][bad] + t[1:][bad])
            t = np.sort(np.concatenate([t, mid]))
            v = self(a + (b - a) * t)

    def _newton(self, z, it=30):
        for _ in range(it):
            f = self(np.array([z]))[0]
            df = self.derivative(np.array([z]))[0]
            if df == 0:
                break
            step = f / df
            z = z - step
            if abs(step) < 1e-14:
                break
        return z


def _dist(be, p, q):
    if isinstance(be, TorusBackend):
        return float(be.lattice.distance(p, q))
    return abs(p - q)


def _in_cell(p, c0, d1, d2, lat):
    """Is p (mod the lattice) inside the parallelogram c0 + [0,1) d1 + [0,1) d2."""
    M = np.array([[d1.real, d2.real], [d1.imag, d2.imag]])
    shifts = [0j] if lat is None else [m + n * lat.tau for m in (-1, 0, 1) for n in (-1, 0, 1)]
    for sft in shifts:
        x, y = np.linalg.solve(M, [(p + sft - c0).real, (p + sft - c0).imag])
        if 0 <= x < 1 and 0 <= y < 1:
            return True
    return False


def _merge(zeros, lat, tol=1e-6):
    out = []
    for z, o in zeros:
        for item in out:
            d = lat.distance(z, item[0]) if lat is not None else abs(z - item[0])
            if d < tol:
                item[1] += o
                break
        else:
            out.append([z, o])
    return [(z, o) for z, o in out]


def quad_diff(mu: DiscreteMeasure, field: ExternalField, a=None) -> QuadDifferential:
    """omega(u) for the measure mu in the field with dV, parameter a on C1."""
    d = mu.disc
    be = d.contour.backend
    W = d.density_at_quad(mu.density) * d.q_w
    qs = d.q_s
    supp = W > 0
    lat = be.lattice if isinstance(be, TorusBackend) else None
    poles = field.poles(lat)
    for p, _ in poles:
        if np.isfinite(p) and np.min(be.distance(qs[supp], p)) < 1e-8:
            raise ValueError("pole of dV on the support")
    if isinstance(be, TorusBackend) and a is None:
        raise ValueError("genus-one differentials need the parameter a")
    dVq = field.dV(qs)
    Wd = W * dVq
    chunk = 256

    def omega(u):
        u = np.asarray(u, complex)
        flat = u.ravel()
        out = np.empty(flat.shape, complex)
        for k in range(0, len(flat), chunk):
            uu = flat[k:k + chunk, None]
            dVu = field.dV(uu[:, 0])
            with np.errstate(divide="ignore", invalid="ignore"):
                if isinstance(be, SphereBackend):
                    # (V'(u) - V'(q)) / (u - q)
                    K = (dVu[:, None] - dVq[None, :]) / (uu - qs[None, :])
                    integral = K @ W
                else:
                    C = be.cauchy(uu, qs[None, :])
                    C21 = be.c21(uu, qs[None, :], a)
                    integral = (C @ W) * dVu - C21 @ Wd
            out[k:k + chunk] = dVu ** 2 / 4.0 - integral
        return out.reshape(u.shape)

    cands = [p for p, _ in poles if np.isfinite(p)]
    if isinstance(be, TorusBackend):
        if not any(be.lattice.distance(p, 0.0) < 1e-9 for p in cands):
            cands.append(0j)
    return QuadDifferential(omega, be, mu, field, a, pole_candidates=cands)


def qd_residual(omega: QuadDifferential, points) -> dict:
    """|[int C(u,q) dmu - dV/2]^2 - omega(u)| at off-support points."""
    mu = omega.measure
    points = np.atleast_1d(np.asarray(points, complex))
    if np.any(_near_support(mu, points)):
        warnings.warn("test point close to the support; product quadrature may be inaccurate", QuadratureWarning)
    cm = mu.disc.cauchy_transform(mu.density, points)
    lhs = (cm - omega.field.dV(points) / 2.0) ** 2
    rhs = omega(points)
    res = np.abs(lhs - rhs)
    return dict(residual=float(np.max(res)), relative=float(np.max(res / np.maximum(1.0, np.abs(rhs)))),
                per_point=res)


def off_support_grid(mu: DiscreteMeasure, n=50, margin=0.05, avoid=(), seed=0):
    """n deterministic points of the fundamental domain away from the support and ``avoid``."""
    be = mu.disc.contour.backend
    rng = np.random.default_rng(seed)
    out = []
    while len(out) < n:
        if isinstance(be, TorusBackend):
            p = be.lattice.reduce(rng.random() + rng.random() * be.lattice.tau)
        else:
            p = complex(rng.uniform(-3, 3), rng.uniform(-3, 3))
        if np.min(be.distance(mu.disc.q_s, p)) < margin:
            continue
        if any(_dist(be, p, q) < margin for q in avoid):
            continue
        out.append(p)
    return np.array(out)


# ---------------------------------------------------------------------------
# density and trajectories


def density_from_omega(omega, u, zero_tol=1e-12) -> float:
    """Arc-length density |omega(u)|^{1/2} / pi on the support."""
    val = complex(np.asarray(omega(np.array([u], complex)))[0])
    if abs(val) < zero_tol:
        raise BranchUndeterminedError("omega vanishes at the point; the square-root branch is undetermined")
    return math.sqrt(abs(val)) / math.pi


@dataclass
class Trajectory:
    points: np.ndarray
    arclength: np.ndarray
    reason: str

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["s", "re", "im"])
        for s, p in zip(self.arclength, self.points):
            w.writerow([f"{s:.12g}", f"{p.real:.12g}", f"{p.imag:.12g}"])
        return buf.getvalue()


# Dormand-Prince 5(4) tableau
_DP_C = np.array([0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1, 1])
_DP_A = [
    [],
    [1 / 5],
    [3 / 40, 9 / 40],
    [44 / 45, -56 / 15, 32 / 9],
    [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729],
    [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656],
    [35 / 384, 0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84],
]
_DP_B = np.array([35 / 384, 0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0])
_DP_E = _DP_B - np.array([5179 / 57600, 0, 7571 / 16695, 393 / 640, -92097 / 339200, 187 / 2100, 1 / 40])


def _sqrt_branch(val, ref):
    r = np.sqrt(val)
    return -r if (r * np.conj(ref)).real < 0 else r


def trajectory_trace(omega, start, direction=1j, max_length=10.0, rtol=1e-10, h0=1e-3, hmin=1e-12,
                     hmax=0.05, zeros=(), poles=(), stop_radius=1e-3, region=None, lattice=None,
                     close_tol=1e-6, max_steps=20000) -> Trajectory:
    """Trace a trajectory of -omega (omega z'^2 < 0) with unit Euclidean speed.

    The velocity is +-i conj(sqrt(omega)) / |omega|^{1/2}; the sign follows
    ``direction`` at the start and continuity afterwards.  Each accepted
    step is projected back onto the level set Re int sqrt(omega) = const.
    """
    z = complex(start)
    w0 = complex(omega(np.array([z]))[0])
    if w0 == 0 or not np.isfinite(w0):
        raise ValueError("start point is a zero or pole of omega")
    sq = np.sqrt(w0)
    v0 = 1j * np.conj(sq) / abs(sq)
    sgn = 1.0 if (v0 * np.conj(direction)).real >= 0 else -1.0
    ref_sq = sq
    ref_v = sgn * v0

    def vel(x, ref_v):
        w = complex(omega(np.array([x]))[0])
        s = np.sqrt(w)
        v = 1j * np.conj(s) / abs(s)
        return v if (v * np.conj(ref_v)).real >= 0 else -v

    pts = [z]
    arc = [0.0]
    h = h0
    s_tot = 0.0
    reason = "step limit"
    left_start = False
    for _ in range(max_steps):
        h = min(h, hmax, max_length - s_tot)
        if h <= 0:
            reason = "step limit"
            break
        k = []
        for i in range(7):
            zi = z + h * sum(_DP_A[i][j] * k[j] for j in range(i))
            k.append(vel(zi, ref_v))
        znew = z + h * sum(_DP_B[i] * k[i] for i in range(7))
        err = abs(h * sum(_DP_E[i] * k[i] for i in range(7)))
        if err > rtol * max(1.0, abs(z)) and h > hmin:
            h = max(hmin, h * max(0.2, 0.9 * (rtol / err) ** 0.2))
            continue
        if h <= hmin and err > rtol:
            near_pole = any(_dist_any(z, p, lattice) < 10 * stop_radius for p in poles)
            if near_pole:
                reason = "hit pole"
                break
            raise StepCollapseError(f"step size collapsed at {z}")
        # projection onto the level set of Re int sqrt(omega)
        gx, gw = np.polynomial.legendre.leggauss(8)
        mid = 0.5 * (z + znew) + 0.5 * (znew - z) * gx
        vals = omega(mid)
        roots = np.array([_sqrt_branch(v, ref_sq) for v in vals])
        drift = (0.5 * (znew - z) * np.sum(gw * roots)).real
        wend = complex(omega(np.array([znew]))[0])
        send = _sqrt_branch(wend, roots[-1])
        if abs(send) > 0:
            znew = znew - drift * np.conj(send) / abs(send) ** 2
        ref_sq = send
        step = znew - z
        ref_v = step / abs(step) if abs(step) > 0 else ref_v
        s_tot += abs(step)
        # closure: closest approach to the start on this step
        dstart = _dist_any(znew, start, lattice)
        if left_start and dstart < max(close_tol, 2 * h):
            shift = znew - (start + (lattice.nearest_difference(znew - start) if lattice is not None else znew - start))
            st = complex(start) + shift
            t = np.clip(((st - z) * np.conj(step)).real / abs(step) ** 2, 0, 1)
            closest = z + t * step
            if _dist_any(closest, start, lattice) < close_tol:
                pts.append(closest)
                arc.append(s_tot - (1 - t) * abs(step))
                reason = "closed"
                break
        if dstart > 10 * close_tol + 2 * h:
            left_start = True
        z = znew
        pts.append(z)
        arc.append(s_tot)
        if any(_dist_any(z, p, lattice) < stop_radius for p in zeros):
            reason = "hit zero"
            break
        if any(_dist_any(z, p, lattice) < stop_radius for p in poles):
            reason = "hit pole"
            break
        if region is not None and not (region[0] <= z.real <= region[1] and region[2] <= z.imag <= region[3]):
            reason = "left region"
            break
        if s_tot >= max_length - 1e-15:
            reason = "step limit"
            break
        h = min(hmax, h * min(5.0, 0.9 * (rtol / max(err, 1e-300)) ** 0.2))
    return Trajectory(np.array(pts), np.array(arc), reason)


def _dist_any(p, q, lattice):
    if lattice is not None:
        return float(lattice.distance(p, q))
    return abs(p - q)


def emanation_structure(omega, zero, order=None, radius=1e-3, n=256) -> list:
    """The m + 2 directions in which trajectories of -omega leave a zero of order m.

    With omega ~ c (u - u0)^m the directions are (pi - arg c + 2 pi k)/(m + 2).
    """
    th = TWO_PI * np.arange(n) / n
    e = np.exp(1j * th)
    vals = np.asarray(omega(zero + radius * e))
    m = int(np.rint(np.sum(np.angle(np.roll(vals, -1) / vals)) / TWO_PI))
    if order is not None and m != order:
        raise OrderMismatchError(f"argument principle gives order {m}, expected {order}")
    if m < 0:
        raise OrderMismatchError("point is a pole of omega")
    c = np.mean(vals / (radius * e) ** m)
    return sorted(((math.pi - np.angle(c) + TWO_PI * k) / (m + 2)) % TWO_PI for k in range(m + 2))


def hausdorff(a, b, lattice=None):
    a = np.asarray(a, complex)
    b = np.asarray(b, complex)
    if lattice is not None:
        D = lattice.distance(a[:, None], b[None, :])
    else:
        D = np.abs(a[:, None] - b[None, :])
    return float(max(D.min(axis=1).max(), D.min(axis=0).max()))


def _densify(line, spacing):
    line = np.asarray(line, complex)
    seg = np.abs(np.diff(line))
    k = np.maximum(1, np.ceil(seg / spacing).astype(int))
    s = np.concatenate([[0.0], np.cumsum(k)])
    t = np.arange(int(s[-1]) + 1)
    return np.interp(t, s, line.real) + 1j * np.interp(t, s, line.imag)


def _to_polyline(pts, line):
    """Distance from each point to the nearest segment of a polyline."""
    a = line[:-1][None, :]
    d = (line[1:] - line[:-1])[None, :]
    p = np.asarray(pts, complex)[:, None]
    L2 = np.maximum(np.abs(d) ** 2, 1e-300)
    t = np.clip(((p - a) * np.conj(d)).real / L2, 0.0, 1.0)
    return np.abs(p - a - t * d).min(axis=1)


def polyline_hausdorff(a, b, lattice=None, spacing=1e-4):
    """Hausdorff distance between two curves given as polylines.

    Points of each curve, densified to ``spacing``, are measured against
    the segments of the other, so the value does not depend on how
    coarsely either curve was sampled.  On a torus ``b`` is first moved to
    the copy nearest the start of ``a``.
    """
    a = np.asarray(a, complex)
    b = np.asarray(b, complex)
    if lattice is not None:
        b = a[0] + lattice.nearest_difference(b[0] - a[0]) + (b - b[0])
    out = 0.0
    for x, y in ((a, b), (b, a)):
        xs = _densify(x, spacing)
        for k in range(0, len(xs), 2000):
            out = max(out, float(_to_polyline(xs[k:k + 2000], y).max()))
    return out


def support_polylines(mu: DiscreteMeasure, rel=1e-8, refine=8):
    """Runs of support nodes as polylines in the surface chart."""
    d = mu.disc
    if isinstance(d, ArcQuadrature):
        return [d.polyline(40 * refine)]
    out = []
    supp = mu.support_mask(rel)
    for ci, comp in enumerate(d.contour.components):
        sel = np.flatnonzero(d.node_comp == ci)
        s_idx = sel[supp[sel]]
        if len(s_idx) == 0:
            continue
        loc = s_idx - sel[0]
        breaks = np.flatnonzero(np.diff(loc) > 1)
        runs = np.split(loc, breaks + 1)
        if comp.closed and len(runs) > 1 and runs[0][0] == 0 and runs[-1][-1] == len(sel) - 1:
            runs = [np.concatenate([runs[-1], runs[0]])] + runs[1:-1]
        th_nodes = d.node_th[sel]
        for r in runs:
            th = th_nodes[r]
            if comp.closed:
                th = np.unwrap(th, period=TWO_PI)
            fine = np.interp(np.linspace(0, len(th) - 1, (len(th) - 1) * refine + 1), np.arange(len(th)), th)
            out.append(d.contour.surface(ci, fine)[0])
    return out


def trajectory_consistency(omega: QuadDifferential, mu: DiscreteMeasure, zeros=None, max_length=5.0,
                           stop_radius=1e-4):
    """Trace both ways from the midpoint of each support run; Hausdorff distance to the run.

    The distance is between the two curves (see :func:`polyline_hausdorff`),
    the traced legs stopping within ``stop_radius`` of a zero or pole.
    """
    be = mu.disc.contour.backend
    lat = be.lattice if isinstance(be, TorusBackend) else None
    zeros = [z for z, _ in (zeros if zeros is not None else omega.zeros)]
    poles = [p for p, _ in omega.poles] or list(omega.pole_candidates)
    report = []
    for line in support_polylines(mu):
        if lat is not None:
            line = line[0] + lat.nearest_difference(line - line[0])
        mid = line[len(line) // 2]
        tang = line[len(line) // 2 + 1] - line[len(line) // 2 - 1]
        legs = []
        for dirn in (tang, -tang):
            tr = trajectory_trace(omega, mid, dirn, max_length=max_length, zeros=zeros, poles=poles,
                                  lattice=lat, stop_radius=stop_radius)
            legs.append(tr)
        path = np.concatenate([legs[1].points[::-1], legs[0].points[1:]])
        report.append(dict(hausdorff=polyline_hausdorff(path, line, lat), reasons=[t.reason for t in legs], path=path,
                           support=line))
    return report


# ---------------------------------------------------------------------------
# exact differentials with a prescribed zero pattern
#
# A discrete critical measure only gives omega up to the discretization
# error.  On the torus omega is determined by its principal parts and a
# constant, so it can be rebuilt exactly from a handful of real numbers
# fixed by the zero pattern and the Boutroux conditions (all periods of
# sqrt(omega) purely imaginary).


class MeromorphicQD:
    """omega(u) = b0 + sum_j c_j (-L'(u - p_j)) + sum_{j<J} b_j (L(u - p_j) - L(u - p_J)).

    L is the logarithmic derivative of theta_1.  ``lead`` holds the
    double-pole coefficients c_j, ``b`` the residues b_j (j < J) followed
    by the constant b0.  The last pole p_J carries minus the sum of the
    other residues, which keeps omega doubly periodic.
    """

    def __init__(self, backend: TorusBackend, poles, lead, b):
        self.backend = backend
        self.poles = [complex(p) for p in poles]
        self.lead = np.asarray(lead, complex)
        self.b = np.asarray(b, complex)
        if len(self.lead) != len(self.poles) or len(self.b) != len(self.poles):
            raise ValueError("need one lead coefficient per pole and len(poles) - 1 residues plus a constant")

    def _L(self, z, n):
        t = self.backend._th(z, tuple(range(n + 2)))
        L = t[1] / t[0]
        if n == 0:
            return L, None, None
        L1 = t[2] / t[0] - L ** 2
        if n == 1:
            return L, L1, None
        return L, L1, t[3] / t[0] - 3.0 * t[2] * t[1] / t[0] ** 2 + 2.0 * L ** 3

    def evaluate(self, u, deriv=False):
        u = np.asarray(u, complex)
        n = 2 if deriv else 1
        val = np.full(u.shape, self.b[-1], complex)
        dval = np.zeros(u.shape, complex)
        last = self._L(u - self.poles[-1], n)
        for j, p in enumerate(self.poles):
            L, L1, L2 = self._L(u - p, n)
            val = val - self.lead[j] * L1
            if deriv:
                dval = dval - self.lead[j] * L2
            if j < len(self.poles) - 1:
                val = val + self.b[j] * (L - last[0])
                if deriv:
                    dval = dval + self.b[j] * (L1 - last[1])
        return (val, dval) if deriv else val

    def __call__(self, u):
        return self.evaluate(u)


def laurent_residue(omega, p, radius=1e-2, n=256) -> complex:
    """(1/2 pi i) of the integral of omega around a small circle about p."""
    z = radius * np.exp(2j * np.pi * np.arange(n) / n)
    return complex(np.mean(np.asarray(omega(p + z)) * z))


def _sqrt_along(vals, ref=None):
    """Square roots of ``vals`` continued along a sampled path."""
    out = np.sqrt(np.asarray(vals, complex))
    for k in range(len(out)):
        r = ref if k == 0 else out[k - 1]
        if r is not None and (out[k] * np.conj(r)).real < 0:
            out[k] = -out[k]
    return out


def path_integral_sqrt(omega, pts, singular_start=False, singular_end=False, m=16, ref=None):
    """int sqrt(omega(u)) du along the polyline ``pts``.

    The branch is continued along the path starting from ``ref``.  Ends
    at simple zeros of omega use the substitution u = A + (B - A) t^2,
    which removes the square-root singularity.  Returns the integral and
    the branch value at the end of the path.
    """
    gx, gw = np.polynomial.legendre.leggauss(m)
    t = 0.5 * (gx + 1.0)
    w = 0.5 * gw
    pts = np.asarray(pts, complex)
    total = 0j
    for k in range(len(pts) - 1):
        A, B = pts[k], pts[k + 1]
        if k == 0 and singular_start:
            u, du = A + (B - A) * t ** 2, 2.0 * t * (B - A)
        elif k == len(pts) - 2 and singular_end:
            u, du = B + (A - B) * (1.0 - t) ** 2, 2.0 * (1.0 - t) * (B - A)
        else:
            u, du = A + (B - A) * t, np.full(t.shape, B - A)
        s = _sqrt_along(omega(u), ref)
        ref = s[-1]
        total += np.sum(s * du * w)
    return complex(total), ref


def _newton_zero(f, z, it=60, tol=1e-15):
    for _ in range(it):
        val, dval = f.evaluate(np.array([z]), deriv=True)
        step = val[0] / dval[0]
        z = z - step
        if abs(step) < tol * max(1.0, abs(z)):
            break
    return complex(z)


@dataclass
class DoubleZero:
    """Location guess of a double zero; ``kind`` is "real", "oval" or "free"."""

    guess: complex
    kind: str = "free"

    def nparams(self):
        return 2 if self.kind == "free" else 1

    def start(self, tau):
        if self.kind == "real":
            return [self.guess.real]
        if self.kind == "oval":
            return [(self.guess - 0.5 * tau).real]
        return [self.guess.real, self.guess.imag]

    def point(self, x, tau):
        if self.kind == "real":
            return complex(x[0])
        if self.kind == "oval":
            return 0.5 * tau + x[0]
        return complex(x[0], x[1])


@dataclass
class BoutrouxResult:
    omega: QuadDifferential
    endpoints: tuple
    double_zeros: list
    residual: np.ndarray
    cost: float
    arc_integral: complex
    periods: list


def boutroux_refine(omega_d, field: ExternalField, endpoints, double_zeros, via, cycles, mass=1.0,
                    real_coefficients=True, samples=None) -> BoutrouxResult:
    """Rebuild omega exactly from the principal parts and the zero pattern.

    ``omega_d`` is an approximate differential (typically from a discrete
    critical measure) that supplies the starting residues; ``endpoints``
    are guesses of the two simple zeros bounding one support arc, joined by
    the polyline ``via``; ``double_zeros`` are DoubleZero guesses and
    ``cycles`` closed polylines avoiding the support.  Unknowns are the
    residues, the constant and the double-zero locations; equations are
    omega = omega' = 0 at the double zeros, Re int_arc sqrt(omega) = 0 and
    Re of each cycle period = 0.  The double pole at the sink 0 gets
    (mass + r_inf/2)^2, a pole of dV with residue r gets (r/2)^2.
    """
    from scipy.optimize import least_squares

    be = omega_d.backend
    if not isinstance(be, TorusBackend):
        raise TypeError("boutroux_refine needs a genus-one backend")
    lat = be.lattice
    tau = lat.tau
    poles, lead = [], []
    r_inf = 0.0
    for p, r in field.poles(lat):
        if not np.isfinite(p):
            continue
        if lat.distance(p, 0.0) < 1e-9:
            r_inf = r
            continue
        poles.append(complex(p))
        lead.append((r / 2.0) ** 2)
    poles.append(0j)
    lead.append((mass + r_inf / 2.0) ** 2)
    res0 = [laurent_residue(omega_d, p) for p in poles[:-1]]
    probe = MeromorphicQD(be, poles, lead, np.append(res0, 0.0))
    if samples is None:
        samples = np.array([0.25 + 0.25 * tau, 0.75 + 0.25 * tau, 0.25 + 0.75 * tau, 0.75 + 0.75 * tau])
    b_const = complex(np.mean(omega_d(samples) - probe(samples)))
    b_init = np.append(res0, b_const)
    nb = len(b_init)
    if real_coefficients:
        x0 = list(b_init.real)
    else:
        x0 = list(b_init.real) + list(b_init.imag)
    nbx = len(x0)
    for dz in double_zeros:
        x0 += dz.start(tau)
    endpoints = [complex(e) for e in endpoints]
    via = [complex(v) for v in via]
    state = {}

    def unpack(x):
        b = np.asarray(x[:nb], complex) if real_coefficients else x[:nb] + 1j * np.asarray(x[nb:nbx])
        f = MeromorphicQD(be, poles, lead, b)
        k = nbx
        zs = []
        for dz in double_zeros:
            zs.append(dz.point(x[k:k + dz.nparams()], tau))
            k += dz.nparams()
        return f, zs

    def resid(x):
        f, zs = unpack(x)
        out = []
        for z in zs:
            val, dval = f.evaluate(np.array([z]), deriv=True)
            out += [val[0].real, val[0].imag, dval[0].real, dval[0].imag]
        e = [_newton_zero(f, g) for g in state.get("ends", endpoints)]
        state["ends"] = e
        arc, _ = path_integral_sqrt(f, [e[0]] + via + [e[1]], True, True)
        out.append(arc.real)
        for cyc in cycles:
            per, _ = path_integral_sqrt(f, cyc)
            out.append(per.real)
        return np.array(out)

    sol = least_squares(resid, np.array(x0), xtol=1e-15, ftol=1e-15, gtol=1e-15)
    f, zs = unpack(sol.x)
    e = [_newton_zero(f, g) for g in endpoints]
    arc, _ = path_integral_sqrt(f, [e[0]] + via + [e[1]], True, True)
    periods = [path_integral_sqrt(f, cyc)[0] for cyc in cycles]
    qd = QuadDifferential(f, be, None, field, None, pole_candidates=list(poles))
    qd.zeros = [(e[0], 1), (e[1], 1)] + [(z, 2) for z in zs]
    qd.poles = [(p, 2) for p in poles]
    return BoutrouxResult(qd, tuple(e), zs, sol.fun, float(sol.cost), arc, periods)


# ---------------------------------------------------------------------------
# the measure carried by a trajectory arc


class _ArcContour:
    def __init__(self, backend, param):
        self.backend = backend
        self.components = [None]
        self._param = param

    def surface(self, ci, th):
        return self._param(np.asarray(th, float)), None


class ArcQuadrature:
    """Gauss-Legendre nodes on a smooth arc, with the interface of a discretization.

    The arc is parametrized by phi in [0, pi]; ``q_w`` are the Gauss
    weights in phi and ``q_ds`` the derivative du/dphi.
    """

    def __init__(self, backend, param, dparam, n):
        gx, gw = np.polynomial.legendre.leggauss(n)
        self.q_th = 0.5 * np.pi * (gx + 1.0)
        self.q_w = 0.5 * np.pi * gw
        self.q_s = param(self.q_th)
        self.q_ds = dparam(self.q_th)
        self.Q = self.N = n
        self.m = 1
        self.q_comp = np.zeros(n, int)
        self.contour = _ArcContour(backend, param)
        self._cmat = None

    def density_at_quad(self, rho):
        return np.asarray(rho, float)

    def integrate_off(self, rho, targets, kernel):
        targets = np.atleast_1d(np.asarray(targets, complex))
        W = np.asarray(rho, float) * self.q_w
        with np.errstate(divide="ignore", invalid="ignore"):
            return kernel(targets[:, None], self.q_s[None, :]) @ W

    def cauchy_transform(self, rho, targets):
        return self.integrate_off(rho, targets, self.contour.backend.cauchy)

    def potential_off(self, rho, targets):
        return self.integrate_off(rho, targets, self.contour.backend.green).real

    def polyline(self, n=400):
        return self.contour.surface(0, np.linspace(0.0, np.pi, n))[0]


@dataclass
class QuadratureMeasure:
    """Positive point masses on an arc, usable wherever a DiscreteMeasure is read."""

    disc: ArcQuadrature
    density: np.ndarray
    endpoints: tuple = ()

    @property
    def contour(self):
        return self.disc.contour

    @property
    def mass(self) -> float:
        return float(np.sum(self.density * self.disc.q_w))

    def support_mask(self, rel=1e-8):
        return np.ones(self.disc.Q, bool)


def arc_measure(omega, endpoints, via, n=64, rtol=1e-13) -> QuadratureMeasure:
    """The measure (1/(pi i)) sqrt(omega) du on the trajectory joining two simple zeros.

    The arc is parametrized by phi in [0, pi] through its cumulative
    mass F = M (phi - sin phi cos phi) / pi, so that u(phi) is analytic up
    to both ends (u - e ~ phi^2 at a simple zero).  u(phi) solves
    du/dphi = 2 i M sin^2(phi) / sqrt(omega(u)), started at the point of
    mass M/2 and integrated both ways.  ``via`` is a polyline close to the
    arc fixing its homotopy class.
    """
    from scipy.integrate import solve_ivp

    e0, e1 = (complex(e) for e in endpoints)
    path = [e0] + [complex(v) for v in via] + [e1]
    total, _ = path_integral_sqrt(omega, path, True, True)
    M = total / (np.pi * 1j)
    if abs(M.imag) > 1e-8 * max(1.0, abs(M)) or M.real == 0:
        raise ValueError(f"the arc does not carry a real mass: {M}")
    # the branch of sqrt(omega) is the one giving positive mass
    sgn = 1.0 if M.real > 0 else -1.0
    M = abs(M.real)
    # point of mass M/2, by Newton on F(u) - M/2 from the middle of the via path
    k = len(path) // 2
    z = path[k]
    F, ref = path_integral_sqrt(omega, path[:k + 1], True, False)
    F, ref = sgn * F, sgn * ref
    for _ in range(50):
        F_pi = F / (np.pi * 1j)
        step = (F_pi - 0.5 * M) * np.pi * 1j / ref
        z_new = z - step
        dF, ref = path_integral_sqrt(omega, [z, z_new], ref=ref)
        F, z = F + dF, z_new
        if abs(step) < 1e-15:
            break
    mid_ref = ref
    cur = [mid_ref]

    def rhs(phi, y):
        u = y[0] + 1j * y[1]
        s = np.sqrt(complex(omega(np.array([u]))[0]))
        if (s * np.conj(cur[0])).real < 0:
            s = -s
        cur[0] = s
        d = 2j * M * math.sin(phi) ** 2 / s
        return [d.real, d.imag]

    halves = []
    for end in (0.0, np.pi):
        cur[0] = mid_ref
        sol = solve_ivp(rhs, (0.5 * np.pi, end), [z.real, z.imag], method="DOP853", rtol=rtol, atol=1e-15,
                        dense_output=True)
        if not sol.success:
            raise StepCollapseError(sol.message)
        halves.append(sol.sol)
        gap = abs(complex(*sol.y[:, -1]) - (e0 if end == 0.0 else e1))
        if gap > 1e-6:
            raise ValueError(f"trajectory from the midpoint misses the endpoint by {gap:.3g}")

    def param(phi):
        phi = np.atleast_1d(np.asarray(phi, float))
        out = np.empty(phi.shape, complex)
        lo = phi <= 0.5 * np.pi
        for sel, h in ((lo, halves[0]), (~lo, halves[1])):
            if np.any(sel):
                y = h(phi[sel])
                out[sel] = y[0] + 1j * y[1]
        return out

    def dparam(phi):
        u = param(phi)
        s = np.sqrt(np.asarray(omega(u), complex))
        # branch: du/dphi must continue the ODE direction
        d = 2j * M * np.sin(phi) ** 2 / s
        h = 1e-7
        fd = (param(phi + h) - param(phi - h)) / (2 * h)
        return np.where((d * np.conj(fd)).real < 0, -d, d)

    disc = ArcQuadrature(omega.backend if hasattr(omega, "backend") else None, param, dparam, n)
    density = 2.0 * M * np.sin(disc.q_th) ** 2 / np.pi
    return QuadratureMeasure(disc, density, (e0, e1))


def _classify_double(z, lat, tol=1e-3):
    r = lat.reduce(z)
    h = lat.tau.imag
    if min(abs(r.imag), abs(r.imag - h)) < tol:
        return DoubleZero(complex(r.real), "real")
    if abs(r.imag - 0.5 * h) < tol:
        return DoubleZero(r, "oval")
    return DoubleZero(r, "free")


def _clear_lines(obstacles, lat, n_try=40, n_pts=200):
    """A horizontal and a slanted (along tau) cycle as far as possible from ``obstacles``."""
    obs = np.asarray(obstacles, complex)
    tau = lat.tau
    best = []
    for make in (lambda c, s: c * tau + s, lambda c, s: c + s * tau):
        top, arg = -1.0, None
        for c in (np.arange(n_try) + 0.5) / n_try:
            line = make(c, np.linspace(0.0, 1.0, n_pts))
            dist = np.min(lat.distance(line[:, None], obs[None, :]))
            if dist > top:
                top, arg = dist, c
        best.append((list(make(arg, np.linspace(0.0, 1.0, 81))), top))
    return best


@dataclass
class RefinedMeasure:
    measure: QuadratureMeasure
    omega: QuadDifferential
    boutroux: BoutrouxResult
    cycles: list
    via: list
    cycle_clearance: list


def refine_critical_measure(mu: DiscreteMeasure, field: ExternalField, omega: QuadDifferential | None = None,
                            n=64, pair_tol=0.12, mass=1.0) -> RefinedMeasure:
    """Exact critical measure near a discrete one supported on a single arc.

    The zeros of the discrete differential are read as follows: the two
    closest to the ends of the support are its simple endpoints, the rest
    must come in pairs closer than ``pair_tol`` (a double zero split by the
    discretization) or already be double.  The differential is then rebuilt
    by :func:`boutroux_refine` and the measure by :func:`arc_measure`.
    """
    be = mu.disc.contour.backend
    if not isinstance(be, TorusBackend):
        raise TypeError("refinement is implemented for genus-one backends")
    lat = be.lattice
    if omega is None:
        omega = quad_diff(mu, field, find_a_on_oval(mu).u)
    if not omega.zeros:
        omega.locate()
    runs = support_polylines(mu)
    if len(runs) != 1:
        raise ValueError(f"expected one support arc, found {len(runs)}")
    line = runs[0]
    line = line[0] + lat.nearest_difference(line - line[0])
    simple = []
    for z, o in omega.zeros:
        simple += [z] * int(o)
    ends = []
    for end in (line[0], line[-1]):
        k = int(np.argmin([lat.distance(z, end) for z in simple]))
        ends.append(line[0] + lat.nearest_difference(simple.pop(k) - line[0]))
    doubles = []
    while simple:
        z = simple.pop(0)
        k = int(np.argmin([lat.distance(z, w) for w in simple])) if simple else -1
        if k < 0 or lat.distance(z, simple[k]) > pair_tol:
            raise ValueError(f"unpaired zero at {z}; the zero pattern is not a single arc plus double zeros")
        w = simple.pop(k)
        doubles.append(_classify_double(z + 0.5 * lat.nearest_difference(w - z), lat))
    idx = np.linspace(0, len(line) - 1, 11).round().astype(int)[1:-1]
    via = [complex(v) for v in line[idx]]
    obstacles = np.concatenate([line, [z for z, _ in omega.zeros],
                                [p for p in omega.pole_candidates]])
    cyc = _clear_lines(obstacles, lat)
    cycles = [c for c, _ in cyc]
    br = boutroux_refine(omega, field, ends, doubles, via, cycles, mass=mass,
                         real_coefficients=bool(field.sigma_invariant))
    ms = arc_measure(br.omega, br.endpoints, via, n=n)
    return RefinedMeasure(ms, br.omega, br, cycles, via, [d for _, d in cyc])


def gap_inequality(refined: RefinedMeasure, path) -> dict:
    """2 G^mu + phi minus its value at the arc endpoint, along a path from that endpoint.

    Off the support d(2 G^mu + phi) = -2 Re[(C mu - dV/2) du], and
    C mu - dV/2 is a branch of sqrt(omega).  The branch is fixed at the
    path point farthest from the support by comparison with the Cauchy
    transform.  A nonnegative minimum over the interior points shows that
    the measure is the equilibrium measure of the contour made of the arc
    and the path; ``closure`` is the value at the last point, which
    vanishes when the path ends at the other endpoint.
    """
    om = refined.omega
    mu = refined.measure
    pts = np.asarray(path, complex)
    acc = [0j]
    roots = [None]
    ref = None
    for k in range(len(pts) - 1):
        I, ref = path_integral_sqrt(om, pts[k:k + 2], singular_start=(k == 0), ref=ref)
        acc.append(acc[-1] + I)
        roots.append(ref)
    d = np.min(mu.contour.backend.distance(mu.disc.q_s[None, :], pts[1:, None]), axis=1)
    k0 = 1 + int(np.argmax(d))
    target = complex(mu.disc.cauchy_transform(mu.density, [pts[k0]])[0]
                     - 0.5 * om.field.dV(np.array([pts[k0]]))[0])
    root = _sqrt_branch(complex(om(np.array([pts[k0]]))[0]), roots[k0])
    sign = 1.0 if (root * np.conj(target)).real >= 0 else -1.0
    g = np.array([-2.0 * sign * v.real for v in acc])
    return dict(values=g, minimum=float(np.min(g[1:-1])), closure=float(g[-1]),
                branch_error=float(abs(sign * root - target)))


def gap_path(mu: DiscreteMeasure, refined: RefinedMeasure, n=2000, stride=5):
    """The zero-density part of a closed one-component contour, as a path
    from one endpoint of the refined arc to the other."""
    d = mu.disc
    comp = d.contour.components[0]
    if len(d.contour.components) != 1 or not comp.closed:
        raise ValueError("need a single closed contour")
    th = np.linspace(0, comp.span, n, endpoint=False)
    s, _ = d.contour.surface(0, th)
    nodes = d.node_th[d.node_comp == 0]
    rho = mu.density[d.node_comp == 0]
    dens = np.interp(th, np.append(nodes, nodes[0] + comp.span), np.append(rho, rho[0]), period=comp.span)
    gap = dens <= 1e-8 * rho.max()
    if not np.any(gap) or np.all(gap):
        raise ValueError("the contour has no gap")
    # rotate so that the gap is one consecutive run
    k = int(np.flatnonzero(~gap)[-1]) + 1
    s, gap = np.roll(s, -k), np.roll(gap, -k)
    pts = s[gap]
    lat = getattr(d.contour.backend, "lattice", None)
    near = (lambda a, b: lat.distance(a, b)) if lat is not None else (lambda a, b: abs(a - b))
    ends = refined.boutroux.endpoints
    first = min(ends, key=lambda e: near(e, pts[0]))
    last = min(ends, key=lambda e: near(e, pts[-1]))
    if lat is not None:
        first = pts[0] + lat.nearest_difference(first - pts[0])
        last = pts[-1] + lat.nearest_difference(last - pts[-1])
    return np.concatenate([[first], pts[::stride], [last]])


# ---------------------------------------------------------------------------
# genus zero


def genus_zero_Q(mu: DiscreteMeasure, dV):
    """Q(z) = (V'(z)/2)^2 - int (V'(z) - V'(s)) / (z - s) dmu(s) on the sphere."""
    return quad_diff(mu, dV if isinstance(dV, ExternalField) else ExternalField(dV)).func


def qd2_residual(mu: DiscreteMeasure, field: ExternalField, points) -> dict:
    """|[int dmu(s)/(z - s) - V'(z)/2]^2 - Q(z)| at off-support points."""
    om = quad_diff(mu, field)
    return qd_residual(om, points)


# ---------------------------------------------------------------------------
# export


def trajectories_csv(trajectories) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["trajectory", "s", "re", "im", "reason"])
    for k, tr in enumerate(trajectories):
        for s, p in zip(tr.arclength, tr.points):
            w.writerow([k, f"{s:.12g}", f"{p.real:.12g}", f"{p.imag:.12g}", tr.reason])
    return buf.getvalue()


def zeros_csv(zeros, poles) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["kind", "re", "im", "order"])
    for z, o in zeros:
        w.writerow(["zero", f"{z.real:.12g}", f"{z.imag:.12g}", o])
    for p, o in poles:
        w.writerow(["pole", f"{p.real:.12g}", f"{p.imag:.12g}", o])
    return buf.getvalue()


def svg_overlay(supports=(), trajectories=(), zeros=(), poles=(), ovals=(), box=None, size=600) -> str:
    """SVG drawing in the surface chart: thick support, thin trajectories,
    zeros as triangles, poles as crosses, ovals dashed."""
    allpts = [np.asarray(s) for s in supports] + [np.asarray(t.points) for t in trajectories] + \
             [np.asarray(o) for o in ovals]
    allpts += [np.array([z for z, _ in zeros] + [p for p, _ in poles], complex)]
    allpts = np.concatenate([p for p in allpts if len(p)]) if any(len(p) for p in allpts) else np.zeros(1, complex)
    if box is None:
        x0, x1 = allpts.real.min(), allpts.real.max()
        y0, y1 = allpts.imag.min(), allpts.imag.max()
        pad = 0.05 * max(x1 - x0, y1 - y0, 1e-3)
        box = (x0 - pad, x1 + pad, y0 - pad, y1 + pad)
    x0, x1, y0, y1 = box
    sc = size / max(x1 - x0, y1 - y0)
    tx = lambda p: ((p.real - x0) * sc, (y1 - p.imag) * sc)

    def path(pts):
        return " ".join(f"{'M' if i == 0 else 'L'}{tx(p)[0]:.2f},{tx(p)[1]:.2f}" for i, p in enumerate(pts))

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{(x1 - x0) * sc:.0f}" height="{(y1 - y0) * sc:.0f}">']
    for o in ovals:
        out.append(f'<path d="{path(o)}" fill="none" stroke="gray" stroke-dasharray="4,3" stroke-width="1"/>')
    for t in trajectories:
        out.append(f'<path d="{path(t.points)}" fill="none" stroke="steelblue" stroke-width="0.8"/>')
    for s in supports:
        out.append(f'<path d="{path(s)}" fill="none" stroke="black" stroke-width="3"/>')
    for z, _ in zeros:
        x, y = tx(z)
        out.append(f'<polygon points="{x:.2f},{y - 5:.2f} {x - 4.5:.2f},{y + 3.5:.2f} {x + 4.5:.2f},{y + 3.5:.2f}" fill="darkgreen"/>')
    for p, _ in poles:
        x, y = tx(p)
        out.append(f'<path d="M{x - 4:.2f},{y - 4:.2f} L{x + 4:.2f},{y + 4:.2f} M{x - 4:.2f},{y + 4:.2f} L{x + 4:.2f},{y - 4:.2f}" stroke="crimson" stroke-width="1.5"/>')
    out.append("</svg>")
    return "\n".join(out) + "\n"
