"""
Admissible contour families, Schiffer variations and the max-min search.

A vector field h is a complex function in the surface chart; its flow moves
points by dp/dt = h(p).  The first variation of the weighted energy under
the flow is Re D_{V,h}(mu) with

    D_{V,h}(mu) = - int int (h(p) C(p,q) + h(q) C(q,p)) dmu dmu + int h dV dmu.

On a contour the pair h(p) C(p,q) + h(q) C(q,p) equals the divided
difference (h(p) - h(q)) / (p - q) plus regular terms, so the double
integral is a product Gauss rule on a continuous integrand.
"""
from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .elliptic import Lattice
from .energy import (
    Component,
    Contour,
    ContourError,
    DiscreteMeasure,
    Discretization,
    energy,
    equilibrium_measure,
)
from .fields import ExternalField
from .kernels import CurveBackend, SphereBackend, TorusBackend

log = logging.getLogger(__name__)

TWO_PI = 2.0 * math.pi


class AdmissibilityError(ValueError):
    pass


class BoundaryStallError(RuntimeError):
    pass


class MaxMinNonConvergence(RuntimeError):
    pass


class GateError(ValueError):
    pass


# ---------------------------------------------------------------------------
# vector fields


class VectorField:
    """h(p) as a function of the surface coordinate."""

    name = "field"

    def __call__(self, s):
        raise NotImplementedError


@dataclass
class ConstantField(VectorField):
    c: complex = 1.0
    name: str = "const"

    def __call__(self, s):
        return np.full(np.shape(s), complex(self.c))


def _smoothstep(t):
    """C-infinity transition from 1 (t <= 0) to 0 (t >= 1)."""
    t = np.clip(t, 0.0, 1.0)
    with np.errstate(divide="ignore", over="ignore"):
        a = np.where(t < 1, np.exp(-1.0 / np.maximum(1 - t, 1e-300)), 0.0)
        b = np.where(t > 0, np.exp(-1.0 / np.maximum(t, 1e-300)), 0.0)
    return a / (a + b)


@dataclass
class BumpFourierField(VectorField):
    """phase * bump(|d|) * (d / r)^k (conj(d) for k < 0), d = p - center.

    The bump is 1 for |d| <= r_in and 0 for |d| >= r_out, so the field
    vanishes near the sink when r_out is below its distance.
    """

    center: complex
    k: int
    r_in: float
    r_out: float
    phase: complex = 1.0
    lattice: Lattice | None = None
    name: str = "bump"

    def __call__(self, s):
        s = np.asarray(s, complex)
        d = s - self.center
        if self.lattice is not None:
            d = self.lattice.nearest_difference(d)
        r = np.abs(d)
        b = _smoothstep((r - self.r_in) / (self.r_out - self.r_in))
        if self.k >= 0:
            f = (d / self.r_in) ** self.k
        else:
            f = (np.conj(d) / self.r_in) ** (-self.k)
        return self.phase * b * f


@dataclass
class ContourField:
    """A field given along the contour: h(component, theta) in the surface chart."""

    func: object
    name: str = "contour"

    def on(self, ci, th):
        return self.func(ci, th)


@dataclass
class VectorFieldBasis:
    fields: list

    def __len__(self):
        return len(self.fields)

    def __iter__(self):
        return iter(self.fields)

    @classmethod
    def fourier(cls, contour: Contour, kmax=8, margin=1.5, sink_clearance=None, count=None):
        """Bump-times-Fourier fields around each component plus two translations.

        Each component gets e^{ik theta} style fields for -kmax <= k <= kmax
        with phases 1 and i.  ``count`` truncates the list (lowest |k| first).
        """
        be = contour.backend
        lat = be.lattice if isinstance(be, TorusBackend) else None
        out = [ConstantField(1.0, "tx"), ConstantField(1j, "ty")]
        for ci in range(len(contour.components)):
            th = np.linspace(0, contour.components[ci].span, 256, endpoint=False)
            s, _ = contour.surface(ci, th)
            if lat is not None:
                s = s[0] + lat.nearest_difference(s - s[0])
            c = complex(np.mean(s))
            rad = float(np.max(np.abs(s - c)))
            r_in = rad * 1.05
            r_out = rad * margin
            if sink_clearance is not None:
                r_out = min(r_out, sink_clearance)
                r_in = min(r_in, 0.9 * r_out)
            ks = sorted(range(-kmax, kmax + 1), key=lambda k: (abs(k), -k))
            for k in ks:
                if k == 0:
                    continue
                for ph in (1.0, 1j):
                    out.append(BumpFourierField(c, k, r_in, r_out, ph, lat, f"c{ci}k{k}{'r' if ph == 1.0 else 'i'}"))
        if count is not None:
            out = out[:count]
        return cls(out)


# ---------------------------------------------------------------------------
# Schiffer derivative


def _field_on_quad(disc: Discretization, h, step=1e-6):
    """h and dh/dtheta at the quadrature points."""
    c = disc.contour
    hq = np.empty(disc.Q, complex)
    dh = np.empty(disc.Q, complex)
    for ci in range(len(c.components)):
        sel = disc.q_comp == ci
        th = disc.q_th[sel]
        if isinstance(h, ContourField):
            f = lambda t: np.asarray(h.on(ci, t), complex)
        else:
            f = lambda t: np.asarray(h(c.surface(ci, t)[0]), complex)
        hq[sel] = f(th)
        dh[sel] = (f(th + step) - f(th - step)) / (2 * step)
    return hq, dh


def _regular_diag(backend, s):
    """lim_{q -> p} C(p, q) - 1/(p - q)."""
    if isinstance(backend, SphereBackend):
        return np.zeros(np.shape(s), complex)
    s = backend.reduce(s)
    return -(backend.logderiv(s) + 1j * backend.kappa * s.imag)


def _cauchy_matrix(disc: Discretization):
    if getattr(disc, "_cmat", None) is None or disc._cmat[0] is not disc.q_s:
        be = disc.contour.backend
        with np.errstate(divide="ignore", invalid="ignore"):
            C = be.cauchy(disc.q_s[:, None], disc.q_s[None, :])
        disc._cmat = (disc.q_s, C, _regular_diag(be, disc.q_s))
    return disc._cmat[1], disc._cmat[2]


def pair_integral(disc: Discretization, W, hq, dh_ds) -> complex:
    """Product-rule value of int int (h(p) C(p,q) + h(q) C(q,p)) dmu(p) dmu(q).

    ``W`` are the quadrature masses, ``hq`` the values of h and ``dh_ds``
    its derivative in the surface coordinate; the diagonal uses the limit
    h'(p) + 2 h(p) R(p) of the pair.
    """
    C, R = _cauchy_matrix(disc)
    with np.errstate(invalid="ignore"):
        # the diagonal is infinite here and replaced just below
        M = hq[:, None] * C + hq[None, :] * C.T
    M[np.diag_indices(disc.Q)] = dh_ds + 2.0 * hq * R
    return complex(W @ M @ W)


def schiffer_derivative(mu: DiscreteMeasure, field: ExternalField | None, h) -> complex:
    """D_{V,h}(mu) for a vector field or contour field h."""
    d = mu.disc
    hq, dh = _field_on_quad(d, h)
    if not np.any(hq) and not np.any(dh):
        return 0j
    W = d.density_at_quad(mu.density) * d.q_w
    val = -pair_integral(d, W, hq, dh / d.q_ds)
    if field is not None:
        poles = [p for p, _ in field.poles(getattr(d.contour.backend, "lattice", None))]
        supp = W > 0
        for p in poles:
            if np.isfinite(p) and np.min(d.contour.backend.distance(d.q_s[supp], p)) < 1e-8:
                raise ContourError("pole of dV on the support")
        val += np.sum(W * hq * field.dV(d.q_s))
    return complex(val)


def criticality_check(mu: DiscreteMeasure, field, basis) -> dict:
    """max over the basis of |Re D_{V,h}(mu)|, with the per-field values."""
    if len(basis) == 0:
        raise ValueError("basis is empty")
    vals = [schiffer_derivative(mu, field, h) for h in basis]
    re = np.abs(np.real(vals))
    k = int(np.argmax(re))
    return dict(max_abs_re=float(re[k]), worst=getattr(list(basis)[k], "name", str(k)),
                values=[complex(v) for v in vals])


# ---------------------------------------------------------------------------
# residue gate


def residue_gate(field: ExternalField, p0, pinf=0j, lattice=None, tol=1e-9) -> dict:
    """Residues of dV at p0 and p_inf and the test r0 > 1, r_inf > -1."""
    poles = field.poles(lattice)
    dist = (lambda a, b: lattice.distance(a, b)) if lattice is not None else (lambda a, b: abs(a - b))
    r0 = None
    rinf = 0.0
    for p, r in poles:
        if np.isfinite(p) and np.isfinite(p0) and dist(p, p0) < tol:
            r0 = r
        elif (not np.isfinite(pinf) and not np.isfinite(p)) or (np.isfinite(pinf) and np.isfinite(p) and dist(p, pinf) < tol):
            rinf = r
    if r0 is None:
        raise GateError("dV has no pole at p0")
    others = [r for p, r in poles if r > 0 and not (np.isfinite(p) and dist(p, p0) < tol)
              and not (np.isfinite(p) and np.isfinite(pinf) and dist(p, pinf) < tol)]
    ok = bool(r0 > 1.0 and rinf > -1.0)
    return dict(r0=float(r0), r_inf=float(rinf), passed=ok, extra_positive=len(others))


# ---------------------------------------------------------------------------
# families and admissibility


@dataclass
class ContourFamily:
    """Contours around p0 avoiding delta-disks about p0 and p_inf (surface chart)."""

    p0: complex
    pinf: complex = 0j
    delta: float = 0.05
    kmax: int = 8
    n_components: int = 1
    sigma_symmetric: bool = False

    def to_dict(self):
        return dict(p0=[self.p0.real, self.p0.imag], pinf=[self.pinf.real, self.pinf.imag], delta=self.delta,
                    kmax=self.kmax, n_components=self.n_components, sigma_symmetric=self.sigma_symmetric)


def _winding(path, point):
    d = path - point
    ang = np.angle(np.append(d, d[0]))
    return int(np.rint(np.sum(np.angle(np.exp(1j * np.diff(ang)))) / TWO_PI))


def _unwrapped_surface(contour, ci, n=512):
    comp = contour.components[ci]
    th = np.linspace(0, comp.span, n, endpoint=not comp.closed)
    s, _ = contour.surface(ci, th)
    be = contour.backend
    if isinstance(be, TorusBackend):
        steps = be.lattice.nearest_difference(np.diff(s))
        s = s[0] + np.concatenate([[0], np.cumsum(steps)])
        if comp.closed:
            close = s[0] + be.lattice.nearest_difference(s[0] - s[-1]) + s[-1] - s[0]
            return s, close - s[0]
    return s, 0j


def admissible(contour: Contour, family: ContourFamily) -> tuple[bool, dict]:
    """Clearance, non-contractibility per component and total homology class."""
    be = contour.backend
    diag = dict(clearance=True, components=[], total_p0=0, total_pinf=0, translation=0j)
    lat = be.lattice if isinstance(be, TorusBackend) else None
    ok = True
    if len(contour.components) != family.n_components:
        diag["component_count"] = False
        ok = False
    trans = 0j
    for ci, comp in enumerate(contour.components):
        if not comp.closed:
            diag["components"].append(dict(closed=False))
            ok = False
            continue
        s, tr = _unwrapped_surface(contour, ci)
        trans += tr
        if lat is not None:
            dp0 = np.min(lat.distance(s, family.p0))
            dpi = np.min(lat.distance(s, family.pinf))
        else:
            dp0 = np.min(np.abs(s - family.p0))
            dpi = np.inf
        clear = bool(dp0 > family.delta and dpi > family.delta)
        w0 = wi = 0
        if abs(tr) < 1e-9:
            if lat is not None:
                w0 = sum(_winding(s, q) for q in _images(family.p0, s, lat))
                wi = sum(_winding(s, q) for q in _images(family.pinf, s, lat))
            else:
                w0 = _winding(s, family.p0)
        nontrivial = bool(w0 != 0 or wi != 0 or abs(tr) > 1e-9)
        diag["components"].append(dict(clearance=clear, winding_p0=w0, winding_pinf=wi, nontrivial=nontrivial,
                                       translation=[tr.real, tr.imag]))
        diag["total_p0"] += w0
        diag["total_pinf"] += wi
        ok = ok and clear and nontrivial
        diag["clearance"] = diag["clearance"] and clear
    diag["translation"] = [trans.real, trans.imag]
    homology = abs(trans) < 1e-9 and diag["total_p0"] - diag["total_pinf"] == 1
    diag["homology"] = bool(homology)
    ok = bool(ok and homology)
    if ok:
        try:
            contour.check(exclusion=0.0, n=256)
        except ContourError as e:
            diag["simple"] = str(e)
            ok = False
    return ok, diag


def _images(p, path, lat):
    """Lattice images of p inside the bounding box of the path."""
    lo_x, hi_x = path.real.min(), path.real.max()
    lo_y, hi_y = path.imag.min(), path.imag.max()
    T = lat.tau.imag
    out = []
    for n in range(int(math.floor((lo_y - p.imag) / T)) - 1, int(math.ceil((hi_y - p.imag) / T)) + 2):
        q0 = p + n * lat.tau
        for m in range(int(math.floor(lo_x - q0.real)) - 1, int(math.ceil(hi_x - q0.real)) + 2):
            q = q0 + m
            if lo_x - 1e-12 <= q.real <= hi_x + 1e-12 and lo_y - 1e-12 <= q.imag <= hi_y + 1e-12:
                out.append(q)
    return out


# ---------------------------------------------------------------------------
# flows


def _velocity(contour, ci, h):
    comp = contour.components[ci]
    be = contour.backend
    if comp.chart == "s":
        return lambda x: np.asarray(h(x), complex)
    sheet = 1 if comp.chart == "z1" else 2
    curve = be.curve
    return lambda x: np.asarray(h(curve.abel(x, sheet)), complex) / curve.du_dz(x, sheet)


def perturb(contour: Contour, h, eps, steps=8, kfit=None, family: ContourFamily | None = None) -> Contour:
    """Flow each component by dp/dt = h(p) for time eps (RK4) and refit it.

    The refit uses a trigonometric interpolant of degree ``kfit`` (default:
    at least 32 and at least the current degree).
    """
    if eps == 0:
        return Contour([Component(c.coeffs.copy(), c.closed, c.chart) for c in contour.components], contour.backend)
    comps = []
    for ci, comp in enumerate(contour.components):
        K = kfit if kfit is not None else max(32, comp.kmax)
        n = 4 * K + 4
        th = TWO_PI * np.arange(n) / n
        x = comp.point(th)
        v = _velocity(contour, ci, h)
        dt = eps / steps
        for _ in range(steps):
            k1 = v(x)
            k2 = v(x + 0.5 * dt * k1)
            k3 = v(x + 0.5 * dt * k2)
            k4 = v(x + dt * k3)
            x = x + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
        comps.append(Component(_fit_fourier(x, K), comp.closed, comp.chart))
    out = Contour(comps, contour.backend)
    if family is not None:
        ok, diag = admissible(out, family)
        if not ok:
            raise AdmissibilityError(f"perturbed contour is not admissible: {diag}")
    return out


def _fit_fourier(x, K):
    n = len(x)
    c = np.fft.fft(x) / n
    ks = np.arange(-K, K + 1)
    return c[ks % n]


def swept_area(a: Contour, b: Contour, ci=0, n=2048):
    """|area enclosed by b - area enclosed by a| for one closed component."""
    def area(c):
        comp = c.components[ci]
        th = TWO_PI * np.arange(n) / n
        z = comp.point(th)
        dz = comp.deriv(th)
        return 0.5 * np.mean(np.imag(np.conj(z) * dz)) * TWO_PI
    return abs(area(b) - area(a))


# ---------------------------------------------------------------------------
# parameterization and ascent


class CoefficientMap:
    """Real parameter vector <-> Fourier coefficients of a contour.

    With ``sigma_symmetric`` the coefficients are real (s(-theta) is the
    conjugate of s(theta)); otherwise real and imaginary parts are free.
    """

    def __init__(self, template: Contour, kmax, sigma_symmetric):
        self.template = template
        self.kmax = kmax
        self.sym = sigma_symmetric
        self.ncomp = len(template.components)
        self.per = (2 * kmax + 1) * (1 if sigma_symmetric else 2)

    @property
    def size(self):
        return self.per * self.ncomp

    def to_params(self, contour: Contour):
        out = []
        for comp in contour.components:
            c = np.zeros(2 * self.kmax + 1, complex)
            K = min(comp.kmax, self.kmax)
            c[self.kmax - K:self.kmax + K + 1] = comp.coeffs[comp.kmax - K:comp.kmax + K + 1]
            out.append(c.real if self.sym else np.concatenate([c.real, c.imag]))
        return np.concatenate(out)

    def to_contour(self, x):
        comps = []
        m = 2 * self.kmax + 1
        for ci, comp in enumerate(self.template.components):
            v = x[ci * self.per:(ci + 1) * self.per]
            c = v.astype(complex) if self.sym else v[:m] + 1j * v[m:]
            comps.append(Component(c, comp.closed, comp.chart))
        return Contour(comps, self.template.backend)

    def fields(self, contour: Contour):
        """Contour fields h_j = d s / d x_j in the surface chart."""
        out = []
        m = 2 * self.kmax + 1
        ks = np.arange(-self.kmax, self.kmax + 1)
        for ci, comp in enumerate(contour.components):
            for ph in ((1.0,) if self.sym else (1.0, 1j)):
                for k in ks:
                    out.append(ContourField(_coef_field(contour, ci, k, ph), f"c{ci}k{k}{'r' if ph == 1.0 else 'i'}"))
        return out


def _coef_field(contour, cj, k, ph):
    comp = contour.components[cj]

    def f(ci, th):
        th = np.asarray(th, float)
        if ci != cj:
            return np.zeros(th.shape, complex)
        v = ph * np.exp(1j * k * th)
        if comp.chart != "s":
            sheet = 1 if comp.chart == "z1" else 2
            v = v * contour.backend.curve.du_dz(comp.point(th), sheet)
        return v

    return f


@dataclass
class MaxMinResult:
    contour: Contour
    result: object
    energy: float
    gradient_norm: float
    criticality: dict | None
    energy_trace: list
    criticality_trace: list
    iterations: int
    converged: bool

    @property
    def measure(self):
        return self.result.measure


def maximize_energy(family: ContourFamily, field: ExternalField, seed: Contour, n=160, tol=1e-6,
                    max_iter=200, checkpoint=None, basis=None, lattice=None, log_every=1,
                    newton_polish=True, polish_below=1e-2, etol=1e-6, trust=0.02) -> MaxMinResult:
    """Maximize E_phi(F) over the Fourier coefficients of admissible contours.

    Ascent by BFGS with backtracking on the energy (admissibility acts as a
    barrier); the gradient entries are Re D_{V,h_j}(mu^F) for the
    coefficient fields h_j.  The energy is very stiff in the high Fourier
    modes, so once max |grad| < ``polish_below`` the iteration switches to
    Newton steps restricted to the eigendirections of negative curvature of
    a finite-difference Hessian (trust radius ``trust``).  Directions of
    nearly zero curvature only move the contour off the support and are
    left alone.  Iteration stops when max |grad| < tol or when a Newton
    step changes the energy by less than ``etol`` without increasing
    max |grad|.
    """
    gate = residue_gate(field, family.p0, family.pinf, lattice)
    if not gate["passed"]:
        raise GateError(f"residue gate failed: r0={gate['r0']}, r_inf={gate['r_inf']}")
    cmap = CoefficientMap(seed, family.kmax, family.sigma_symmetric)
    x = cmap.to_params(seed)
    ok, diag = admissible(cmap.to_contour(x), family)
    if not ok:
        raise AdmissibilityError(f"seed contour is not admissible: {diag}")

    cache = {}

    def evaluate(xv, x0=None):
        key = xv.tobytes()
        if key in cache:
            return cache[key]
        c = cmap.to_contour(xv)
        ok, _ = admissible(c, family)
        if not ok:
            cache[key] = None
            return None
        res = equilibrium_measure(c, field, n, x0=x0)
        g = np.array([schiffer_derivative(res.measure, field, h).real for h in cmap.fields(c)])
        if len(cache) > 64:
            cache.clear()
        cache[key] = (c, res, g)
        return cache[key]

    cur = evaluate(x)
    c, res, g = cur
    Hinv = np.eye(len(x)) * 1e-2
    etrace = [res.energy]
    ctrace = [float(np.max(np.abs(g)))]
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        gmax = float(np.max(np.abs(g)))
        if gmax < tol:
            converged = True
            break
        if newton_polish and gmax < polish_below:
            accepted = _filtered_newton(evaluate, x, g, res, trust)
            if accepted is not None:
                xn, (cn, resn, gn) = accepted
                gain = resn.energy - res.energy
                x, c, res, g = xn, cn, resn, gn
                etrace.append(res.energy)
                ctrace.append(float(np.max(np.abs(g))))
                if log_every and it % log_every == 0:
                    log.info("maxmin newton %d: E=%.12f max|grad|=%.3e", it, res.energy, ctrace[-1])
                _checkpoint(checkpoint, cmap, x, etrace, ctrace, family)
                if gain < etol and ctrace[-1] <= ctrace[-2]:
                    converged = True
                    break
                continue
        accepted = _line_search(evaluate, x, g, res, Hinv @ g)
        if accepted is None:
            Hinv = np.eye(len(x)) * 1e-2
            accepted = _line_search(evaluate, x, g, res, Hinv @ g)
        if accepted is None:
            if gmax < 10 * tol:
                converged = True
                break
            raise BoundaryStallError(f"line search failed at iteration {it} (max |grad| {gmax:.3e})")
        xn, (cn, resn, gn) = accepted
        s = xn - x
        y = -(gn - g)
        sy = s @ y
        if sy > 1e-14:
            rho = 1.0 / sy
            I = np.eye(len(x))
            Hinv = (I - rho * np.outer(s, y)) @ Hinv @ (I - rho * np.outer(y, s)) + rho * np.outer(s, s)
        x, c, res, g = xn, cn, resn, gn
        etrace.append(res.energy)
        ctrace.append(float(np.max(np.abs(g))))
        if log_every and it % log_every == 0:
            log.info("maxmin it %d: E=%.12f max|grad|=%.3e", it, res.energy, ctrace[-1])
        _checkpoint(checkpoint, cmap, x, etrace, ctrace, family)
    else:
        if not converged:
            raise MaxMinNonConvergence(f"no convergence in {max_iter} iterations (max |grad| {ctrace[-1]:.3e})")
    crit = None
    if basis is not None:
        crit = criticality_check(res.measure, field, basis)
    _checkpoint(checkpoint, cmap, x, etrace, ctrace, family)
    return MaxMinResult(c, res, res.energy, float(np.max(np.abs(g))), crit, etrace, ctrace, it, converged)


def _line_search(evaluate, x, g, res, d, shrink=0.5, tries=30):
    if d @ g <= 0:
        return None
    t = 1.0
    for _ in range(tries):
        xt = x + t * d
        nxt = evaluate(xt, res.measure.density)
        if nxt is not None and nxt[1].energy >= res.energy + 1e-4 * t * (g @ d) - 1e-12:
            return xt, nxt
        t *= shrink
    return None


def _filtered_newton(evaluate, x, g, res, trust, h=1e-5, floor=1e-8, tries=6):
    """Newton step on the negative-curvature eigenspace of a difference Hessian.

    Returns (x_new, evaluation) for a step that does not lower the energy,
    or None.
    """
    H = np.empty((len(x), len(x)))
    for j in range(len(x)):
        xp = x.copy()
        xp[j] += h
        r = evaluate(xp, res.measure.density)
        if r is None:
            return None
        H[:, j] = (r[2] - g) / h
    H = 0.5 * (H + H.T)
    w, V = np.linalg.eigh(H)
    keep = w < -floor * max(1.0, np.max(np.abs(w)))
    if not np.any(keep):
        return None
    step = V[:, keep] @ (-(V[:, keep].T @ g) / w[keep])
    norm = np.linalg.norm(step)
    if norm > trust:
        step *= trust / norm
    for _ in range(tries):
        nxt = evaluate(x + step, res.measure.density)
        if nxt is not None and nxt[1].energy >= res.energy - 1e-13:
            return x + step, nxt
        step = 0.5 * step
    return None


def _checkpoint(path, cmap, x, etrace, ctrace, family):
    if path is None:
        return
    c = cmap.to_contour(x)
    data = dict(family=family.to_dict(), contour=c.to_dict(), params=[float(v) for v in x],
                energy_trace=[float(e) for e in etrace], criticality_trace=[float(v) for v in ctrace])
    with open(path, "w") as fh:
        json.dump(data, fh, indent=1, sort_keys=True)
