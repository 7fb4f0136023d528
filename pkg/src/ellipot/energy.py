"""
Measures on contours, weighted Green energy and equilibrium problems.

A contour is a list of components.  Each component is a trigonometric
polynomial theta -> point, closed on [0, 2 pi) or open on [0, pi].  The
point lives either in the surface chart of the backend or, for curve
backends, in the z chart of one sheet ("z1" / "z2").  A measure is a
nonnegative piecewise-linear density in theta.

Quadrature is panel based: Gauss-Legendre on each panel between nodes, and
for nearby panel pairs the kernel is split as
``G = -log|theta - theta'| + R`` where the logarithm is integrated exactly
against the linear density and R is smooth.
"""
from __future__ import annotations

import csv
import io
import math
import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .elliptic import EllipticCurve
from .fields import ExternalField
from .kernels import CurveBackend, SphereBackend, TorusBackend
from .qp import simplex_qp

TWO_PI = 2.0 * math.pi


class ContourError(ValueError):
    pass


class NotPositiveDefiniteError(ValueError):
    pass


# ---------------------------------------------------------------------------
# contours


class Component:
    """theta -> sum_k c_k exp(i k theta), k = -K..K."""

    def __init__(self, coeffs, closed=True, chart="s"):
        c = np.asarray(coeffs, complex)
        if c.ndim != 1 or len(c) % 2 == 0:
            raise ContourError("coefficients must have odd length 2K+1")
        self.coeffs = c
        self.kmax = (len(c) - 1) // 2
        self.closed = bool(closed)
        if chart not in ("s", "z1", "z2"):
            raise ContourError(f"unknown chart {chart!r}")
        self.chart = chart

    @property
    def span(self):
        return TWO_PI if self.closed else math.pi

    @property
    def ks(self):
        return np.arange(-self.kmax, self.kmax + 1)

    def point(self, th):
        th = np.asarray(th, float)
        return np.exp(1j * th[..., None] * self.ks) @ self.coeffs

    def deriv(self, th):
        th = np.asarray(th, float)
        return np.exp(1j * th[..., None] * self.ks) @ (1j * self.ks * self.coeffs)

    def deriv2(self, th):
        th = np.asarray(th, float)
        return np.exp(1j * th[..., None] * self.ks) @ (-(self.ks ** 2) * self.coeffs)

    @classmethod
    def circle(cls, center, radius, chart="s", kmax=1):
        c = np.zeros(2 * kmax + 1, complex)
        c[kmax] = center
        c[kmax + 1] = radius
        return cls(c, True, chart)

    @classmethod
    def ellipse(cls, center, a, b, chart="s", kmax=1):
        # a cos + i b sin = (a+b)/2 e^{i th} + (a-b)/2 e^{-i th}
        c = np.zeros(2 * kmax + 1, complex)
        c[kmax] = center
        c[kmax + 1] = 0.5 * (a + b)
        c[kmax - 1] = 0.5 * (a - b)
        return cls(c, True, chart)

    @classmethod
    def segment(cls, a, b, chart="s"):
        """Open arc from a to b with cosine node clustering: (a+b)/2 - (b-a)/2 cos."""
        a, b = complex(a), complex(b)
        c = np.array([-(b - a) / 4.0, (a + b) / 2.0, -(b - a) / 4.0])
        return cls(c, False, chart)

    def copy_with(self, coeffs):
        return Component(coeffs, self.closed, self.chart)

    def to_dict(self):
        return dict(coeffs_re=self.coeffs.real.tolist(), coeffs_im=self.coeffs.imag.tolist(),
                    closed=self.closed, chart=self.chart)

    @classmethod
    def from_dict(cls, d):
        return cls(np.asarray(d["coeffs_re"]) + 1j * np.asarray(d["coeffs_im"]), d["closed"], d["chart"])


class Contour:
    """A finite union of components on a backend."""

    def __init__(self, components, backend):
        self.components = list(components)
        self.backend = backend
        for comp in self.components:
            if comp.chart != "s" and not isinstance(backend, CurveBackend):
                raise ContourError("z charts need a curve backend")

    def surface(self, ci, th):
        """Surface coordinate and its theta-derivative."""
        comp = self.components[ci]
        x = comp.point(th)
        dx = comp.deriv(th)
        if comp.chart == "s":
            return x, dx
        sheet = 1 if comp.chart == "z1" else 2
        curve = self.backend.curve
        return curve.abel(x, sheet), curve.du_dz(x, sheet) * dx

    def chart_points(self, ci, th):
        """(z, sheet) for display; surface charts on curves are inverted."""
        comp = self.components[ci]
        x = comp.point(th)
        if comp.chart in ("z1", "z2"):
            return x, np.full(x.shape, 1 if comp.chart == "z1" else 2)
        if isinstance(self.backend, CurveBackend):
            return self.backend.curve.abel_inverse(x)
        return x, np.zeros(x.shape, int)

    def check(self, exclusion=0.0, poles=(), n=400):
        """Raise if a component self-intersects or comes too close to the sink or poles."""
        be = self.backend
        for ci, comp in enumerate(self.components):
            th = np.linspace(0, comp.span, n, endpoint=not comp.closed)
            s, _ = self.surface(ci, th)
            if not isinstance(be, SphereBackend):
                if np.min(be.distance_to_sink(s)) <= max(exclusion, be.guard):
                    raise ContourError("contour passes through the sink")
            for p in poles:
                if not np.isfinite(p):
                    continue
                if np.min(be.distance(s, p)) <= max(exclusion, be.guard):
                    raise ContourError("contour passes through a pole of the field")
            if _self_intersects(comp.point(th), comp.closed):
                raise ContourError("component self-intersects")
        return True

    def to_dict(self):
        return [c.to_dict() for c in self.components]


def _self_intersects(z, closed):
    a = z
    b = np.roll(z, -1) if closed else z[1:]
    a = a if closed else z[:-1]
    n = len(a)
    p = a[:, None]
    r = (b - a)[:, None]
    q = a[None, :]
    s = (b - a)[None, :]
    cross = lambda u, v: u.real * v.imag - u.imag * v.real
    rxs = cross(r, s)
    with np.errstate(divide="ignore", invalid="ignore"):
        t = cross(q - p, s) / rxs
        u = cross(q - p, r) / rxs
    idx = np.arange(n)
    adj = np.abs(idx[:, None] - idx[None, :])
    if closed:
        adj = np.minimum(adj, n - adj)
    # half-open parameter ranges so crossings through a shared vertex count once
    hit = (rxs != 0) & (t >= 0) & (t < 1) & (u >= 0) & (u < 1) & (adj > 1)
    return bool(np.any(hit))


# ---------------------------------------------------------------------------
# discretization


def _gauss(m):
    x, w = np.polynomial.legendre.leggauss(m)
    return 0.5 * (x + 1.0), 0.5 * w


def _log_moments(alpha, beta, t):
    """int_alpha^beta log|th - t| dth and int_alpha^beta (th - t) log|th - t| dth."""
    def F0(x):
        with np.errstate(divide="ignore", invalid="ignore"):
            v = x * np.log(np.abs(x)) - x
        return np.where(x == 0, 0.0, v)

    def F1(x):
        with np.errstate(divide="ignore", invalid="ignore"):
            v = 0.5 * x * x * np.log(np.abs(x)) - 0.25 * x * x
        return np.where(x == 0, 0.0, v)

    xa, xb = alpha - t, beta - t
    return F0(xb) - F0(xa), F1(xb) - F1(xa)


class Discretization:
    """Panels, Gauss points and hat-function interpolation for a contour."""

    def __init__(self, contour: Contour, n, m=6, m_log=16):
        self.contour = contour
        ncomp = len(contour.components)
        ns = [int(n)] * ncomp if np.isscalar(n) else [int(v) for v in n]
        if len(ns) != ncomp:
            raise ContourError("one node count per component")
        self.ns = ns
        self.m = m
        self.m_log = m_log
        gx, gw = _gauss(m)
        node_th, node_comp, node_off = [], [], [0]
        P = dict(comp=[], a=[], b=[], i0=[], i1=[], local=[], npan=[])
        q = dict(th=[], w=[], comp=[], panel=[], l1=[])
        g0 = 0
        pid = 0
        for ci, comp in enumerate(contour.components):
            nn = ns[ci]
            if comp.closed:
                th = TWO_PI * np.arange(nn) / nn
                npan = nn
                a = th
                b = np.append(th[1:], TWO_PI)
                i0 = g0 + np.arange(nn)
                i1 = g0 + (np.arange(nn) + 1) % nn
            else:
                th = math.pi * np.arange(nn) / (nn - 1)
                npan = nn - 1
                a, b = th[:-1], th[1:]
                i0 = g0 + np.arange(nn - 1)
                i1 = i0 + 1
            node_th.append(th)
            node_comp.append(np.full(nn, ci))
            for k in range(npan):
                P["comp"].append(ci)
                P["a"].append(a[k])
                P["b"].append(b[k])
                P["i0"].append(i0[k])
                P["i1"].append(i1[k])
                P["local"].append(k)
                P["npan"].append(npan)
                h = b[k] - a[k]
                q["th"].append(a[k] + h * gx)
                q["w"].append(h * gw)
                q["comp"].append(np.full(m, ci))
                q["panel"].append(np.full(m, pid))
                q["l1"].append(gx)
                pid += 1
            g0 += nn
            node_off.append(g0)
        self.N = g0
        self.node_th = np.concatenate(node_th)
        self.node_comp = np.concatenate(node_comp)
        self.node_off = node_off
        self.pan = {k: np.asarray(v) for k, v in P.items()}
        self.npanels = len(self.pan["a"])
        self.q_th = np.concatenate(q["th"])
        self.q_w = np.concatenate(q["w"])
        self.q_comp = np.concatenate(q["comp"])
        self.q_panel = np.concatenate(q["panel"])
        l1 = np.concatenate(q["l1"])
        self.Q = len(self.q_th)
        rows = np.repeat(np.arange(self.Q), 2)
        cols = np.stack([self.pan["i0"][self.q_panel], self.pan["i1"][self.q_panel]], 1).ravel()
        vals = np.stack([1.0 - l1, l1], 1).ravel()
        self.Phi = sp.csr_matrix((vals, (rows, cols)), shape=(self.Q, self.N))
        self.B = sp.csr_matrix(self.Phi.multiply(self.q_w[:, None]))
        self.mass_vector = np.asarray(self.B.sum(axis=0)).ravel()
        self.refresh_geometry()

    def refresh_geometry(self):
        s = np.empty(self.Q, complex)
        ds = np.empty(self.Q, complex)
        for ci in range(len(self.contour.components)):
            sel = self.q_comp == ci
            s[sel], ds[sel] = self.contour.surface(ci, self.q_th[sel])
        self.q_s, self.q_ds = s, ds
        ns = np.empty(self.N, complex)
        nds = np.empty(self.N, complex)
        for ci in range(len(self.contour.components)):
            sel = self.node_comp == ci
            ns[sel], nds[sel] = self.contour.surface(ci, self.node_th[sel])
        self.node_s, self.node_ds = ns, nds

    def with_contour(self, contour):
        d = Discretization.__new__(Discretization)
        d.__dict__.update(self.__dict__)
        d.contour = contour
        d.refresh_geometry()
        return d

    # -- panel geometry ---------------------------------------------------

    def _cyc(self, ci):
        return self.contour.components[ci].closed

    def _even(self, ci):
        """Open component with x(-th) = x(th), i.e. square-root ends at 0 and pi."""
        comp = self.contour.components[ci]
        return (not comp.closed) and np.allclose(comp.coeffs, comp.coeffs[::-1], rtol=0, atol=1e-14)

    def near_panel_pairs(self):
        """Panel pairs carrying a logarithmic singularity.

        Returns arrays (a, b, sign, off): the kernel on panels a x b is
        singular along th = sign * th' + off.  Direct pairs on one component
        at index distance <= 1 have sign +1 (off = 0 or +-2 pi across the
        seam of closed components).  Even open components also get the
        reflected pairs near both ends (sign -1, off = 0 or 2 pi).
        """
        if getattr(self, "_pairs", None) is not None:
            return self._pairs
        seen = {}
        pc, loc, npan = self.pan["comp"], self.pan["local"], self.pan["npan"]
        for a in range(self.npanels):
            ci = pc[a]
            first = a - loc[a]
            for d in (-1, 0, 1):
                k = loc[a] + d
                off = 0.0
                if self._cyc(ci):
                    if k < 0:
                        k += npan[a]
                        off = -TWO_PI
                    elif k >= npan[a]:
                        k -= npan[a]
                        off = TWO_PI
                elif k < 0 or k >= npan[a]:
                    continue
                seen.setdefault((first + k, a, 1.0), off)
            if self._even(ci):
                last = npan[a] - 1
                for k in range(npan[a]):
                    if loc[a] + k <= 1:
                        seen.setdefault((first + k, a, -1.0), 0.0)
                    if loc[a] + k >= 2 * last - 1:
                        seen.setdefault((first + k, a, -1.0, 1), TWO_PI)
        a_, b_, sg, of = [], [], [], []
        for key, off in seen.items():
            # key[0] is the panel of th', key[1] the panel of th
            b_.append(key[0])
            a_.append(key[1])
            sg.append(key[2])
            of.append(off)
        self._pairs = (np.array(a_, int), np.array(b_, int), np.array(sg), np.array(of))
        return self._pairs

    def near_terms(self, ci, t):
        """(panel, image, sign) with the image of t within one panel width."""
        comp = self.contour.components[ci]
        sel = self.pan["comp"] == ci
        pa, pb = self.pan["a"], self.pan["b"]
        w = pb - pa
        imgs = [(t, 1.0)]
        if comp.closed:
            imgs += [(t - TWO_PI, 1.0), (t + TWO_PI, 1.0)]
        elif self._even(ci):
            imgs += [(-t, -1.0), (TWO_PI - t, -1.0)]
        out = []
        for tl, sgn in imgs:
            dist = np.maximum(pa - tl, tl - pb)
            for p in np.flatnonzero(sel & (dist <= w * 1.0001)):
                out.append((int(p), tl, sgn))
        return out

    # -- energy matrix ------------------------------------------------------

    def green_matrix_modified(self):
        """Green matrix at quadrature points with log|th - th'| added on near pairs."""
        be = self.contour.backend
        s = self.q_s
        with np.errstate(divide="ignore", invalid="ignore"):
            G = be.green(s[:, None], s[None, :])
        G[np.diag_indices(self.Q)] = be.green_regular(s) - np.log(np.abs(self.q_ds))
        A, Bp, sg, of = self.near_panel_pairs()
        qidx = [np.flatnonzero(self.q_panel == p) for p in range(self.npanels)]
        for a, b, g, o in zip(A, Bp, sg, of):
            ia, ib = qidx[a], qidx[b]
            d = self.q_th[ia][:, None] - (g * self.q_th[ib][None, :] + o)
            with np.errstate(divide="ignore"):
                L = np.log(np.abs(d))
            if a == b and g > 0:
                L[np.diag_indices(len(ia))] = 0.0
            G[np.ix_(ia, ib)] += L
        return G

    def log_matrix(self):
        """-int int log|th - th'| phi_i(th) phi_j(th') over near pairs (exact inner)."""
        A, Bp, sg, of = self.near_panel_pairs()
        E = np.zeros((self.N, self.N))
        if len(A) == 0:
            return E
        gx, gw = _gauss(self.m_log)
        a0 = self.pan["a"][A]
        a1 = self.pan["b"][A]
        # the th' panel mapped by th' -> sign th' + off
        e0 = sg * self.pan["a"][Bp] + of
        e1 = sg * self.pan["b"][Bp] + of
        lo = np.minimum(e0, e1)
        hb = np.abs(e1 - e0)
        ha = a1 - a0
        t = lo[:, None] + hb[:, None] * gx[None, :]
        wt = hb[:, None] * gw[None, :]
        M0, M1 = _log_moments(a0[:, None], a1[:, None], t)
        # phi_{i0}(th) = (a1 - th)/ha = (a1 - t)/ha - (th - t)/ha
        I_i0 = ((a1[:, None] - t) * M0 - M1) / ha[:, None]
        I_i1 = ((t - a0[:, None]) * M0 + M1) / ha[:, None]
        phj0 = (t - e1[:, None]) / (e0 - e1)[:, None]
        phj1 = (t - e0[:, None]) / (e1 - e0)[:, None]
        ia0, ia1 = self.pan["i0"][A], self.pan["i1"][A]
        ib0, ib1 = self.pan["i0"][Bp], self.pan["i1"][Bp]
        for ii, Ii in ((ia0, I_i0), (ia1, I_i1)):
            for jj, pj in ((ib0, phj0), (ib1, phj1)):
                np.add.at(E, (ii, jj), -np.sum(wt * Ii * pj, axis=1))
        return E

    def energy_matrix(self):
        G = self.green_matrix_modified()
        GB = np.asarray((self.B.T @ G.T).T)
        E = np.asarray(self.B.T @ GB) + self.log_matrix()
        return 0.5 * (E + E.T)

    def field_vector(self, field: ExternalField):
        return np.asarray(self.B.T @ field.phi(self.q_s)).ravel()

    # -- potentials -----------------------------------------------------------

    def density_at_quad(self, rho):
        return np.asarray(self.Phi @ rho).ravel()

    def _panel_linear(self, rho, p, tl):
        """Linear density of panel p written as rho(tl) + slope (th - tl)."""
        a0, a1 = self.pan["a"][p], self.pan["b"][p]
        r0, r1 = rho[self.pan["i0"][p]], rho[self.pan["i1"][p]]
        slope = (r1 - r0) / (a1 - a0)
        return a0, a1, r0 + slope * (tl - a0), slope

    def potential_on_contour(self, rho, ci, th0):
        """int G(p(th0), q) dmu(q) for targets on component ci."""
        be = self.contour.backend
        th0 = np.atleast_1d(np.asarray(th0, float))
        s0, _ = self.contour.surface(ci, th0)
        rq = self.density_at_quad(rho) * self.q_w
        with np.errstate(divide="ignore", invalid="ignore"):
            G = be.green(s0[:, None], self.q_s[None, :])
        out = np.zeros(len(th0))
        for k, t in enumerate(th0):
            row = G[k].copy()
            corr = 0.0
            for p, tl, _ in self.near_terms(ci, t):
                q = self.q_panel == p
                row[q] += np.log(np.abs(self.q_th[q] - tl))
                a0, a1, rt, slope = self._panel_linear(rho, p, tl)
                M0, M1 = _log_moments(a0, a1, tl)
                corr -= rt * M0 + slope * M1
            out[k] = np.sum(row * rq) + corr
        return out

    def potential_at_nodes(self, rho):
        out = np.empty(self.N)
        for ci in range(len(self.contour.components)):
            sel = self.node_comp == ci
            out[sel] = self.potential_on_contour(rho, ci, self.node_th[sel])
        return out

    def cauchy_sum_on_contour(self, rho, ci, th0):
        """C_+ + C_- = 2 PV int C(p, q) dmu(q) at targets p = p(th0) on component ci.

        The singular part -1/(s'(th0)(th - th0)) (and its reflected images
        on even open arcs) is removed on nearby panels and integrated
        exactly against the linear density, as a principal value where needed.
        """
        be = self.contour.backend
        th0 = np.atleast_1d(np.asarray(th0, float))
        s0, ds0 = self.contour.surface(ci, th0)
        rq = self.density_at_quad(rho) * self.q_w
        K = be.cauchy(s0[:, None], self.q_s[None, :])
        out = np.empty(len(th0), complex)
        for k, t in enumerate(th0):
            row = K[k].copy()
            corr = 0.0
            for p, tl, sgn in self.near_terms(ci, t):
                q = self.q_panel == p
                row[q] += sgn / (ds0[k] * (self.q_th[q] - tl))
                a0, a1, rt, slope = self._panel_linear(rho, p, tl)
                lo, hi = abs(a0 - tl), abs(a1 - tl)
                # a zero endpoint cancels against the neighbouring panel
                pv = rt * ((math.log(hi) if hi > 0 else 0.0) - (math.log(lo) if lo > 0 else 0.0))
                corr -= sgn * (pv + slope * (a1 - a0)) / ds0[k]
            out[k] = 2.0 * (np.sum(row * rq) + corr)
        return out

    def integrate_off(self, rho, targets, kernel, near_factor=3.0, max_level=16):
        """int K(p, q) dmu(q) for off-contour targets with adaptive panel refinement.

        ``kernel(p, s)`` takes broadcastable surface coordinates.
        """
        be = self.contour.backend
        targets = np.atleast_1d(np.asarray(targets, complex))
        rq = self.density_at_quad(rho) * self.q_w
        K = kernel(targets[:, None], self.q_s[None, :])
        # panel sizes in the surface chart
        plen = np.zeros(self.npanels)
        np.add.at(plen, self.q_panel, np.abs(self.q_ds) * self.q_w)
        gx, gw = _gauss(self.m)
        out = np.zeros(len(targets), dtype=K.dtype)
        for k, p in enumerate(targets):
            dist_q = be.distance(p, self.q_s)
            dpan = np.full(self.npanels, np.inf)
            np.minimum.at(dpan, self.q_panel, dist_q)
            near_p = np.flatnonzero(dpan < near_factor * plen)
            row = K[k] * rq
            keep = ~np.isin(self.q_panel, near_p)
            val = np.sum(row[keep])
            for pidx in near_p:
                ci = self.pan["comp"][pidx]
                a0, a1 = self.pan["a"][pidx], self.pan["b"][pidx]
                r0, r1 = rho[self.pan["i0"][pidx]], rho[self.pan["i1"][pidx]]
                lev = int(np.clip(math.ceil(math.log2(max(near_factor * plen[pidx] / max(dpan[pidx], 1e-300), 1.0))) + 1, 0, max_level))
                nsub = 2 ** lev
                edges = np.linspace(a0, a1, nsub + 1)
                h = (a1 - a0) / nsub
                th = (edges[:-1, None] + h * gx[None, :]).ravel()
                w = np.tile(h * gw, nsub)
                s, ds = self.contour.surface(ci, th)
                dens = r0 + (r1 - r0) * (th - a0) / (a1 - a0)
                val += np.sum(kernel(p, s) * dens * w)
            out[k] = val
        return out

    def potential_off(self, rho, targets):
        be = self.contour.backend
        return self.integrate_off(rho, targets, lambda p, s: be.green(p, s)).real

    def cauchy_transform(self, rho, targets):
        be = self.contour.backend
        return self.integrate_off(rho, targets, lambda p, s: be.cauchy(p, s))


# ---------------------------------------------------------------------------
# measures


@dataclass
class DiscreteMeasure:
    """Piecewise-linear density in the contour parameter."""

    disc: Discretization
    density: np.ndarray
    kkt: float | None = None
    c: float | None = None

    def __post_init__(self):
        self.density = np.asarray(self.density, float)
        if self.density.shape != (self.disc.N,):
            raise ContourError("density must have one value per node")
        if np.any(self.density < -1e-14):
            raise ValueError("density must be nonnegative")

    @property
    def contour(self):
        return self.disc.contour

    @property
    def mass(self) -> float:
        return float(self.disc.mass_vector @ self.density)

    def normalized(self):
        return DiscreteMeasure(self.disc, self.density / self.mass, self.kkt, self.c)

    def pushed(self, contour):
        """Same parameter density carried by another contour (push-forward)."""
        return DiscreteMeasure(self.disc.with_contour(contour), self.density.copy())

    def support_mask(self, rel=1e-8):
        return self.density > rel * np.max(self.density)

    def to_csv(self) -> str:
        buf = io.StringIO()
        wr = csv.writer(buf, lineterminator="\n")
        wr.writerow(["component", "theta", "z_re", "z_im", "sheet", "density"])
        d = self.disc
        for ci in range(len(d.contour.components)):
            sel = np.flatnonzero(d.node_comp == ci)
            z, sheet = d.contour.chart_points(ci, d.node_th[sel])
            for k, j in enumerate(sel):
                wr.writerow([ci, f"{d.node_th[j]:.12g}", f"{z[k].real:.12g}", f"{z[k].imag:.12g}",
                             int(sheet[k]), f"{self.density[j]:.12g}"])
        return buf.getvalue()


def measure_from_function(contour, n, f, m=6, normalize=True):
    """Sample a density f(component, theta) at the nodes."""
    disc = Discretization(contour, n, m=m)
    rho = np.empty(disc.N)
    for ci in range(len(contour.components)):
        sel = disc.node_comp == ci
        rho[sel] = f(ci, disc.node_th[sel])
    mu = DiscreteMeasure(disc, rho)
    return mu.normalized() if normalize else mu


def uniform_measure(contour, n, m=6):
    return measure_from_function(contour, n, lambda ci, th: np.ones_like(th), m=m)


# ---------------------------------------------------------------------------
# operations


def energy(mu: DiscreteMeasure, field: ExternalField | None = None, E=None) -> float:
    """Weighted energy  int int G dmu dmu + int phi dmu."""
    if np.max(mu.density) > 0 and np.count_nonzero(mu.density) == 1 and mu.disc.N > 2:
        raise ValueError("point masses have infinite energy")
    d = mu.disc
    if E is None:
        E = d.energy_matrix()
    val = float(mu.density @ E @ mu.density)
    if field is not None:
        val += float(d.field_vector(field) @ mu.density)
    return val


@dataclass
class EquilibriumResult:
    measure: DiscreteMeasure
    c: float
    kkt: float
    energy: float
    min_eig: float


def equilibrium_measure(contour: Contour, field: ExternalField | None, n, m=6, x0=None,
                        check_pd=True) -> EquilibriumResult:
    """Minimize the discretized weighted energy over probability densities."""
    field = field if field is not None else ExternalField.zero()
    disc = Discretization(contour, n, m=m)
    E = disc.energy_matrix()
    f = disc.field_vector(field)
    mv = disc.mass_vector
    min_eig = float("nan")
    if check_pd:
        # positive definiteness on mass-zero directions
        Qb, _ = np.linalg.qr(np.column_stack([mv, np.eye(disc.N)[:, : disc.N - 1]]))
        Z = Qb[:, 1:]
        min_eig = float(np.linalg.eigvalsh(Z.T @ E @ Z).min())
        if min_eig <= 0:
            raise NotPositiveDefiniteError(f"energy matrix not positive definite (min eig {min_eig:.3e})")
    res = simplex_qp(2.0 * E, f, mv, x0=x0)
    mu = DiscreteMeasure(disc, res.x, res.kkt, res.c)
    en = float(res.x @ E @ res.x + f @ res.x)
    return EquilibriumResult(mu, res.c, res.kkt, en, min_eig)


@dataclass
class VariationalReport:
    c: float
    sup_on_support: float
    min_off_support: float
    values: np.ndarray


def variational_check(mu: DiscreteMeasure, field: ExternalField | None = None, rel_support=1e-6) -> VariationalReport:
    """Deviation of 2 int G dmu + phi from its weighted mean on the support."""
    d = mu.disc
    U = d.potential_at_nodes(mu.density)
    phi = field.phi(d.node_s) if field is not None else 0.0
    v = 2.0 * U + phi
    supp = mu.support_mask(rel_support)
    wts = mu.density * d.mass_vector
    c = float(np.sum(wts[supp] * v[supp]) / np.sum(wts[supp]))
    sup = float(np.max(np.abs(v[supp] - c)))
    off = float(np.min(v[~supp] - c)) if np.any(~supp) else float("inf")
    return VariationalReport(c, sup, off, v)


class BranchCrossingWarning(UserWarning):
    pass


def _segments_cross(a, b, pts):
    """Whether the segment [a, b] crosses the polyline through pts."""
    c, d = pts[:-1], pts[1:]
    cross = lambda u, v: u.real * v.imag - u.imag * v.real
    r = b - a
    sv = d - c
    den = cross(r, sv)
    with np.errstate(divide="ignore", invalid="ignore"):
        t = cross(c - a, sv) / den
        u = cross(c - a, r) / den
    return bool(np.any((den != 0) & (t >= 0) & (t <= 1) & (u >= 0) & (u <= 1)))


def g_function(mu: DiscreteMeasure, p, anchor, via=(), n_panels=8, m=16):
    """Complex g with Re g(p) = -int G(p, q) dmu(q).

    The imaginary part is fixed by continuation of g' (the Cauchy
    transform) along the polyline anchor -> via... -> p in the surface
    chart, with Im g(anchor) = 0.  A warning is issued when the path crosses
    the support, since the branch then changes.
    """
    d = mu.disc
    p = complex(p)
    pts = [complex(anchor)] + [complex(v) for v in via] + [p]
    if isinstance(d.contour.backend, TorusBackend):
        lat = d.contour.backend.lattice
        for k in range(1, len(pts)):
            pts[k] = pts[k - 1] + complex(lat.nearest_difference(pts[k] - pts[k - 1]))
    supp = mu.support_mask()
    gx, gw = _gauss(m)
    t = ((np.arange(n_panels)[:, None] + gx[None, :]) / n_panels).ravel()
    w = np.tile(gw / n_panels, n_panels)
    im = 0.0
    for a, b in zip(pts[:-1], pts[1:]):
        for ci in range(len(d.contour.components)):
            sel = (d.node_comp == ci) & supp
            if np.count_nonzero(sel) > 1:
                ns = d.node_s[sel]
                if d.contour.components[ci].closed and np.all(sel[d.node_comp == ci]):
                    ns = np.append(ns, ns[0])
                jumps = np.abs(np.diff(ns)) < 0.25
                if any(_segments_cross(a, b, ns[k:k + 2]) for k in np.flatnonzero(jumps)):
                    warnings.warn("continuation path crosses the support", BranchCrossingWarning)
        ct = d.cauchy_transform(mu.density, a + (b - a) * t)
        im += float(np.imag(np.sum(ct * w) * (b - a)))
    re = -float(d.potential_off(mu.density, [p])[0])
    return complex(re, im)


@dataclass
class SPropertyReport:
    real_constants: list
    imag_constants: list
    real_residual: float
    imag_residual: float
    per_component_real: list
    per_component_imag: list


def boundary_cauchy(mu: DiscreteMeasure, ci, th, h=(1e-3, 5e-4)):
    """Side limits C_+ (left) and C_- (right) of the Cauchy transform.

    Offsets are taken along the unit normal in the chart of the component
    and extrapolated linearly (Richardson) from the two distances in ``h``.
    """
    d = mu.disc
    c = d.contour
    comp = c.components[ci]
    th = np.atleast_1d(np.asarray(th, float))
    x = comp.point(th)
    dx = comp.deriv(th)
    nrm = 1j * dx / np.abs(dx)
    s, ds = c.surface(ci, th)

    def to_s(pts):
        if comp.chart == "s":
            return pts
        return c.backend.curve.abel(pts, 1 if comp.chart == "z1" else 2)

    h1, h2 = h
    out = []
    for side in (1.0, -1.0):
        c1 = d.cauchy_transform(mu.density, to_s(x + side * h1 * nrm))
        c2 = d.cauchy_transform(mu.density, to_s(x + side * h2 * nrm))
        out.append((h1 * c2 - h2 * c1) / (h1 - h2))
    return out[0], out[1], s, ds


def s_property_check(mu: DiscreteMeasure, field: ExternalField | None = None, h=(1e-3, 5e-4),
                     rel_support=1e-6, method="offset") -> SPropertyReport:
    """Constancy of Re and Im of g_+ + g_- - V along each support component.

    The real part is -2 U - phi at the support nodes.  The imaginary part is
    recovered by integrating its tangential derivative
    Im[(C_+ + C_- - V') ds/dtheta] along each run of support nodes
    (trapezoid rule).  ``method`` selects how C_+ + C_- is obtained:
    "offset" (normal offsets with Richardson extrapolation) or "pv"
    (twice the principal value on the contour).
    """
    if method not in ("offset", "pv"):
        raise ValueError(f"unknown method {method!r}")
    d = mu.disc
    U = d.potential_at_nodes(mu.density)
    phi = field.phi(d.node_s) if field is not None else np.zeros(d.N)
    supp = mu.support_mask(rel_support)
    rc, ic, rr, ir = [], [], [], []
    for ci, comp in enumerate(d.contour.components):
        sel = np.flatnonzero((d.node_comp == ci) & supp)
        if len(sel) == 0:
            continue
        re_vals = -2.0 * U[sel] - phi[sel]
        cre = float(np.sum(re_vals * mu.density[sel]) / np.sum(mu.density[sel]))
        rc.append(cre)
        rr.append(float(np.max(np.abs(re_vals - cre))))
        worst = 0.0
        consts = []
        for run in _support_runs(sel - d.node_off[ci], d.ns[ci], comp.closed):
            th = d.node_th[d.node_off[ci] + (run % d.ns[ci])]
            if comp.closed:
                th = np.unwrap(th)
            if len(th) < 2:
                continue
            if method == "offset":
                cp, cm, s, ds = boundary_cauchy(mu, ci, th, h)
                tot = cp + cm
            else:
                s, ds = d.contour.surface(ci, th)
                tot = d.cauchy_sum_on_contour(mu.density, ci, th)
            dV = field.dV(s) if field is not None else 0.0
            deriv = np.imag((tot - dV) * ds)
            cum = np.concatenate([[0.0], np.cumsum(0.5 * (deriv[1:] + deriv[:-1]) * np.diff(th))])
            consts.append(float(np.mean(cum)))
            worst = max(worst, float(np.max(np.abs(cum - np.mean(cum)))))
        ic.append(consts)
        ir.append(worst)
    return SPropertyReport(rc, ic, max(rr) if rr else 0.0, max(ir) if ir else 0.0, rr, ir)


def _support_runs(idx, n, closed):
    """Runs of consecutive node indices, excluding the run end nodes.

    A full closed component gives one run that wraps around to its start.
    """
    idx = np.sort(np.asarray(idx))
    if closed and len(idx) == n:
        return [np.arange(n + 1)]
    runs = np.split(idx, np.flatnonzero(np.diff(idx) != 1) + 1)
    if closed and len(runs) > 1 and runs[0][0] == 0 and runs[-1][-1] == n - 1:
        runs = [np.concatenate([runs[-1], runs[0] + n])] + runs[1:-1]
    # the density vanishes at run ends; stay inside
    return [r[1:-1] for r in runs if len(r) > 3]
