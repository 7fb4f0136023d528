"""
External fields phi = sum_j r_j log|f_j| built from meromorphic primitives.

Every primitive is evaluated in the surface chart of its backend (plane
coordinate for the sphere, flat coordinate u for the torus and curves) and
knows its divisor, so that the pole list of dV follows from the
coefficients.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .elliptic import EllipticCurve, Lattice, _theta1_series


class FieldError(ValueError):
    pass


class Rational:
    """Rational function const * prod(z - a) / prod(z - b) on the sphere."""

    def __init__(self, zeros=(), poles=(), const=1.0, tag="rational"):
        self.zeros = [complex(a) for a in zeros]
        self.poles = [complex(b) for b in poles]
        self.const = complex(const)
        self.tag = tag

    def log_abs(self, s):
        s = np.asarray(s, complex)
        out = np.full(s.shape, math.log(abs(self.const)))
        for a in self.zeros:
            out = out + np.log(np.abs(s - a))
        for b in self.poles:
            out = out - np.log(np.abs(s - b))
        return out

    def dlog(self, s):
        s = np.asarray(s, complex)
        out = np.zeros(s.shape, complex)
        for a in self.zeros:
            out = out + 1.0 / (s - a)
        for b in self.poles:
            out = out - 1.0 / (s - b)
        return out

    def value(self, s):
        s = np.asarray(s, complex)
        out = np.full(s.shape, self.const, dtype=complex)
        for a in self.zeros:
            out = out * (s - a)
        for b in self.poles:
            out = out / (s - b)
        return out

    def divisor(self):
        div = [(a, 1) for a in self.zeros] + [(b, -1) for b in self.poles]
        order_inf = len(self.poles) - len(self.zeros)
        if order_inf:
            div.append((complex(np.inf), order_inf))
        return div


class Polynomial:
    """Polynomial potential on the sphere in the primitive interface.

    ``log_abs`` returns Re P(z) and ``dlog`` returns P'(z), so the term
    r * Polynomial(P) contributes phi = r Re P and dV = r P' dz.  The
    differential has no residues, hence an empty divisor.
    """

    def __init__(self, coeffs, tag="polynomial"):
        # lowest degree first
        self.coeffs = np.asarray(coeffs, complex)
        self.tag = tag

    def value(self, s):
        return np.polynomial.polynomial.polyval(np.asarray(s, complex), self.coeffs)

    def log_abs(self, s):
        return np.real(self.value(s))

    def dlog(self, s):
        d = np.polynomial.polynomial.polyder(self.coeffs)
        return np.polynomial.polynomial.polyval(np.asarray(s, complex), d)

    def divisor(self):
        return []


class ThetaQuotient:
    """Elliptic function const * e^{2 pi i n u} prod th(u - a) / prod th(u - b).

    The exponential factor makes the quotient doubly periodic when the
    representatives satisfy sum(a) - sum(b) = m + n tau.
    """

    def __init__(self, tau, zeros=(), poles=(), const=1.0, tag="theta"):
        self.lattice = Lattice(tau)
        self.tau = self.lattice.tau
        self.zeros = [complex(a) for a in zeros]
        self.poles = [complex(b) for b in poles]
        if len(self.zeros) != len(self.poles):
            raise FieldError("an elliptic function has as many zeros as poles")
        d = sum(self.zeros) - sum(self.poles)
        n = d.imag / self.tau.imag
        m = d.real - n * self.tau.real
        if abs(n - round(n)) > 1e-9 or abs(m - round(m)) > 1e-9:
            raise FieldError("divisor does not satisfy Abel's condition")
        self.n = int(round(n))
        self.const = complex(const)
        self.tag = tag

    def _pieces(self, s, derivs):
        s = np.asarray(s, complex)
        res = []
        for a in self.zeros:
            res.append((1, _theta1_series(s - a, self.tau, 1e-16, derivs)))
        for b in self.poles:
            res.append((-1, _theta1_series(s - b, self.tau, 1e-16, derivs)))
        return s, res

    def log_abs(self, s):
        s, res = self._pieces(s, (0,))
        out = np.full(s.shape, math.log(abs(self.const))) - 2.0 * math.pi * self.n * s.imag
        for sg, (t0,) in res:
            out = out + sg * np.log(np.abs(t0))
        return out

    def dlog(self, s):
        s, res = self._pieces(s, (0, 1))
        out = np.full(s.shape, 2j * math.pi * self.n)
        for sg, (t0, t1) in res:
            out = out + sg * t1 / t0
        return out

    def value(self, s):
        s, res = self._pieces(s, (0,))
        out = np.full(s.shape, self.const, dtype=complex) * np.exp(2j * math.pi * self.n * s)
        for sg, (t0,) in res:
            out = out * t0 ** sg
        return out

    def divisor(self):
        return [(self.lattice.reduce(a), 1) for a in self.zeros] + [(self.lattice.reduce(b), -1) for b in self.poles]


def curve_z_function(curve: EllipticCurve) -> ThetaQuotient:
    """The coordinate function z as an elliptic function of u."""
    return ThetaQuotient(curve.tau, zeros=[0.5, 0.5], poles=[0.0, 0.0], const=curve._z_const(), tag="z")


@dataclass
class ExternalField:
    """phi = sum r_j log|f_j| and its differential dV = sum r_j df_j / f_j.

    ``sigma_invariant`` records that phi is invariant under the
    antiholomorphic involution of the surface.
    """

    terms: list = field(default_factory=list)
    sigma_invariant: bool = False
    constant: float = 0.0

    def phi(self, s):
        s = np.asarray(s, complex)
        out = np.full(s.shape, float(self.constant))
        for r, f in self.terms:
            out = out + r * f.log_abs(s)
        return out

    def dV(self, s):
        s = np.asarray(s, complex)
        out = np.zeros(s.shape, complex)
        for r, f in self.terms:
            out = out + r * f.dlog(s)
        return out

    def poles(self, lattice: Lattice | None = None, tol=1e-9):
        """Merged list of (point, residue) for dV."""
        acc = []
        for r, f in self.terms:
            for pt, order in f.divisor():
                res = r * order
                for item in acc:
                    same = (
                        (not np.isfinite(pt) and not np.isfinite(item[0]))
                        or (np.isfinite(pt) and np.isfinite(item[0])
                            and (lattice.distance(pt, item[0]) if lattice else abs(pt - item[0])) < tol)
                    )
                    if same:
                        item[1] += res
                        break
                else:
                    acc.append([complex(pt), res])
        return [(p, r) for p, r in acc if abs(r) > 1e-14]

    def residue_sum(self, lattice=None):
        return float(sum(r for _, r in self.poles(lattice)))

    @staticmethod
    def zero():
        return ExternalField([])
