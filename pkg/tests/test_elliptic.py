import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.integrate import quad

from ellipot.elliptic import (
    CurvePoint,
    DegenerateCurveError,
    EllipticCurve,
    Lattice,
    NonConvergenceError,
    PoleProximityError,
    TorusPoint,
    abel_inverse,
    abel_map,
    carlson_rf,
    curve_periods,
    theta1,
    theta1_logderiv,
    theta_terms,
)

# theta_1(0.3 + 0.1i | i) and theta_1'/theta_1(0.25i | i) from mpmath.jtheta
# (nome q = exp(i pi tau), argument pi z) at 30 digits
THETA_03_01 = 0.773651221771173147323352042428 + 0.172931536591592663012904375162j
LOGDERIV_025I = -4.73589978124232844289759183378j
# tau of the curves (-2,-1), Aztec alpha = 1.5 and (-4,-3/2), mpmath tanh-sinh quadrature
TAU_M2_M1 = 1.0j
TAU_AZTEC = 0.732871895482816727642838507212j
TAU_HEX = 0.890284414177796989443531320252j

taus = [1j, 2j, 0.5j, 0.3 + 1.1j]


# -- theta ---------------------------------------------------------------


def test_theta_zero_at_origin():
    assert abs(theta1(0.0, 1j)) < 1e-15


def test_theta_matches_mpmath_value():
    assert abs(theta1(0.3 + 0.1j, 1j) - THETA_03_01) < 1e-14


@pytest.mark.parametrize("tau", taus)
def test_theta_quasi_periodicity_grid(tau):
    # cell where z and z + tau sit symmetrically about the real axis
    x, y = np.meshgrid(np.linspace(-0.5, 0.5, 20), np.linspace(-1.0, 0.0, 20) * tau.imag)
    z = (x + 1j * y).ravel()
    t = theta1(z, tau)
    scale = np.maximum(1.0, np.abs(t))
    r1 = np.abs(theta1(z + 1, tau) + t) / scale
    r2 = np.abs(theta1(z + tau, tau) + np.exp(-1j * np.pi * tau - 2j * np.pi * z) * t) / scale
    assert r1.max() < 1e-12
    assert r2.max() < 1e-12


@settings(max_examples=40, deadline=None)
@given(st.floats(-2, 2), st.floats(-1, 1))
def test_theta_odd(a, b):
    z = complex(a, b)
    assert abs(theta1(-z, 1j) + theta1(z, 1j)) < 1e-12 * max(1.0, abs(theta1(z, 1j)))


def test_theta_truncation_bound():
    # the window grows as Im tau shrinks
    assert theta_terms(0.1j) > theta_terms(1j) > theta_terms(4j)
    assert theta_terms(1j, 1e-16) == math.ceil(math.sqrt(math.log(1e16) / math.pi)) + 2


def test_theta_rejects_lower_half_plane():
    with pytest.raises(NonConvergenceError):
        theta1(0.1, -1j)
    with pytest.raises(NonConvergenceError):
        Lattice(1.0 + 0j)


def test_theta_derivative_against_difference():
    z, h = 0.21 + 0.13j, 1e-5
    fd = (theta1(z + h, 1j) - theta1(z - h, 1j)) / (2 * h)
    assert abs(theta1(z, 1j, deriv=1) - fd) < 1e-8


# -- log derivative -------------------------------------------------------


def test_logderiv_half_period_vanishes():
    for tau in taus[:3]:
        assert abs(theta1_logderiv(0.5, tau)) < 1e-13


def test_logderiv_residue_one():
    th = 2 * np.pi * np.arange(64) / 64
    z = 0.1 * np.exp(1j * th)
    res = np.sum(theta1_logderiv(z, 1j) * 1j * z) * (2 * np.pi / 64) / (2j * np.pi)
    assert abs(res - 1) < 1e-12


def test_logderiv_value_oracles():
    val = complex(theta1_logderiv(0.25j, 1j))
    assert abs(val - LOGDERIV_025I) < 1e-12
    h = 1e-5
    fd = (np.log(theta1(0.25j + h, 1j)) - np.log(theta1(0.25j - h, 1j))) / (2 * h)
    assert abs(val - fd) < 1e-7


def test_logderiv_guard():
    with pytest.raises(PoleProximityError):
        theta1_logderiv(1e-9, 1j)
    with pytest.raises(PoleProximityError):
        theta1_logderiv(1.0 + 2j + 1e-9, 2j)


# -- lattice --------------------------------------------------------------


@settings(max_examples=60, deadline=None)
@given(st.floats(-5, 5), st.floats(-5, 5))
def test_reduce_idempotent_and_in_box(a, b):
    lat = Lattice(0.3 + 1.1j)
    r = lat.reduce(complex(a, b))
    assert 0 <= r.imag < lat.tau.imag
    assert abs(lat.reduce(r) - r) < 1e-12
    # same class: the difference is a lattice vector
    d = complex(a, b) - r
    n = d.imag / lat.tau.imag
    m = d.real - n * lat.tau.real
    assert abs(n - round(n)) < 1e-9 and abs(m - round(m)) < 1e-9


def test_torus_point_reduced():
    lat = Lattice(2j)
    p = TorusPoint(1.25 + 4.5j, lat).reduced()
    assert abs(p.u - (0.25 + 0.5j)) < 1e-14


# -- curve periods ---------------------------------------------------------


def test_periods_square_curve():
    c = EllipticCurve(-2.0, -1.0)
    tau, scale = curve_periods(c)
    assert abs(tau.real) < 1e-10
    assert abs(tau - TAU_M2_M1) < 1e-12


def test_periods_against_adaptive_quadrature():
    x1, x2 = -2.0, -1.0
    # QUADPACK with algebraic endpoint weights absorbs the square-root singularities
    om = quad(lambda x: 1.0 / math.sqrt(-x), x1, x2, weight="alg", wvar=(-0.5, -0.5))[0]
    half = quad(lambda x: 1.0 / math.sqrt(x - x1), x2, 0.0, weight="alg", wvar=(-0.5, -0.5))[0]
    tau, scale = curve_periods(EllipticCurve(x1, x2))
    assert abs(tau - 1j * half / om) < 1e-9
    assert abs(scale - 1.0 / om) < 1e-9


@pytest.mark.parametrize("x1,x2,ref", [(-2.25, -1 / 2.25, TAU_AZTEC), (-4.0, -1.5, TAU_HEX)])
def test_periods_frozen(x1, x2, ref):
    assert abs(EllipticCurve(x1, x2).tau - ref) < 1e-12


def test_periods_converged_in_n():
    c = EllipticCurve(-3.0, -0.2)
    assert abs(c.periods(64)[0] - c.periods(128)[0]) < 1e-10


def test_degenerate_curves():
    with pytest.raises(DegenerateCurveError):
        EllipticCurve(-1.0, -1.0)
    with pytest.raises(DegenerateCurveError):
        EllipticCurve(-1.0, -1e-14)
    with pytest.raises(DegenerateCurveError):
        EllipticCurve(-1.0, 0.5)


def test_carlson_rf_against_scipy():
    from scipy.special import elliprf

    for x, y, z in [(0.5, 1.0, 2.0), (0.0, 1.0, 3.0), (1 + 1j, 2 - 1j, 0.5)]:
        assert abs(carlson_rf(x, y, z) - elliprf(x, y, z)) < 1e-14


# -- Abel map --------------------------------------------------------------


@pytest.fixture(scope="module")
def curve():
    return EllipticCurve(-2.0, -1.0)


def test_abel_base_point(curve):
    assert abel_map(CurvePoint(complex(np.inf)), curve).u == 0
    assert abel_inverse(0.0, curve).is_infinity


def test_abel_branch_points_to_half_periods(curve):
    tau = curve.tau
    imgs = [complex(curve.abel(x, 1)) for x in (0.0, curve.x1, curve.x2)]
    assert abs(imgs[0] - 0.5) < 1e-12
    lat = curve.lattice
    for h in (0.5 * tau, 0.5 + 0.5 * tau):
        assert min(lat.distance(u, h) for u in imgs[1:]) < 1e-12
    assert lat.distance(imgs[1], imgs[2]) > 0.4
    assert abel_inverse(0.5, curve).z == pytest.approx(0.0, abs=1e-10)


def test_abel_conjugation(curve):
    rng = np.random.default_rng(1)
    lat = curve.lattice
    for _ in range(20):
        z = complex(rng.normal(), rng.normal())
        for s in (1, 2):
            p = CurvePoint(z, s)
            u = complex(curve.abel(p.z, p.sheet))
            us = complex(curve.abel(curve.sigma(p).z, curve.sigma(p).sheet))
            assert lat.distance(us, np.conj(u)) < 1e-12


def test_abel_round_trip(curve):
    rng = np.random.default_rng(2)
    z = rng.normal(size=100) * 2 + 1j * rng.normal(size=100) * 2
    s = rng.integers(1, 3, size=100)
    u = curve.abel(z, s)
    z2, s2 = curve.abel_inverse(u)
    assert np.max(np.abs(z2 - z)) < 1e-7
    assert np.all(s2 == s)


def test_abel_derivative_matches_differential(curve):
    z, h = 0.4 + 0.7j, 1e-6
    fd = (curve.abel_unreduced(z + h) - curve.abel_unreduced(z - h)) / (2 * h)
    assert abs(fd - curve.du_dz(z)) < 1e-8


def test_curve_point_on_curve(curve):
    p = abel_inverse(0.3 + 0.2j, curve)
    w = curve.w(p.z, p.sheet)
    assert abs(w ** 2 - p.z * (p.z - curve.x1) * (p.z - curve.x2)) < 1e-12
    q = curve.sigma(p)
    wq = curve.w(q.z, q.sheet)
    assert abs(wq - np.conj(w)) < 1e-12
