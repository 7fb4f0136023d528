import cmath
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.optimize import newton

from ellipot.elliptic import CurvePoint, EllipticCurve
from ellipot.kernels import (
    CurveBackend,
    KernelValue,
    SingularityError,
    SphereBackend,
    TorusBackend,
    bipolar_green,
    c21_kernel,
    c21_kernel_algebraic,
    c21_theta_in_curve_chart,
    cauchy_kernel,
    contour_residue,
)


def random_pairs(tau, n=50, seed=0):
    rng = np.random.default_rng(seed)
    out = []
    while len(out) < n:
        p = complex(rng.random(), rng.random() * tau.imag)
        q = complex(rng.random(), rng.random() * tau.imag)
        b = TorusBackend(tau)
        if b.distance(p, q) > 0.05 and b.distance_to_sink(p) > 0.05 and b.distance_to_sink(q) > 0.05:
            out.append((p, q))
    return out


# -- Green's function -------------------------------------------------------


@pytest.mark.parametrize("tau", [1j, 2j, 0.5j])
def test_green_symmetric_and_periodic(tau):
    b = TorusBackend(tau)
    for p, q in random_pairs(tau):
        g = bipolar_green(p, q, b)
        assert abs(g - bipolar_green(q, p, b)) < 1e-10
        assert abs(b.green(p + 1, q) - g) < 1e-10
        assert abs(b.green(p + tau, q) - g) < 1e-10
        assert abs(b.green(p, q - tau + 2) - g) < 1e-10


def test_green_log_singularities():
    b = TorusBackend(1j)
    q = 0.3 + 0.4j
    vals = [b.green(q + t * cmath.exp(0.7j), q) + math.log(t) for t in 10.0 ** -np.arange(2, 8)]
    assert max(abs(v) for v in vals) < 10
    # the constant term settles
    assert abs(vals[-1] - vals[-2]) < 1e-5
    sink = [b.green(t * cmath.exp(0.3j), q) - math.log(t) for t in 10.0 ** -np.arange(2, 8)]
    assert max(abs(v) for v in sink) < 10
    assert abs(sink[-1] - sink[-2]) < 1e-5


def test_green_sphere():
    b = SphereBackend()
    assert bipolar_green(0.0, 0.5, b) == pytest.approx(math.log(2.0), abs=1e-15)


def test_green_guards():
    b = TorusBackend(1j)
    with pytest.raises(SingularityError):
        bipolar_green(0.3 + 0.3j, 0.3 + 0.3j + 1e-8, b)
    with pytest.raises(SingularityError):
        bipolar_green(1.0 + 1e-8, 0.4j, b)


def test_green_on_curve_is_torus_value():
    c = EllipticCurve(-2.0, -1.0)
    b = CurveBackend(c)
    p, q = CurvePoint(0.5 + 0.5j, 1), CurvePoint(-1.5 + 0.2j, 2)
    expect = TorusBackend(c.tau).green(c.abel(p.z, 1), c.abel(q.z, 2))
    assert bipolar_green(p, q, b) == pytest.approx(expect, abs=1e-12)


# -- Cauchy kernel ----------------------------------------------------------


@pytest.mark.parametrize("tau", [1j, 2j, 0.5j])
def test_cauchy_residues(tau):
    b = TorusBackend(tau)
    for _, q in random_pairs(tau, n=5, seed=3):
        assert abs(contour_residue(lambda p: b.cauchy(p, q), q) - 1) < 1e-8
        assert abs(contour_residue(lambda p: b.cauchy(p, q), 0.0) + 1) < 1e-8


def test_cauchy_residues_doubling_check():
    b = TorusBackend(1j)
    q = 0.4 + 0.3j
    r64 = contour_residue(lambda p: b.cauchy(p, q), q, n=64)
    r128 = contour_residue(lambda p: b.cauchy(p, q), q, n=128)
    assert abs(r64 - r128) < 1e-12


def _period(b, q, start, step, n=256):
    t = np.arange(n) / n
    return complex(np.sum(b.cauchy(start + t * step, q)) * step / n)


@pytest.mark.parametrize("tau", [1j, 2j, 0.3 + 1.1j])
def test_cauchy_periods_imaginary(tau):
    b = TorusBackend(tau)
    for _, q in random_pairs(tau, n=5, seed=4):
        # cycles chosen at lattice coordinate far from q and from 0
        y = ((q.imag / tau.imag) + 0.5) % 1.0 * tau
        x = (q - q.imag / tau.imag * tau).real + 0.5
        a_cycle = _period(b, q, y, 1.0)
        b_cycle = _period(b, q, x, tau)
        assert abs(a_cycle.real) < 1e-8
        assert abs(b_cycle.real) < 1e-8


def test_cauchy_is_minus_twice_dp_green():
    b = TorusBackend(2j)
    p, q, h = 0.3 + 0.7j, 0.6 + 1.5j, 1e-5
    gx = (b.green(p + h, q) - b.green(p - h, q)) / (2 * h)
    gy = (b.green(p + 1j * h, q) - b.green(p - 1j * h, q)) / (2 * h)
    # d_p = (d_x - i d_y) / 2
    assert abs(b.cauchy(p, q) + (gx - 1j * gy)) < 1e-8


def test_cauchy_sphere_reduces_to_plane_form():
    b = SphereBackend()
    kv = cauchy_kernel(2.0, 0.5j, b)
    assert kv.chart == "z"
    assert kv.value == pytest.approx(1.0 / (2.0 - 0.5j), abs=1e-15)
    assert abs(contour_residue(lambda z: b.cauchy(z, 0.5j), 0.0, radius=50.0) - 1) < 1e-12
    # the sink at infinity has residue -1: the clockwise loop around infinity
    assert abs(-contour_residue(lambda z: b.cauchy(z, 0.5j), 0.0, radius=50.0) + 1) < 1e-12


def test_chart_transport_of_one_form():
    c = EllipticCurve(-2.0, -1.0)
    b = CurveBackend(c)
    p, q = CurvePoint(0.4 + 0.3j, 1), CurvePoint(-0.6 - 0.8j, 2)
    kv = cauchy_kernel(p, q, b)
    assert kv.chart == "z1"
    u_val = b.cauchy(c.abel(p.z, 1), c.abel(q.z, 2))
    assert kv.value == pytest.approx(u_val * c.du_dz(p.z, 1), rel=1e-12)
    back = KernelValue(u_val, "u").transported("z1", c.du_dz(p.z, 1))
    assert back.value == pytest.approx(kv.value, rel=1e-14)


# -- (2,-1) kernel ----------------------------------------------------------

TAU = 1.0j + 0.2
A = 0.31 + 0.22j


@pytest.fixture(scope="module")
def tb():
    return TorusBackend(TAU)


def test_c21_residue_at_diagonal(tb):
    for v in (0.4 + 0.5j, 0.7 + 0.1j, 0.15 + 0.85j):
        res = contour_residue(lambda u: tb.c21(u, v, A), v)
        assert abs(res - 1) < 1e-8


def _order(f, center, ts=(1e-5, 1e-6)):
    vals = [abs(f(center + t * cmath.exp(0.9j))) for t in ts]
    return math.log(vals[0] / vals[1]) / math.log(ts[0] / ts[1])


def test_c21_double_zero_in_v(tb):
    u = 0.55 + 0.4j
    assert _order(lambda v: tb.c21(u, v, A), 0.0) == pytest.approx(2.0, abs=1e-3)
    t = 1e-4
    assert abs(tb.c21(u, t, A)) / t < 1e-2


def test_c21_double_zero_in_u(tb):
    v = 0.55 + 0.4j
    assert _order(lambda u: tb.c21(u, v, A), A) == pytest.approx(2.0, abs=1e-3)


def test_c21_simple_zero_and_poles(tb):
    v = 0.55 + 0.4j
    assert _order(lambda u: tb.c21(u, v, A), v - 2 * A) == pytest.approx(1.0, abs=1e-3)
    assert _order(lambda u: tb.c21(u, v, A), 0.0) == pytest.approx(-2.0, abs=1e-3)
    u = 0.1 + 0.7j
    assert _order(lambda w: tb.c21(u, w, A), A) == pytest.approx(-2.0, abs=1e-3)


def test_c21_periodic(tb):
    u, v = 0.55 + 0.4j, 0.12 + 0.77j
    base = tb.c21(u, v, A)
    for du, dv in [(1, 0), (TAU, 0), (0, 1), (0, TAU), (1 - TAU, 2 * TAU)]:
        assert abs(tb.c21(u + du, v + dv, A) - base) < 1e-10 * abs(base)


def test_c21_zero_pole_congruence(tb):
    u = 0.55 + 0.4j
    f = lambda v: tb.c21(u, v, A)
    guess = u + 2 * A + 0.03 - 0.02j
    zero = newton(f, guess, tol=1e-14, maxiter=100)
    assert abs(f(zero)) < 1e-10
    # zeros {0, 0, zero} and poles {u, a, a} balance modulo the lattice
    assert tb.lattice.distance(zero, u + 2 * A) < 1e-8


def test_c21_guards(tb):
    with pytest.raises(SingularityError):
        c21_kernel(0.3, 0.5, 1.0 + TAU, tb)
    with pytest.raises(SingularityError):
        c21_kernel(0.3 + 0.2j, 0.3 + 0.2j, A, tb)
    with pytest.raises(SingularityError):
        c21_kernel(0.3 + 0.2j, A + 1e-9, A, tb)
    with pytest.raises(TypeError):
        c21_kernel(0.1, 0.2, 0.3, SphereBackend())


@pytest.fixture(scope="module")
def curve():
    return EllipticCurve(-2.0, -1.0)


def _random_curve_point(rng):
    while True:
        z = complex(rng.normal() * 1.5 - 0.8, rng.normal() * 1.5)
        if min(abs(z - b) for b in (0.0, -1.0, -2.0)) > 0.1:
            return CurvePoint(z, int(rng.integers(1, 3)))


def test_c21_algebraic_matches_theta(curve):
    cb = CurveBackend(curve)
    rng = np.random.default_rng(7)
    worst = 0.0
    count = 0
    while count < 20:
        p, q, a = (_random_curve_point(rng) for _ in range(3))
        up, uq, ua = (curve.abel(x.z, x.sheet) for x in (p, q, a))
        lat = cb.lattice
        if min(lat.distance(up, uq), lat.distance(uq, ua), lat.distance(ua, 0), lat.distance(up, 0)) < 0.05:
            continue
        alg = c21_kernel_algebraic(p, q, a, curve).value
        th = c21_theta_in_curve_chart(p, q, a, cb).value
        worst = max(worst, abs(alg - th) / abs(th))
        count += 1
    assert worst < 1e-8


def test_c21_algebraic_residue_and_double_zero(curve):
    q, a = CurvePoint(0.5 + 0.6j, 1), CurvePoint(-0.4 - 0.9j, 2)
    f = lambda z: np.array([c21_kernel_algebraic(CurvePoint(x, 1), q, a, curve).value for x in np.atleast_1d(z)])
    assert abs(contour_residue(f, q.z) - 1) < 1e-8
    g = lambda z: c21_kernel_algebraic(CurvePoint(z, a.sheet), q, a, curve).value
    assert _order(g, a.z) == pytest.approx(2.0, abs=1e-3)


def test_c21_algebraic_branch_guard(curve):
    with pytest.raises(SingularityError):
        c21_kernel_algebraic(CurvePoint(-1.0 + 1e-9, 1), CurvePoint(0.5, 1), CurvePoint(0.3j, 1), curve)


@settings(max_examples=30, deadline=None)
@given(st.floats(0.05, 0.95), st.floats(0.05, 0.95), st.floats(0.05, 0.95), st.floats(0.05, 0.95))
def test_cauchy_periodic_in_q(a, b, c, d):
    tb = TorusBackend(1.5j)
    p, q = complex(a, b * 1.5), complex(c, d * 1.5)
    if tb.distance(p, q) < 1e-3:
        return
    base = tb.cauchy(p, q)
    assert abs(tb.cauchy(p, q + 1.5j) - base) < 1e-10 * max(1, abs(base))
    assert abs(tb.cauchy(p + 1, q) - base) < 1e-10 * max(1, abs(base))
