import json
import math
from fractions import Fraction
from itertools import product

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ellipot.elliptic import DegenerateCurveError
from ellipot.maxmin import residue_gate
from ellipot.tiling import (
    DegreeGapError,
    EigenvalueFunction,
    HexagonDims,
    MatrixPolynomial,
    PeriodicWeighting,
    WeightingError,
    aztec_verify,
    christoffel_darboux,
    correlation_kernel,
    enumerate_tilings,
    enumeration_check,
    exact_moments,
    full_symbol,
    full_symbol_coeffs,
    genus_one_curve,
    hexagon_preset_weighting,
    moment_certificate,
    moments,
    mvop,
    orthogonality_residual,
    radius_sweep,
    reproducing_kernel,
    reproducing_residual,
    spectral_curve,
    symbol_Ax,
    symbol_coeffs,
    tiling_field,
    transfer_partition_function,
)

F = Fraction
GENERIC = PeriodicWeighting(3, 2, [[1, 2], [F(1, 2), 3], [2, 1]], [[1, F(3, 2)], [2, 1], [1, F(1, 3)]])


def macmahon(a, b, c):
    out = F(1)
    for i, j, k in product(range(1, a + 1), range(1, b + 1), range(1, c + 1)):
        out *= F(i + j + k - 1, i + j + k - 2)
    return out


# -- weights ------------------------------------------------------------------


def test_weighting_round_trip(tmp_path):
    d = GENERIC.to_dict()
    assert d["blue"][1][0] == "1/2"
    assert PeriodicWeighting.from_dict(d).blue == GENERIC.blue
    (tmp_path / "w.json").write_text(json.dumps(d))
    assert PeriodicWeighting.from_file(tmp_path / "w.json").yellow == GENERIC.yellow
    toml = 'p = 1\nq = 2\nblue = [["1", "2"]]\nyellow = [["3/2", 1]]\n'
    (tmp_path / "w.toml").write_text(toml)
    w = PeriodicWeighting.from_file(tmp_path / "w.toml")
    assert w.exact and w.w_yellow(5, 2) == F(3, 2)


@pytest.mark.parametrize(
    "d",
    [
        dict(p=1, q=1, blue=[[-1]], yellow=[[1]]),
        dict(p=1, q=1, blue=[[0]], yellow=[[1]]),
        dict(p=1, q=2, blue=[[1]], yellow=[[1, 1]]),
        dict(p=1, q=1, blue=[["x"]], yellow=[[1]]),
        dict(p=0, q=1, blue=[], yellow=[]),
        dict(p=1, q=1, blue=[[1]]),
    ],
)
def test_weighting_errors(d):
    with pytest.raises(WeightingError):
        PeriodicWeighting.from_dict(d)


def test_hexagon_dims():
    d = HexagonDims.from_NML(1, 1, 1, 3, 2)
    assert (d.A, d.B, d.C) == (2, 1, 2) and (d.N, d.M, d.L) == (1, 1, 1)
    with pytest.raises(ValueError):
        HexagonDims(3, 1, 2, 3, 2)


# -- symbols and the spectral curve --------------------------------------------


def test_uniform_symbol():
    W = PeriodicWeighting.uniform(3, 2)
    for x in range(3):
        assert np.array_equal(symbol_Ax(W, x, 0.7), [[1, 1], [0.7, 1]])
        assert np.array_equal(symbol_Ax(W, x + 3, 0.7), symbol_Ax(W, x, 0.7))
    # [[1, 1], [z, 1]]^3 by hand
    z = 0.3 - 0.4j
    expect = np.array([[1 + 3 * z, 3 + z], [3 * z + z * z, 1 + 3 * z]])
    assert np.allclose(full_symbol(W, z), expect, atol=1e-15)


def test_symbol_periodic_in_x():
    for x in range(-3, 3):
        a = symbol_coeffs(GENERIC, x).coeffs
        b = symbol_coeffs(GENERIC, x + 3).coeffs
        assert all(np.array_equal(u, v) for u, v in zip(a, b))


def test_full_symbol_product_exact():
    A = full_symbol_coeffs(GENERIC)
    assert A.degree == 3 and A.coeffs[0].dtype == object
    z = F(2, 7)
    direct = np.eye(2, dtype=object)
    for x in range(3):
        c0, c1 = symbol_coeffs(GENERIC, x).coeffs
        direct = direct.dot(c0 + c1 * z)
    at_z = sum(c * z ** k for k, c in enumerate(A.coeffs))
    assert all(at_z[i, j] == direct[i, j] for i in range(2) for j in range(2))


@settings(max_examples=25, deadline=None)
@given(st.lists(st.integers(1, 6), min_size=12, max_size=12))
def test_det_multiplicative(vals):
    fr = [F(v, 1 + (k % 3)) for k, v in enumerate(vals)]
    W = PeriodicWeighting(3, 2, [fr[0:2], fr[2:4], fr[4:6]], [fr[6:8], fr[8:10], fr[10:12]])
    prod_det = [F(1)]
    for x in range(3):
        d = symbol_coeffs(W, x).det2()
        out = [F(0)] * (len(prod_det) + len(d) - 1)
        for i, a in enumerate(prod_det):
            for j, b in enumerate(d):
                out[i + j] += a * b
        prod_det = out
    full = full_symbol_coeffs(W).det2()
    n = max(len(full), len(prod_det))
    pad = lambda a: list(a) + [0] * (n - len(a))
    assert pad(full) == pad(prod_det)


def test_uniform_curve_drops_genus():
    sc = spectral_curve(PeriodicWeighting.uniform(3, 2))
    # discriminant 4 z (z + 3)^2
    assert sc.discriminant == [0, 36, 24, 4]
    assert sc.genus_drop
    with pytest.raises(DegenerateCurveError):
        genus_one_curve(sc)


def test_generic_curve_has_three_real_branch_points():
    sc = spectral_curve(GENERIC)
    assert not sc.genus_drop
    x = np.array(sc.branch_points)
    assert np.all(x <= 0) and np.all(np.diff(x) > 1e-3)
    disc = [float(c) for c in sc.discriminant]
    assert np.max(np.abs(np.polyval(disc[::-1], x))) < 1e-9
    with pytest.raises(DegenerateCurveError):
        genus_one_curve(sc)  # x3 != 0


def test_hexagon_preset_curve():
    sc = spectral_curve(hexagon_preset_weighting())
    assert sc.branch_points == (-4.0, -1.5, 0.0)
    d = sc.to_dict()
    assert d["trace"] == ["2", "8"] and d["det"] == ["1", "-4", "5", "-2"]


@pytest.fixture(scope="module")
def hexagon():
    sc = spectral_curve(hexagon_preset_weighting())
    cur = genus_one_curve(sc)
    lam = EigenvalueFunction(sc, cur)
    return cur, lam, tiling_field(cur, lam, 1.0, 0.5)


def test_eigenvalue_function(hexagon):
    cur, lam, _ = hexagon
    div = lam.divisor()
    assert sum(k for _, k in div) == 0
    total = sum(k * u for u, k in div)
    assert cur.lattice.distance(total, 0j) < 1e-10
    # lambda is an eigenvalue of A(z)
    W = hexagon_preset_weighting()
    for u in (0.2 + 0.3j, 0.7 + 0.1j):
        z = complex(cur.z_of_u(u))
        ev = np.linalg.eigvals(full_symbol(W, z))
        assert np.min(np.abs(ev - lam.value(u))) < 1e-10 * max(1, abs(lam.value(u)))


def test_tiling_field_residues(hexagon):
    cur, _, fld = hexagon
    g = residue_gate(fld, 0.5 + 0j, 0j, cur.lattice)
    assert g["r0"] == pytest.approx(1.5, abs=1e-12)
    assert g["r_inf"] == pytest.approx(0.0, abs=1e-12)
    assert fld.residue_sum(cur.lattice) == pytest.approx(0.0, abs=1e-12)


def test_tiling_field_sigma_invariant(hexagon):
    cur, _, fld = hexagon
    u = np.array([0.2 + 0.3j, 0.7 + 0.15j, 0.45 + 0.6j])
    assert np.max(np.abs(fld.phi(u) - fld.phi(np.conj(u) + cur.tau))) < 1e-10


def test_tiling_field_condition(hexagon):
    cur, lam, _ = hexagon
    with pytest.raises(ValueError):
        tiling_field(cur, lam, 1.0, 1.5)


# -- moments and matrix orthogonal polynomials ----------------------------------


def test_moments_exact_and_certificate():
    em = exact_moments(GENERIC, 2, 1, 1, 4)
    m = moments(GENERIC, 2, 1, 1, 4)
    for a, b in zip(em, m):
        assert np.max(np.abs(np.array(a, dtype=complex) - b)) < 1e-12
    assert moment_certificate(GENERIC, 2, 1, 1, 4) < 1e-12


def test_radius_sweep():
    rep = radius_sweep(GENERIC, 2, 1, 1, 4)
    assert max(rep["certificates"].values()) < 1e-10
    assert rep["best"] in rep["certificates"]
    a = moments(GENERIC, 2, 1, 1, 4, radius=0.5)
    b = moments(GENERIC, 2, 1, 1, 4, radius=2.0)
    assert max(np.max(np.abs(x - y)) for x, y in zip(a, b)) < 1e-12


def test_mvop_degree_zero():
    P, H = mvop(GENERIC, 2, 1, 1, 0)
    assert P.degree == 0 and np.array_equal(P.coeffs[0], np.eye(2))
    assert np.allclose(H, moments(GENERIC, 2, 1, 1, 1)[0], atol=1e-14)


@pytest.mark.parametrize("n", [1, 2])
def test_mvop_orthogonality(n):
    P, H = mvop(GENERIC, 3, 2, 2, n)
    assert P.monic and P.degree == n
    assert orthogonality_residual(GENERIC, 3, 2, 2, P, H) < 1e-10


def test_mvop_scalar_oracle():
    # q = 1: W(z) = (b + y z)^L / z^(M+N), moments are binomial coefficients
    b, y, L, M, N = F(2), F(3), 4, 1, 2
    W = PeriodicWeighting(1, 1, [[b]], [[y]])
    mom = [math.comb(L, M + N - 1 - k) * b ** (L - (M + N - 1 - k)) * y ** (M + N - 1 - k) for k in range(3)]
    c = -mom[1] / mom[0]
    P, H = mvop(W, L, M, N, 1)
    assert complex(P.coeffs[0][0, 0]) == pytest.approx(float(c), rel=1e-13)
    assert complex(H[0, 0]) == pytest.approx(float(mom[2] + c * mom[1]), rel=1e-13)


def test_mvop_degree_gap():
    with pytest.raises(DegreeGapError):
        mvop(GENERIC, 2, 1, 1, 2)


def test_matrix_polynomial_monic_guard():
    with pytest.raises(ValueError):
        MatrixPolynomial([np.eye(2), 2 * np.eye(2)], monic=True)


# -- reproducing kernel ---------------------------------------------------------

CASES = [(1, 1, 1), (1, 2, 3), (2, 1, 2), (2, 2, 3)]
TEST_POLYS = [
    MatrixPolynomial([np.eye(2)]),
    MatrixPolynomial([np.array([[1, 2], [0, 1.0]]), np.array([[0.5, 0], [1, -1.0]])]),
]


@pytest.mark.parametrize("N,M,L", CASES)
def test_reproducing_property(N, M, L):
    R = reproducing_kernel(GENERIC, L, M, N)
    z = np.array([0.3 + 0.2j, -0.5j, 1.1])
    assert reproducing_residual(GENERIC, L, M, N, R, TEST_POLYS[:N], z) < 1e-8


@pytest.mark.parametrize("N,M,L", CASES)
def test_reproducing_routes_agree(N, M, L):
    a = reproducing_kernel(GENERIC, L, M, N, route="moments")
    b = reproducing_kernel(GENERIC, L, M, N, route="sum")
    assert np.max(np.abs(a.blocks - b.blocks)) < 1e-8


@pytest.mark.parametrize("N,M,L", CASES)
def test_christoffel_darboux(N, M, L):
    R = reproducing_kernel(GENERIC, L, M, N)
    w = np.array([0.7 + 0.1j, -0.4 + 0.3j, 0.2 - 0.6j])
    z = np.array([0.3 + 0.2j, -0.5j, 1.1])
    assert np.max(np.abs(christoffel_darboux(GENERIC, L, M, N, w, z) - R(w, z))) < 1e-8


def test_reproducing_kernel_N1_is_inverse_H0():
    R = reproducing_kernel(GENERIC, 2, 1, 1)
    _, H0 = mvop(GENERIC, 2, 1, 1, 0)
    assert np.allclose(R.blocks[0, 0], np.linalg.inv(H0), atol=1e-13)


def test_reproducing_kernel_errors():
    with pytest.raises(ValueError):
        reproducing_kernel(GENERIC, 2, 1, 1, route="bogus")
    with pytest.raises(ValueError):
        christoffel_darboux(GENERIC, 2, 1, 1, [0.5], [0.5])
    with pytest.raises(ValueError):
        correlation_kernel(GENERIC, 2, 1, 1, (3, 0), (0, 0))


# -- enumeration ----------------------------------------------------------------


def test_tiny_hexagon_count():
    W = PeriodicWeighting.uniform(3, 2)
    d = HexagonDims.from_NML(1, 1, 1, 3, 2)
    en = enumerate_tilings(W, d)
    assert en.count == macmahon(d.A, d.B, d.C) == 6
    assert en.Z == 6 == transfer_partition_function(W, d)


def test_larger_count_is_weight_independent():
    d = HexagonDims.from_NML(1, 1, 2, 3, 2)
    assert enumerate_tilings(GENERIC, d).count == macmahon(d.A, d.B, d.C)


@pytest.mark.parametrize("W", [PeriodicWeighting.uniform(3, 2), hexagon_preset_weighting(), GENERIC])
@pytest.mark.parametrize("NML", [(1, 1, 1), (1, 1, 2)])
def test_enumeration_matches_kernel(W, NML):
    d = HexagonDims.from_NML(*NML, W.p, W.q)
    rep = enumeration_check(W, d)
    assert rep["Z_agree"]
    assert rep["Z"] == rep["Z_transfer"]
    assert rep["one_point_error"] < 1e-8
    assert rep["two_point_error"] < 1e-8
    lo, hi = rep["density_range"]
    assert lo > -1e-8 and hi < 1 + 1e-8


# -- two-periodic Aztec diamond ------------------------------------------------


def test_aztec_verify():
    rep = aztec_verify(1.5, 0.3, n=120)
    assert rep["harmonicity"] < 1e-6
    assert rep["log_coefficient_p1"] == pytest.approx(-1.0, abs=1e-6)
    assert rep["log_coefficient_inf"] == pytest.approx(1.0, abs=1e-6)
    assert rep["green_spread"] < 1e-8
    assert rep["balayage"] < 1e-4 and rep["second_sheet_points"] > 0
    assert rep["density_error"] < 1e-3
    assert max(rep["s_property_real"], rep["s_property_imag"]) < 1e-3


def test_aztec_verify_guards():
    with pytest.raises(ValueError):
        aztec_verify(0.8, 0.5)
    with pytest.raises(ValueError):
        aztec_verify(1.5, 1.5)
