import math

import numpy as np
import pytest

from gotmmd.kernel import (
    J,
    KernelParams,
    QuadratureError,
    TwoMomentKernel,
    alpha_coeff,
    beta_prime_density,
    build_j_table,
    default_params,
    feature_inner_product,
    gram,
    i_f_quadrature,
    j_coefficients,
    kernel_eval,
    kernel_log_eval,
    log_alpha_coeff,
    log_gram,
    log_J,
    polynomial_coefficients,
)
from gotmmd.special_fns import DomainError

P3 = KernelParams(d=3, p=1, sigma=1.0, epsilon=1.0, lam=1.0)
ALPHA31 = 0.15666426716443757  # 2 pi 2^-4 2^-1.5 / Gamma(3/2)


def poly_j(u):
    return 60 + 57.5 * u**2 + 11 * u**4 + 0.5 * u**6


def test_params_validation():
    with pytest.raises(DomainError):
        KernelParams(d=0, p=1, sigma=1, epsilon=1)
    with pytest.raises(DomainError):
        KernelParams(d=3, p=1, sigma=1, epsilon=5.5)
    with pytest.raises(DomainError):
        KernelParams(d=3, p=1, sigma=-1, epsilon=1)
    assert P3.has_polynomial
    assert not KernelParams(d=3, p=1, sigma=1, epsilon=math.sqrt(3)).has_polynomial


def test_alpha_values():
    assert alpha_coeff(3, 1) == pytest.approx(ALPHA31, rel=1e-14)
    d1 = 2 * math.pi * 2**-2 * 2**-0.5 / math.sqrt(math.pi)
    assert alpha_coeff(1, 1) == pytest.approx(d1, rel=1e-14)
    for d in range(1, 101):
        assert log_alpha_coeff(d, 1.5) == pytest.approx(math.log(alpha_coeff(d, 1.5)), abs=1e-12)


def test_j_polynomial_values():
    for u, want in ((0.0, 60.0), (1.0, 129.0), (2.0, 498.0)):
        for method in ("auto", "series", "polynomial", "moments"):
            assert J(u, P3, method) == pytest.approx(want, rel=1e-13)


def test_j_coefficients_exact():
    np.testing.assert_allclose(j_coefficients(P3), [60, 57.5, 11, 0.5], rtol=1e-13)


def test_polynomial_kernel_matches_j_path():
    pk = polynomial_coefficients(P3)
    assert pk.L == 3
    np.testing.assert_allclose(pk.coefficients / ALPHA31, [60, 57.5, 11, 0.5], rtol=1e-13)
    rng = np.random.default_rng(3)
    for _ in range(10):
        x, y = rng.normal(size=3), rng.normal(size=3)
        assert pk(x, y) == pytest.approx(kernel_eval(x, y, P3), rel=1e-12)
    u = np.arange(0.0, 10.5, 0.5)
    np.testing.assert_allclose(J(u, P3, "series"), poly_j(u), rtol=1e-12)


def test_polynomial_form_requires_even_orders():
    with pytest.raises(DomainError):
        j_coefficients(KernelParams(d=3, p=1, sigma=1, epsilon=0.5))


def test_default_params():
    prm = default_params(4, 1, 2.0)
    assert prm.epsilon == 2.0 and prm.lam == 1.0
    assert default_params(3, 1, 1.0, polynomial=True).has_polynomial


@pytest.mark.parametrize("prm", [
    KernelParams(d=2, p=1, sigma=0.7, epsilon=math.sqrt(2), lam=1.3),
    KernelParams(d=10, p=1.5, sigma=2.0, epsilon=3.1, lam=0.4),
    KernelParams(d=40, p=1, sigma=1.0, epsilon=6.3, lam=5.0),
])
def test_routes_agree_on_u_grid(prm):
    u = np.concatenate([np.linspace(0, 3, 13), [7.5, 20.0, 60.0]])
    ref = log_J(u, prm, "moments")
    np.testing.assert_allclose(log_J(u, prm, "series"), ref, rtol=0, atol=1e-11)
    np.testing.assert_allclose(log_J(u, prm, "table"), ref, rtol=0, atol=1e-11)


def test_table_error_certified():
    prm = KernelParams(d=5, p=1, sigma=0.5, epsilon=math.sqrt(5), lam=2.0)
    tab = build_j_table(prm, 30.0)
    assert tab.max_error <= 1e-12
    assert tab.umax >= 30.0


def test_kernel_at_origin():
    assert kernel_eval(np.zeros(3), np.zeros(3), P3) == pytest.approx(ALPHA31 * 60, rel=1e-13)
    assert kernel_eval(np.zeros(3), np.zeros(3), P3) == pytest.approx(9.4, rel=1e-4)


def test_kernel_diagonal_formula():
    x = np.array([0.3, -1.2, 0.5])
    u = math.sqrt(2) * np.linalg.norm(x) / P3.sigma
    assert kernel_eval(x, x, P3) == pytest.approx(ALPHA31 * poly_j(u), rel=1e-12)


def test_log_path_and_overflow():
    x = np.array([0.4, 0.1, -0.3])
    y = np.array([1.0, 0.2, 0.0])
    assert math.exp(kernel_log_eval(x, y, P3)) == pytest.approx(kernel_eval(x, y, P3), rel=1e-12)
    big = KernelParams(d=300, p=1, sigma=1.0, epsilon=math.sqrt(300), lam=1.0)
    z = np.full(300, 10.0)
    lv = kernel_log_eval(z, z, big)
    assert math.isfinite(lv) and lv > 709
    with pytest.raises(OverflowError):
        kernel_eval(z, z, big)


def test_cauchy_schwarz_in_log_space():
    rng = np.random.default_rng(7)
    prm = KernelParams(d=4, p=1, sigma=0.8, epsilon=2.0, lam=1.7)
    for _ in range(20):
        x, y = rng.normal(size=4) * 2, rng.normal(size=4) * 2
        lxy = kernel_log_eval(x, y, prm)
        assert lxy <= 0.5 * (kernel_log_eval(x, x, prm) + kernel_log_eval(y, y, prm)) + 1e-12


def test_gram_shapes_symmetry_permutation():
    rng = np.random.default_rng(11)
    A = rng.normal(size=(40, 3))
    G = gram(A, P3)
    assert np.array_equal(G, G.T)
    perm = rng.permutation(40)
    np.testing.assert_allclose(gram(A[perm], P3), G[np.ix_(perm, perm)], rtol=1e-14)
    one = gram(A[:1], P3)
    assert one.shape == (1, 1)
    assert one[0, 0] == pytest.approx(kernel_eval(A[0], A[0], P3), rel=1e-14)
    B = rng.normal(size=(7, 3))
    assert gram(A, P3, B).shape == (40, 7)


def test_gram_table_matches_series():
    rng = np.random.default_rng(5)
    prm = KernelParams(d=6, p=1, sigma=1.0, epsilon=math.sqrt(6), lam=2.2)
    A = rng.normal(size=(60, 6)) * 1.5
    np.testing.assert_allclose(log_gram(A, prm, method="table"), log_gram(A, prm, method="series"),
                               rtol=0, atol=1e-11)
    assert np.array_equal(log_gram(A, prm, method="table"), log_gram(A, prm, method="table").T)


def test_gram_psd_small():
    rng = np.random.default_rng(2)
    A = rng.normal(size=(100, 2))
    w = np.linalg.eigvalsh(gram(A, KernelParams(d=2, p=1, sigma=1, epsilon=1.0, lam=1.0)))
    assert w.min() >= -1e-8 * w.max()


def test_dimension_mismatch():
    with pytest.raises(ValueError):
        kernel_eval(np.zeros(2), np.zeros(3), P3)
    with pytest.raises(ValueError):
        gram(np.zeros((4, 2)), P3)


def test_two_moment_kernel_wrapper():
    k = TwoMomentKernel(P3)
    rng = np.random.default_rng(0)
    A, B = rng.normal(size=(5, 3)), rng.normal(size=(5, 3))
    np.testing.assert_allclose(k.diag(A), np.diag(k.gram(A)), rtol=1e-13)
    np.testing.assert_allclose(k.paired(A, B), np.diag(k.gram(A, B)), rtol=1e-13)
    assert k(A[0], B[0]) == pytest.approx(k.gram(A, B)[0, 0], rel=1e-14)


def test_beta_prime_density_normalized_and_certified():
    f = beta_prime_density(P3)
    from scipy import integrate

    total, _ = integrate.quad(lambda t: float(f(math.exp(t))) * math.exp(t), -60, 60, limit=400)
    assert total == pytest.approx(1.0, rel=1e-9)
    xs = np.geomspace(1e-4, 20, 400)
    lower = f.a * xs ** (P3.r - 1) * np.exp(-f.b * xs**2)
    assert np.all(f(xs) >= lower * (1 - 1e-9))


def test_i_f_quadrature_matches_closed_form():
    f = beta_prime_density(P3)
    assert i_f_quadrature(f, 0.0, 3, 1) == pytest.approx(ALPHA31 * 60, rel=1e-7)
    for u in (0.5, 2.0, 6.0):
        assert i_f_quadrature(f, u, 3, 1) == pytest.approx(ALPHA31 * poly_j(u), rel=1e-7)


def test_i_f_quadrature_reports_failure():
    f = beta_prime_density(P3)
    with pytest.raises(QuadratureError) as exc:
        i_f_quadrature(f, 1.0, 3, 1, rtol=1e-30)
    assert exc.value.achieved > 0


def test_feature_map_route():
    p1 = KernelParams(d=1, p=1, sigma=1.0, epsilon=1.0, lam=1.0)
    assert feature_inner_product([0.0], [0.0], p1) == pytest.approx(kernel_eval([0.0], [0.0], p1),
                                                                   rel=1e-4)
    p2 = KernelParams(d=2, p=1, sigma=1.0, epsilon=math.sqrt(2), lam=1.0)
    x, y = np.array([1.0, 0.0]), np.array([0.0, 1.0])
    v = feature_inner_product(x, y, p2)
    assert v == pytest.approx(kernel_eval(x, y, p2), rel=1e-4)
    assert v == pytest.approx(feature_inner_product(y, x, p2), rel=1e-12)
    with pytest.raises(ValueError):
        feature_inner_product(np.zeros(4), np.zeros(4), KernelParams(d=4, p=1, sigma=1, epsilon=2))
