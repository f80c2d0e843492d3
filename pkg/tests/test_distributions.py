import math

import numpy as np
import pytest

from gotmmd.distributions import (
    DependentDesign,
    SubGammaSpec,
    child_seed,
    example1_exact_moment,
    example1_log_mgf,
    gamma_sample,
    make_rng,
    sample_dependent_gp,
    sample_gaussian,
    sample_subgamma_example1,
    sample_unit_sphere,
    smooth,
    subgamma_log_mgf_envelope,
)
from gotmmd.special_fns import DomainError, central_chi_moment


def se(x):
    return np.std(x, ddof=1) / math.sqrt(len(x))


def test_child_seeds_distinct_and_stable():
    seeds = [child_seed(0, i) for i in range(1000)]
    assert len(set(seeds)) == 1000
    assert child_seed(12, 3) == child_seed(12, 3)
    assert all(0 <= s < 2**64 for s in seeds)


def test_rng_is_philox_and_reproducible():
    r = make_rng(5)
    assert isinstance(r.bit_generator, np.random.Philox)
    assert np.array_equal(make_rng(5).random(10), make_rng(5).random(10))
    assert not np.array_equal(make_rng(5, 0).random(10), make_rng(5, 1).random(10))


def test_gaussian_moments():
    X = sample_gaussian(10**6, 3, 1)
    assert np.all(np.abs(X.mean(axis=0)) < 4e-3)
    sq = np.sum(X * X, axis=1)
    assert abs(sq.mean() - 3) < 3 * se(sq)
    assert np.array_equal(X[:5], sample_gaussian(10**6, 3, 1)[:5])


def test_gamma_sampler():
    x = gamma_sample(1.0, 2.5, 200000, 3)
    assert abs(x.mean() - 2.5) < 4 * se(x)
    b = 0.5
    y = gamma_sample(1 / (2 * b * b), 2 * b * b, 200000, 4)
    assert abs(y.mean() - 1.0) < 4 * se(y)
    shape, scale = 3.0, 0.7
    z = gamma_sample(shape, scale, 400000, 5)
    v = (z - z.mean()) ** 2
    assert abs(v.mean() - shape * scale**2) < 4 * se(v)
    with pytest.raises(DomainError):
        gamma_sample(0.0, 1.0, 3, 0)


def test_example1_second_and_fourth_moments():
    d, b = 4, 0.5
    X = sample_subgamma_example1(400000, d, b, 9)
    sq = np.sum(X * X, axis=1)
    assert abs(sq.mean() - d) < 3 * se(sq)
    q = sq**2
    assert abs(q.mean() - example1_exact_moment(d, b, 4)) < 3 * se(q)


def test_example1_exact_moment_values():
    assert example1_exact_moment(6, 0.3, 2) == pytest.approx(6.0, rel=1e-13)
    assert example1_exact_moment(3, 1.0, 4) == pytest.approx(45.0, rel=1e-13)
    assert example1_exact_moment(2, 0.0, 3) == pytest.approx(central_chi_moment(2, 3), rel=1e-14)
    X = sample_subgamma_example1(400000, 5, 0.3, 10)
    c = np.linalg.norm(X, axis=1) ** 3
    assert abs(c.mean() - example1_exact_moment(5, 0.3, 3)) < 3 * se(c)


def test_example1_mgf():
    assert example1_log_mgf(0.0, 0.4) == 0.0
    assert example1_log_mgf(0.3, 1e-4) == pytest.approx(0.045, rel=1e-6)
    assert example1_log_mgf(0.3, 0.0) == pytest.approx(0.045, rel=1e-15)
    for b in (0.1, 0.5, 1.0, 2.0):
        a = np.linspace(0, 0.99 / b, 50)
        assert np.all(example1_log_mgf(a, b) <= subgamma_log_mgf_envelope(a, 1.0, b) + 1e-14)
    with pytest.raises(DomainError):
        example1_log_mgf(2.0, 0.5)


def test_example1_empirical_mgf():
    b, d = 0.5, 3
    a = 0.5 / b
    X = sample_subgamma_example1(400000, d, b, 12)
    e = np.exp(a * X[:, 0])
    assert abs(math.log(e.mean()) - example1_log_mgf(a, b)) < 4 * se(e) / e.mean()


def test_smooth():
    X = sample_gaussian(100, 2, 0)
    assert np.array_equal(smooth(X, 0.0, 1), X)
    Y = smooth(sample_gaussian(200000, 2, 1), 0.5, 2)
    np.testing.assert_allclose(np.cov(Y.T), 1.25 * np.eye(2), atol=0.02)
    assert np.array_equal(smooth(X, 0.3, 4), smooth(X, 0.3, 4))


def test_unit_sphere():
    A = sample_unit_sphere(200, 30, 3)
    np.testing.assert_allclose(np.linalg.norm(A, axis=1), 1.0, rtol=0, atol=1e-12)
    G = A @ A.T
    off = G[np.triu_indices(200, 1)] ** 2
    assert abs(off.mean() - 1 / 30) < 3 * se(off)
    assert set(np.unique(sample_unit_sphere(50, 1, 0))) <= {-1.0, 1.0}


def test_dependent_gp_structure():
    assert np.array_equal(*sample_dependent_gp(DependentDesign(np.array([[1.0, 0], [1.0, 0]])), 3, 1))
    a1 = np.array([1.0, 0.0])
    a2 = np.array([0.5, math.sqrt(0.75)])
    design = DependentDesign(np.vstack([a1, a2]))
    reps = np.stack([sample_dependent_gp(design, 2, child_seed(4, r)) for r in range(20000)])
    prod = reps[:, 0, :] * reps[:, 1, :]
    for c in range(2):
        assert abs(prod[:, c].mean() - 0.5) < 3 * se(prod[:, c])
    cross = reps[:, 0, 0] * reps[:, 1, 1]
    assert abs(cross.mean()) < 3 * se(cross)
    orth = DependentDesign(np.eye(3))
    reps = np.stack([sample_dependent_gp(orth, 1, child_seed(5, r))[:, 0] for r in range(20000)])
    assert abs(np.corrcoef(reps.T)[0, 1]) < 0.03


def test_design_validation_and_transform():
    with pytest.raises(ValueError):
        DependentDesign(np.array([[1.0, 1.0]]))
    design = DependentDesign(np.eye(2), transform=np.tanh)
    S = sample_dependent_gp(design, 3, 0)
    assert np.all(np.abs(S) < 1)
    assert design.n == 2 and design.N == 2


def test_subgamma_spec():
    spec = SubGammaSpec(1.0, 0.5, example1=True)
    assert spec.sampler(3)(10, 0).shape == (10, 3)
    with pytest.raises(ValueError):
        SubGammaSpec(2.0, 0.5).sampler(3)
    with pytest.raises(DomainError):
        SubGammaSpec(-1.0, 0.5)
