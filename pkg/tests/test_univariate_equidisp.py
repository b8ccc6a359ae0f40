import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays
from scipy import optimize, stats

from equidisp.numerics import RandomStream
from equidisp.univariate_equidisp import (
    DegenerateSampleError,
    ueq_logpdf,
    ueq_loglik,
    ueq_lrt,
    ueq_mle,
    ueq_sample,
)

samples = arrays(np.float64, st.integers(2, 40), elements=st.floats(-50, 50, allow_nan=False))


def test_logpdf_at_mean_is_peak():
    assert ueq_logpdf(2.0, 2.0) == pytest.approx(-0.5 * math.log(4 * math.pi), abs=1e-15)


@given(x=st.floats(-100, 100), tau=st.floats(1e-3, 1e3))
def test_logpdf_matches_scipy(x, tau):
    assert ueq_logpdf(x, tau) == pytest.approx(stats.norm.logpdf(x, tau, math.sqrt(tau)), rel=1e-12, abs=1e-12)


@pytest.mark.parametrize("tau", [0.0, -1.0, math.nan])
def test_logpdf_rejects_bad_tau(tau):
    with pytest.raises(ValueError):
        ueq_logpdf(1.0, tau)


def test_mle_small_example():
    # m2 = (1 + 4 + 9)/3 = 14/3; tau^2 + tau = 14/3
    tau = ueq_mle([1.0, 2.0, 3.0])
    assert tau * tau + tau == pytest.approx(14 / 3, rel=1e-14)


@given(xs=samples.filter(lambda a: np.mean(a * a) > 1e-6))
@settings(max_examples=80, deadline=None)
def test_mle_maximizes_likelihood(xs):
    tau = ueq_mle(xs)
    res = optimize.minimize_scalar(lambda t: -ueq_loglik(xs, t), bounds=(tau / 10, tau * 10 + 1), method="bounded",
                                   options={"xatol": 1e-10})
    assert ueq_loglik(xs, tau) >= -res.fun - 1e-9 * max(1, abs(res.fun))


def test_mle_stable_for_tiny_second_moment():
    xs = np.full(10, 1e-9)
    # tau ~ m2 when m2 is small
    assert ueq_mle(xs) == pytest.approx(1e-18, rel=1e-9)


def test_mle_degenerate():
    with pytest.raises(DegenerateSampleError):
        ueq_mle([0.0, 0.0])
    with pytest.raises(DegenerateSampleError):
        ueq_mle([])


@given(xs=samples, perm_seed=st.integers(0, 2**32 - 1), tau=st.floats(0.1, 20))
@settings(max_examples=40, deadline=None)
def test_loglik_depends_on_sufficient_statistics(xs, perm_seed, tau):
    perm = np.random.default_rng(perm_seed).permutation(xs)
    assert ueq_loglik(perm, tau) == pytest.approx(ueq_loglik(xs, tau), rel=1e-12, abs=1e-9)
    n, s1, s2 = xs.size, xs.sum(), np.sum(xs * xs)
    closed = -0.5 * n * math.log(2 * math.pi * tau) - (s2 - 2 * tau * s1 + n * tau * tau) / (2 * tau)
    assert ueq_loglik(xs, tau) == pytest.approx(closed, rel=1e-10, abs=1e-8)


def test_lrt_exact_case():
    res = ueq_lrt([0.0, 2.0])
    assert res.tau_hat == 1.0
    assert res.lam == 1.0 and res.stat == 0.0 and res.p_value == 1.0
    assert math.copysign(1.0, res.stat) == 1.0


@given(xs=samples.filter(lambda a: np.var(a) > 1e-6))
@settings(max_examples=60, deadline=None)
def test_lrt_matches_direct_likelihoods(xs):
    res = ueq_lrt(xs)
    full = stats.norm.logpdf(xs, xs.mean(), xs.std()).sum()
    null = stats.norm.logpdf(xs, res.tau_hat, math.sqrt(res.tau_hat)).sum()
    assert res.log_lam <= 0 and 0 <= res.lam <= 1
    assert res.lam == pytest.approx(math.exp(res.log_lam), rel=1e-15, abs=0)
    assert res.stat >= 0
    assert res.stat == pytest.approx(max(2 * (full - null), 0.0), rel=1e-8, abs=1e-8)
    assert res.p_value == pytest.approx(stats.chi2.sf(res.stat, 1), rel=1e-10, abs=1e-300)


def test_lrt_power():
    xs = stats.norm.rvs(5, 1, size=500, random_state=np.random.default_rng(3))
    assert ueq_lrt(xs).p_value < 1e-3


def test_lrt_degenerate():
    with pytest.raises(DegenerateSampleError):
        ueq_lrt([3.0, 3.0, 3.0])
    with pytest.raises(DegenerateSampleError):
        ueq_lrt([1.0])


def test_sample_moments_and_determinism():
    xs = ueq_sample(3.0, 200_000, RandomStream(9))
    se = math.sqrt(3.0 / xs.size)
    assert abs(xs.mean() - 3.0) < 4 * se
    assert abs(xs.var() - 3.0) < 4 * 3.0 * math.sqrt(2 / xs.size)
    np.testing.assert_array_equal(xs, ueq_sample(3.0, 200_000, RandomStream(9)))


def test_sample_validation():
    with pytest.raises(ValueError):
        ueq_sample(1.0, 0, RandomStream(1))
    with pytest.raises(ValueError):
        ueq_sample(-1.0, 5, RandomStream(1))
