import numpy as np
import pytest
from scipy import stats

from utils import config
from zsl.funcs.stats import class_stats
from zsl.models.hyperparams import GlobalPrior


def requires_acceptance():
    """
    A marker that skips a test (or, as ``pytestmark``, a module) unless the slow desk-scale checks are enabled
    (BZSL_ACCEPTANCE=1).
    """
    return pytest.mark.skipif(not config.ACCEPTANCE, reason="Acceptance checks are disabled (set BZSL_ACCEPTANCE=1)")


# ==== random fixtures ====
def random_pd(rng, d, jitter=0.5):
    """A random symmetric positive definite d x d matrix."""
    a = rng.standard_normal((d, d))
    return a @ a.T / d + jitter * np.eye(d)


def random_stats(rng, d, n=None, loc=None, cov=None):
    """ClassStats of n rows drawn from a Gaussian; n defaults to a random size in [5, 30)."""
    if n is None:
        n = int(rng.integers(5, 30))
    if loc is None:
        loc = rng.normal(scale=3., size=d)
    if cov is None:
        cov = random_pd(rng, d)
    rows = rng.multivariate_normal(loc, cov, size=n)
    return class_stats(rows)


def random_prior(rng, d):
    return GlobalPrior(rng.normal(size=d), random_pd(rng, d))


# ==== reference densities ====
def reference_t_logpdf(x, t):
    """Full-form Student-t log-density through scipy, independent of zsl.models.distributions."""
    return stats.multivariate_t(loc=t.location, shape=t.scale, df=t.dof).logpdf(x)


def reference_diag_t_logpdf(x, t):
    """Axis-factored Student-t log-density: the sum of univariate scipy t log-densities."""
    x = np.atleast_2d(x)
    per_axis = stats.t.logpdf(x, df=t.dof, loc=t.location, scale=np.sqrt(t.scale))
    return np.sum(per_axis, axis=1)


def assert_same_t(a, b, rtol=0., atol=0.):
    """Asserts two Student-t densities have the same location, scale and degrees of freedom."""
    assert a.form == b.form
    np.testing.assert_allclose(a.location, b.location, rtol=rtol, atol=atol)
    np.testing.assert_allclose(a.scale, b.scale, rtol=rtol, atol=atol)
    np.testing.assert_allclose(a.dof, b.dof, rtol=rtol, atol=atol)
