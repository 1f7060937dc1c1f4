"""
Posterior predictive distributions of the two-layer Gaussian hierarchy.

A class's mean is drawn around its meta-class mean, which is drawn around mu0; the covariance is shared
within a meta-class and Inverse-Wishart(Sigma0, m) a priori. Integrating out the class mean, the meta-class
mean and the covariance leaves a Student-t per class. Unseen classes use the same expression with the
current-class statistics dropped (n = 0), so both paths share _predictive().
The diagonal (constrained) model applies the univariate form per axis, with Inverse-Gamma(a0, b0) playing the
role of Inverse-Wishart(2 b0, 2 a0).
"""
import logging
import threading

import cachetools
import numpy as np

from zsl.models.distributions import ClassStats, DIAGONAL, FULL, StudentT
from zsl.models.errors import DegenerateData, EmptyInput, InvalidArgument, InvalidDegreesOfFreedom
from zsl.models.hyperparams import GlobalPrior, MetaPosterior
from zsl.models.model import ClassPpd

log = logging.getLogger(__name__)


class SupportCache:
    """Summed scatter and size of support sets, keyed by the set of support class ids."""

    def __init__(self, stats: dict, maxsize=4096):
        self.stats = stats
        self._cache = cachetools.LRUCache(maxsize)
        self._lock = threading.Lock()
        self.hits = 0

    def totals(self, support):
        key = tuple(sorted(support))
        with self._lock:
            if key in self._cache:
                self.hits += 1
                return self._cache[key]
        out = _support_totals([self.stats[c] for c in key])
        with self._lock:
            self._cache[key] = out
        return out


def _support_totals(support_stats):
    scatter_sum = np.zeros_like(support_stats[0].scatter)
    count_sum = 0
    for st in support_stats:
        scatter_sum = scatter_sum + st.scatter
        count_sum += st.count
    return scatter_sum, count_sum


def _outer(v, form):
    if form == DIAGONAL:
        return v * v
    return np.outer(v, v)


# ==== priors ====
def global_prior(seen_stats: dict, s: float, sigma0_from='covariance', b0: float = None) -> GlobalPrior:
    """
    Builds mu0 (unweighted mean of class means) and Sigma0 (s times the mean class covariance).

    :param seen_stats: {class id: ClassStats} of the seen classes. Diagonal statistics give a diagonal prior.
    :param s: Scale applied to the averaged covariance.
    :param sigma0_from: 'covariance' averages S / (n - 1); 'scatter' averages the raw scatter S.
    :param b0: Diagonal prior only. If set, Sigma0 is 2 * b0 on every axis and s is ignored.
    :raises EmptyInput: if there are no seen classes.
    :raises DegenerateData: if every seen class is a singleton.
    """
    if not seen_stats:
        raise EmptyInput("Cannot build a global prior without seen classes.")
    ordered = [seen_stats[c] for c in sorted(seen_stats)]
    mu0 = np.mean(np.stack([st.mean for st in ordered]), axis=0)
    diagonal = ordered[0].form == DIAGONAL

    if diagonal and b0 is not None:
        return GlobalPrior(mu0, np.full(mu0.shape[0], 2. * b0))

    informative = [st for st in ordered if st.count >= 2]
    if not informative:
        raise DegenerateData("Every seen class has a single training row; Sigma0 cannot be estimated.")
    if sigma0_from == 'covariance':
        parts = [st.covariance for st in informative]
    elif sigma0_from == 'scatter':
        parts = [st.scatter for st in informative]
    else:
        raise InvalidArgument(f"Unknown Sigma0 source: {sigma0_from}")
    sigma0 = s * np.mean(np.stack(parts), axis=0)
    if not diagonal:
        sigma0 = (sigma0 + sigma0.T) / 2
    log.debug(f"Global prior from {len(informative)}/{len(ordered)} classes ({sigma0_from})")
    return GlobalPrior(mu0, sigma0)


def meta_posterior(support_stats: list, prior: GlobalPrior, hp, current: ClassStats = None,
                   totals=None) -> MetaPosterior:
    """
    The local prior formed by a class's supporting seen classes.

    :param support_stats: ClassStats of the K supporting classes.
    :type prior: GlobalPrior
    :type hp: zsl.models.hyperparams.Hyperparams
    :param current: The class being modelled; None (or a zero-count class) leaves S_mu at zero.
    :param totals: Precomputed (scatter sum, count sum) of the support, e.g. from a SupportCache.
    """
    if not support_stats:
        raise EmptyInput("A meta-class needs at least one supporting class.")
    kappa0, kappa1 = hp.kappa0, hp.kappa1

    weights = [st.count * kappa1 / (st.count + kappa1) for st in support_stats]
    kappa_bar = sum(weights) + kappa0
    weighted = kappa0 * prior.mu0
    for w, st in zip(weights, support_stats):
        weighted = weighted + w * st.mean
    mu_bar = weighted / kappa_bar
    kappa_tilde = kappa_bar * kappa1 / (kappa_bar + kappa1)

    if totals is None:
        totals = _support_totals(support_stats)
    scatter_sum, count_sum = totals
    s_mu = _s_mu(current, mu_bar, kappa_tilde, prior.form, prior.d)
    return MetaPosterior(mu_bar, kappa_bar, kappa_tilde, scatter_sum, count_sum, len(support_stats), s_mu)


def global_posterior(prior: GlobalPrior, hp, current: ClassStats = None) -> MetaPosterior:
    """The local prior with the meta-class layer removed: classes are linked straight to the global prior."""
    kappa_bar = hp.kappa0
    kappa_tilde = kappa_bar * hp.kappa1 / (kappa_bar + hp.kappa1)
    mu_bar = prior.mu0.copy()
    zero = np.zeros_like(prior.sigma0)
    s_mu = _s_mu(current, mu_bar, kappa_tilde, prior.form, prior.d)
    return MetaPosterior(mu_bar, kappa_bar, kappa_tilde, zero, 0, 0, s_mu)


def _s_mu(current, mu_bar, kappa_tilde, form, d):
    if current is None or current.count == 0:
        return np.zeros(d) if form == DIAGONAL else np.zeros((d, d))
    n = current.count
    return n * kappa_tilde / (kappa_tilde + n) * _outer(current.mean - mu_bar, form)


# ==== predictive densities ====
def _predictive(n, xbar, scatter, mp: MetaPosterior, prior: GlobalPrior, hp):
    d = prior.d
    if prior.form == DIAGONAL:
        dof = n + mp.dof_increment + 2 * hp.a0
    else:
        dof = n + mp.dof_increment + hp.m - d + 1
    if not dof > 0:
        raise InvalidDegreesOfFreedom(dof)

    kt = mp.kappa_tilde
    if n == 0:
        location = mp.mu_bar.copy()
    else:
        location = (n * xbar + kt * mp.mu_bar) / (n + kt)
    scale = (prior.sigma0 + mp.scatter_sum + scatter + mp.s_mu) * (n + kt + 1) / ((n + kt) * dof)
    if prior.form == FULL:
        scale = (scale + scale.T) / 2
    return StudentT(location, scale, dof)


def _resolved(hp, prior):
    hp = hp.resolved(prior.d)
    if prior.form == DIAGONAL and hp.a0 is None:
        raise InvalidArgument("The diagonal model needs a0.")
    return hp


def seen_ppd(current: ClassStats, mp: MetaPosterior, prior: GlobalPrior, hp, class_id: int = -1) -> ClassPpd:
    """
    The Student-t predictive of a seen class: its own data combined with its meta-class's local prior.

    :param current: The class's statistics. A zero-count phantom reduces exactly to unseen_ppd.
    :param mp: The meta posterior built with ``current``.
    """
    hp = _resolved(hp, prior)
    if current.form != prior.form:
        raise InvalidArgument(f"Class statistics are {current.form}, the prior is {prior.form}.")
    t = _predictive(current.count, current.mean, current.scatter, mp, prior, hp)
    return ClassPpd(class_id, t, seen=True)


def unseen_ppd(mp: MetaPosterior, prior: GlobalPrior, hp, class_id: int = -1) -> ClassPpd:
    """The Student-t predictive of a class without training rows: the meta-class's local prior alone."""
    hp = _resolved(hp, prior)
    zero = np.zeros_like(prior.sigma0)
    t = _predictive(0, None, zero, mp, prior, hp)
    return ClassPpd(class_id, t, seen=False)


def seen_ppd_diag(current: ClassStats, mp: MetaPosterior, prior: GlobalPrior, hp, class_id: int = -1) -> ClassPpd:
    """seen_ppd under the axis-factored model; full statistics are reduced to their diagonals."""
    if prior.form != DIAGONAL:
        raise InvalidArgument("seen_ppd_diag needs a diagonal prior.")
    return seen_ppd(current.diagonal(), mp, prior, hp, class_id)


def unseen_ppd_diag(mp: MetaPosterior, prior: GlobalPrior, hp, class_id: int = -1) -> ClassPpd:
    if prior.form != DIAGONAL:
        raise InvalidArgument("unseen_ppd_diag needs a diagonal prior.")
    return unseen_ppd(mp, prior, hp, class_id)
