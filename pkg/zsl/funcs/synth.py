import logging

import numpy as np
from scipy import linalg, stats
from scipy.special import logsumexp

from utils.constants import MAX_ORACLE_DIM, MC_CHUNK, MIN_MC_DRAWS
from zsl.funcs.evaluation import harmonic_mean, mean_accuracy, per_class_top1
from zsl.funcs.ppd import meta_posterior
from zsl.models.dataset import Dataset, SplitSpec
from zsl.models.distributions import DIAGONAL, Gaussian
from zsl.models.errors import DegenerateData, InvalidArgument, InvalidDegreesOfFreedom, NotPositiveDefinite
from zsl.models.model import EvalReport

log = logging.getLogger(__name__)


def _lower_chol(matrix, what):
    try:
        return linalg.cholesky(np.asarray(matrix, dtype=float), lower=True)
    except linalg.LinAlgError:
        raise NotPositiveDefinite(what)


# ==== inverse-wishart ====
def sample_inverse_wishart(scale, dof, rng, size=None):
    """
    Draws from Inverse-Wishart(scale, dof) by inverting Bartlett-decomposed Wishart(scale^-1, dof) draws.

    :param scale: A D x D positive definite scale matrix.
    :param dof: Degrees of freedom, greater than D - 1.
    :param rng: A numpy Generator.
    :param size: The number of draws, or None for a single D x D matrix.
    :return: A D x D matrix, or a size x D x D stack.
    """
    scale = np.asarray(scale, dtype=float)
    d = scale.shape[0]
    if not dof > d - 1:
        raise InvalidDegreesOfFreedom(dof)
    scale_chol = _lower_chol(scale, "Inverse-Wishart scale matrix")
    inv_scale = linalg.cho_solve((scale_chol, True), np.eye(d))
    chol = _lower_chol((inv_scale + inv_scale.T) / 2, "inverse scale matrix")
    n = 1 if size is None else size

    A = np.zeros((n, d, d))
    diag_idx = np.diag_indices(d)
    df = dof * np.ones((n, 1)) - np.arange(d)
    A[:, diag_idx[0], diag_idx[1]] = np.sqrt(stats.chi2.rvs(df=df, random_state=rng))
    tril_idx = np.tril_indices(d, k=-1)
    A[:, tril_idx[0], tril_idx[1]] = stats.norm.rvs(size=(n, d * (d - 1) // 2), random_state=rng)

    # Wishart draw W = (LA)(LA)^T, so the inverse is (LA)^-T (LA)^-1
    factor_inv = np.linalg.inv(chol @ A)
    out = np.swapaxes(factor_inv, -1, -2) @ factor_inv
    out = (out + np.swapaxes(out, -1, -2)) / 2
    return out[0] if size is None else out


# ==== generative model ====
class GenSpec:
    def __init__(self, n_meta: int, classes_per_meta: int, samples_per_class: int, d: int, kappa0: float,
                 kappa1: float, m: float = None, sigma0=None, mu0=None, seed: int = 0, attr_noise: float = 0.1,
                 val_per_meta: int = 0, test_fraction: float = 0.2):
        """
        :param n_meta: Number of meta-classes J.
        :param classes_per_meta: Classes per meta-class; the last one of each meta-class is unseen.
        :param samples_per_class: Rows drawn per class.
        :param d: Feature dimension.
        :param m: Inverse-Wishart degrees of freedom. None means D + 2.
        :param sigma0: Inverse-Wishart scale. None means the identity.
        :param mu0: Global mean. None means zero.
        :param seed: Non-negative seed; every meta-class and class draws from its own stream keyed by it.
        :param attr_noise: Attribute noise, relative to the prior's per-axis standard deviation.
        :param val_per_meta: Seen classes per meta-class marked as validation classes.
        :param test_fraction: Fraction of each seen class's rows held out as test rows.
        """
        self.n_meta = int(n_meta)
        self.classes_per_meta = int(classes_per_meta)
        self.samples_per_class = int(samples_per_class)
        self.d = int(d)
        self.kappa0 = float(kappa0)
        self.kappa1 = float(kappa1)
        self.m = float(m) if m is not None else self.d + 2.
        self.sigma0 = np.asarray(sigma0, dtype=float) if sigma0 is not None else np.eye(self.d)
        self.mu0 = np.asarray(mu0, dtype=float) if mu0 is not None else np.zeros(self.d)
        self.seed = int(seed)
        self.attr_noise = float(attr_noise)
        self.val_per_meta = int(val_per_meta)
        self.test_fraction = float(test_fraction)

        if self.n_meta < 1 or self.samples_per_class < 1 or self.d < 1:
            raise InvalidArgument("n_meta, samples_per_class and d must be positive.")
        if self.classes_per_meta < 2 + self.val_per_meta:
            raise InvalidArgument("Each meta-class needs an unseen class, its validation classes and a training class.")
        if self.m < self.d + 2:
            raise InvalidArgument(f"m must be at least D + 2 = {self.d + 2}, got {self.m}.")
        if not (self.kappa0 > 0 and self.kappa1 > 0):
            raise InvalidArgument("kappa0 and kappa1 must be positive.")
        if self.seed < 0:
            raise InvalidArgument("The seed must be non-negative.")
        if not 0 <= self.test_fraction < 1:
            raise InvalidArgument(f"test_fraction must be in [0, 1), got {self.test_fraction}.")
        if self.sigma0.shape != (self.d, self.d) or self.mu0.shape != (self.d,):
            raise InvalidArgument("sigma0 must be D x D and mu0 length D.")

    @property
    def num_classes(self):
        return self.n_meta * self.classes_per_meta

    def class_id(self, meta, local):
        return meta * self.classes_per_meta + local

    def to_dict(self):
        return {
            "n_meta": self.n_meta, "classes_per_meta": self.classes_per_meta,
            "samples_per_class": self.samples_per_class, "d": self.d, "kappa0": self.kappa0, "kappa1": self.kappa1,
            "m": self.m, "sigma0": self.sigma0.tolist(), "mu0": self.mu0.tolist(), "seed": self.seed,
            "attr_noise": self.attr_noise, "val_per_meta": self.val_per_meta, "test_fraction": self.test_fraction
        }

    @classmethod
    def from_dict(cls, d):
        return cls(**d)


class GroundTruth:
    """The latent parameters a synthetic dataset was drawn from."""

    def __init__(self, class_means: dict, meta_means: dict, meta_covs: dict, meta_of: dict, spec: GenSpec):
        self.class_means = class_means
        self.meta_means = meta_means
        self.meta_covs = meta_covs
        self.meta_of = meta_of
        self.spec = spec

    def class_density(self, class_id):
        return Gaussian(self.class_means[class_id], self.meta_covs[self.meta_of[class_id]])

    def to_dict(self):
        return {
            "spec": self.spec.to_dict(),
            "class_means": {str(c): v.tolist() for c, v in sorted(self.class_means.items())},
            "meta_means": {str(j): v.tolist() for j, v in sorted(self.meta_means.items())},
            "meta_covs": {str(j): v.tolist() for j, v in sorted(self.meta_covs.items())},
            "meta_of": {str(c): j for c, j in sorted(self.meta_of.items())}
        }

    @classmethod
    def from_dict(cls, d):
        return cls({int(c): np.asarray(v) for c, v in d['class_means'].items()},
                   {int(j): np.asarray(v) for j, v in d['meta_means'].items()},
                   {int(j): np.asarray(v) for j, v in d['meta_covs'].items()},
                   {int(c): int(j) for c, j in d['meta_of'].items()},
                   GenSpec.from_dict(d['spec']))


def sample_dataset(spec: GenSpec):
    """
    Samples a dataset from the two-layer hierarchy:
    Sigma_j ~ IW(Sigma0, m), mu_j ~ N(mu0, Sigma_j / kappa0), mu_ji ~ N(mu_j, Sigma_j / kappa1),
    x ~ N(mu_ji, Sigma_j). Class attributes are the meta-class mean plus small noise.

    :return: (Dataset, SplitSpec, GroundTruth)
    """
    _lower_chol(spec.sigma0, "sigma0")
    attr_scale = spec.attr_noise * np.sqrt(np.trace(spec.sigma0) / spec.d)
    features, labels, attributes = [], [], np.zeros((spec.num_classes, spec.d))
    class_means, meta_means, meta_covs, meta_of = {}, {}, {}, {}
    seen, unseen, val_unseen, test_index = [], [], [], []

    for j in range(spec.n_meta):
        meta_rng = np.random.default_rng([spec.seed, 0, j])
        cov = sample_inverse_wishart(spec.sigma0, spec.m, meta_rng)
        chol = _lower_chol(cov, f"covariance of meta-class {j}")
        mu_j = spec.mu0 + chol @ meta_rng.standard_normal(spec.d) / np.sqrt(spec.kappa0)
        meta_means[j], meta_covs[j] = mu_j, cov

        for i in range(spec.classes_per_meta):
            c = spec.class_id(j, i)
            class_rng = np.random.default_rng([spec.seed, 1, j, c])
            mu_ji = mu_j + chol @ class_rng.standard_normal(spec.d) / np.sqrt(spec.kappa1)
            rows = mu_ji + class_rng.standard_normal((spec.samples_per_class, spec.d)) @ chol.T
            attributes[c] = mu_j + attr_scale * class_rng.standard_normal(spec.d)
            class_means[c], meta_of[c] = mu_ji, j

            start = len(labels)
            features.append(rows)
            labels.extend([c] * spec.samples_per_class)
            if i == spec.classes_per_meta - 1:
                unseen.append(c)
                test_index.extend(range(start, start + spec.samples_per_class))
            else:
                seen.append(c)
                if i >= spec.classes_per_meta - 1 - spec.val_per_meta:
                    val_unseen.append(c)
                n_test = int(np.floor(spec.test_fraction * spec.samples_per_class))
                if n_test and spec.samples_per_class - n_test >= 1:
                    test_index.extend(range(start + spec.samples_per_class - n_test, start + spec.samples_per_class))

    dataset = Dataset(np.concatenate(features), np.asarray(labels), attributes,
                      [f"meta{meta_of[c]}_class{c}" for c in range(spec.num_classes)])
    splits = SplitSpec(seen, unseen, val_unseen if spec.val_per_meta else None, sorted(test_index))
    truth = GroundTruth(class_means, meta_means, meta_covs, meta_of, spec)
    log.info(f"Sampled synthetic {dataset!r} from seed {spec.seed}")
    return dataset, splits, truth


# ==== oracles ====
def mc_ppd_oracle(x, support_stats, current_stats, prior, hp, n_draws: int = MIN_MC_DRAWS, seed: int = 0):
    """
    Monte-Carlo estimate of the log predictive density at x: draws Sigma from its Inverse-Wishart posterior and
    the class mean from its conditional Gaussian, then averages N(x | mu, Sigma) in log space.

    :param current_stats: The class's own statistics, or None for a class without training rows.
    :type prior: zsl.models.hyperparams.GlobalPrior
    :type hp: zsl.models.hyperparams.Hyperparams
    :return: (log density estimate, its standard error)
    """
    if prior.form == DIAGONAL:
        raise InvalidArgument("The Monte-Carlo oracle covers the full-covariance model only.")
    d = prior.d
    if d > MAX_ORACLE_DIM:
        raise InvalidArgument(f"The Monte-Carlo oracle supports D <= {MAX_ORACLE_DIM}, got {d}.")
    if n_draws < MIN_MC_DRAWS:
        raise InvalidArgument(f"The Monte-Carlo oracle needs at least {MIN_MC_DRAWS} draws, got {n_draws}.")
    hp = hp.resolved(d)
    x = np.asarray(x, dtype=float)

    mp = meta_posterior(support_stats, prior, hp, current_stats)
    n = current_stats.count if current_stats is not None else 0
    kn = n + mp.kappa_tilde
    if n:
        location = (n * current_stats.mean + mp.kappa_tilde * mp.mu_bar) / kn
        scatter = current_stats.scatter
    else:
        location = mp.mu_bar
        scatter = np.zeros((d, d))
    post_scale = prior.sigma0 + mp.scatter_sum + scatter + mp.s_mu
    post_dof = hp.m + mp.dof_increment + n

    rng = np.random.default_rng(seed)
    parts = []
    for start in range(0, n_draws, MC_CHUNK):
        size = min(MC_CHUNK, n_draws - start)
        sigmas = sample_inverse_wishart(post_scale, post_dof, rng, size)
        chols = np.linalg.cholesky(sigmas)
        mus = location + (chols @ rng.standard_normal((size, d, 1)))[..., 0] / np.sqrt(kn)
        z = np.linalg.solve(chols, (x - mus)[..., None])[..., 0]
        logdet = 2 * np.sum(np.log(np.diagonal(chols, axis1=1, axis2=2)), axis=1)
        parts.append(-0.5 * (d * np.log(2 * np.pi) + logdet + np.sum(z ** 2, axis=1)))
    logs = np.concatenate(parts)
    if not np.all(np.isfinite(logs)):
        raise DegenerateData("Monte-Carlo draws produced non-finite densities.")

    estimate = logsumexp(logs) - np.log(logs.size)
    weights = np.exp(logs - logs.max())
    std_err = np.std(weights, ddof=1) / (np.sqrt(logs.size) * np.mean(weights))
    return float(estimate), float(std_err)


def _oracle_predictions(dataset, truth: GroundTruth, rows):
    classes = sorted(truth.class_means)
    X = dataset.features[rows].astype(float)
    scores = np.column_stack([np.atleast_1d(truth.class_density(c).logpdf(X)) for c in classes])
    return np.asarray(classes)[np.argmax(scores, axis=1)]


def bayes_oracle_accuracy(dataset, splits, truth: GroundTruth, rows=None) -> float:
    """
    Macro top-1 accuracy of classifying test rows by their true class-conditional Gaussians over every class:
    the ceiling a model fitted to the same data can approach.
    """
    rows = splits.test_rows(dataset.labels) if rows is None else np.asarray(rows, dtype=np.int64)
    preds = _oracle_predictions(dataset, truth, rows)
    return mean_accuracy(per_class_top1(preds, dataset.labels[rows], sorted(truth.class_means)))


def bayes_oracle_report(dataset, splits, truth: GroundTruth, rows=None) -> EvalReport:
    """The true-parameter classifier's seen / unseen / harmonic-mean decomposition."""
    rows = splits.test_rows(dataset.labels) if rows is None else np.asarray(rows, dtype=np.int64)
    preds = _oracle_predictions(dataset, truth, rows)
    truths = dataset.labels[rows]
    seen_acc = per_class_top1(preds, truths, splits.seen_train)
    unseen_acc = per_class_top1(preds, truths, splits.unseen)
    tr, ts = mean_accuracy(seen_acc), mean_accuracy(unseen_acc)
    return EvalReport({**seen_acc, **unseen_acc}, ts, tr, harmonic_mean(tr, ts))
