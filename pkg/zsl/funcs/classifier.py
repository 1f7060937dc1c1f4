import logging

import numpy as np

from utils import config
from utils.constants import DEFAULT_PCA_DIM, SEARCH_SPACES, V1_REGULARIZATION, V2_KAPPA1, VARIANTS
from utils.functions import parallel_map
from zsl.funcs import ppd as ppdfuncs
from zsl.funcs.metaclass import build_meta_classes
from zsl.funcs.stats import pca_fit, stats_by_class
from zsl.models.distributions import DIAGONAL, FULL, Gaussian, GaussianMixture
from zsl.models.errors import DimensionMismatch, EmptyInput, InvalidArgument
from zsl.models.model import ClassPpd, MetaClassMap, Model, Prediction

log = logging.getLogger(__name__)


# ==== fitting ====
def resolve_pca_dim(variant, d, pca_dim=None):
    """
    None picks the default: DEFAULT_PCA_DIM for the full-covariance variants when D exceeds it, none for the
    constrained variant. 0 disables PCA.
    """
    if pca_dim is None:
        if variant == 'constrained' or d <= DEFAULT_PCA_DIM:
            return None
        return DEFAULT_PCA_DIM
    if pca_dim == 0:
        return None
    return int(pca_dim)


def _prepare(dataset, splits, variant, pca_dim):
    """Checks the split, fits PCA on seen training rows and returns (train rows, projected features, pca)."""
    if variant not in VARIANTS:
        raise InvalidArgument(f"Unknown variant: {variant} (expected one of {', '.join(VARIANTS)})")
    splits.check_against(dataset)
    if not splits.seen_train:
        raise EmptyInput("The split has no seen classes.")
    train = splits.train_rows(dataset.labels)
    seen_train = train[np.isin(dataset.labels[train], splits.seen_train)]

    pca = None
    target = resolve_pca_dim(variant, dataset.d, pca_dim)
    if target is not None:
        pca = pca_fit(dataset.features[seen_train], target)
        features = pca.apply(dataset.features)
    else:
        features = dataset.features.astype(float)
    return seen_train, features, pca


def fit(dataset, splits, hp, variant='unconstrained', pca_dim=None, sigma0_from='covariance', attr_norm='none',
        threads=None, ablation_base='unconstrained') -> Model:
    """
    Fits one predictive distribution per seen and unseen class.

    :type dataset: zsl.models.dataset.Dataset
    :type splits: zsl.models.dataset.SplitSpec
    :type hp: zsl.models.hyperparams.Hyperparams
    :param variant: One of VARIANTS.
    :param pca_dim: Target PCA dimension; None for the variant default, 0 for none.
    :param sigma0_from: 'covariance' or 'scatter'.
    :param attr_norm: 'none' or 'l2'.
    :param threads: Worker count for per-class construction.
    :param ablation_base: The covariance form ablation_v2 is built on.
    """
    if variant == 'ablation_v1':
        return fit_v1(dataset, splits, hp, pca_dim, attr_norm, threads)
    if variant == 'ablation_v2':
        return fit_v2(dataset, splits, hp, base=ablation_base, pca_dim=pca_dim, sigma0_from=sigma0_from,
                      attr_norm=attr_norm, threads=threads)
    if variant == 'ablation_flat':
        return fit_flat(dataset, splits, hp, pca_dim, sigma0_from, threads)
    threads = threads or config.THREADS

    rows, features, pca = _prepare(dataset, splits, variant, pca_dim)
    form = DIAGONAL if variant == 'constrained' else FULL
    hp = hp.resolved(features.shape[1])
    hp.validate(features.shape[1], form)

    meta_map = build_meta_classes(dataset, splits, hp.K, attr_norm)
    stats = stats_by_class(features, dataset.labels, splits.seen_train, rows)
    if form == DIAGONAL:
        stats = {c: st.diagonal() for c, st in stats.items()}
    prior = ppdfuncs.global_prior(stats, hp.s, sigma0_from, b0=hp.b0 if form == DIAGONAL else None)
    cache = ppdfuncs.SupportCache(stats)

    def build(c):
        support = meta_map[c]
        totals = cache.totals(support)
        support_stats = [stats[s] for s in support]
        if c in stats:
            mp = ppdfuncs.meta_posterior(support_stats, prior, hp, stats[c], totals)
            return ppdfuncs.seen_ppd(stats[c], mp, prior, hp, c)
        mp = ppdfuncs.meta_posterior(support_stats, prior, hp, None, totals)
        return ppdfuncs.unseen_ppd(mp, prior, hp, c)

    ppds = parallel_map(build, list(splits.seen_train) + list(splits.unseen), threads)
    log.info(f"Fitted {variant} model: {len(splits.seen_train)} seen, {len(splits.unseen)} unseen classes, "
             f"D={features.shape[1]}, support cache hits={cache.hits}")
    return Model(variant, hp, ppds, meta_map, pca)


def fit_v2(dataset, splits, hp, kappa1=V2_KAPPA1, base='unconstrained', **kwargs) -> Model:
    """
    The full pipeline with kappa1 forced to a degenerate value, giving meta and actual classes similar dispersion.

    :param base: The covariance form being ablated, 'unconstrained' or 'constrained'.
    """
    if base not in ('unconstrained', 'constrained'):
        raise InvalidArgument(f"ablation_v2 needs an unconstrained or constrained base, got {base}")
    model = fit(dataset, splits, hp.replace(kappa1=kappa1), base, **kwargs)
    model.variant = 'ablation_v2'
    return model



def fit_flat(dataset, splits, hp, pca_dim=None, sigma0_from='covariance', threads=None) -> Model:
    """
    The pipeline without the meta-class layer: every class is linked straight to the global prior,
    so all unseen classes share one predictive distribution.
    """
    threads = threads or config.THREADS
    rows, features, pca = _prepare(dataset, splits, 'ablation_flat', pca_dim)
    hp = hp.resolved(features.shape[1])
    hp.validate(features.shape[1], FULL)

    stats = stats_by_class(features, dataset.labels, splits.seen_train, rows)
    prior = ppdfuncs.global_prior(stats, hp.s, sigma0_from)
    shared = ppdfuncs.global_posterior(prior, hp)

    def build(c):
        if c in stats:
            mp = ppdfuncs.global_posterior(prior, hp, stats[c])
            return ppdfuncs.seen_ppd(stats[c], mp, prior, hp, c)
        return ppdfuncs.unseen_ppd(shared, prior, hp, c)

    ppds = parallel_map(build, list(splits.seen_train) + list(splits.unseen), threads)
    log.info(f"Fitted ablation_flat model: {len(splits.seen_train)} seen, {len(splits.unseen)} unseen classes")
    return Model('ablation_flat', hp, ppds, MetaClassMap({}, {}, 0), pca)


def fit_v1(dataset, splits, hp, pca_dim=None, attr_norm='none', threads=None) -> Model:
    """
    The non-Bayesian ablation: a Gaussian per seen class with regularized sample covariance, and an equal-weight
    mixture of the K support Gaussians per unseen class.

    :raises NotPositiveDefinite: if a class covariance is singular even after regularization.
    """
    threads = threads or config.THREADS
    rows, features, pca = _prepare(dataset, splits, 'ablation_v1', pca_dim)
    if hp.K < 1:
        raise InvalidArgument(f"K must be at least 1, got {hp.K}.")
    meta_map = build_meta_classes(dataset, splits, hp.K, attr_norm)
    stats = stats_by_class(features, dataset.labels, splits.seen_train, rows)

    def gaussian(c):
        st = stats[c]
        cov = st.covariance if st.covariance is not None else np.zeros_like(st.scatter)
        eps = V1_REGULARIZATION * np.trace(cov) / st.d
        return Gaussian(st.mean, cov + eps * np.eye(st.d))

    gaussians = dict(zip(splits.seen_train, parallel_map(gaussian, splits.seen_train, threads)))
    ppds = [ClassPpd(c, gaussians[c], seen=True) for c in splits.seen_train]
    ppds += [ClassPpd(c, GaussianMixture([gaussians[s] for s in meta_map[c]]), seen=False) for c in splits.unseen]
    log.info(f"Fitted ablation_v1 model: {len(splits.seen_train)} seen, {len(splits.unseen)} unseen classes")
    return Model('ablation_v1', hp, ppds, meta_map, pca)


# ==== prediction ====
def space_columns(model: Model, space='gzsl'):
    """The score-matrix columns a search space covers, in ascending class id order."""
    if space == 'gzsl':
        ids = model.class_ids
    elif space == 'zsl_unseen_only':
        ids = model.unseen_ids
    elif space == 'seen_only':
        ids = model.seen_ids
    else:
        raise InvalidArgument(f"Unknown search space: {space} (expected one of {', '.join(SEARCH_SPACES)})")
    if not len(ids):
        raise EmptyInput(f"The {space} search space has no classes.")
    return np.asarray([model.column(c) for c in ids], dtype=np.int64)


def score_matrix(model: Model, X, threads=1):
    """
    Log predictive densities of every row under every class.

    :param X: An N x D matrix of raw (pre-PCA) feature rows.
    :return: An N x C matrix, columns in model.class_ids order.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if X.shape[1] != model.d_in:
        raise DimensionMismatch(model.d_in, X.shape[1])
    Z = model.pca.apply(X) if model.pca is not None else X
    columns = parallel_map(lambda p: np.atleast_1d(p.logpdf(Z)), model.ppds, threads)
    return np.column_stack(columns)


def predict_batch(model: Model, X, space='gzsl', threads=1):
    """
    Classifies every row by maximum log predictive density over a search space.
    Ties go to the lowest class id.

    :return: (predicted class ids, the full N x C score matrix)
    """
    scores = score_matrix(model, X, threads)
    cols = space_columns(model, space)
    best = cols[np.argmax(scores[:, cols], axis=1)]
    return model.class_ids[best], scores


def predict(model: Model, x, space='gzsl') -> Prediction:
    x = np.asarray(x, dtype=float)
    if x.ndim != 1:
        raise InvalidArgument("predict takes a single feature vector; use predict_batch for matrices.")
    preds, scores = predict_batch(model, x[None, :], space)
    cols = space_columns(model, space)
    log_scores = {int(model.class_ids[i]): float(scores[0, i]) for i in cols}
    return Prediction(int(preds[0]), log_scores)
