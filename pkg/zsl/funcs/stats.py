import logging

import numpy as np
from scipy import linalg

from zsl.models.distributions import ClassStats, PcaModel, StudentT
from zsl.models.errors import DegenerateData, EmptyInput, InvalidArgument

log = logging.getLogger(__name__)


def class_stats(rows) -> ClassStats:
    """
    Computes the sample mean, scatter matrix and size of one class.

    :param rows: An n x D matrix of the class's feature rows.
    :raises EmptyInput: if there are no rows.
    """
    rows = np.asarray(rows, dtype=float)
    if rows.ndim != 2 or rows.shape[0] < 1:
        raise EmptyInput("Cannot compute statistics of an empty class.")
    mean = rows.mean(axis=0)
    centered = rows - mean
    scatter = centered.T @ centered
    scatter = (scatter + scatter.T) / 2
    return ClassStats(mean, scatter, rows.shape[0])


def stats_by_class(features, labels, classes, rows=None) -> dict:
    """Returns {class id: ClassStats} over the given rows, for every class listed."""
    labels = np.asarray(labels)
    if rows is None:
        rows = np.arange(labels.shape[0])
    rows = np.asarray(rows, dtype=np.int64)
    out = {}
    for c in classes:
        class_rows = rows[labels[rows] == c]
        if not class_rows.size:
            raise EmptyInput(f"Seen class {c} has no training rows.")
        out[c] = class_stats(features[class_rows])
    return out


def pca_fit(train_rows, d: int) -> PcaModel:
    """
    Fits a plain (non-whitened) PCA projection onto the top-d principal directions.

    :param train_rows: An N x D matrix of training rows.
    :param d: The target dimension, 1 <= d <= min(D, N).
    :raises InvalidArgument: if d is out of range.
    :raises DegenerateData: if the data has rank below d.
    """
    train_rows = np.asarray(train_rows, dtype=float)
    n, dims = train_rows.shape
    if not 1 <= d <= min(dims, n):
        raise InvalidArgument(f"PCA dimension must be in [1, {min(dims, n)}], got {d}.")

    mean = train_rows.mean(axis=0)
    centered = train_rows - mean
    cov = centered.T @ centered / max(n - 1, 1)
    cov = (cov + cov.T) / 2

    # eigh returns ascending eigenvalues; take the top d and flip to descending
    values, vectors = linalg.eigh(cov, subset_by_index=[dims - d, dims - 1])
    values = values[::-1]
    vectors = vectors[:, ::-1]

    tol = max(dims, n) * np.finfo(float).eps * max(abs(values[0]), 1e-300)
    if values[0] <= 0 or values[-1] <= tol:
        raise DegenerateData(f"Training rows have rank below the requested PCA dimension {d}.")

    # sign convention: the largest-magnitude loading of each component is positive
    flip = np.sign(vectors[np.argmax(np.abs(vectors), axis=0), np.arange(d)])
    vectors = vectors * flip

    log.info(f"PCA {dims} -> {d}: {values.sum() / np.trace(cov):.2%} of variance retained")
    return PcaModel(mean, vectors, values)


def pca_apply(model: PcaModel, rows):
    return model.apply(rows)


def student_t_logpdf(x, t: StudentT):
    """Log-density of a (full or axis-factored) Student-t at one vector or at every row of a matrix."""
    return t.logpdf(x)
