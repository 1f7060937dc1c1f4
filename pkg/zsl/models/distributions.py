import logging

import numpy as np
from scipy import linalg
from scipy.special import gammaln, logsumexp

from zsl.models.errors import DimensionMismatch, InvalidArgument, InvalidDegreesOfFreedom, NonFiniteResult, \
    NotPositiveDefinite

log = logging.getLogger(__name__)

FULL = 'full'
DIAGONAL = 'diagonal'


class ClassStats:
    """
    Sufficient statistics of one class: sample mean, scatter matrix and size.
    The scatter is a D x D matrix, or a length-D vector of per-dimension squared-deviation sums
    when the statistics were reduced for the diagonal model.
    """

    def __init__(self, mean, scatter, count: int):
        self.mean = np.asarray(mean, dtype=float)
        self.scatter = np.asarray(scatter, dtype=float)
        self.count = int(count)
        if self.count < 0:
            raise InvalidArgument(f"Class size must be non-negative, got {count}.")

    @classmethod
    def phantom(cls, d: int, diagonal=False):
        """A zero-count class with zero mean and scatter (the unseen-class limit of the seen PPD)."""
        scatter = np.zeros(d) if diagonal else np.zeros((d, d))
        return cls(np.zeros(d), scatter, 0)

    @property
    def form(self):
        return DIAGONAL if self.scatter.ndim == 1 else FULL

    @property
    def d(self):
        return self.mean.shape[0]

    @property
    def covariance(self):
        """The unbiased sample covariance S / (n - 1); None for singleton classes."""
        if self.count < 2:
            return None
        return self.scatter / (self.count - 1)

    def diagonal(self):
        """Returns these statistics reduced to per-dimension scatter sums."""
        if self.form == DIAGONAL:
            return self
        return ClassStats(self.mean, np.diag(self.scatter).copy(), self.count)

    def to_dict(self):
        return {"mean": self.mean.tolist(), "scatter": self.scatter.tolist(), "count": self.count}

    @classmethod
    def from_dict(cls, d):
        return cls(d['mean'], d['scatter'], d['count'])

    def __repr__(self):
        return f"<ClassStats d={self.d} count={self.count} form={self.form}>"


class PcaModel:
    def __init__(self, mean, projection, explained_variance=None):
        self.mean = np.asarray(mean, dtype=float)
        self.projection = np.asarray(projection, dtype=float)
        self.explained_variance = None if explained_variance is None else np.asarray(explained_variance, dtype=float)

    @property
    def d_in(self):
        return self.projection.shape[0]

    @property
    def d(self):
        return self.projection.shape[1]

    def apply(self, rows):
        rows = np.asarray(rows, dtype=float)
        if rows.shape[-1] != self.d_in:
            raise DimensionMismatch(self.d_in, rows.shape[-1])
        return (rows - self.mean) @ self.projection

    def __repr__(self):
        return f"<PcaModel {self.d_in} -> {self.d}>"


class _CholeskyScaled:
    """Caches the Cholesky factor and log-determinant of a full scale matrix, or the logs of a diagonal one."""

    def __init__(self, location, scale=None, chol=None, what="scale matrix"):
        self.location = np.asarray(location, dtype=float)
        if chol is not None:
            chol = np.asarray(chol, dtype=float)
            if chol.ndim == 2:
                self._chol = chol
                self._scale = None
            else:
                self._chol = None
                self._scale = chol ** 2
        else:
            scale = np.asarray(scale, dtype=float)
            self._scale = scale
            self._chol = None
            if scale.ndim == 2:
                try:
                    self._chol = linalg.cholesky(scale, lower=True)
                except linalg.LinAlgError:
                    raise NotPositiveDefinite(what)

        if self._chol is not None:
            if self._chol.shape != (self.d, self.d):
                raise DimensionMismatch((self.d, self.d), self._chol.shape)
            diag = np.diag(self._chol)
            if not np.all(diag > 0) or not np.all(np.isfinite(self._chol)):
                raise NotPositiveDefinite(what)
            self.form = FULL
            self._logdet = 2 * np.sum(np.log(diag))
        else:
            if self._scale.shape != self.location.shape or not np.all(self._scale > 0) \
                    or not np.all(np.isfinite(self._scale)):
                raise NotPositiveDefinite(what)
            self.form = DIAGONAL
            self._log_scale = np.log(self._scale)
            self._logdet = np.sum(self._log_scale)

    @property
    def d(self):
        return self.location.shape[0]

    @property
    def scale(self):
        if self._scale is None:
            self._scale = self._chol @ self._chol.T
        return self._scale

    @property
    def chol(self):
        """The lower Cholesky factor (full form) or the per-axis standard scales (diagonal form)."""
        if self.form == FULL:
            return self._chol
        return np.sqrt(self._scale)

    @property
    def logdet(self):
        return self._logdet

    def _deviations(self, x):
        x = np.asarray(x, dtype=float)
        if x.shape[-1] != self.d:
            raise DimensionMismatch(self.d, x.shape[-1])
        return np.atleast_2d(x) - self.location, x.ndim == 1

    def mahalanobis(self, x):
        """Squared Mahalanobis distances under the scale, by triangular solve against the cached factor."""
        dev, _ = self._deviations(x)
        if self.form == FULL:
            z = linalg.solve_triangular(self._chol, dev.T, lower=True, check_finite=False)
            return np.sum(z ** 2, axis=0)
        return np.sum(dev ** 2 / self._scale, axis=1)

    @staticmethod
    def _checked(out, single):
        if not np.all(np.isfinite(out)):
            raise NonFiniteResult()
        return float(out[0]) if single else out


class StudentT(_CholeskyScaled):
    """
    A multivariate Student-t with location, scale and degrees of freedom.
    The diagonal form factors over axes: its log-density is the sum of D univariate Student-t log-densities
    sharing the same degrees of freedom.
    """

    def __init__(self, location, scale=None, dof: float = 1., chol=None):
        if not dof > 0:
            raise InvalidDegreesOfFreedom(dof)
        super().__init__(location, scale, chol)
        self.dof = float(dof)

    def logpdf(self, x):
        """
        Evaluates the log-density.

        :param x: A length-D vector or an N x D matrix.
        :return: A float for a vector, a length-N array for a matrix.
        """
        dev, single = self._deviations(x)
        v = self.dof
        if self.form == FULL:
            d = self.d
            z = linalg.solve_triangular(self._chol, dev.T, lower=True, check_finite=False)
            maha = np.sum(z ** 2, axis=0)
            out = gammaln((v + d) / 2) - gammaln(v / 2) - d / 2 * np.log(v * np.pi) - 0.5 * self._logdet \
                  - (v + d) / 2 * np.log1p(maha / v)
        else:
            per_axis = gammaln((v + 1) / 2) - gammaln(v / 2) - 0.5 * np.log(v * np.pi) - 0.5 * self._log_scale \
                       - (v + 1) / 2 * np.log1p(dev ** 2 / (self._scale * v))
            out = np.sum(per_axis, axis=1)
        return self._checked(out, single)

    def __repr__(self):
        return f"<StudentT d={self.d} dof={self.dof:.4g} form={self.form}>"


class Gaussian(_CholeskyScaled):
    def __init__(self, location, covariance=None, chol=None):
        super().__init__(location, covariance, chol, what="covariance matrix")

    def logpdf(self, x):
        maha = self.mahalanobis(x)
        single = np.asarray(x).ndim == 1
        dims = self.d
        out = -0.5 * (dims * np.log(2 * np.pi) + self._logdet + maha)
        return self._checked(out, single)

    def __repr__(self):
        return f"<Gaussian d={self.d} form={self.form}>"


class GaussianMixture:
    """An equal-weight mixture of Gaussians."""

    def __init__(self, components: list):
        if not components:
            raise InvalidArgument("A mixture needs at least one component.")
        self.components = components

    @property
    def d(self):
        return self.components[0].d

    def logpdf(self, x):
        parts = np.stack([np.atleast_1d(c.logpdf(x)) for c in self.components])
        out = logsumexp(parts, axis=0) - np.log(len(self.components))
        if np.asarray(x).ndim == 1:
            return float(out[0])
        return out

    def __repr__(self):
        return f"<GaussianMixture d={self.d} components={len(self.components)}>"
