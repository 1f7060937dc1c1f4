import math

import numpy as np

from utils.constants import DEFAULT_K, DEFAULT_KAPPA0, DEFAULT_KAPPA1, DEFAULT_S, HYPERPARAM_ORDER
from zsl.models.distributions import DIAGONAL, FULL
from zsl.models.errors import InvalidArgument


class Hyperparams:
    def __init__(self, kappa0: float = DEFAULT_KAPPA0, kappa1: float = DEFAULT_KAPPA1, m: float = None,
                 s: float = DEFAULT_S, K: int = DEFAULT_K, a0: float = None, b0: float = None):
        """
        :param kappa0: Dispersion of meta-class means around mu0.
        :param kappa1: Dispersion of class means around their meta-class mean.
        :param m: Inverse-Wishart degrees of freedom. None resolves to D + 2.
        :param s: Scale applied to the averaged class covariance to form Sigma0.
        :param K: Number of supporting seen classes per meta-class.
        :param a0: Inverse-Gamma shape (constrained model). None resolves to m / 2.
        :param b0: Inverse-Gamma scale (constrained model). None derives Sigma0 from s.
        """
        self.kappa0 = float(kappa0)
        self.kappa1 = float(kappa1)
        self.m = None if m is None else float(m)
        self.s = float(s)
        self.K = int(K)
        self.a0 = None if a0 is None else float(a0)
        self.b0 = None if b0 is None else float(b0)

    @classmethod
    def from_dict(cls, d):
        return cls(**{k: d[k] for k in HYPERPARAM_ORDER if k in d})

    def to_dict(self):
        return {k: getattr(self, k) for k in HYPERPARAM_ORDER}

    # ---------- main funcs ----------
    def replace(self, **changes):
        d = self.to_dict()
        d.update(changes)
        return Hyperparams.from_dict(d)

    def resolved(self, d: int):
        """Fills in the dimension-dependent defaults (m = D + 2, a0 = m / 2)."""
        m = self.m if self.m is not None else d + 2.
        a0 = self.a0 if self.a0 is not None else m / 2
        return self.replace(m=m, a0=a0)

    def validate(self, d: int, form: str = FULL):
        """
        Checks the hyperparameters against a feature dimension.

        :param d: The (post-PCA) feature dimension.
        :param form: FULL for the Inverse-Wishart model, DIAGONAL for the Inverse-Gamma one.
        :raises InvalidArgument: if any hyperparameter is out of range.
        """
        for name in ('kappa0', 'kappa1', 's'):
            value = getattr(self, name)
            if not (value > 0 and math.isfinite(value)):
                raise InvalidArgument(f"{name} must be positive, got {value}.")
        if self.K < 1:
            raise InvalidArgument(f"K must be at least 1, got {self.K}.")
        if form == FULL and self.m is not None and self.m < d + 2:
            raise InvalidArgument(f"m must be at least D + 2 = {d + 2}, got {self.m}.")
        if form == DIAGONAL:
            if self.a0 is not None and not self.a0 > 0:
                raise InvalidArgument(f"a0 must be positive, got {self.a0}.")
            if self.b0 is not None and not self.b0 > 0:
                raise InvalidArgument(f"b0 must be positive, got {self.b0}.")

    def sort_key(self):
        """Lexicographic order over the hyperparameters; unset values sort first."""
        return tuple(-math.inf if getattr(self, k) is None else getattr(self, k) for k in HYPERPARAM_ORDER)

    def __eq__(self, other):
        if not isinstance(other, Hyperparams):
            return NotImplemented
        return self.to_dict() == other.to_dict()

    def __hash__(self):
        return hash(tuple(self.to_dict().items()))

    def __repr__(self):
        return "<Hyperparams " + " ".join(f"{k}={v}" for k, v in self.to_dict().items() if v is not None) + ">"


class GlobalPrior:
    """The hyperparameter-level prior shared by every class: mu0 and Sigma0 (matrix or per-axis vector)."""

    def __init__(self, mu0, sigma0):
        self.mu0 = np.asarray(mu0, dtype=float)
        self.sigma0 = np.asarray(sigma0, dtype=float)

    @property
    def form(self):
        return DIAGONAL if self.sigma0.ndim == 1 else FULL

    @property
    def d(self):
        return self.mu0.shape[0]

    def __repr__(self):
        return f"<GlobalPrior d={self.d} form={self.form}>"


class MetaPosterior:
    """
    The local prior a meta-class induces on its member classes.

    :ivar mu_bar: Posterior mean of the meta-class mean.
    :ivar kappa_bar: Precision scaling of that posterior.
    :ivar kappa_tilde: Effective prior strength on a member class mean.
    :ivar scatter_sum: Summed scatter of the supporting classes.
    :ivar count_sum: Summed size of the supporting classes.
    :ivar n_support: Number of supporting classes.
    :ivar s_mu: Scatter of the current class mean around mu_bar (zero when there is no current class).
    """

    def __init__(self, mu_bar, kappa_bar, kappa_tilde, scatter_sum, count_sum, n_support, s_mu):
        self.mu_bar = mu_bar
        self.kappa_bar = kappa_bar
        self.kappa_tilde = kappa_tilde
        self.scatter_sum = scatter_sum
        self.count_sum = count_sum
        self.n_support = n_support
        self.s_mu = s_mu

    @property
    def dof_increment(self):
        """The support's contribution to the degrees of freedom, sum over i of (n_ji - 1)."""
        return self.count_sum - self.n_support

    def __repr__(self):
        return f"<MetaPosterior kappa_bar={self.kappa_bar:.4g} kappa_tilde={self.kappa_tilde:.4g} " \
               f"support={self.n_support} count={self.count_sum}>"
