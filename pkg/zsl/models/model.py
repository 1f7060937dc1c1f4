import logging

import numpy as np

from zsl.models.distributions import StudentT
from zsl.models.errors import InvalidArgument

log = logging.getLogger(__name__)


class MetaClassMap:
    def __init__(self, support: dict, distances: dict, K: int):
        """
        :param support: class id -> ordered list of K supporting seen class ids, nearest first.
        :param distances: class id -> the matching attribute-space L2 distances.
        :param K: The support size.
        """
        self.support = support
        self.distances = distances
        self.K = K

    @classmethod
    def from_dict(cls, d, K=None):
        support = {int(c): [int(s) for s in v['support']] for c, v in d.items()}
        distances = {int(c): [float(x) for x in v['distances']] for c, v in d.items()}
        if K is None:
            K = len(next(iter(support.values()))) if support else 0
        return cls(support, distances, K)

    def to_dict(self):
        return {str(c): {"support": list(self.support[c]), "distances": list(self.distances[c])}
                for c in sorted(self.support)}

    def __getitem__(self, class_id):
        return self.support[class_id]

    def __contains__(self, class_id):
        return class_id in self.support

    def __iter__(self):
        return iter(sorted(self.support))

    def __len__(self):
        return len(self.support)

    def __repr__(self):
        return f"<MetaClassMap classes={len(self)} K={self.K}>"


class ClassPpd:
    """The predictive density of one class: a Student-t for the Bayesian variants, a Gaussian (mixture) for V1."""

    def __init__(self, class_id: int, density, seen: bool):
        self.class_id = int(class_id)
        self.density = density
        self.seen = bool(seen)

    @property
    def student_t(self):
        if not isinstance(self.density, StudentT):
            raise InvalidArgument(f"Class {self.class_id} is not modelled by a Student-t.")
        return self.density

    def logpdf(self, x):
        return self.density.logpdf(x)

    def __repr__(self):
        return f"<ClassPpd class={self.class_id} seen={self.seen} density={self.density!r}>"


class Model:
    def __init__(self, variant: str, hyperparams, ppds: list, meta_map: MetaClassMap, pca=None):
        """
        :param variant: One of utils.constants.VARIANTS.
        :type hyperparams: zsl.models.hyperparams.Hyperparams
        :param ppds: One ClassPpd per seen and unseen class.
        :type pca: zsl.models.distributions.PcaModel or None
        """
        self.variant = variant
        self.hyperparams = hyperparams
        self.ppds = sorted(ppds, key=lambda p: p.class_id)
        self.meta_map = meta_map
        self.pca = pca

        ids = [p.class_id for p in self.ppds]
        if len(set(ids)) != len(ids):
            raise InvalidArgument("A model must hold exactly one PPD per class.")
        self.class_ids = np.asarray(ids, dtype=np.int64)
        self._index = {c: i for i, c in enumerate(ids)}

    @property
    def seen_ids(self):
        return tuple(p.class_id for p in self.ppds if p.seen)

    @property
    def unseen_ids(self):
        return tuple(p.class_id for p in self.ppds if not p.seen)

    @property
    def d_in(self):
        """The raw feature dimension callers pass to predict."""
        if self.pca is not None:
            return self.pca.d_in
        return self.ppds[0].density.d

    def ppd(self, class_id):
        return self.ppds[self._index[class_id]]

    def column(self, class_id):
        return self._index[class_id]

    def __repr__(self):
        return f"<Model variant={self.variant} seen={len(self.seen_ids)} unseen={len(self.unseen_ids)} " \
               f"pca={self.pca is not None}>"


class Prediction:
    def __init__(self, class_id: int, log_scores: dict):
        self.class_id = int(class_id)
        self.log_scores = log_scores

    @property
    def score(self):
        return self.log_scores[self.class_id]

    def __repr__(self):
        return f"<Prediction class={self.class_id} score={self.score:.4f}>"


class EvalReport:
    def __init__(self, per_class_acc: dict, ts: float, tr: float, H: float, topk: dict = None,
                 topk_micro: dict = None, excluded: list = None):
        self.per_class_acc = per_class_acc
        self.ts = ts
        self.tr = tr
        self.H = H
        self.topk = topk or {}
        self.topk_micro = topk_micro or {}
        self.excluded = excluded or []

    def to_dict(self):
        return {
            "per_class_acc": {str(k): v for k, v in sorted(self.per_class_acc.items())},
            "ts": self.ts, "tr": self.tr, "H": self.H,
            "topk": {str(k): v for k, v in sorted(self.topk.items())},
            "topk_micro": {str(k): v for k, v in sorted(self.topk_micro.items())},
            "excluded": list(self.excluded)
        }

    @classmethod
    def from_dict(cls, d):
        return cls({int(k): v for k, v in d['per_class_acc'].items()}, d['ts'], d['tr'], d['H'],
                   {int(k): v for k, v in d.get('topk', {}).items()},
                   {int(k): v for k, v in d.get('topk_micro', {}).items()},
                   d.get('excluded', []))

    def __repr__(self):
        return f"<EvalReport ts={self.ts:.4f} tr={self.tr:.4f} H={self.H:.4f}>"
