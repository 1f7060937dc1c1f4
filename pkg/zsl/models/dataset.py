import logging

import numpy as np

from zsl.models.errors import InvalidArgument, SplitError

log = logging.getLogger(__name__)


class Dataset:
    """
    The feature matrix, class labels and per-class attribute vectors of one benchmark.
    Features and attributes are held as little-endian float32 so that a bundle round-trips bit-exactly.
    """

    def __init__(self, features, labels, attributes, class_names: list = None):
        features = np.ascontiguousarray(features, dtype='<f4')
        labels = np.asarray(labels)
        attributes = np.ascontiguousarray(attributes, dtype='<f4')

        if features.ndim != 2 or features.shape[0] < 1 or features.shape[1] < 1:
            raise InvalidArgument(f"Features must be a non-empty N x D matrix, got shape {features.shape}.")
        if attributes.ndim != 2 or attributes.shape[0] < 1 or attributes.shape[1] < 1:
            raise InvalidArgument(f"Attributes must be a non-empty C x A matrix, got shape {attributes.shape}.")
        if labels.ndim != 1 or labels.shape[0] != features.shape[0]:
            raise InvalidArgument(f"Expected {features.shape[0]} labels, got {labels.shape}.")
        if labels.size and not np.issubdtype(labels.dtype, np.integer):
            if not np.all(np.equal(np.mod(labels, 1), 0)):
                raise InvalidArgument("Labels must be integers.")
        labels = labels.astype(np.int64)
        if np.any(labels < 0) or np.any(labels >= attributes.shape[0]):
            bad = int(labels[(labels < 0) | (labels >= attributes.shape[0])][0])
            raise InvalidArgument(f"label out of range: {bad} (expected 0..{attributes.shape[0] - 1})")
        if not np.all(np.isfinite(features)):
            raise InvalidArgument("Features contain non-finite values.")
        if not np.all(np.isfinite(attributes)):
            raise InvalidArgument("Attributes contain non-finite values.")
        zero_rows = np.flatnonzero(~np.any(attributes != 0, axis=1))
        if zero_rows.size:
            raise InvalidArgument(f"Attribute row {int(zero_rows[0])} is all zeros.")
        if class_names is not None and len(class_names) != attributes.shape[0]:
            raise InvalidArgument(f"Expected {attributes.shape[0]} class names, got {len(class_names)}.")

        features.setflags(write=False)
        labels.setflags(write=False)
        attributes.setflags(write=False)
        self.features = features
        self.labels = labels
        self.attributes = attributes
        self.class_names = list(class_names) if class_names is not None else None

    @property
    def n(self):
        return self.features.shape[0]

    @property
    def d(self):
        return self.features.shape[1]

    @property
    def num_classes(self):
        return self.attributes.shape[0]

    @property
    def a(self):
        return self.attributes.shape[1]

    def class_name(self, class_id):
        if self.class_names is None:
            return str(class_id)
        return self.class_names[class_id]

    def __eq__(self, other):
        if not isinstance(other, Dataset):
            return NotImplemented
        return (np.array_equal(self.features, other.features) and np.array_equal(self.labels, other.labels)
                and np.array_equal(self.attributes, other.attributes) and self.class_names == other.class_names)

    def __repr__(self):
        return f"<Dataset n={self.n} d={self.d} classes={self.num_classes} a={self.a}>"


class SplitSpec:
    def __init__(self, seen_train, unseen, val_unseen=None, test_index=None):
        self.seen_train = tuple(sorted(int(c) for c in seen_train))
        self.unseen = tuple(sorted(int(c) for c in unseen))
        self.val_unseen = tuple(sorted(int(c) for c in val_unseen)) if val_unseen is not None else None
        self.test_index = tuple(int(i) for i in test_index) if test_index is not None else None

        overlap = set(self.seen_train) & set(self.unseen)
        if overlap:
            raise SplitError(f"Classes {sorted(overlap)} are both seen and unseen.")
        if self.val_unseen is not None and not set(self.val_unseen) <= set(self.seen_train):
            stray = sorted(set(self.val_unseen) - set(self.seen_train))
            raise SplitError(f"Validation classes {stray} are not in the seen pool.")

    @classmethod
    def from_dict(cls, d):
        return cls(d['seen_train'], d['unseen'], d.get('val_unseen'), d.get('test_index'))

    def to_dict(self):
        out = {"seen_train": list(self.seen_train), "unseen": list(self.unseen)}
        if self.val_unseen is not None:
            out['val_unseen'] = list(self.val_unseen)
        if self.test_index is not None:
            out['test_index'] = list(self.test_index)
        return out

    # ---------- main funcs ----------
    @property
    def all_classes(self):
        return tuple(sorted(set(self.seen_train) | set(self.unseen)))

    def check_against(self, dataset):
        """Raises SplitError if the split refers to classes or rows the dataset does not have."""
        for c in self.seen_train + self.unseen:
            if not 0 <= c < dataset.num_classes:
                raise SplitError(f"Split refers to class {c}, but the dataset has {dataset.num_classes} classes.")
        if self.test_index is not None:
            for i in self.test_index:
                if not 0 <= i < dataset.n:
                    raise SplitError(f"Test index {i} is out of range for {dataset.n} rows.")

    def test_rows(self, labels):
        """The explicit test index when present, otherwise every row of an unseen class."""
        if self.test_index is not None:
            return np.asarray(self.test_index, dtype=np.int64)
        return np.flatnonzero(np.isin(labels, self.unseen))

    def train_rows(self, labels):
        """Every row that is not a test row."""
        mask = np.ones(len(labels), dtype=bool)
        mask[self.test_rows(labels)] = False
        return np.flatnonzero(mask)

    def validation_split(self, labels, holdout: float, seed: int):
        """
        Builds the validation protocol: val_unseen classes become the unseen pool, and a deterministic
        fraction of each remaining seen class's training rows is held out as seen test rows.

        :param labels: The dataset labels.
        :param holdout: The fraction of each seen class's training rows to hold out.
        :param seed: Seed for the hold-out permutation.
        :rtype: SplitSpec
        """
        if not self.val_unseen:
            raise SplitError("This split has no validation classes (val_unseen).")
        if not 0 < holdout < 1:
            raise InvalidArgument(f"Hold-out fraction must be in (0, 1), got {holdout}.")
        labels = np.asarray(labels)
        train = self.train_rows(labels)
        seen = tuple(c for c in self.seen_train if c not in self.val_unseen)

        test = [train[np.isin(labels[train], self.val_unseen)]]
        for c in seen:
            rows = train[labels[train] == c]
            rng = np.random.default_rng([seed, c])
            n_out = int(np.floor(holdout * rows.size))
            if n_out and rows.size - n_out >= 1:
                test.append(np.sort(rng.permutation(rows)[:n_out]))
        test_index = np.sort(np.concatenate(test))
        # the real test rows and every row of a real unseen class stay out of the validation run
        excluded = np.union1d(self.test_rows(labels), np.flatnonzero(np.isin(labels, self.unseen)))
        test_index = np.setdiff1d(test_index, excluded)
        return _ValidationSplit(seen, self.val_unseen, test_index, excluded)

    def __eq__(self, other):
        if not isinstance(other, SplitSpec):
            return NotImplemented
        return self.to_dict() == other.to_dict()

    def __repr__(self):
        return f"<SplitSpec seen={len(self.seen_train)} unseen={len(self.unseen)} " \
               f"val={len(self.val_unseen or ())} test_rows={len(self.test_index or ())}>"


class _ValidationSplit(SplitSpec):
    """A SplitSpec whose training rows additionally exclude rows of the held-back real unseen classes."""

    def __init__(self, seen_train, unseen, test_index, excluded_rows):
        super().__init__(seen_train, unseen, None, test_index)
        self._excluded = np.asarray(excluded_rows, dtype=np.int64)

    def train_rows(self, labels):
        return np.setdiff1d(super().train_rows(labels), self._excluded)


class SplitReport:
    def __init__(self, train_counts: dict, test_counts: dict, violations: list, empty_seen: list,
                 n_train_classes: int, n_val_classes: int, n_unseen_classes: int):
        self.train_counts = train_counts
        self.test_counts = test_counts
        self.violations = violations
        self.empty_seen = empty_seen
        self.n_train_classes = n_train_classes
        self.n_val_classes = n_val_classes
        self.n_unseen_classes = n_unseen_classes

    @property
    def ok(self):
        return not (self.violations or self.empty_seen)

    def to_dict(self):
        return {
            "train_counts": {str(k): v for k, v in self.train_counts.items()},
            "test_counts": {str(k): v for k, v in self.test_counts.items()},
            "violations": self.violations, "empty_seen": self.empty_seen,
            "n_train_classes": self.n_train_classes, "n_val_classes": self.n_val_classes,
            "n_unseen_classes": self.n_unseen_classes
        }

    def __str__(self):
        out = f"{self.n_train_classes} training + {self.n_val_classes} validation seen classes, " \
              f"{self.n_unseen_classes} unseen classes"
        if self.violations:
            out += f"\nUnseen classes with training rows: {self.violations}"
        if self.empty_seen:
            out += f"\nSeen classes without training rows: {self.empty_seen}"
        return out
