import logging

import numpy as np

from zsl.models.errors import EmptyInput, InvalidArgument, TooFewClasses
from zsl.models.model import MetaClassMap

log = logging.getLogger(__name__)


def normalize_attributes(attributes, attr_norm='none'):
    attributes = np.asarray(attributes, dtype=float)
    if attr_norm == 'none':
        return attributes
    if attr_norm == 'l2':
        return attributes / np.linalg.norm(attributes, axis=1, keepdims=True)
    raise InvalidArgument(f"Unknown attribute normalization: {attr_norm}")


def l2_rank(query_attr, seen_attrs, ids=None, exclude=None):
    """
    Ranks seen classes by Euclidean attribute distance to a query.

    :param query_attr: A length-A attribute vector.
    :param seen_attrs: An S x A matrix, one row per seen class.
    :param ids: The class id of each row of seen_attrs. Defaults to 0..S-1.
    :param exclude: A class id to leave out of the ranking.
    :return: A list of (class id, distance), nearest first, ties by ascending class id.
    :raises EmptyInput: if nothing is left to rank.
    """
    query_attr = np.asarray(query_attr, dtype=float)
    seen_attrs = np.atleast_2d(np.asarray(seen_attrs, dtype=float))
    if ids is None:
        ids = range(seen_attrs.shape[0])
    ids = [int(i) for i in ids]
    if len(ids) != seen_attrs.shape[0]:
        raise InvalidArgument(f"Expected {seen_attrs.shape[0]} class ids, got {len(ids)}.")

    distances = np.sqrt(np.sum((seen_attrs - query_attr) ** 2, axis=1))
    ranking = [(c, float(dist)) for c, dist in zip(ids, distances) if c != exclude]
    if not ranking:
        raise EmptyInput("No seen classes left to rank.")
    return sorted(ranking, key=lambda r: (r[1], r[0]))


def select_support(ranking, K: int):
    """
    Picks the K supporting classes from a ranking.
    The first K - 1 entries are taken as-is. While the K-th entry ties with the next one, the K-th slot
    moves on to the next strictly larger distance; if the tie runs to the end of the ranking, the
    lowest class id of the tied group is used.

    :param ranking: A list of (class id, distance).
    :param K: The support size.
    :return: A list of K class ids, in ranking order.
    :raises TooFewClasses: if the ranking has fewer than K entries.
    """
    if K < 1:
        raise InvalidArgument(f"K must be at least 1, got {K}.")
    if len(ranking) < K:
        raise TooFewClasses(len(ranking), K)
    ranking = sorted(ranking, key=lambda r: (r[1], r[0]))

    i = K - 1
    while i + 1 < len(ranking) and ranking[i][1] == ranking[i + 1][1]:
        j = i + 1
        while j < len(ranking) and ranking[j][1] == ranking[i][1]:
            j += 1
        if j == len(ranking):
            break  # tie reaches the end: ranking[i] is the lowest id of its group
        i = j
    return [c for c, _ in ranking[:K - 1]] + [ranking[i][0]]


def build_meta_classes(dataset, splits, K: int, attr_norm='none') -> MetaClassMap:
    """
    Forms the meta-class of every seen and unseen class of a split.

    :type dataset: zsl.models.dataset.Dataset
    :type splits: zsl.models.dataset.SplitSpec
    :param K: The support size.
    :param attr_norm: 'none' for raw attributes, 'l2' to unit-normalize them first.
    :raises TooFewClasses: if fewer than K + 1 seen classes are available.
    """
    seen = list(splits.seen_train)
    if len(seen) < K + 1:
        raise TooFewClasses(len(seen), K + 1)
    attributes = normalize_attributes(dataset.attributes, attr_norm)
    seen_attrs = attributes[seen]

    support, distances = {}, {}
    for c in seen + list(splits.unseen):
        ranking = l2_rank(attributes[c], seen_attrs, seen, exclude=c)
        by_id = dict(ranking)
        support[c] = select_support(ranking, K)
        distances[c] = [by_id[s] for s in support[c]]
        log.debug(f"Class {c} supported by {support[c]}")

    log.info(f"Formed {len(support)} meta-classes with K={K}")
    return MetaClassMap(support, distances, K)
