import csv
import logging

import numpy as np

from utils.functions import format_table
from zsl.funcs.classifier import predict_batch
from zsl.models.errors import EmptyInput, InvalidArgument
from zsl.models.model import EvalReport

log = logging.getLogger(__name__)


def _class_ids(preds):
    return np.asarray([p.class_id if hasattr(p, 'class_id') else p for p in preds], dtype=np.int64)


def per_class_top1(preds, truths, pool) -> dict:
    """
    Per-class top-1 accuracy over a pool of classes.
    Classes of the pool without any test row are left out (and logged).

    :param preds: Predicted class ids (or Predictions), one per test row.
    :param truths: True class ids, one per test row.
    :param pool: The classes to report.
    :return: {class id: fraction of that class's rows predicted correctly}
    :raises EmptyInput: if the pool is empty.
    """
    pool = sorted(int(c) for c in pool)
    if not pool:
        raise EmptyInput("Cannot compute accuracy over an empty class pool.")
    preds = _class_ids(preds)
    truths = np.asarray(truths, dtype=np.int64)
    if preds.shape != truths.shape:
        raise InvalidArgument(f"Got {preds.shape[0]} predictions for {truths.shape[0]} test rows.")

    out = {}
    for c in pool:
        mask = truths == c
        total = int(mask.sum())
        if not total:
            continue
        out[c] = int(np.sum(preds[mask] == c)) / total
    missing = [c for c in pool if c not in out]
    if missing:
        log.warning(f"Classes without test rows excluded from the average: {missing}")
    return out


def mean_accuracy(per_class: dict):
    """Macro average; 0 when no class has test rows."""
    if not per_class:
        return 0.
    return float(np.mean([per_class[c] for c in sorted(per_class)]))


def harmonic_mean(tr: float, ts: float) -> float:
    if tr + ts == 0:
        return 0.
    return 2 * tr * ts / (tr + ts)


def truth_ranks(scores, truths, class_ids):
    """
    The 0-based rank of each row's true class in its score row.
    Equal scores rank the lower class id first, matching the argmax tie rule.
    """
    scores = np.asarray(scores, dtype=float)
    class_ids = np.asarray(class_ids, dtype=np.int64)
    columns = {int(c): i for i, c in enumerate(class_ids)}
    try:
        cols = np.asarray([columns[int(t)] for t in truths], dtype=np.int64)
    except KeyError as e:
        raise InvalidArgument(f"Class {e.args[0]} is not among the scored classes.")
    true_scores = scores[np.arange(scores.shape[0]), cols]
    higher = np.sum(scores > true_scores[:, None], axis=1)
    tied_lower = np.sum((scores == true_scores[:, None]) & (class_ids[None, :] < class_ids[cols][:, None]), axis=1)
    return higher + tied_lower


def topk_accuracy(scores, truths, ks, pool, class_ids=None, micro=False) -> dict:
    """
    Top-k accuracy of the rows whose true class is in the pool, ranking over every scored class.

    :param scores: An N x C score matrix.
    :param truths: True class ids, one per row.
    :param ks: The k values.
    :param pool: The classes whose rows are counted.
    :param class_ids: The class id of each score column. Defaults to 0..C-1.
    :param micro: Average over rows instead of over classes.
    :return: {k: accuracy}
    :raises InvalidArgument: if a k exceeds the number of scored classes.
    """
    scores = np.atleast_2d(np.asarray(scores, dtype=float))
    if class_ids is None:
        class_ids = np.arange(scores.shape[1])
    truths = np.asarray(truths, dtype=np.int64)
    for k in ks:
        if not 1 <= k <= scores.shape[1]:
            raise InvalidArgument(f"k must be in [1, {scores.shape[1]}], got {k}.")
    pool = sorted(int(c) for c in pool)
    if not pool:
        raise EmptyInput("Cannot compute accuracy over an empty class pool.")

    in_pool = np.isin(truths, pool)
    ranks = truth_ranks(scores[in_pool], truths[in_pool], class_ids)
    pool_truths = truths[in_pool]
    out = {}
    for k in sorted(set(ks)):
        hits = ranks < k
        if micro:
            out[k] = float(np.mean(hits)) if hits.size else 0.
        else:
            per_class = {c: float(np.mean(hits[pool_truths == c])) for c in pool if np.any(pool_truths == c)}
            out[k] = mean_accuracy(per_class)
    return out


def evaluate(model, dataset, rows, ks=(1,), threads=1) -> EvalReport:
    """
    Scores test rows in the generalized (all classes) search space and reports seen and unseen accuracy.

    :type model: zsl.models.model.Model
    :type dataset: zsl.models.dataset.Dataset
    :param rows: The test row indices.
    :param ks: The k values for the unseen-pool top-k accuracy.
    """
    rows = np.asarray(rows, dtype=np.int64)
    if not rows.size:
        raise EmptyInput("There are no test rows to evaluate.")
    preds, scores = predict_batch(model, dataset.features[rows], 'gzsl', threads)
    report = build_report(model, dataset.labels[rows], preds, scores, ks)
    log.info(f"Evaluated {rows.size} rows: {report}")
    return report


def build_report(model, truths, preds, scores, ks=(1,)) -> EvalReport:
    """
    Assembles an EvalReport from generalized-space predictions and their score matrix.

    :param truths: True class ids of the scored rows.
    :param preds: Predicted class ids.
    :param scores: The N x C score matrix, columns in model.class_ids order.
    """
    truths = np.asarray(truths, dtype=np.int64)
    seen_acc = per_class_top1(preds, truths, model.seen_ids) if model.seen_ids else {}
    unseen_acc = per_class_top1(preds, truths, model.unseen_ids) if model.unseen_ids else {}
    if not seen_acc:
        log.warning("No seen-class test rows; tr is reported as 0.")
    if not unseen_acc:
        log.warning("No unseen-class test rows; ts is reported as 0.")
    tr, ts = mean_accuracy(seen_acc), mean_accuracy(unseen_acc)

    topk, topk_micro = {}, {}
    if unseen_acc:
        topk = topk_accuracy(scores, truths, ks, unseen_acc.keys(), model.class_ids)
        topk_micro = topk_accuracy(scores, truths, ks, unseen_acc.keys(), model.class_ids, micro=True)

    per_class = {**seen_acc, **unseen_acc}
    excluded = [int(c) for c in model.class_ids if int(c) not in per_class]
    return EvalReport(per_class, ts, tr, harmonic_mean(tr, ts), topk, topk_micro, excluded)


# ==== output ====
def report_table(named_reports) -> str:
    """An aligned ts / tr / H table, one row per (name, EvalReport)."""
    rows = [[name, r.ts, r.tr, r.H] for name, r in named_reports]
    return format_table(["run", "ts", "tr", "H"], rows)


def write_predictions(path, rows, preds, truths, scores):
    """Writes row_index,predicted_class,true_class,log_score, the score being that of the predicted class."""
    with open(path, 'w', newline='') as f:
        writer = csv.writer(f)
        writer.writerow(["row_index", "predicted_class", "true_class", "log_score"])
        for row, pred, truth, score in zip(rows, preds, truths, scores):
            writer.writerow([int(row), int(pred), int(truth), repr(float(score))])
