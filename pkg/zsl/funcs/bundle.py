"""
Reads and writes dataset bundles: a directory with features.bin, attributes.bin, labels.txt, splits.json and an
optional classes.txt. Binary matrices are an 8-byte magic, u64 rows, u64 columns, then little-endian float32
row-major data.
"""
import csv
import json
import logging
import os
import struct

import numpy as np

from utils.constants import ATTRIBUTES_FILE, ATTRIBUTES_MAGIC, CLASSES_FILE, FEATURES_FILE, FEATURES_MAGIC, \
    LABELS_FILE, SPLITS_FILE
from zsl.models.dataset import Dataset, SplitReport, SplitSpec
from zsl.models.errors import BundleError, InvalidArgument

log = logging.getLogger(__name__)

HEADER = struct.Struct('<QQ')
HEADER_SIZE = 8 + HEADER.size


# ==== binary matrices ====
def _read_bytes(path, filename):
    try:
        with open(os.path.join(path, filename), 'rb') as f:
            return f.read()
    except FileNotFoundError:
        raise BundleError(filename, "missing file")
    except OSError as e:
        raise BundleError(filename, f"cannot read: {e.strerror}")


def _read_matrix(path, filename, magic):
    data = _read_bytes(path, filename)
    if len(data) < HEADER_SIZE:
        raise BundleError(filename, f"truncated header ({len(data)} bytes)", 0)
    if data[:8] != magic:
        raise BundleError(filename, f"bad magic {data[:8]!r}, expected {magic!r}", 0)
    rows, cols = HEADER.unpack_from(data, 8)
    expected = rows * cols * 4
    if len(data) - HEADER_SIZE != expected:
        raise BundleError(filename, f"header says {rows} x {cols} float32 ({expected} bytes), "
                                    f"found {len(data) - HEADER_SIZE} bytes", HEADER_SIZE)
    matrix = np.frombuffer(data, dtype='<f4', offset=HEADER_SIZE).reshape(rows, cols)
    bad = np.flatnonzero(~np.isfinite(matrix))
    if bad.size:
        r, c = divmod(int(bad[0]), cols)
        raise BundleError(filename, f"non-finite value at row {r}, column {c}", HEADER_SIZE + 4 * int(bad[0]))
    return matrix


def _matrix_bytes(matrix, magic):
    matrix = np.ascontiguousarray(matrix, dtype='<f4')
    return magic + HEADER.pack(*matrix.shape) + matrix.tobytes()


def _read_lines(path, filename):
    """Yields (byte offset, stripped line) for each non-empty line."""
    text = _read_bytes(path, filename)
    offset = 0
    for raw in text.split(b'\n'):
        try:
            line = raw.decode('utf-8').strip()
        except UnicodeDecodeError as e:
            raise BundleError(filename, "invalid UTF-8", offset + e.start)
        if line:
            yield offset, line
        offset += len(raw) + 1


# ==== main funcs ====
def load_bundle(path):
    """
    Loads and validates a dataset bundle.

    :param path: The bundle directory.
    :return: (Dataset, SplitSpec)
    :raises BundleError: on a missing file or malformed content, naming the file and byte offset.
    :raises SplitError: if the split is inconsistent.
    """
    features = _read_matrix(path, FEATURES_FILE, FEATURES_MAGIC)
    attributes = _read_matrix(path, ATTRIBUTES_FILE, ATTRIBUTES_MAGIC)
    n, num_classes = features.shape[0], attributes.shape[0]
    if n < 1 or features.shape[1] < 1:
        raise BundleError(FEATURES_FILE, f"empty feature matrix {features.shape}", 8)
    if num_classes < 1 or attributes.shape[1] < 1:
        raise BundleError(ATTRIBUTES_FILE, f"empty attribute matrix {attributes.shape}", 8)
    zero_rows = np.flatnonzero(~np.any(attributes != 0, axis=1))
    if zero_rows.size:
        row = int(zero_rows[0])
        raise BundleError(ATTRIBUTES_FILE, f"attribute row {row} is all zeros",
                          HEADER_SIZE + 4 * row * attributes.shape[1])

    labels = []
    for offset, line in _read_lines(path, LABELS_FILE):
        try:
            label = int(line)
        except ValueError:
            raise BundleError(LABELS_FILE, f"not an integer: {line!r}", offset)
        if not 0 <= label < num_classes:
            raise BundleError(LABELS_FILE, f"label out of range: {label} (expected 0..{num_classes - 1})", offset)
        labels.append(label)
    if len(labels) != n:
        raise BundleError(LABELS_FILE, f"expected {n} labels, found {len(labels)}")

    class_names = None
    if os.path.exists(os.path.join(path, CLASSES_FILE)):
        class_names = [line for _, line in _read_lines(path, CLASSES_FILE)]
        if len(class_names) != num_classes:
            raise BundleError(CLASSES_FILE, f"expected {num_classes} class names, found {len(class_names)}")

    try:
        split_data = json.loads(_read_bytes(path, SPLITS_FILE))
        splits = SplitSpec.from_dict(split_data)
    except json.JSONDecodeError as e:
        raise BundleError(SPLITS_FILE, f"invalid JSON: {e.msg}", e.pos)
    except (KeyError, TypeError, ValueError) as e:
        raise BundleError(SPLITS_FILE, f"malformed split definition ({e})")

    dataset = Dataset(features, np.asarray(labels, dtype=np.int64), attributes, class_names)
    splits.check_against(dataset)
    log.info(f"Loaded bundle {path}: {dataset!r}, {splits!r}")
    return dataset, splits


def save_bundle(dataset, splits, path):
    """
    Writes a dataset bundle that load_bundle reads back exactly.

    :raises BundleError: if a file cannot be written.
    """
    files = {
        FEATURES_FILE: _matrix_bytes(dataset.features, FEATURES_MAGIC),
        ATTRIBUTES_FILE: _matrix_bytes(dataset.attributes, ATTRIBUTES_MAGIC),
        LABELS_FILE: "".join(f"{int(l)}\n" for l in dataset.labels).encode(),
        SPLITS_FILE: json.dumps(splits.to_dict()).encode()
    }
    if dataset.class_names is not None:
        files[CLASSES_FILE] = "".join(f"{name}\n" for name in dataset.class_names).encode()

    filename = None
    try:
        os.makedirs(path, exist_ok=True)
        for filename, content in files.items():
            with open(os.path.join(path, filename), 'wb') as f:
                f.write(content)
    except OSError as e:
        raise BundleError(filename or path, f"cannot write: {e.strerror or e}")
    log.info(f"Saved bundle to {path}")


def validate_split(dataset, splits) -> SplitReport:
    """
    Reports per-class training and test row counts, unseen classes that have training rows,
    and seen classes that have none.
    """
    splits.check_against(dataset)
    labels = dataset.labels
    train = labels[splits.train_rows(labels)]
    test = labels[splits.test_rows(labels)]
    classes = splits.all_classes
    train_counts = {c: int(np.sum(train == c)) for c in classes}
    test_counts = {c: int(np.sum(test == c)) for c in classes}

    violations = [c for c in splits.unseen if train_counts[c]]
    empty_seen = [c for c in splits.seen_train if not train_counts[c]]
    n_val = len(splits.val_unseen or ())
    report = SplitReport(train_counts, test_counts, violations, empty_seen,
                         len(splits.seen_train) - n_val, n_val, len(splits.unseen))
    if violations:
        log.warning(f"Unseen classes with training rows: {violations}")
    return report


def import_csv(features_csv, attributes_csv, path):
    """
    Converts CSV files into the binary parts of a bundle.
    The features CSV has a header row with a ``label`` column; every other column is a feature.
    The attributes CSV has a header row, one row per class in class id order, and an optional ``class_name`` column.
    splits.json is not written; it must already be in (or be added to) the bundle directory.

    :raises BundleError: on malformed CSV content.
    """
    labels, features = _read_csv(features_csv, 'label', int)
    names, attributes = _read_csv(attributes_csv, 'class_name', str, required=False)
    dataset_files = {
        FEATURES_FILE: _matrix_bytes(features, FEATURES_MAGIC),
        ATTRIBUTES_FILE: _matrix_bytes(attributes, ATTRIBUTES_MAGIC),
        LABELS_FILE: "".join(f"{l}\n" for l in labels).encode()
    }
    if names is not None:
        dataset_files[CLASSES_FILE] = "".join(f"{n}\n" for n in names).encode()
    try:
        os.makedirs(path, exist_ok=True)
        for filename, content in dataset_files.items():
            with open(os.path.join(path, filename), 'wb') as f:
                f.write(content)
    except OSError as e:
        raise BundleError(path, f"cannot write: {e.strerror or e}")
    log.info(f"Imported {len(labels)} rows and {len(attributes)} classes from CSV into {path}")


def _read_csv(filename, key_column, key_type, required=True):
    try:
        with open(filename, newline='') as f:
            rows = list(csv.reader(f))
    except OSError as e:
        raise BundleError(filename, f"cannot read: {e.strerror}")
    if len(rows) < 2:
        raise BundleError(filename, "expected a header row and at least one data row")
    header = [h.strip() for h in rows[0]]
    key_index = header.index(key_column) if key_column in header else None
    if key_index is None and required:
        raise BundleError(filename, f"missing column {key_column!r}")

    keys, values = [], []
    for i, row in enumerate(rows[1:], start=2):
        if len(row) != len(header):
            raise BundleError(filename, f"line {i} has {len(row)} fields, expected {len(header)}")
        try:
            if key_index is not None:
                keys.append(key_type(row[key_index].strip()))
            values.append([float(v) for j, v in enumerate(row) if j != key_index])
        except ValueError as e:
            raise BundleError(filename, f"line {i}: {e}")
    matrix = np.asarray(values, dtype=float)
    if not np.all(np.isfinite(matrix)):
        raise BundleError(filename, "non-finite value")
    if matrix.shape[1] < 1:
        raise InvalidArgument(f"{filename} has no value columns.")
    return (keys if key_index is not None else None), matrix
