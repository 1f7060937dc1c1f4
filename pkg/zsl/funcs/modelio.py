"""
The model file: magic, u32 header length, a JSON header (format version, variant, hyperparameters, dimensions,
meta-class map), an optional float64 PCA block, then one record per class:
i64 class id, u8 seen flag, u8 form (0 full, 1 diagonal), f64 dof, f64 location[D], and either the full
lower Cholesky factor (D x D, row-major) or the diagonal scale (D).
All integers and floats are little-endian.
"""
import json
import logging
import struct

import numpy as np

from utils.constants import MODEL_FORMAT_VERSION, MODEL_MAGIC
from zsl.models.distributions import DIAGONAL, FULL, PcaModel, StudentT
from zsl.models.errors import BundleError, NotSerializable
from zsl.models.hyperparams import Hyperparams
from zsl.models.model import ClassPpd, MetaClassMap, Model

log = logging.getLogger(__name__)

RECORD = struct.Struct('<qBBd')
FORMS = {FULL: 0, DIAGONAL: 1}


class _Reader:
    def __init__(self, data: bytes, filename):
        self.data = data
        self.filename = filename
        self.offset = 0

    def unpack(self, fmt: struct.Struct):
        if self.offset + fmt.size > len(self.data):
            raise BundleError(self.filename, "unexpected end of file", self.offset)
        out = fmt.unpack_from(self.data, self.offset)
        self.offset += fmt.size
        return out

    def array(self, *shape):
        count = int(np.prod(shape))
        end = self.offset + 8 * count
        if end > len(self.data):
            raise BundleError(self.filename, "unexpected end of file", self.offset)
        out = np.frombuffer(self.data, dtype='<f8', count=count, offset=self.offset).reshape(shape).copy()
        self.offset = end
        return out


def _f64(array):
    return np.ascontiguousarray(array, dtype='<f8').tobytes()


def model_bytes(model: Model) -> bytes:
    """
    Serializes a fitted model.

    :raises NotSerializable: for models without Student-t predictives (ablation_v1).
    """
    for p in model.ppds:
        if not isinstance(p.density, StudentT):
            raise NotSerializable(model.variant)
    d = model.ppds[0].density.d
    header = {
        "version": MODEL_FORMAT_VERSION,
        "variant": model.variant,
        "hyperparams": model.hyperparams.to_dict(),
        "d": d,
        "num_classes": len(model.ppds),
        "pca": model.pca is not None,
        "pca_d_in": model.pca.d_in if model.pca is not None else None,
        "pca_variance": model.pca is not None and model.pca.explained_variance is not None,
        "meta_map": model.meta_map.to_dict(),
        "K": model.meta_map.K
    }
    header_bytes = json.dumps(header, sort_keys=True).encode()
    out = [MODEL_MAGIC, struct.pack('<I', len(header_bytes)), header_bytes]
    if model.pca is not None:
        out += [_f64(model.pca.mean), _f64(model.pca.projection)]
        if model.pca.explained_variance is not None:
            out.append(_f64(model.pca.explained_variance))
    for p in model.ppds:
        t = p.density
        out.append(RECORD.pack(p.class_id, int(p.seen), FORMS[t.form], t.dof))
        out.append(_f64(t.location))
        out.append(_f64(t.chol if t.form == FULL else t.scale))
    return b"".join(out)


def save_model(model: Model, path):
    data = model_bytes(model)
    try:
        with open(path, 'wb') as f:
            f.write(data)
    except OSError as e:
        raise BundleError(str(path), f"cannot write: {e.strerror}")
    log.info(f"Saved {model!r} to {path} ({len(data)} bytes)")


def load_model(path) -> Model:
    """
    Reads a model file written by save_model.

    :raises BundleError: if the file is missing, of another format version, or truncated.
    """
    filename = str(path)
    try:
        with open(path, 'rb') as f:
            data = f.read()
    except OSError as e:
        raise BundleError(filename, f"cannot read: {e.strerror}")
    return model_from_bytes(data, filename)


def model_from_bytes(data: bytes, filename="<model>") -> Model:
    if data[:8] != MODEL_MAGIC:
        raise BundleError(filename, f"bad magic {data[:8]!r}, expected {MODEL_MAGIC!r}", 0)
    reader = _Reader(data, filename)
    reader.offset = 8
    header_len, = reader.unpack(struct.Struct('<I'))
    try:
        header = json.loads(data[reader.offset:reader.offset + header_len])
    except ValueError:
        raise BundleError(filename, "malformed header", reader.offset)
    reader.offset += header_len
    if header.get('version') != MODEL_FORMAT_VERSION:
        raise BundleError(filename, f"unsupported model format version {header.get('version')}", 12)

    d = header['d']
    pca = None
    if header['pca']:
        d_in = header['pca_d_in']
        mean, projection = reader.array(d_in), reader.array(d_in, d)
        pca = PcaModel(mean, projection, reader.array(d) if header.get('pca_variance') else None)

    ppds = []
    for _ in range(header['num_classes']):
        class_id, seen, form, dof = reader.unpack(RECORD)
        location = reader.array(d)
        if form == FORMS[FULL]:
            t = StudentT(location, dof=dof, chol=reader.array(d, d))
        elif form == FORMS[DIAGONAL]:
            t = StudentT(location, reader.array(d), dof=dof)
        else:
            raise BundleError(filename, f"unknown density form {form}", reader.offset - RECORD.size)
        ppds.append(ClassPpd(class_id, t, bool(seen)))
    if reader.offset != len(data):
        raise BundleError(filename, f"{len(data) - reader.offset} trailing bytes", reader.offset)

    meta_map = MetaClassMap.from_dict(header['meta_map'], header['K'])
    return Model(header['variant'], Hyperparams.from_dict(header['hyperparams']), ppds, meta_map, pca)


def model_summary(model: Model) -> dict:
    """A JSON-friendly view of the fitted predictive parameters."""
    classes = []
    for p in model.ppds:
        entry = {"class_id": p.class_id, "seen": p.seen}
        t = p.density
        if isinstance(t, StudentT):
            entry.update(form=t.form, dof=t.dof, location=t.location.tolist(),
                         scale_diagonal=(np.diag(t.scale) if t.form == FULL else t.scale).tolist())
        else:
            entry.update(form=type(t).__name__.lower())
        classes.append(entry)
    return {
        "variant": model.variant,
        "hyperparams": model.hyperparams.to_dict(),
        "pca": None if model.pca is None else {"d_in": model.pca.d_in, "d": model.pca.d},
        "classes": classes
    }
