"""
Model checkpoints.

A checkpoint is a zip archive holding:

``meta.json``
    ``format`` ("cws-checkpoint"), ``version`` (1), ``arch``, ``criteria``,
    ``use_bigram``, ``dropout_keep``, ``constrained``, ``config`` (echo of
    the run configuration), ``vocab`` with its ``vocab_sha256``, and
    ``parameters``: parameter name -> shape, and ``lexicons``: criterion
    name -> sorted training word list, used for OOV recall.
``params/<name>.f64``
    raw little-endian float64 values of one parameter, row-major.
"""
import json
import os
import tempfile
import zipfile
from pathlib import Path

import numpy as np

from core import tensor as T
from core.exceptions import DataError
from corpus.data import Vocabulary
from segmenter.multitask import SharedPrivateModel

FORMAT = 'cws-checkpoint'
VERSION = 1


def save_checkpoint(path, model: SharedPrivateModel, config=None,
                    lexicons=None):
    """Write ``model`` to ``path`` atomically."""
    path = Path(path)
    params = model.named_parameters()
    meta = {
        'format': FORMAT,
        'version': VERSION,
        'arch': model.arch.value,
        'criteria': model.criteria,
        'use_bigram': model.use_bigram,
        'dropout_keep': model.dropout_keep,
        'constrained': model.constrained,
        'config': config or {},
        'vocab': model.vocab.to_dict(),
        'vocab_sha256': model.vocab.digest(),
        'parameters': {k: list(v.shape) for k, v in params.items()},
        'lexicons': lexicons or {},
    }
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, suffix='.tmp')
    os.close(fd)
    try:
        with zipfile.ZipFile(tmp, 'w', zipfile.ZIP_DEFLATED) as archive:
            archive.writestr('meta.json', json.dumps(meta, ensure_ascii=False,
                                                     indent=1))
            for name, tensor in params.items():
                archive.writestr(f'params/{name}.f64',
                                 tensor.values.astype('<f8').tobytes())
        os.replace(tmp, path)
    finally:
        if os.path.exists(tmp):
            os.remove(tmp)


def read_meta(path) -> dict:
    try:
        with zipfile.ZipFile(path) as archive:
            meta = json.loads(archive.read('meta.json').decode('utf-8'))
    except (zipfile.BadZipFile, KeyError, ValueError) as exc:
        raise DataError(f'{path}: not a checkpoint ({exc})') from None
    if meta.get('format') != FORMAT or meta.get('version') != VERSION:
        raise DataError(f'{path}: unsupported checkpoint '
                        f'{meta.get("format")} v{meta.get("version")}')
    return meta


def load_checkpoint(path) -> SharedPrivateModel:
    """Rebuild the model stored at ``path``."""
    meta = read_meta(path)
    vocab = Vocabulary.from_dict(meta['vocab'])
    if vocab.digest() != meta['vocab_sha256']:
        raise DataError(f'{path}: vocabulary hash mismatch')
    shapes = meta['parameters']
    # build a model of the right layout, then overwrite every tensor
    model = SharedPrivateModel.build(
        meta['arch'], meta['criteria'], vocab,
        shapes['embedding.unigram'][1],
        shapes['shared.forward.b_g'][0] // 4,
        np.random.default_rng(0),
        use_bigram=meta['use_bigram'], dropout_keep=meta['dropout_keep'],
        constrained=meta['constrained'])
    params = model.named_parameters()
    if sorted(params) != sorted(shapes):
        raise DataError(f'{path}: parameter set does not match '
                        f'architecture {meta["arch"]}')
    with zipfile.ZipFile(path) as archive:
        for name, tensor in params.items():
            raw = archive.read(f'params/{name}.f64')
            values = np.frombuffer(raw, dtype='<f8').astype(T.DTYPE)
            if values.size != int(np.prod(shapes[name])):
                raise DataError(f'{path}: {name} holds {values.size} values, '
                                f'expected shape {shapes[name]}')
            tensor.values[...] = values.reshape(shapes[name])
    return model
