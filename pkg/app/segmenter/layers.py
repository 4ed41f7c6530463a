"""
Feature layers: character/bigram embeddings, LSTM, Bi-LSTM and dropout.

A sentence travels through the layers as an ``n x width`` tensor whose
row i belongs to character i.
"""
from dataclasses import dataclass
from typing import Dict, Sequence

import numpy as np

from core import tensor as T
from core.exceptions import ShapeError
from core.tensor import Tensor

TRAIN = 'train'
EVAL = 'eval'


def init_uniform(shape, rng, init_range=0.05, name=None) -> Tensor:
    """Trainable tensor drawn from uniform(-init_range, init_range)."""
    return T.parameter(rng.uniform(-init_range, init_range, size=shape),
                       name=name)


@dataclass
class EmbeddingTable:
    """Character (unigram) and bigram lookup tables; rows 0/1 are PAD/UNK."""
    unigram: Tensor
    bigram: Tensor

    @classmethod
    def create(cls, char_count, bigram_count, embedding_size, rng,
               init_range=0.05) -> 'EmbeddingTable':
        if embedding_size <= 0:
            raise ValueError('embedding size must be positive')
        return cls(
            init_uniform((char_count, embedding_size), rng, init_range),
            init_uniform((bigram_count, embedding_size), rng, init_range),
        )

    @property
    def embedding_size(self) -> int:
        return self.unigram.shape[1]

    def input_size(self, use_bigram) -> int:
        return self.embedding_size * (2 if use_bigram else 1)

    def parameters(self) -> Dict[str, Tensor]:
        return {'unigram': self.unigram, 'bigram': self.bigram}


def embed_sequence(char_ids: Sequence[int], bigram_ids: Sequence[int],
                   table: EmbeddingTable, use_bigram=True) -> Tensor:
    """Row i is the unigram embedding of character i, followed by the
    embedding of its bigram when ``use_bigram`` is set."""
    chars = T.take(table.unigram, char_ids)
    if not use_bigram:
        return chars
    if len(bigram_ids) != len(char_ids):
        raise ShapeError('embed_sequence', (len(char_ids),),
                         (len(bigram_ids),))
    return T.concat([chars, T.take(table.bigram, bigram_ids)], axis=1)


@dataclass
class LstmParams:
    """Gate weights of one LSTM direction.

    The 4*d_h columns of ``W_g``/``b_g`` hold, in order, the input gate,
    the output gate, the forget gate and the candidate cell. Rows of
    ``W_g`` take the input vector first, then the previous hidden state.
    """
    W_g: Tensor
    b_g: Tensor

    @classmethod
    def create(cls, input_size, hidden_size, rng, init_range=0.05):
        return cls(
            init_uniform((input_size + hidden_size, 4 * hidden_size), rng,
                         init_range),
            init_uniform((4 * hidden_size,), rng, init_range),
        )

    @property
    def hidden_size(self) -> int:
        return self.b_g.shape[0] // 4

    @property
    def input_size(self) -> int:
        return self.W_g.shape[0] - self.hidden_size

    def parameters(self) -> Dict[str, Tensor]:
        return {'W_g': self.W_g, 'b_g': self.b_g}


def lstm_step(x: Tensor, h_prev: Tensor, c_prev: Tensor, p: LstmParams):
    """One recurrence step without peepholes; returns (h, c)."""
    d_h = p.hidden_size
    if x.shape != (p.input_size,):
        raise ShapeError('lstm_step', x.shape, (p.input_size,))
    if h_prev.shape != (d_h,) or c_prev.shape != (d_h,):
        raise ShapeError('lstm_step', h_prev.shape, c_prev.shape)
    z = T.add(T.matmul(T.concat([x, h_prev]), p.W_g), p.b_g)
    gates = T.sigmoid(T.index(z, slice(0, 3 * d_h)))
    i = T.index(gates, slice(0, d_h))
    o = T.index(gates, slice(d_h, 2 * d_h))
    f = T.index(gates, slice(2 * d_h, 3 * d_h))
    candidate = T.tanh(T.index(z, slice(3 * d_h, 4 * d_h)))
    c = T.add(T.mul(c_prev, f), T.mul(candidate, i))
    h = T.mul(o, T.tanh(c))
    return h, c


def lstm_forward(inputs: Tensor, p: LstmParams, reverse=False) -> Tensor:
    """Run one direction over the rows of ``inputs`` from zero states."""
    n = inputs.shape[0]
    h = c = Tensor(np.zeros(p.hidden_size), copy=False)
    states = [None] * n
    order = range(n - 1, -1, -1) if reverse else range(n)
    for t in order:
        h, c = lstm_step(T.index(inputs, t), h, c, p)
        states[t] = h
    return T.stack(states)


@dataclass
class BiLstmParams:
    forward: LstmParams
    backward: LstmParams

    def __post_init__(self):
        if self.forward.hidden_size != self.backward.hidden_size:
            raise ShapeError('bilstm', self.forward.b_g.shape,
                             self.backward.b_g.shape)

    @classmethod
    def create(cls, input_size, hidden_size, rng, init_range=0.05):
        return cls(LstmParams.create(input_size, hidden_size, rng, init_range),
                   LstmParams.create(input_size, hidden_size, rng, init_range))

    @property
    def hidden_size(self) -> int:
        return self.forward.hidden_size

    @property
    def output_size(self) -> int:
        return 2 * self.hidden_size

    @property
    def input_size(self) -> int:
        return self.forward.input_size

    def parameters(self) -> Dict[str, Tensor]:
        named = {}
        for direction in ('forward', 'backward'):
            for key, value in getattr(self, direction).parameters().items():
                named[f'{direction}.{key}'] = value
        return named


def bilstm_forward(inputs: Tensor, p: BiLstmParams) -> Tensor:
    """Row i is the forward state at i followed by the backward state at i."""
    if inputs.ndim != 2 or inputs.shape[0] == 0:
        raise ShapeError('bilstm_forward', inputs.shape)
    return T.concat([lstm_forward(inputs, p.forward),
                     lstm_forward(inputs, p.backward, reverse=True)], axis=1)


def dropout(x: Tensor, keep_rate: float, mode=TRAIN, rng=None) -> Tensor:
    """Inverted dropout: survivors are scaled by 1/keep_rate in training."""
    if not 0 < keep_rate <= 1:
        raise ValueError(f'keep_rate must be in (0, 1], got {keep_rate}')
    if mode == EVAL or keep_rate == 1.0:
        return x
    if mode != TRAIN:
        raise ValueError(f'unknown dropout mode {mode!r}')
    mask = (rng.random(x.shape) < keep_rate) / keep_rate
    return T.mul(x, Tensor(mask, copy=False))
