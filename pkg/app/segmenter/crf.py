"""
First-order linear-chain CRF over the BMES label set.

Scores follow one convention everywhere: the emission score of every
position plus the transition score into every position after the first. No
start or stop transitions are used.
"""
import itertools
from dataclasses import dataclass
from typing import Dict, List, Sequence, Tuple

import numpy as np

from core import tensor as T
from core.exceptions import ShapeError
from core.tensor import Tensor
from segmenter.layers import init_uniform

LABELS = ('B', 'M', 'E', 'S')
B, M, E, S = range(4)
NUM_LABELS = len(LABELS)

MAX_ORACLE_LENGTH = 8

# label pairs that can follow each other in a well-formed BMES sequence
LEGAL_TRANSITIONS = np.array([
    # to: B      M      E      S
    [False, True, True, False],   # from B
    [False, True, True, False],   # from M
    [True, False, False, True],   # from E
    [True, False, False, True],   # from S
])
LEGAL_FIRST = np.array([True, False, False, True])
LEGAL_LAST = np.array([False, False, True, True])


def label_names(tags: Sequence[int]) -> List[str]:
    return [LABELS[t] for t in tags]


def _values(x) -> np.ndarray:
    return np.asarray(getattr(x, 'values', x), dtype=float)


@dataclass
class CrfHead:
    """Emission projection and transition matrix of one criterion.

    ``transitions[y_prev, y]`` scores moving from label y_prev to y.
    """
    W_s: Tensor
    b_s: Tensor
    transitions: Tensor

    @classmethod
    def create(cls, feature_size, rng, init_range=0.05) -> 'CrfHead':
        return cls(
            init_uniform((feature_size, NUM_LABELS), rng, init_range),
            init_uniform((NUM_LABELS,), rng, init_range),
            init_uniform((NUM_LABELS, NUM_LABELS), rng, init_range),
        )

    @property
    def feature_size(self) -> int:
        return self.W_s.shape[0]

    def parameters(self) -> Dict[str, Tensor]:
        return {'W_s': self.W_s, 'b_s': self.b_s,
                'transitions': self.transitions}


def _check_scores(scores, transitions):
    if scores.ndim != 2 or scores.shape[0] == 0 \
            or scores.shape[1] != NUM_LABELS:
        raise ShapeError('crf scores', scores.shape)
    if transitions.shape != (NUM_LABELS, NUM_LABELS):
        raise ShapeError('crf transitions', transitions.shape)


def emission_scores(hidden: Tensor, head: CrfHead) -> Tensor:
    """Row i holds the score of each label for character i."""
    if hidden.ndim != 2 or hidden.shape[0] == 0:
        raise ShapeError('emission_scores', hidden.shape)
    if hidden.shape[1] != head.feature_size:
        raise ShapeError('emission_scores', hidden.shape, head.W_s.shape)
    return T.add(T.matmul(hidden, head.W_s), head.b_s)


def _labels(y, n):
    y = np.asarray(y, dtype=np.int64)
    if y.shape != (n,):
        raise ValueError(f'{len(y)} labels for {n} positions')
    if n and (y.min() < 0 or y.max() >= NUM_LABELS):
        raise ValueError(f'label out of range in {y.tolist()}')
    return y


def sequence_score(scores: Tensor, transitions: Tensor, y) -> Tensor:
    """Sum of emission scores of ``y`` plus its transition scores."""
    scores, transitions = T._as_tensor(scores), T._as_tensor(transitions)
    _check_scores(scores, transitions)
    n = scores.shape[0]
    y = _labels(y, n)
    total = T.total(T.index(scores, (np.arange(n), y)))
    if n > 1:
        total = T.add(total, T.total(T.index(transitions, (y[:-1], y[1:]))))
    return total


def log_partition(scores: Tensor, transitions: Tensor) -> Tensor:
    """log of the summed exponentiated score of every label sequence."""
    scores, transitions = T._as_tensor(scores), T._as_tensor(transitions)
    _check_scores(scores, transitions)
    incoming = T.transpose(transitions)
    alpha = T.index(scores, 0)
    for i in range(1, scores.shape[0]):
        alpha = T.add(T.log_sum_exp(T.add(incoming, alpha)),
                      T.index(scores, i))
    return T.log_sum_exp(alpha)


def log_likelihood(scores: Tensor, transitions: Tensor, y_gold) -> Tensor:
    return T.sub(sequence_score(scores, transitions, y_gold),
                 log_partition(scores, transitions))


def viterbi_decode(scores, transitions, constrained=False) -> List[int]:
    """Highest scoring label sequence.

    Ties go to the lowest label index at every backtracking step. With
    ``constrained`` only well-formed BMES sequences are considered.
    """
    s, t = _values(scores), _values(transitions)
    _check_scores(s, t)
    if constrained:
        t = np.where(LEGAL_TRANSITIONS, t, -np.inf)
        s = s.copy()
        s[0] = np.where(LEGAL_FIRST, s[0], -np.inf)
        s[-1] = np.where(LEGAL_LAST, s[-1], -np.inf)
    delta = s[0]
    pointers = []
    for i in range(1, s.shape[0]):
        candidates = delta[:, None] + t
        pointers.append(candidates.argmax(axis=0))
        delta = candidates.max(axis=0) + s[i]
    path = [int(delta.argmax())]
    for back in reversed(pointers):
        path.append(int(back[path[-1]]))
    return path[::-1]


def marginals(scores, transitions) -> np.ndarray:
    """Posterior probability of each label at each position."""
    s, t = _values(scores), _values(transitions)
    _check_scores(s, t)
    n = s.shape[0]
    alpha = np.zeros_like(s)
    beta = np.zeros_like(s)
    alpha[0] = s[0]
    for i in range(1, n):
        alpha[i] = s[i] + _lse(alpha[i - 1][:, None] + t, axis=0)
    for i in range(n - 2, -1, -1):
        beta[i] = _lse(t + (s[i + 1] + beta[i + 1])[None, :], axis=1)
    log_z = _lse(alpha[-1], axis=0)
    return np.exp(alpha + beta - log_z)


def _lse(values, axis):
    top = values.max(axis=axis, keepdims=True)
    out = top + np.log(np.exp(values - top).sum(axis=axis, keepdims=True))
    return np.squeeze(out, axis=axis)


def path_score(scores, transitions, y) -> float:
    s, t = _values(scores), _values(transitions)
    y = _labels(y, s.shape[0])
    return float(s[np.arange(len(y)), y].sum() + t[y[:-1], y[1:]].sum())


def brute_force_oracle(scores, transitions) -> Tuple[float, List[int], float]:
    """Enumerate every label sequence: (log-partition, best, best score)."""
    s, t = _values(scores), _values(transitions)
    _check_scores(s, t)
    n = s.shape[0]
    if n > MAX_ORACLE_LENGTH:
        raise ValueError(f'oracle enumerates at most {MAX_ORACLE_LENGTH} '
                         f'positions, got {n}')
    all_scores = []
    best, best_score = None, -np.inf
    for y in itertools.product(range(NUM_LABELS), repeat=n):
        value = path_score(s, t, y)
        all_scores.append(value)
        if value > best_score:
            best, best_score = list(y), value
    return float(_lse(np.array(all_scores), axis=0)), best, best_score
