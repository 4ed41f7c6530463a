"""
Shared-private multi-criteria segmenter.

One shared Bi-LSTM reads every criterion's sentences; each criterion owns a
private Bi-LSTM and a CRF head. A discriminator tries to tell criteria apart
from the averaged shared states. Trainable tensors fall into three disjoint
groups:

* shared: the embedding tables and the shared Bi-LSTM,
* private: every private Bi-LSTM and CRF head,
* discriminator: W_d and b_d.

Objectives are returned as quantities to maximize.
"""
import dataclasses
import enum
import logging
from typing import Dict, List, Optional, Sequence

import numpy as np

from core import tensor as T
from core.tensor import Tensor
from corpus.data import bmes_to_spans
from segmenter import crf
from segmenter.crf import CrfHead
from segmenter.layers import (
    BiLstmParams,
    EmbeddingTable,
    EVAL,
    TRAIN,
    bilstm_forward,
    dropout,
    embed_sequence,
    init_uniform,
)

logger = logging.getLogger(__name__)


class ArchitectureKind(str, enum.Enum):
    """How the shared and private towers are wired."""
    MODEL_I = 'model1'      # parallel towers, head reads shared + private
    MODEL_II = 'model2'     # stacked towers, head reads private only
    MODEL_III = 'model3'    # stacked towers, head reads shared + private

    @property
    def stacked(self) -> bool:
        return self is not ArchitectureKind.MODEL_I

    @property
    def joint_head(self) -> bool:
        return self is not ArchitectureKind.MODEL_II


@dataclasses.dataclass
class DiscriminatorParams:
    W_d: Tensor
    b_d: Tensor

    @classmethod
    def create(cls, feature_size, criteria_count, rng, init_range=0.05):
        return cls(init_uniform((feature_size, criteria_count), rng,
                                init_range),
                   init_uniform((criteria_count,), rng, init_range))

    @property
    def criteria_count(self) -> int:
        return self.b_d.shape[0]

    def parameters(self) -> Dict[str, Tensor]:
        return {'W_d': self.W_d, 'b_d': self.b_d}

    def frozen(self) -> 'DiscriminatorParams':
        return DiscriminatorParams(self.W_d.detach(), self.b_d.detach())


def _copy(t: Tensor) -> Tensor:
    return T.parameter(t.values, name=t.name)


def _copied(component):
    """Same dataclass with every tensor field duplicated."""
    changes = {}
    for f in dataclasses.fields(component):
        value = getattr(component, f.name)
        if isinstance(value, Tensor):
            changes[f.name] = _copy(value)
        elif dataclasses.is_dataclass(value):
            changes[f.name] = _copied(value)
    return dataclasses.replace(component, **changes)


class SharedPrivateModel:
    """Parameters of the shared-private segmenter for M criteria."""

    def __init__(self, arch, criteria: Sequence[str], vocab,
                 embedding: EmbeddingTable, shared: BiLstmParams,
                 private: Sequence[BiLstmParams], heads: Sequence[CrfHead],
                 discriminator: DiscriminatorParams, use_bigram=True,
                 dropout_keep=1.0, constrained=False):
        self.arch = ArchitectureKind(arch)
        self.criteria = list(criteria)
        self.vocab = vocab
        self.embedding = embedding
        self.shared = shared
        self.private = list(private)
        self.heads = list(heads)
        self.discriminator = discriminator
        self.use_bigram = use_bigram
        self.dropout_keep = dropout_keep
        self.constrained = constrained
        self._validate()

    @classmethod
    def build(cls, arch, criteria, vocab, embedding_size, hidden_size, rng,
              init_range=0.05, use_bigram=True, dropout_keep=0.8,
              embedding: Optional[EmbeddingTable] = None,
              constrained=False) -> 'SharedPrivateModel':
        arch = ArchitectureKind(arch)
        if embedding is None:
            embedding = EmbeddingTable.create(
                vocab.char_count, vocab.bigram_count, embedding_size, rng,
                init_range)
        d_in = embedding.input_size(use_bigram)
        shared = BiLstmParams.create(d_in, hidden_size, rng, init_range)
        private_in = d_in + 2 * hidden_size if arch.stacked else d_in
        head_in = (4 if arch.joint_head else 2) * hidden_size
        private, heads = [], []
        for _ in criteria:
            private.append(BiLstmParams.create(private_in, hidden_size, rng,
                                               init_range))
            heads.append(CrfHead.create(head_in, rng, init_range))
        discriminator = DiscriminatorParams.create(
            2 * hidden_size, len(criteria), rng, init_range)
        model = cls(arch, criteria, vocab, embedding, shared, private, heads,
                    discriminator, use_bigram, dropout_keep, constrained)
        logger.info('built %s with %d criteria, %d trainable values',
                    arch.value, model.M, model.parameter_count())
        return model

    def _validate(self):
        if not self.criteria:
            raise ValueError('a model needs at least one criterion')
        if len(set(self.criteria)) != len(self.criteria):
            raise ValueError(f'duplicate criterion names {self.criteria}')
        if not (len(self.private) == len(self.heads) == self.M
                == self.discriminator.criteria_count):
            raise ValueError('one private tower, head and discriminator '
                             'output per criterion required')
        for head in self.heads:
            if head.feature_size != self.head_feature_size:
                raise ValueError(f'head width {head.feature_size} != '
                                 f'{self.head_feature_size}')
        groups = [self.shared_parameters(), self.private_parameters(),
                  self.discriminator_parameters()]
        seen = set()
        for group in groups:
            for tensor in group.values():
                if id(tensor) in seen:
                    raise ValueError('parameter groups overlap')
                seen.add(id(tensor))
        if seen != {id(t) for t in self._all_tensors()}:
            raise ValueError('parameter groups do not cover the model')

    def _all_tensors(self) -> List[Tensor]:
        found = []

        def walk(component):
            for f in dataclasses.fields(component):
                value = getattr(component, f.name)
                if isinstance(value, Tensor):
                    found.append(value)
                elif dataclasses.is_dataclass(value):
                    walk(value)

        for part in [self.embedding, self.shared, self.discriminator,
                     *self.private, *self.heads]:
            walk(part)
        return found

    @property
    def M(self) -> int:
        return len(self.criteria)

    @property
    def hidden_size(self) -> int:
        return self.shared.hidden_size

    @property
    def head_feature_size(self) -> int:
        return (4 if self.arch.joint_head else 2) * self.hidden_size

    def criterion_index(self, criterion) -> int:
        if isinstance(criterion, str):
            try:
                return self.criteria.index(criterion)
            except ValueError:
                raise ValueError(f'unknown criterion {criterion!r}; '
                                 f'available: {self.criteria}') from None
        if isinstance(criterion, (int, np.integer)) \
                and 0 <= criterion < self.M:
            return int(criterion)
        raise ValueError(f'criterion index {criterion} outside '
                         f'0..{self.M - 1}')

    # parameter groups

    def shared_parameters(self) -> Dict[str, Tensor]:
        named = {f'embedding.{k}': v
                 for k, v in self.embedding.parameters().items()}
        named.update({f'shared.{k}': v
                      for k, v in self.shared.parameters().items()})
        return named

    def private_parameters(self, criterion=None) -> Dict[str, Tensor]:
        indices = (range(self.M) if criterion is None
                   else [self.criterion_index(criterion)])
        named = {}
        for m in indices:
            name = self.criteria[m]
            for k, v in self.private[m].parameters().items():
                named[f'private.{name}.{k}'] = v
            for k, v in self.heads[m].parameters().items():
                named[f'head.{name}.{k}'] = v
        return named

    def discriminator_parameters(self) -> Dict[str, Tensor]:
        return {f'discriminator.{k}': v
                for k, v in self.discriminator.parameters().items()}

    def named_parameters(self) -> Dict[str, Tensor]:
        named = self.shared_parameters()
        named.update(self.private_parameters())
        named.update(self.discriminator_parameters())
        return named

    def parameter_count(self) -> int:
        return sum(t.size for t in self.named_parameters().values())

    def zero_grad(self):
        for tensor in self.named_parameters().values():
            tensor.zero_grad()

    def snapshot(self) -> Dict[str, np.ndarray]:
        return {k: v.values.copy() for k, v in self.named_parameters().items()}

    def restore(self, snapshot: Dict[str, np.ndarray]):
        for name, tensor in self.named_parameters().items():
            tensor.values[...] = snapshot[name]

    # construction of related models

    def copy(self) -> 'SharedPrivateModel':
        return SharedPrivateModel(
            self.arch, self.criteria, self.vocab, _copied(self.embedding),
            _copied(self.shared), [_copied(p) for p in self.private],
            [_copied(h) for h in self.heads], _copied(self.discriminator),
            self.use_bigram, self.dropout_keep, self.constrained)

    def with_new_criterion(self, name, rng, init_range=0.05
                           ) -> 'SharedPrivateModel':
        """Copy of this model with a fresh private tower and head appended.

        The discriminator gains an all-zero output column for the newcomer.
        """
        base = self.copy()
        private_in = self.private[0].input_size
        d = self.discriminator
        discriminator = DiscriminatorParams(
            T.parameter(np.hstack([d.W_d.values,
                                   np.zeros((d.W_d.shape[0], 1))])),
            T.parameter(np.append(d.b_d.values, 0.0)))
        return SharedPrivateModel(
            self.arch, self.criteria + [name], self.vocab, base.embedding,
            base.shared,
            base.private + [BiLstmParams.create(
                private_in, self.hidden_size, rng, init_range)],
            base.heads + [CrfHead.create(self.head_feature_size, rng,
                                         init_range)],
            discriminator, self.use_bigram, self.dropout_keep,
            self.constrained)

    # input encoding

    def embed(self, sentence, rng=None) -> Tensor:
        """Embedding rows for a sentence, with dropout when ``rng`` is set."""
        chars = getattr(sentence, 'chars', sentence)
        table = embed_sequence(self.vocab.char_ids(chars),
                               self.vocab.bigram_ids(chars),
                               self.embedding, self.use_bigram)
        mode = TRAIN if rng is not None else EVAL
        return dropout(table, self.dropout_keep, mode, rng)


# forward passes

def forward_features(model: SharedPrivateModel, embedded: Tensor, m):
    """(features read by head m, shared tower states) for one sentence."""
    m = model.criterion_index(m)
    shared_states = bilstm_forward(embedded, model.shared)
    if model.arch.stacked:
        private_in = T.concat([embedded, shared_states], axis=1)
    else:
        private_in = embedded
    private_states = bilstm_forward(private_in, model.private[m])
    if model.arch.joint_head:
        features = T.concat([shared_states, private_states], axis=1)
    else:
        features = private_states
    return features, shared_states


def _logits(shared_states: Tensor, d: DiscriminatorParams) -> Tensor:
    if shared_states.ndim != 2 or shared_states.shape[0] == 0:
        raise ValueError('discriminator needs a non-empty sequence')
    pooled = T.mean_over_axis(shared_states, axis=0)
    return T.add(T.matmul(pooled, d.W_d), d.b_d)


def discriminator_forward(shared_states: Tensor,
                          d: DiscriminatorParams) -> Tensor:
    """p(criterion | sentence) from the mean of the shared states."""
    return T.softmax(_logits(shared_states, d))


def entropy(shared_states: Tensor, d: DiscriminatorParams) -> Tensor:
    """H(p) = -sum p log p of the discriminator's prediction."""
    logits = _logits(shared_states, d)
    return T.scale(T.total(T.mul(T.softmax(logits), T.log_softmax(logits))),
                   -1.0)


def _check_batch(batch):
    if not batch:
        raise ValueError('empty batch')


def _sentence_ll(model, sentence, features, m):
    head = model.heads[m]
    scores = crf.emission_scores(features, head)
    return crf.log_likelihood(scores, head.transitions, sentence.tags)


def _sum(terms: List[Tensor]) -> Tensor:
    result = terms[0]
    for term in terms[1:]:
        result = T.add(result, term)
    return result


def loss_seg(model, batch, m, rng=None) -> Tensor:
    """Summed CRF log-likelihood of the gold tags under head m."""
    _check_batch(batch)
    m = model.criterion_index(m)
    terms = []
    for sentence in batch:
        features, _ = forward_features(model, model.embed(sentence, rng), m)
        terms.append(_sentence_ll(model, sentence, features, m))
    return _sum(terms)


def _shared_states(model, sentence, rng=None) -> Tensor:
    return bilstm_forward(model.embed(sentence, rng), model.shared)


def loss_adv_discriminator(model, batch, m, rng=None,
                           detach_shared=False) -> Tensor:
    """Summed log p(m | X): what the discriminator maximizes."""
    _check_batch(batch)
    m = model.criterion_index(m)
    terms = []
    for sentence in batch:
        states = _shared_states(model, sentence, rng)
        if detach_shared:
            states = states.detach()
        log_p = T.log_softmax(_logits(states, model.discriminator))
        terms.append(T.index(log_p, m))
    return _sum(terms)


def loss_adv_entropy(model, batch, m, rng=None,
                     freeze_discriminator=True) -> Tensor:
    """Summed entropy of the discriminator's prediction.

    With ``freeze_discriminator`` the discriminator parameters enter as
    constants, so gradients reach the shared parameters only.
    """
    _check_batch(batch)
    model.criterion_index(m)
    d = (model.discriminator.frozen() if freeze_discriminator
         else model.discriminator)
    return _sum([entropy(_shared_states(model, s, rng), d) for s in batch])


def objective_terms(model, batch, m, rng=None, adversarial=True,
                    freeze_discriminator=False) -> Dict[str, Tensor]:
    """J_seg, J1_adv and J2_adv on one batch, sharing the forward passes.

    Adversarial terms are omitted when ``adversarial`` is false.
    """
    _check_batch(batch)
    m = model.criterion_index(m)
    d = (model.discriminator.frozen() if freeze_discriminator
         else model.discriminator)
    seg, disc, ent = [], [], []
    for sentence in batch:
        features, shared = forward_features(model, model.embed(sentence, rng),
                                            m)
        seg.append(_sentence_ll(model, sentence, features, m))
        if adversarial:
            logits = _logits(shared, d)
            log_p = T.log_softmax(logits)
            disc.append(T.index(log_p, m))
            ent.append(T.scale(T.total(T.mul(T.softmax(logits), log_p)),
                               -1.0))
    terms = {'seg': _sum(seg)}
    if adversarial:
        terms['adv_discriminator'] = _sum(disc)
        terms['adv_entropy'] = _sum(ent)
    return terms


def combined_objective(model, batch, m, lam, rng=None) -> Tensor:
    """J_seg + J1_adv + lambda * J2_adv on one batch."""
    if lam < 0:
        raise ValueError('lambda must be non-negative')
    terms = objective_terms(model, batch, m, rng)
    return T.add(T.add(terms['seg'], terms['adv_discriminator']),
                 T.scale(terms['adv_entropy'], lam))


# inference

def predict(model, sentence, m) -> List[int]:
    """Viterbi tags for a sentence (TaggedSentence, string or char list)."""
    m = model.criterion_index(m)
    features, _ = forward_features(model, model.embed(sentence), m)
    scores = crf.emission_scores(features, model.heads[m])
    return crf.viterbi_decode(scores, model.heads[m].transitions,
                              constrained=model.constrained)


def predict_spans(model, sentences, m):
    return [bmes_to_spans(predict(model, s, m)) for s in sentences]


def segment(model, text: str, m) -> List[str]:
    if not text:
        return []
    return [text[s:e] for s, e in bmes_to_spans(predict(model, text, m))]


def discriminator_accuracy(model, corpora, split='test') -> float:
    """How often the discriminator names the right criterion."""
    hits = total = 0
    for m, corpus in enumerate(corpora):
        for sentence in corpus.split(split):
            p = discriminator_forward(_shared_states(model, sentence),
                                      model.discriminator)
            hits += int(np.argmax(p.values)) == m
            total += 1
    return hits / total if total else 0.0
