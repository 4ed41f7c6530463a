"""
Training: Adam ascent, the alternating adversarial epoch, the two-phase
schedule with early stopping, and transfer to a new criterion.

Every epoch of phase 1 draws one batch per criterion twice. The first pass
updates the shared and private parameters on J_seg + lambda * J2_adv; the
second updates the discriminator alone on J1_adv. Phase 2 freezes the shared
parameters and the discriminator and trains the private towers on J_seg
until the average dev F stops improving.
"""
import csv
import logging
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence

import numpy as np

from core import tensor as T
from core.exceptions import DataError, GradientError, NumericError
from corpus import metrics
from corpus.data import UNK, CriterionCorpus
from segmenter import multitask
from segmenter.multitask import SharedPrivateModel
from segmenter.serializers import TrainConfig

logger = logging.getLogger(__name__)

LOG_COLUMNS = ('phase', 'epoch', 'corpus', 'loss', 'dev_P', 'dev_R', 'dev_F')


# optimizer

@dataclass
class AdamState:
    """First and second moments per parameter name, and the step count."""
    m: Dict[str, np.ndarray] = field(default_factory=dict)
    v: Dict[str, np.ndarray] = field(default_factory=dict)
    t: int = 0


def adam_step(params: Dict[str, T.Tensor], state: AdamState, lr=0.01,
              beta1=0.9, beta2=0.999, epsilon=1e-8):
    """Move every parameter along its bias-corrected Adam direction.

    Objectives are maximized, so parameters follow +gradient.
    """
    for name, param in params.items():
        if param.grad is None:
            raise GradientError(f'no gradient for parameter {name}')
    state.t += 1
    correction1 = 1.0 - beta1 ** state.t
    correction2 = 1.0 - beta2 ** state.t
    for name, param in params.items():
        g = param.grad
        m = state.m.setdefault(name, np.zeros_like(param.values))
        v = state.v.setdefault(name, np.zeros_like(param.values))
        m *= beta1
        m += (1.0 - beta1) * g
        v *= beta2
        v += (1.0 - beta2) * (g * g)
        param.values += lr * (m / correction1) / (
            np.sqrt(v / correction2) + epsilon)


# batches and reports

class BatchSampler:
    """Batches from shuffled passes without replacement, reshuffled when
    a pass is used up."""

    def __init__(self, sentences, batch_size, rng):
        if not sentences:
            raise DataError('cannot sample batches from an empty corpus')
        self.sentences = list(sentences)
        self.batch_size = batch_size
        self.rng = rng
        self._order = []
        self._cursor = 0

    def next_batch(self):
        if self._cursor >= len(self._order):
            self._order = self.rng.permutation(len(self.sentences))
            self._cursor = 0
        picked = self._order[self._cursor:self._cursor + self.batch_size]
        self._cursor += self.batch_size
        return [self.sentences[i] for i in picked]


@dataclass
class EpochReport:
    epoch: int
    phase: int
    seg: Dict[str, float] = field(default_factory=dict)
    adv_discriminator: Dict[str, float] = field(default_factory=dict)
    adv_entropy: Dict[str, float] = field(default_factory=dict)
    batches: int = 0


@dataclass
class TrainedModel:
    model: SharedPrivateModel
    best_dev_f: float = 0.0
    best_epoch: int = 0
    dev_scores: Dict[str, metrics.SegmentationScore] = field(
        default_factory=dict)
    phase1_discriminator_accuracy: Optional[float] = None
    history: List[EpochReport] = field(default_factory=list)


class TrainingLog:
    """Tab-separated rows: phase, epoch, corpus, loss, dev P/R/F."""

    def __init__(self, stream=None, on_log: Callable = None):
        self.rows = []
        self.on_log = on_log
        self._writer = None
        if stream is not None:
            self._writer = csv.writer(stream, delimiter='\t',
                                      lineterminator='\n')
            self._writer.writerow(LOG_COLUMNS)

    def write(self, phase, epoch, corpus, loss, score=None):
        row = [phase, epoch, corpus, f'{loss:.6f}']
        if score is None:
            row += ['', '', '']
        else:
            row += [f'{score.precision:.6f}', f'{score.recall:.6f}',
                    f'{score.f1:.6f}']
        self.rows.append(row)
        if self._writer is not None:
            self._writer.writerow(row)
        if self.on_log is not None:
            self.on_log(row)


def _finite(value: T.Tensor, what) -> float:
    number = value.item()
    if not np.isfinite(number):
        raise NumericError(f'{what} became {number}')
    return number


# evaluation

def evaluate_model(model, corpus: CriterionCorpus, m=None, split='test'
                   ) -> metrics.SegmentationScore:
    """Score head ``m`` (default: the head named after the corpus)."""
    m = corpus.name if m is None else m
    sentences = corpus.split(split)
    predicted = multitask.predict_spans(model, sentences, m)
    return metrics.score(sentences, predicted, corpus.train_word_set)


def _selection_split(corpus):
    return 'dev' if corpus.dev else 'train'


class Trainer:
    """Optimizer state, batch samplers and logging for one model."""

    def __init__(self, model: SharedPrivateModel,
                 corpora: Sequence[CriterionCorpus], config: TrainConfig,
                 rng, log: TrainingLog = None, criteria=None):
        criteria = list(range(model.M)) if criteria is None else criteria
        if len(corpora) != len(criteria):
            raise ValueError(f'{len(criteria)} criteria to train but '
                             f'{len(corpora)} corpora were given')
        names = [model.criteria[model.criterion_index(m)] for m in criteria]
        for corpus, name in zip(corpora, names):
            if corpus.name != name:
                raise ValueError(f'corpus {corpus.name!r} registered where '
                                 f'criterion {name!r} is expected')
            if not corpus.dev:
                logger.warning('%s has no dev split; selecting on train',
                               corpus.name)
        self.model = model
        self.criteria = [model.criterion_index(m) for m in criteria]
        self.corpora = dict(zip(self.criteria, corpora))
        self.config = config
        self.rng = rng
        self.log = log or TrainingLog()
        self.samplers = {
            m: BatchSampler(c.train, config.batch_size_for(c.name), rng)
            for m, c in self.corpora.items()}
        self.tagger_state = AdamState()
        self.discriminator_state = AdamState()
        self.epoch = 0

    def _adam(self, params, state):
        c = self.config
        adam_step(params, state, c.learning_rate, c.adam_beta1,
                  c.adam_beta2, c.adam_epsilon)

    def _trainable(self, params: Dict[str, T.Tensor]):
        if not self.model.use_bigram:
            params = {k: v for k, v in params.items()
                      if k != 'embedding.bigram'}
        return params

    def tagger_update(self, m, adversarial, report):
        """Shared and private parameters of criterion m, one batch."""
        model, name = self.model, self.model.criteria[m]
        model.zero_grad()
        batch = self.samplers[m].next_batch()
        with T.Tape() as tape:
            terms = multitask.objective_terms(
                model, batch, m, self.rng, adversarial=adversarial,
                freeze_discriminator=True)
            objective = terms['seg']
            if adversarial:
                objective = T.add(objective, T.scale(
                    terms['adv_entropy'], self.config.adv_weight))
        if adversarial:
            report.adv_entropy[name] = _finite(terms['adv_entropy'],
                                               'entropy term')
        report.seg[name] = _finite(terms['seg'], f'J_seg on {name}')
        T.backward(objective, tape)
        params = dict(model.shared_parameters())
        params.update(model.private_parameters(m))
        self._adam(self._trainable(params), self.tagger_state)

    def discriminator_update(self, m, report):
        model, name = self.model, self.model.criteria[m]
        model.zero_grad()
        batch = self.samplers[m].next_batch()
        with T.Tape() as tape:
            objective = multitask.loss_adv_discriminator(
                model, batch, m, self.rng, detach_shared=True)
        report.adv_discriminator[name] = _finite(objective,
                                                 'discriminator term')
        T.backward(objective, tape)
        self._adam(model.discriminator_parameters(),
                   self.discriminator_state)

    def private_update(self, m, report):
        """J_seg on criterion m with everything but its private tower fixed."""
        model, name = self.model, self.model.criteria[m]
        model.zero_grad()
        with T.Tape() as tape:
            objective = multitask.loss_seg(
                model, self.samplers[m].next_batch(), m, self.rng)
        report.seg[name] = _finite(objective, f'J_seg on {name}')
        T.backward(objective, tape)
        self._adam(model.private_parameters(m), self.tagger_state)

    def train_epoch(self, adversarial=True) -> EpochReport:
        """One epoch of the alternating schedule: a tagger batch per
        criterion, then a discriminator batch per criterion."""
        self.epoch += 1
        report = EpochReport(self.epoch, phase=1)
        for m in self.criteria:
            self.tagger_update(m, adversarial, report)
            report.batches += 1
        if adversarial:
            for m in self.criteria:
                self.discriminator_update(m, report)
                report.batches += 1
        return report

    def private_epoch(self) -> EpochReport:
        self.epoch += 1
        report = EpochReport(self.epoch, phase=2)
        for m in self.criteria:
            self.private_update(m, report)
            report.batches += 1
        return report

    def evaluate(self) -> Dict[str, metrics.SegmentationScore]:
        return {c.name: evaluate_model(self.model, c, m, _selection_split(c))
                for m, c in self.corpora.items()}

    def record(self, report: EpochReport, scores=None):
        for name, loss in report.seg.items():
            score = scores.get(name) if scores else None
            self.log.write(report.phase, report.epoch, name, loss, score)

    def fine_tune(self, max_epochs=None) -> TrainedModel:
        """Train private towers with early stopping on average dev F.

        Returns the parameters of the best evaluation, not the last.
        """
        c = self.config
        max_epochs = c.phase2_max_epochs if max_epochs is None else max_epochs
        result = TrainedModel(self.model)
        best_snapshot = self.model.snapshot()
        result.dev_scores = self.evaluate()
        result.best_dev_f = _average_f(result.dev_scores)
        result.best_epoch = self.epoch
        stale = 0
        for k in range(1, max_epochs + 1):
            report = self.private_epoch()
            result.history.append(report)
            if k % c.eval_every and k != max_epochs:
                self.record(report)
                continue
            scores = self.evaluate()
            self.record(report, scores)
            average = _average_f(scores)
            if average > result.best_dev_f:
                result.best_dev_f, result.best_epoch = average, report.epoch
                result.dev_scores = scores
                best_snapshot = self.model.snapshot()
                stale = 0
            else:
                stale += 1
                if stale >= c.early_stop_patience:
                    logger.info('early stop at epoch %d (best %.4f at %d)',
                                report.epoch, result.best_dev_f,
                                result.best_epoch)
                    break
        self.model.restore(best_snapshot)
        return result


def _average_f(scores) -> float:
    return float(np.mean([s.f1 for s in scores.values()])) if scores else 0.0


def train_epoch(model, corpora, config: TrainConfig, rng,
                adversarial=True) -> EpochReport:
    """A single alternating epoch with fresh optimizer state."""
    return Trainer(model, corpora, config, rng).train_epoch(adversarial)


def two_phase_train(model, corpora, config: TrainConfig, adversarial=True,
                    rng=None, log: TrainingLog = None) -> TrainedModel:
    """Adversarial (or plain) multi-criteria epochs, then private-only
    training with the shared parameters fixed."""
    rng = rng if rng is not None else np.random.default_rng(config.seed)
    trainer = Trainer(model, corpora, config, rng, log)
    history = []
    logger.info('phase 1: %d epochs (%s)', config.adversarial_epochs,
                'adversarial' if adversarial else 'multi-task')
    for k in range(1, config.adversarial_epochs + 1):
        report = trainer.train_epoch(adversarial)
        history.append(report)
        if k % config.eval_every == 0 or k == config.adversarial_epochs:
            scores = trainer.evaluate()
            trainer.record(report, scores)
            logger.info('epoch %d: dev F %.4f', k, _average_f(scores))
        else:
            trainer.record(report)
    accuracy = None
    if adversarial and model.M > 1:
        split = 'dev' if all(c.dev for c in corpora) else 'train'
        accuracy = multitask.discriminator_accuracy(model, corpora, split)
        logger.info('discriminator accuracy after phase 1: %.3f', accuracy)
    logger.info('phase 2: shared parameters fixed, early stopping')
    result = trainer.fine_tune()
    result.history = history + result.history
    result.phase1_discriminator_accuracy = accuracy
    return result


def transfer_train(trained, new_corpus: CriterionCorpus, config: TrainConfig,
                   rng=None, log: TrainingLog = None) -> TrainedModel:
    """Fit a fresh private tower and head for ``new_corpus`` on top of the
    fixed shared parameters of ``trained``."""
    source = getattr(trained, 'model', trained)
    rng = rng if rng is not None else np.random.default_rng(config.seed)
    known = sum(cid != UNK
                for s in new_corpus.train
                for cid in source.vocab.char_ids(s.chars))
    if known == 0:
        raise DataError(f'corpus {new_corpus.name!r} shares no characters '
                        f'with the model vocabulary')
    model = source.with_new_criterion(new_corpus.name, rng,
                                      config.init_range)
    trainer = Trainer(model, [new_corpus], config, rng, log,
                      criteria=[model.M - 1])
    result = trainer.fine_tune()
    logger.info('transfer to %s: best dev F %.4f', new_corpus.name,
                result.best_dev_f)
    return result
