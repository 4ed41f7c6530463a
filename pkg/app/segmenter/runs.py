"""
Reproducible training runs: corpus registration, training, checkpoint,
training log and run manifest; the synthetic comparison experiment.
"""
import json
import logging
import os
import tempfile
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np
from django.conf import settings
from django.utils import timezone

from core.exceptions import ConfigError
from core.models import TrainingRun
from corpus.data import (
    CriterionCorpus,
    build_vocab,
    file_digest,
    load_char_mapping,
    load_pretrained_embeddings,
)
from corpus.metrics import SCORE_COLUMNS, SegmentationScore
from corpus.synthetic import generate_synthetic_corpora
from segmenter import training
from segmenter.checkpoint import save_checkpoint
from segmenter.multitask import ArchitectureKind, SharedPrivateModel
from segmenter.serializers import RunManifestSerializer

logger = logging.getLogger(__name__)

CHECKPOINT_NAME = 'model.ckpt'
LOG_NAME = 'train.log.tsv'
MANIFEST_NAME = 'manifest.json'


def parse_corpus_arg(arg: str):
    """``NAME=TRAIN_PATH[,TEST_PATH]`` -> (name, train, test or None)."""
    name, sep, paths = arg.partition('=')
    if not sep or not name or not paths:
        raise ConfigError(f'corpus argument {arg!r} is not NAME=TRAIN[,TEST]')
    train, _, test = paths.partition(',')
    return name, train, test or None


def load_corpora(args, config, mapping_path=None):
    mapping = load_char_mapping(mapping_path) if mapping_path else None
    corpora, sources = [], {}
    for arg in args:
        name, train, test = parse_corpus_arg(arg)
        if name in sources:
            raise ConfigError(f'corpus {name!r} given twice')
        for path in filter(None, (train, test)):
            if not Path(path).is_file():
                raise FileNotFoundError(f'no such corpus file: {path}')
        corpora.append(CriterionCorpus.from_files(
            name, train, test, seed=config.seed, mapping=mapping))
        sources[name] = {
            'train': train, 'train_sha256': file_digest(train),
            'test': test, 'test_sha256': file_digest(test) if test else None,
        }
    if not corpora:
        raise ConfigError('at least one corpus is required')
    return corpora, sources


def build_model(corpora, config, arch, rng, embeddings_path=None):
    vocab = build_vocab(corpora, config.min_freq)
    embedding = None
    if embeddings_path:
        embedding = load_pretrained_embeddings(
            embeddings_path, vocab, config.embedding_size, rng,
            config.init_range)
    return SharedPrivateModel.build(
        arch, [c.name for c in corpora], vocab, config.embedding_size,
        config.hidden_size, rng, config.init_range, config.use_bigram,
        config.dropout_keep, embedding, config.mask_illegal_transitions)


def test_scores(model, corpora):
    scores = {}
    for corpus in corpora:
        split = 'test' if corpus.test else 'dev'
        scores[corpus.name] = training.evaluate_model(model, corpus,
                                                      split=split)
    return scores


def write_json_atomic(path, data):
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent, suffix='.tmp')
    try:
        with os.fdopen(fd, 'w', encoding='utf-8') as handle:
            json.dump(data, handle, indent=2, sort_keys=True,
                      ensure_ascii=False)
            handle.write('\n')
        os.replace(tmp, path)
    finally:
        if os.path.exists(tmp):
            os.remove(tmp)


def metric_block(result, scores):
    block = {
        'best_dev_f': round(result.best_dev_f, 6),
        'best_epoch': result.best_epoch,
        'test': {name: {k: round(v, 6) if isinstance(v, float) else v
                        for k, v in s.to_dict().items()}
                 for name, s in scores.items()},
    }
    block['average_test_f'] = round(
        float(np.mean([s.f1 for s in scores.values()])), 6)
    if result.phase1_discriminator_accuracy is not None:
        block['discriminator_accuracy'] = round(
            result.phase1_discriminator_accuracy, 6)
    return block


def run_training(corpora, sources, config, arch, adversarial, output_dir,
                 embeddings_path=None):
    """Train, save the checkpoint and log, record and write the manifest."""
    arch = ArchitectureKind(arch)
    output_dir = Path(output_dir)
    output_dir.mkdir(parents=True, exist_ok=True)
    run = TrainingRun.objects.create(
        output_dir=str(output_dir.resolve()),
        arch=arch.value,
        adversarial=adversarial,
        seed=config.seed,
        config=config.to_dict(),
        corpora=sources,
        code_version=settings.CWS_CODE_VERSION,
        started_at=timezone.now(),
    )
    rng = np.random.default_rng(config.seed)
    model = build_model(corpora, config, arch, rng, embeddings_path)
    with open(output_dir / LOG_NAME, 'w', encoding='utf-8',
              newline='') as stream:
        log = training.TrainingLog(stream)
        result = training.two_phase_train(model, corpora, config,
                                          adversarial=adversarial, rng=rng,
                                          log=log)
    scores = test_scores(result.model, corpora)
    lexicons = {c.name: sorted(c.train_word_set) for c in corpora}
    save_checkpoint(output_dir / CHECKPOINT_NAME, result.model,
                    config.to_dict(), lexicons)

    run.metrics = metric_block(result, scores)
    run.finished_at = timezone.now()
    run.save()
    manifest = dict(RunManifestSerializer(run).data)
    write_json_atomic(output_dir / MANIFEST_NAME, manifest)
    logger.info('run %s finished: average test F %.4f', run.pk,
                run.metrics['average_test_f'])
    return result, run


# synthetic comparison

EXPERIMENT_SETTINGS = ('baseline', 'multitask', 'adversarial',
                       'transfer_baseline', 'transfer')
EXPERIMENT_COLUMNS = ('seed', 'setting', 'corpus') + SCORE_COLUMNS \
    + ('disc_acc',)


@dataclass(frozen=True)
class ExperimentRow:
    seed: int
    setting: str
    corpus: str
    score: SegmentationScore
    discriminator_accuracy: Optional[float] = None

    def as_row(self):
        accuracy = self.discriminator_accuracy
        return ([self.seed, self.setting, self.corpus] + self.score.as_row()
                + ['' if accuracy is None else f'{accuracy:.6f}'])


def _fit(corpora, config, arch, adversarial, seed):
    rng = np.random.default_rng(seed)
    model = build_model(corpora, config, arch, rng)
    return training.two_phase_train(model, corpora, config,
                                    adversarial=adversarial, rng=rng)


def synthetic_comparison(config, seeds, arch=ArchitectureKind.MODEL_I,
                         train_size=500, transfer_size=100, alphabet_size=20,
                         rules=('joined_digits', 'split_digits'),
                         transfer_rule='split_letters'):
    """Test scores of single-criterion baselines, plain multi-task and
    adversarial training on synthetic criteria, and of transfer to a
    held-out criterion.

    The transfer baseline trains the same private tower and head with the
    same budget on untrained, fixed shared parameters.
    """
    rows = []
    for seed in seeds:
        config = config.replace(seed=seed)
        generated = generate_synthetic_corpora(
            alphabet_size, train_size, list(rules) + [transfer_rule],
            seed=seed)
        *sources, target = generated
        target = CriterionCorpus(target.name, target.train[:transfer_size],
                                 target.dev, target.test)

        for corpus in sources:
            result = _fit([corpus], config, ArchitectureKind.MODEL_I, False,
                          seed)
            rows.append(ExperimentRow(seed, 'baseline', corpus.name,
                                      test_scores(result.model,
                                                  [corpus])[corpus.name]))
        for setting, adversarial in (('multitask', False),
                                     ('adversarial', True)):
            result = _fit(sources, config, arch, adversarial, seed)
            accuracy = result.phase1_discriminator_accuracy
            for name, score in test_scores(result.model, sources).items():
                rows.append(ExperimentRow(seed, setting, name, score,
                                          accuracy))
            if adversarial:
                adversarial_result = result

        untrained = build_model(sources, config, arch,
                                np.random.default_rng(seed))
        for setting, source in (('transfer_baseline', untrained),
                                ('transfer', adversarial_result)):
            result = training.transfer_train(source, target, config,
                                             np.random.default_rng(seed))
            rows.append(ExperimentRow(
                seed, setting, target.name,
                training.evaluate_model(result.model, target)))
        logger.info('seed %d done', seed)
    return rows


def _per_seed(rows, setting, value):
    by_seed = {}
    for row in rows:
        if row.setting == setting and value(row) is not None:
            by_seed.setdefault(row.seed, []).append(value(row))
    return [float(np.mean(values)) for values in by_seed.values()]


def median_f(rows, setting) -> float:
    """Median over seeds of the average F across the setting's corpora."""
    values = _per_seed(rows, setting, lambda row: row.score.f1)
    return float(np.median(values)) if values else float('nan')


def median_discriminator_accuracy(rows, setting='adversarial') -> float:
    values = _per_seed(rows, setting, lambda row: row.discriminator_accuracy)
    return float(np.median(values)) if values else float('nan')
