"""
Django command to train a segmenter on one or more criteria.
"""
from core.exceptions import ConfigError
from segmenter.management.base import SegmenterCommand
from segmenter.multitask import ArchitectureKind
from segmenter.runs import load_corpora, run_training
from segmenter.serializers import load_config


class Command(SegmenterCommand):
    """Train with the two-phase schedule and write a run directory."""
    help = ('Train on corpora given as NAME=TRAIN[,TEST]; writes model.ckpt, '
            'train.log.tsv and manifest.json to the output directory.')

    def add_arguments(self, parser):
        parser.add_argument('--config', help='JSON configuration file')
        parser.add_argument('--corpus', action='append',
                            dest='corpora', metavar='NAME=TRAIN[,TEST]')
        parser.add_argument('--arch', default=ArchitectureKind.MODEL_I.value,
                            choices=[a.value for a in ArchitectureKind])
        parser.add_argument('--adversarial', action='store_true',
                            help='train phase 1 against the discriminator')
        parser.add_argument('--output-dir', required=True)
        parser.add_argument('--embeddings',
                            help='pretrained character embeddings')
        parser.add_argument('--mapping',
                            help='character normalization table')
        parser.add_argument('--seed', type=int,
                            help='override the configured seed')

    def handle(self, *args, **options):
        """Entrypoint for command."""
        config = load_config(options['config'])
        if options['seed'] is not None:
            if options['seed'] < 0:
                raise ConfigError('seed must not be negative')
            config = config.replace(seed=options['seed'])
        corpora, sources = load_corpora(options['corpora'] or [], config,
                                        options['mapping'])
        adversarial = options['adversarial']
        if adversarial and len(corpora) < 2:
            raise ConfigError('adversarial training needs two or more '
                              'corpora')
        self.stdout.write(
            f'Training {options["arch"]} on '
            f'{", ".join(c.name for c in corpora)} '
            f'({"adversarial" if adversarial else "no adversary"})...')
        result, run = run_training(corpora, sources, config, options['arch'],
                                   adversarial, options['output_dir'],
                                   options['embeddings'])
        for name, score in run.metrics['test'].items():
            self.stdout.write(f'{name}\tP={score["precision"]:.4f}\t'
                              f'R={score["recall"]:.4f}\t'
                              f'F={score["f1"]:.4f}')
        self.stdout.write(self.style.SUCCESS(
            f'Run {run.pk} written to {options["output_dir"]} '
            f'(best dev F {result.best_dev_f:.4f}).'))
