"""
Django command to compare training regimes on synthetic criteria.
"""
import csv

from core.exceptions import ConfigError
from segmenter.management.base import SegmenterCommand
from segmenter.multitask import ArchitectureKind
from segmenter.runs import (
    EXPERIMENT_COLUMNS,
    EXPERIMENT_SETTINGS,
    median_discriminator_accuracy,
    median_f,
    synthetic_comparison,
)
from segmenter.serializers import load_config


class Command(SegmenterCommand):
    """Baseline, multi-task, adversarial and transfer runs per seed."""
    help = ('Run the synthetic comparison and print one TSV row per seed, '
            'setting and corpus, then the median over seeds of each '
            'setting\'s average F.')

    def add_arguments(self, parser):
        parser.add_argument('--config', help='JSON configuration file')
        parser.add_argument('--seeds', type=int, nargs='+', default=[1])
        parser.add_argument('--arch', default=ArchitectureKind.MODEL_I.value,
                            choices=[a.value for a in ArchitectureKind])
        parser.add_argument('--train-size', type=int, default=500)
        parser.add_argument('--transfer-size', type=int, default=100)
        parser.add_argument('--alphabet-size', type=int, default=20)

    def handle(self, *args, **options):
        """Entrypoint for command."""
        for key in ('train_size', 'transfer_size', 'alphabet_size'):
            if options[key] < 1:
                raise ConfigError(f'--{key.replace("_", "-")} must be '
                                  f'positive')
        config = load_config(options['config'])
        self.stdout.write(f'Running {len(options["seeds"])} seed(s)...')
        rows = synthetic_comparison(
            config, options['seeds'], ArchitectureKind(options['arch']),
            options['train_size'], options['transfer_size'],
            options['alphabet_size'])

        writer = csv.writer(self.stdout, delimiter='\t', lineterminator='\n')
        writer.writerow(EXPERIMENT_COLUMNS)
        for row in rows:
            writer.writerow(row.as_row())
        for setting in EXPERIMENT_SETTINGS:
            self.stdout.write(self.style.SUCCESS(
                f'{setting}\tmedian F {median_f(rows, setting):.4f}'))
        self.stdout.write(self.style.SUCCESS(
            f'adversarial\tmedian discriminator accuracy '
            f'{median_discriminator_accuracy(rows):.4f}'))
