"""
Django command to write synthetic multi-criteria corpora.
"""
from pathlib import Path

from core.exceptions import ConfigError
from corpus.data import write_segmented_corpus
from corpus.synthetic import RULES, disagreement_rate, \
    generate_synthetic_corpora
from segmenter.management.base import SegmenterCommand


class Command(SegmenterCommand):
    """Materialize one corpus per rule as RULE.train.txt / RULE.test.txt."""
    help = 'Generate synthetic corpora that disagree on digit segmentation.'

    def add_arguments(self, parser):
        parser.add_argument('output_dir')
        parser.add_argument('--seed', type=int, default=1)
        parser.add_argument('--train-size', type=int, default=2000)
        parser.add_argument('--test-size', type=int, default=400)
        parser.add_argument('--alphabet-size', type=int, default=20)
        parser.add_argument('--rules', nargs='+',
                            default=['joined_digits', 'split_digits'],
                            choices=sorted(RULES))

    def handle(self, *args, **options):
        """Entrypoint for command."""
        for key in ('train_size', 'test_size', 'alphabet_size'):
            if options[key] < 1:
                raise ConfigError(f'--{key.replace("_", "-")} must be '
                                  f'positive')
        try:
            corpora = generate_synthetic_corpora(
                options['alphabet_size'], options['train_size'],
                options['rules'], seed=options['seed'],
                n_test=options['test_size'])
        except ValueError as exc:
            raise ConfigError(str(exc)) from None

        output_dir = Path(options['output_dir'])
        output_dir.mkdir(parents=True, exist_ok=True)
        for corpus in corpora:
            train = corpus.train + corpus.dev
            write_segmented_corpus(output_dir / f'{corpus.name}.train.txt',
                                   train)
            write_segmented_corpus(output_dir / f'{corpus.name}.test.txt',
                                   corpus.test)
            self.stdout.write(f'{corpus.name}: {len(train)} train, '
                              f'{len(corpus.test)} test sentences')
        first = corpora[0]
        for other in corpora[1:]:
            rate = disagreement_rate(first, other)
            self.stdout.write(f'{first.name} vs {other.name}: '
                              f'{rate:.1%} of sentences disagree')
        self.stdout.write(self.style.SUCCESS(
            f'Synthetic corpora written to {output_dir}.'))
