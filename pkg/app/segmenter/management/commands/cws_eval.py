"""
Django command to score a checkpoint on a segmented corpus.
"""
from django.core.management.base import CommandError

from corpus import metrics
from corpus.data import load_char_mapping, normalize_chars, \
    read_segmented_corpus
from segmenter.checkpoint import load_checkpoint, read_meta
from segmenter.management.base import USAGE_ERROR, SegmenterCommand
from segmenter.multitask import predict_spans


class Command(SegmenterCommand):
    """Print precision, recall, F and OOV recall of one criterion head."""
    help = 'Evaluate a criterion head of a checkpoint; prints P R F OOV.'

    def add_arguments(self, parser):
        parser.add_argument('checkpoint')
        parser.add_argument('corpus', help='gold segmented corpus file')
        parser.add_argument('criterion', help='criterion name')
        parser.add_argument('--lexicon',
                            help='criterion whose training words define OOV '
                                 '(default: the evaluated criterion)')
        parser.add_argument('--mapping',
                            help='character normalization table')
        parser.add_argument('--per-sentence', metavar='PATH',
                            help='write per-sentence F to PATH')

    def handle(self, *args, **options):
        """Entrypoint for command."""
        model = load_checkpoint(options['checkpoint'])
        criterion = options['criterion']
        if criterion not in model.criteria:
            raise CommandError(
                f'unknown criterion {criterion!r}; available: '
                f'{", ".join(model.criteria)}', returncode=USAGE_ERROR)
        lexicons = read_meta(options['checkpoint']).get('lexicons', {})
        words = frozenset(lexicons.get(options['lexicon'] or criterion, ()))

        gold = read_segmented_corpus(options['corpus'])
        if options['mapping']:
            mapping = load_char_mapping(options['mapping'])
            gold = [normalize_chars(s, mapping) for s in gold]
        predicted = predict_spans(model, gold, criterion)
        metrics.write_score_report(
            self.stdout, [metrics.score(gold, predicted, words)])
        if options['per_sentence']:
            metrics.write_per_sentence_f(
                options['per_sentence'],
                metrics.per_sentence_f(gold, predicted))
