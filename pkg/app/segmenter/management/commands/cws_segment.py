"""
Django command to segment raw text with a trained checkpoint.
"""
import time

from django.core.management.base import CommandError

from corpus.data import load_char_mapping, normalize_chars, read_raw_lines
from segmenter.checkpoint import load_checkpoint
from segmenter.management.base import USAGE_ERROR, SegmenterCommand
from segmenter.multitask import segment


class Command(SegmenterCommand):
    """Write one space-separated line of words per input line."""
    help = 'Segment a raw UTF-8 file, one sentence per line.'

    def add_arguments(self, parser):
        parser.add_argument('checkpoint')
        parser.add_argument('criterion', help='criterion name')
        parser.add_argument('input', help='raw text file')
        parser.add_argument('output', help='segmented output file')
        parser.add_argument('--mapping',
                            help='character normalization table')

    def handle(self, *args, **options):
        """Entrypoint for command."""
        model = load_checkpoint(options['checkpoint'])
        criterion = options['criterion']
        if criterion not in model.criteria:
            raise CommandError(
                f'unknown criterion {criterion!r}; available: '
                f'{", ".join(model.criteria)}', returncode=USAGE_ERROR)
        mapping = (load_char_mapping(options['mapping'])
                   if options['mapping'] else None)

        lines = read_raw_lines(options['input'])
        start = time.perf_counter()
        with open(options['output'], 'w', encoding='utf-8',
                  newline='\n') as handle:
            for text in lines:
                # mapped characters feed the model, originals are written
                mapped = normalize_chars(text, mapping)
                words, offset = [], 0
                for word in segment(model, mapped, criterion):
                    words.append(text[offset:offset + len(word)])
                    offset += len(word)
                handle.write(' '.join(words) + '\n')
        elapsed = time.perf_counter() - start
        rate = len(lines) / elapsed if elapsed > 0 else float('inf')
        self.stdout.write(self.style.SUCCESS(
            f'Segmented {len(lines)} sentences ({rate:.2f} sentences/sec).'))
