"""
Base class for the segmenter commands: domain errors become exit codes.
"""
import sys

from django.core.management.base import BaseCommand, CommandError

from core.exceptions import ConfigError, DataError, NumericError

USAGE_ERROR = 1
DATA_ERROR = 2
NUMERIC_ERROR = 3


def _usage_error(parser, message):
    """Bad arguments exit with USAGE_ERROR rather than argparse's 2."""
    if parser.called_from_command_line:
        parser.print_usage(sys.stderr)
        parser.exit(USAGE_ERROR, f'{parser.prog}: error: {message}\n')
    raise CommandError(f'Error: {message}', returncode=USAGE_ERROR)


class SegmenterCommand(BaseCommand):
    """Run ``handle`` and translate failures into ``CommandError``."""

    def create_parser(self, prog_name, subcommand, **kwargs):
        parser = super().create_parser(prog_name, subcommand, **kwargs)
        parser.error = lambda message: _usage_error(parser, message)
        return parser

    def execute(self, *args, **options):
        try:
            return super().execute(*args, **options)
        except CommandError:
            raise
        except ConfigError as exc:
            raise CommandError(f'configuration error: {exc}',
                               returncode=USAGE_ERROR) from exc
        except NumericError as exc:
            raise CommandError(f'numeric failure: {exc}',
                               returncode=NUMERIC_ERROR) from exc
        except (DataError, OSError) as exc:
            raise CommandError(f'data error: {exc}',
                               returncode=DATA_ERROR) from exc
