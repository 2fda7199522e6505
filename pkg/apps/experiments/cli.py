import logging

from django.core.exceptions import ValidationError
from django.core.management.base import BaseCommand, CommandError

from apps.base.exceptions import LabError
from apps.base.utils import get_error_messages


class LabCommand(BaseCommand):
    """Shared switches and error reporting of the nlslab commands"""

    def add_arguments(self, parser):
        parser.add_argument(
            "--verbose",
            action="store_true",
            help="Log solver progress at DEBUG level",
        )

    def execute(self, *args, **options):
        if options.get("verbose"):
            logging.getLogger("apps").setLevel(logging.DEBUG)
        return super().execute(*args, **options)

    def fail(self, error: Exception, context: str = ""):
        """Re-raises a numerical or validation error as a CommandError"""
        message = "; ".join(get_error_messages(error))
        if context:
            message = f"{context}: {message}"
        code = getattr(error, "code", None)
        if code:
            message = f"{message} ({code})"
        raise CommandError(message) from error


LAB_ERRORS = (LabError, ValidationError)
