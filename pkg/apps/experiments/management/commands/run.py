from django.core.management.base import CommandError

from apps.experiments.cli import LAB_ERRORS, LabCommand
from apps.experiments.config import load_config
from apps.experiments.runner import run


class Command(LabCommand):
    help = (
        "Runs the experiment described by a JSON config and writes its "
        "tables, summary and manifest. Exits with status 1 if any check "
        "fails."
    )

    def add_arguments(self, parser):
        super().add_arguments(parser)
        parser.add_argument("config", help="Path of the JSON config")
        parser.add_argument(
            "--output-dir",
            help="Run directory, overrides output_dir of the config",
        )
        parser.add_argument(
            "--threads",
            type=int,
            help="Worker threads for sweeps (default NLSLAB_THREADS)",
        )

    def handle(self, *args, **options):
        try:
            config = load_config(options["config"])
        except LAB_ERRORS as e:
            self.fail(e, options["config"])
        if options["output_dir"]:
            config = config._replace(output_dir=options["output_dir"])

        try:
            result = run(config, threads=options["threads"])
        except LAB_ERRORS as e:
            self.fail(e, config.experiment)

        for check in result.checks:
            self.stdout.write(check.line)
        failed = len(result.failures)
        if failed:
            raise CommandError(
                f"{config.experiment}: {failed} of {len(result.checks)} "
                f"checks failed, see {result.run_dir}",
                returncode=1,
            )
        self.stdout.write(
            self.style.SUCCESS(
                f"{config.experiment}: all {len(result.checks)} checks "
                f"passed, artifacts in {result.run_dir}"
            )
        )
