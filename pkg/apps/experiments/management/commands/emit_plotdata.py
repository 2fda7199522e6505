from apps.experiments.cli import LAB_ERRORS, LabCommand
from apps.experiments.plotdata import emit_plotdata


class Command(LabCommand):
    help = "Writes plot-ready columnar files for a finished run directory"

    def add_arguments(self, parser):
        super().add_arguments(parser)
        parser.add_argument("run_dir", help="Directory written by `run`")

    def handle(self, *args, **options):
        try:
            written = emit_plotdata(options["run_dir"])
        except LAB_ERRORS as e:
            self.fail(e, options["run_dir"])
        for path in written:
            self.stdout.write(path)
