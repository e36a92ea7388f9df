from emotion.pipeline import run_report_features

from ._base import PipelineCommand


class Command(PipelineCommand):
    help = "Print the top-ranked selected features with left-eye, right-eye and cross-eye counts."

    def add_arguments(self, parser):
        super().add_arguments(parser)
        parser.add_argument("--top", type=int, help="number of features to list (default: top_features)")

    def run(self, cfg, **options):
        self.stdout.write(run_report_features(cfg, options.get("top")), ending="")
