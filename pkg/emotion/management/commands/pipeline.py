from emotion.evaluation import format_report
from emotion.pipeline import run_all

from ._base import PipelineCommand


class Command(PipelineCommand):
    help = "Run synth, preprocess, featurize, select, train, evaluate and report_features in sequence."

    def run(self, cfg, **options):
        report, top_features = run_all(cfg)
        self.stdout.write(format_report(report))
        self.stdout.write(top_features, ending="")
