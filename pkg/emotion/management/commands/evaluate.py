from emotion.evaluation import format_report
from emotion.pipeline import run_evaluate

from ._base import PipelineCommand


class Command(PipelineCommand):
    help = "Score model.json on the test split; writes report.csv and report.txt."

    def run(self, cfg, **options):
        self.stdout.write(format_report(run_evaluate(cfg)), ending="")
