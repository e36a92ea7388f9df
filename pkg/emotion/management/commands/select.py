from emotion.pipeline import run_select

from ._base import PipelineCommand


class Command(PipelineCommand):
    help = "Rank features by mRMR on the training split and write <workdir>/selection.csv."

    def run(self, cfg, **options):
        result = run_select(cfg)
        self.stdout.write(f"{'rank':>4}  {'feature':<16}{'relevance':>11}{'redundancy':>12}{'objective':>11}")
        for rank, (name, score) in enumerate(zip(result.selected_names, result.scores), start=1):
            self.stdout.write(
                f"{rank:>4}  {name:<16}{score.relevance_bits:>11.4f}{score.redundancy_bits:>12.4f}{score.objective:>11.4f}"
            )
