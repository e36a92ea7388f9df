from emotion.pipeline import run_train

from ._base import PipelineCommand


class Command(PipelineCommand):
    help = (
        "Grid-search and fit the boosting classifier on the selected features, plus the two-feature "
        "baseline; writes model.json, baseline_model.json and grid.csv."
    )

    def run(self, cfg, **options):
        summary = run_train(cfg)
        for cell in summary.search.table:
            self.stdout.write(f"{cell.params}: stage {cell.best_stage}, score {cell.score:.4f}")
        best = summary.search.best
        self.stdout.write(
            f"best: learning_rate={best.learning_rate} max_depth={best.max_depth}, "
            f"{len(summary.model.stages)} stages"
        )
