from emotion.pipeline import FEATURES_FILE, run_featurize

from ._base import PipelineCommand


class Command(PipelineCommand):
    help = "Window the clean series and write the feature matrix to <workdir>/features.csv."

    def run(self, cfg, **options):
        fm = run_featurize(cfg)
        self.stdout.write(f"{len(fm)} windows x {len(fm.catalog)} features -> {cfg.path(FEATURES_FILE)}")
