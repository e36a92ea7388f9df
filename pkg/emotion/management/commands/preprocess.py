from emotion.pipeline import run_preprocess

from ._base import PipelineCommand


class Command(PipelineCommand):
    help = "Drop blink and one-eye-closed samples from every raw recording and write clean series plus a manifest."

    def add_arguments(self, parser):
        super().add_arguments(parser)
        parser.add_argument(
            "--report", action="store_true",
            help="print '<source_name>,<kept>,<dropped>' for every file",
        )

    def run(self, cfg, **options):
        cleaned = run_preprocess(cfg)
        if options["report"]:
            for series in cleaned:
                self.stdout.write(series.report_line())
        else:
            self.stdout.write(f"cleaned {len(cleaned)} recordings into {cfg.path(cfg.clean_dir)}")
