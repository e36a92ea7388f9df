from emotion.pipeline import run_synth

from ._base import PipelineCommand


class Command(PipelineCommand):
    help = "Write one seeded synthetic session per emotion to <workdir>/<raw_dir>/session_<label>.csv."

    def run(self, cfg, **options):
        for path in run_synth(cfg):
            self.stdout.write(str(path))
