import logging

from django.core.management.base import BaseCommand, CommandError

from emotion import __version__
from emotion.config import load_run_config, parse_overrides
from emotion.exceptions import EXIT_CODES, PipelineError
from emotion.gbm import MODEL_FORMAT, MODEL_FORMAT_VERSION
from emotion.pipeline import workdir_lock

VERBOSITY_LEVELS = {0: logging.WARNING, 1: logging.INFO}

EXIT_CODE_HELP = "exit codes: " + "; ".join(f"{code} {meaning}" for code, meaning in sorted(EXIT_CODES.items()))


class PipelineCommand(BaseCommand):
    """
    Shared surface of the stage commands: config loading, the work-directory
    lock, verbosity and the mapping of pipeline errors onto exit codes.
    Subclasses implement ``run(cfg, **options)``.
    """

    def get_version(self):
        return f"{__version__} (model format {MODEL_FORMAT} v{MODEL_FORMAT_VERSION})"

    def create_parser(self, prog_name, subcommand, **kwargs):
        kwargs.setdefault("epilog", EXIT_CODE_HELP)
        parser = super().create_parser(prog_name, subcommand, **kwargs)
        # without --verbosity the level from settings.LOGGING stands
        parser.set_defaults(verbosity=None)
        return parser

    def add_arguments(self, parser):
        parser.add_argument("--config", help="run-config file (key = value lines)")
        parser.add_argument("--workdir", help="directory holding every stage's files")
        parser.add_argument("--seed", type=int, help="root seed; every stage seed derives from it")
        parser.add_argument(
            "--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE",
            help="override one config key; repeatable",
        )

    def handle(self, *args, **options):
        verbosity = options.get("verbosity")
        if verbosity is not None:
            logging.getLogger("emotion").setLevel(VERBOSITY_LEVELS.get(verbosity, logging.DEBUG))

        try:
            overrides = parse_overrides(options.get("overrides"))
            if options.get("seed") is not None:
                overrides["seed"] = str(options["seed"])
            if options.get("workdir"):
                overrides["workdir"] = options["workdir"]
            cfg = load_run_config(options.get("config"), overrides)
            with workdir_lock(cfg.workdir):
                self.run(cfg, **options)
        except PipelineError as exc:
            raise CommandError(f"[{exc.code}] {exc}", returncode=exc.exit_code) from exc

    def run(self, cfg, **options):
        raise NotImplementedError("subclasses of PipelineCommand must provide a run() method")
