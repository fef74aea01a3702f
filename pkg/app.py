import os
import sys
import logging
import argparse

import platformdirs

import pluginmanager
from app_info import APP_NAME, AUTHOR
from errors import ConfigError, RecLabError
from experiments import ExperimentConfig, run_experiment

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_UNEXPECTED = 1
EXIT_RECLAB_ERROR = 2


class App:

    def __init__(self, argv: list[str] | None = None):
        self.args = App.build_parser().parse_args(argv)
        self.__initialize_logging(self.args.verbose)
        self.__initialize_plugins(self.args.builtin_only)

    @staticmethod
    def __initialize_logging(verbose: bool):
        logging.basicConfig(level=logging.DEBUG if verbose else logging.INFO,
                            format="%(asctime)s %(levelname)s %(name)s: %(message)s")

    @staticmethod
    def __initialize_plugins(builtin_only: bool):
        data_dir = platformdirs.user_data_dir(APP_NAME, AUTHOR)
        os.makedirs(os.path.join(data_dir, "plugins"), exist_ok=True)
        pluginmanager.use_builtin_plugins_only(builtin_only)

    @staticmethod
    def build_parser() -> argparse.ArgumentParser:
        parser = argparse.ArgumentParser(prog=APP_NAME,
                                         description="Hitting-time and extreme-value experiments for "
                                                     "suspension flows and their base maps.")
        parser.add_argument("--verbose", action="store_true", help="Log per-block progress.")
        parser.add_argument("--builtin-only", action="store_true",
                            help="Ignore plugins in the user data directory.")
        commands = parser.add_subparsers(dest="command", required=True)

        run = commands.add_parser("run", help="Run one experiment config.")
        run.add_argument("--config", required=True, help="Path to a JSON experiment config.")
        run.add_argument("--workers", type=int, default=None, help="Worker processes, overriding the config.")
        run.add_argument("--out", default=None, help="Output directory, overriding the config.")

        commands.add_parser("list-systems", help="List the available base systems.")

        validate = commands.add_parser("validate", help="Check an experiment config without running it.")
        validate.add_argument("--config", required=True, help="Path to a JSON experiment config.")
        return parser

    def start(self) -> int:
        """
        Runs the selected command.

        Returns:
            int: The process exit status. 0 on completion (a failed acceptance check is data, not an
            error), 2 on a RecLabError, 1 on anything unexpected.
        """
        try:
            if self.args.command == "run":
                return self.run()
            if self.args.command == "validate":
                return self.validate()
            return self.list_systems()
        except RecLabError as e:
            logger.error("%s: %s", type(e).__name__, e)
            return EXIT_RECLAB_ERROR
        except Exception:
            logger.exception("Unexpected error")
            return EXIT_UNEXPECTED

    def run(self) -> int:
        if self.args.workers is not None and self.args.workers < 1:
            raise ConfigError("--workers must be at least 1.")
        config = ExperimentConfig.load(self.args.config)
        run_experiment(config, out_dir=self.args.out, workers=self.args.workers)
        return EXIT_OK

    def validate(self) -> int:
        config = ExperimentConfig.load(self.args.config)
        pluginmanager.create_system(config.system, config["params"])
        print(f"{self.args.config}: valid {config.experiment} config '{config.name}' on {config.system}")
        return EXIT_OK

    @staticmethod
    def list_systems() -> int:
        plugins = pluginmanager.get_plugins_info()
        if not plugins:
            print("No valid system plugins found.")
        for info in sorted(plugins, key=lambda p: p["system"]):
            params = ", ".join(f"{key}={value}" for key, value in info["parameters"].items())
            print(f"{info['system']:<10} v{info['version']:<8} {info['name']} ({params or 'no parameters'})")
        return EXIT_OK


def main(argv: list[str] | None = None) -> int:
    return App(argv).start()


if __name__ == "__main__":
    sys.exit(main())
