import functools
import sys
from typing import Callable

import hydra
from omegaconf import DictConfig
from omegaconf.errors import OmegaConfBaseException

from mictrans.error import ConfigError, DataError
from mictrans.logging import CLI_LOG
from mictrans.macro import EXIT_CONFIG, EXIT_DATA


def command(task_fn: Callable[[DictConfig], None]) -> Callable[[], None]:
    """Hydra entry point whose exit code tells config errors (2) from data errors (3).

    Hydra itself exits with 1 when the command line cannot be composed into a config
    (e.g. an unknown override); that happens before the task starts and counts as a
    config error.
    """
    started = False

    def task(cfg: DictConfig) -> None:
        nonlocal started
        started = True
        try:
            task_fn(cfg)
        except (ConfigError, OmegaConfBaseException) as e:
            CLI_LOG.error(f"{type(e).__name__}: {e}")
            sys.exit(EXIT_CONFIG)
        except DataError as e:
            CLI_LOG.error(f"{type(e).__name__}: {e}")
            sys.exit(EXIT_DATA)

    # hydra resolves `config_path` against the module the task is defined in.
    task.__module__ = task_fn.__module__
    task.__qualname__ = task_fn.__qualname__
    hydra_main = hydra.main(version_base=None, config_path="../config", config_name="main")(
        task
    )

    @functools.wraps(task_fn)
    def main() -> None:
        try:
            hydra_main()
        except SystemExit as e:
            if e.code == 1 and not started:
                sys.exit(EXIT_CONFIG)
            raise

    return main
