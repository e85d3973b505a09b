import logging
import sys

from pydantic import ValidationError
from rich.console import Console
from rich.logging import RichHandler

from . import __version__
from .core.evaluate.evaluate import run_evaluate
from .core.info.info import run_info
from .core.predict.predict import run_predict
from .core.split.split import run_split
from .core.synth.synth import run_synth
from .core.train.train import run_train
from .errors import TbnetError, UsageError
from .hardware import resolve_threads
from .utils.args import parse_arguments
from .utils.config import persist_config, read_config

console = Console()

COMMANDS = {
    "split": run_split,
    "train": run_train,
    "eval": run_evaluate,
    "predict": run_predict,
    "info": run_info,
    "synth": run_synth,
}

EXIT_OK = 0
EXIT_USAGE = UsageError.exit_code
EXIT_RUNTIME = TbnetError.exit_code
EXIT_INTERRUPTED = 130


def _setup_logging(verbose: bool) -> None:
    logging.basicConfig(
        level=logging.DEBUG if verbose else logging.WARNING,
        format="%(message)s",
        handlers=[RichHandler(console=Console(stderr=True), show_path=False)],
        force=True,
    )
    logging.getLogger("PIL").setLevel(logging.ERROR)


def main(argv=None) -> int:
    try:
        args = parse_arguments(argv)
    except SystemExit as e:
        # --help and --version
        return int(e.code or 0)
    except UsageError as e:
        console.print(f"[bold red]❌ {e}[/bold red]")
        return EXIT_USAGE

    _setup_logging(args.verbose)

    try:
        console.print(f"[bold blue]🩻 tbnet {__version__}[/bold blue]\n")
        config, stale = read_config()
        threads = resolve_threads(args.threads, config)
        COMMANDS[args.command](args, config, threads, console)
        # only a command that ran to completion writes the config file
        if stale:
            persist_config(config)
        return EXIT_OK

    except KeyboardInterrupt:
        console.print("\n[bold red]✖  Aborted by user.[/bold red]")
        return EXIT_INTERRUPTED

    except TbnetError as e:
        console.print(f"\n[bold red]❌ {type(e).__name__}:[/bold red] {e}")
        return e.exit_code

    except ValidationError as e:
        console.print(f"\n[bold red]❌ Invalid configuration:[/bold red] {e}")
        return EXIT_USAGE

    except Exception as e:
        logging.getLogger(__name__).debug("Unhandled error", exc_info=True)
        console.print(f"\n[bold red]💥 An unexpected error occurred:[/bold red] {e}")
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
