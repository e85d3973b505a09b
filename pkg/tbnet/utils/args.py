import argparse

from .. import __version__
from ..errors import UsageError
from ..models.model import ARCHITECTURES


def non_negative_int(value: str) -> int:
    try:
        number = int(value)
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid int value: '{value}'")
    if number < 0:
        raise argparse.ArgumentTypeError(f"must be a non-negative integer, got {number}")
    return number


class ArgumentParser(argparse.ArgumentParser):
    """argparse that reports usage problems as exit code 1 instead of 2."""

    def error(self, message):
        self.print_usage()
        raise UsageError(f"{self.prog}: {message}")


def build_parser() -> ArgumentParser:
    parser = ArgumentParser(prog="tbnet", description="TB chest X-ray classification with SqueezeNet and ResNet-50")

    parser.add_argument(
        "-V", "--version",
        action="version",
        version=f"%(prog)s {__version__}",
        help="Show program's version number and exit."
    )
    parser.add_argument(
        "--threads",
        type=int,
        default=None,
        help="Worker threads for decoding and evaluation (default: $TBNET_THREADS, then the config file, then 1)."
    )
    parser.add_argument(
        "--verbose",
        action="store_true",
        default=False,
        help="Show debug logging."
    )

    sub = parser.add_subparsers(dest="command", metavar="COMMAND", parser_class=ArgumentParser)
    sub.required = True

    # split
    p = sub.add_parser("split", help="Scan a TB/ Normal/ dataset and write a split manifest.")
    p.add_argument("--data-dir", required=True, help="Dataset root holding TB/ and Normal/ directories.")
    p.add_argument("--out", required=True, help="Manifest CSV to write.")
    p.add_argument("--seed", type=non_negative_int, default=0, help="Split seed.")
    p.add_argument("--train-per-class", type=int, default=None, help="Images per class in the train+val pool (default 600).")
    p.add_argument("--val-fraction", type=float, default=None, help="Share of the pool held out for validation (default 0.2).")
    p.add_argument("--test-tb", type=int, default=None, help="TB test images (default 100).")
    p.add_argument("--test-normal", type=int, default=None, help="Normal test images (default 101).")
    p.add_argument("--force", action="store_true", default=False, help="Overwrite an existing manifest.")

    # train
    p = sub.add_parser("train", help="Train a model on a manifest's train split.")
    p.add_argument("--arch", choices=ARCHITECTURES, default=None, help="Architecture to train.")
    p.add_argument("--manifest", required=True, help="Manifest CSV produced by 'split'.")
    p.add_argument("--epochs", type=int, default=None, help="Number of epochs (default 20).")
    p.add_argument("--batch-size", type=int, default=None, help="Mini-batch size (default 32).")
    p.add_argument("--lr", type=float, default=None, help="Learning rate (default 1e-3).")
    p.add_argument("--optimizer", choices=("sgd", "adam"), default=None, help="Optimizer (default adam).")
    p.add_argument("--momentum", type=float, default=None, help="SGD momentum (default 0.9).")
    p.add_argument("--patience", type=int, default=None, help="Stop after this many epochs without validation improvement.")
    p.add_argument("--seed", type=non_negative_int, default=0, help="Seed for initialisation, shuffling and augmentation.")
    p.add_argument("--no-augment", action="store_true", default=False, help="Disable training-time augmentation.")
    p.add_argument("--bypass", action="store_true", default=False, help="SqueezeNet with simple bypass connections.")
    p.add_argument("--out", required=True, help="Output directory for model.tbdl and history.csv.")
    p.add_argument("--force", action="store_true", default=False, help="Overwrite existing outputs.")

    # eval
    p = sub.add_parser("eval", help="Evaluate one or more checkpoints on a manifest split.")
    p.add_argument("--model", required=True, action="append", help="Checkpoint file; repeat to compare models side by side.")
    p.add_argument("--manifest", required=True, help="Manifest CSV.")
    p.add_argument("--split", choices=("train", "val", "test"), default="test", help="Split to evaluate.")
    p.add_argument("--report", default=None, help="Write the JSON report here.")
    p.add_argument("--arch", choices=ARCHITECTURES, default=None, help="Fail unless the checkpoint holds this architecture.")
    p.add_argument("--batch-size", type=int, default=32, help="Evaluation batch size.")
    p.add_argument("--force", action="store_true", default=False, help="Overwrite an existing report.")

    # predict
    p = sub.add_parser("predict", help="Classify a single image.")
    p.add_argument("--model", required=True, help="Checkpoint file.")
    p.add_argument("--image", required=True, help="PNG or JPEG image.")

    # info
    p = sub.add_parser("info", help="Show an architecture's layers and parameter counts.")
    p.add_argument("--arch", choices=ARCHITECTURES, required=True, help="Architecture to describe.")
    p.add_argument("--bypass", action="store_true", default=False, help="SqueezeNet with simple bypass connections.")

    # synth
    p = sub.add_parser("synth", help="Generate a synthetic two-class dataset (blob vs noise).")
    p.add_argument("--out", required=True, help="Dataset root to create.")
    p.add_argument("--per-class", type=int, default=250, help="Images per class.")
    p.add_argument("--size", type=int, default=64, help="Image side length in pixels.")
    p.add_argument("--seed", type=non_negative_int, default=0, help="Generator seed.")
    p.add_argument("--force", action="store_true", default=False, help="Write into an existing directory.")

    return parser


def parse_arguments(argv=None):
    return build_parser().parse_args(argv)
