from rich.console import Console

from ...data.dataset import CLASS_NAMES, TB
from ...training.checkpoint import load_checkpoint
from ...training.evaluate import predict_image


def run_predict(args, config: dict, threads: int, console: Console):
    model = load_checkpoint(args.model)
    label, probabilities = predict_image(model, args.image)

    colour = "red" if label == TB else "green"
    console.print(f"[bold {colour}]{label}[/bold {colour}]")
    for name in CLASS_NAMES:
        console.print(f"  {name}: {probabilities[name]:.6f}")
