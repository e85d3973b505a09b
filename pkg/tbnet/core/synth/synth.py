from pathlib import Path

from rich.console import Console

from ...data.synthetic import write_synthetic_dataset
from ...errors import UsageError
from ...utils.files import ensure_output_dir


def run_synth(args, config: dict, threads: int, console: Console):
    console.print("[bold cyan]🧪 Generating Synthetic Dataset[/bold cyan]\n")

    if args.per_class < 1:
        raise UsageError(f"--per-class must be >= 1, got {args.per_class}")
    if args.size < 8:
        raise UsageError(f"--size must be >= 8, got {args.size}")
    root = ensure_output_dir(args.out, force=args.force)

    with console.status(f"[dim]Writing {2 * args.per_class} images...[/dim]"):
        write_synthetic_dataset(root, args.per_class, seed=args.seed, size=args.size)

    console.print(f"[bold green]✅ Wrote {args.per_class} TB and {args.per_class} Normal images[/bold green]")
    console.print(f" 📁 Dataset root: [u]{Path(root)}[/u]")
