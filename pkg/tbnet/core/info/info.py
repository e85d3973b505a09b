from rich.console import Console
from rich.table import Table

from ...models.registry import build_model, param_count, summarize
from ...utils.formatting import format_count, format_shape


def run_info(args, config: dict, threads: int, console: Console):
    variant = " (simple bypass)" if args.bypass and args.arch == "squeezenet" else ""
    console.print(f"[bold cyan]🧱 Architecture: {args.arch}{variant}[/bold cyan]\n")

    model = build_model(args.arch, seed=0, simple_bypass=args.bypass)
    rows = summarize(model)

    height, width, channels = model.spec.input_shape
    table = Table(title=f"Layers at {height}×{width}×{channels} input", header_style="bold cyan")
    table.add_column("Layer", style="bold")
    table.add_column("Output shape", justify="right")
    table.add_column("Params", justify="right")
    for row in rows:
        table.add_row(row.name, format_shape(row.output_shape), format_count(row.params))
    total = param_count(model)
    table.add_row("[bold]Total[/bold]", "", f"[bold]{format_count(total)}[/bold]")
    console.print(table)

    console.print(f"\n[bold green]📦 {format_count(total)} trainable parameters[/bold green]")
