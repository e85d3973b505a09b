from pathlib import Path

from rich.console import Console
from rich.table import Table

from ...data.dataset import CLASS_NAMES, SPLITS, SplitCounts, scan_dataset, split_dataset, write_manifest
from ...utils.config import validate_config
from ...utils.files import check_output_path, ensure_output_path
from ...utils.hashing import hash_file


def _split_counts(args) -> SplitCounts:
    overrides = {
        "train_per_class": args.train_per_class,
        "val_fraction": args.val_fraction,
        "test_tb": args.test_tb,
        "test_normal": args.test_normal,
    }
    return validate_config(SplitCounts, **{k: v for k, v in overrides.items() if v is not None})


def run_split(args, config: dict, threads: int, console: Console):
    console.print("[bold cyan]🗂️  Splitting Dataset[/bold cyan]\n")

    counts = _split_counts(args)
    out = check_output_path(args.out, force=args.force)

    with console.status("[dim]Scanning images...[/dim]"):
        raw = scan_dataset(args.data_dir)
    console.print(f" 🔎 Found {len(raw.records)} decodable images in [u]{Path(args.data_dir)}[/u]")
    for skipped in raw.skipped:
        console.print(f" [yellow]⚠️ Skipped undecodable file:[/yellow] [dim]{skipped}[/dim]")

    manifest = split_dataset(raw, counts, seed=args.seed)
    write_manifest(manifest, ensure_output_path(out, force=args.force))

    table = Table(header_style="bold cyan")
    table.add_column("Split", style="bold")
    for label in CLASS_NAMES:
        table.add_column(label, justify="right")
    per_split = manifest.counts()
    for name in SPLITS:
        table.add_row(name, *(str(per_split[name][label]) for label in CLASS_NAMES))
    console.print(table)

    console.print(f"\n[bold green]✅ {manifest.summary()}[/bold green]")
    console.print(f" 💾 Saved manifest to: [u]{out}[/u] [dim](sha256 {hash_file(out)[:12]}, seed {args.seed})[/dim]")
