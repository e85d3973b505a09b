import json
from pathlib import Path
from typing import Dict, List

from rich.console import Console

from ...data.dataset import read_manifest
from ...errors import UsageError
from ...hardware import describe_compute
from ...training.checkpoint import load_checkpoint
from ...training.evaluate import evaluate
from ...training.metrics import EvalReport, confusion_table, metrics_table
from ...utils.files import check_output_path, ensure_output_path


def write_report(reports: List[EvalReport], path) -> None:
    """A single report is written as one JSON object; several as a list in command-line order."""
    if len(reports) == 1:
        text = reports[0].model_dump_json(indent=2)
    else:
        text = json.dumps([report.model_dump(mode="json") for report in reports], indent=2)
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write(text + "\n")


def column_names(paths: List[str], architectures: List[str]) -> List[str]:
    """Architecture alone for one model; with the run directory when comparing."""
    if len(paths) == 1:
        return list(architectures)
    names = []
    for path, arch in zip(paths, architectures):
        name = f"{arch} ({Path(path).parent.name or Path(path).stem})"
        if name in names:
            name = f"{name} #{names.count(name) + 1}"
        names.append(name)
    return names


def run_evaluate(args, config: dict, threads: int, console: Console):
    if args.batch_size < 1:
        raise UsageError(f"--batch-size must be >= 1, got {args.batch_size}")
    report_path = check_output_path(args.report, force=args.force) if args.report else None

    manifest = read_manifest(args.manifest)
    models = [load_checkpoint(path, expected_arch=args.arch) for path in args.model]
    names = column_names(args.model, [model.architecture for model in models])

    subject = models[0].architecture if len(models) == 1 else f"{len(models)} models"
    console.print(f"[bold cyan]📊 Evaluating {subject} on the {args.split} split[/bold cyan]")
    describe_compute(threads, console)
    console.print()

    reports: Dict[str, EvalReport] = {}
    for name, model in zip(names, models):
        with console.status(f"[dim]Scoring {len(manifest.split(args.split))} images with {name}...[/dim]"):
            reports[name] = evaluate(model, manifest, args.split, batch_size=args.batch_size, workers=threads)

    console.print(metrics_table(reports))
    for name, report in reports.items():
        title = "Confusion matrix" if len(reports) == 1 else f"Confusion matrix: {name}"
        console.print(confusion_table(report.confusion, title=title))

    if report_path is not None:
        write_report(list(reports.values()), ensure_output_path(report_path, force=args.force))
        console.print(f"\n 💾 Saved report to: [u]{report_path}[/u]")
