from pathlib import Path

from rich.console import Console

from ...data.augment import AugmentConfig
from ...data.dataset import read_manifest
from ...hardware import describe_compute
from ...training.evaluate import evaluate
from ...training.metrics import confusion_table, metrics_table
from ...training.trainer import TrainConfig, check_trainable, train, write_history
from ...utils.config import validate_config
from ...utils.files import check_output_dir, ensure_output_dir
from ...utils.ui import make_progress

CHECKPOINT_NAME = "model.tbdl"
HISTORY_NAME = "history.csv"


def build_train_config(args, config: dict, threads: int, out_dir) -> TrainConfig:
    """CLI flags override the config file's training section."""
    values = dict(config.get("training", {}))
    overrides = {
        "arch": args.arch,
        "epochs": args.epochs,
        "batch_size": args.batch_size,
        "lr": args.lr,
        "optimizer": args.optimizer,
        "momentum": args.momentum,
        "patience": args.patience,
    }
    values.update({k: v for k, v in overrides.items() if v is not None})

    augmentation = validate_config(AugmentConfig, **{**config.get("augmentation", {}), "seed": args.seed})
    values.update(
        seed=args.seed,
        augment=not args.no_augment,
        augmentation=augmentation,
        simple_bypass=args.bypass,
        workers=threads,
        checkpoint_path=out_dir / CHECKPOINT_NAME,
    )
    return validate_config(TrainConfig, **values)


def run_train(args, config: dict, threads: int, console: Console):
    # everything is validated before the output directory is created
    cfg = build_train_config(args, config, threads, Path(args.out))
    check_output_dir(args.out, force=args.force)
    manifest = read_manifest(args.manifest)
    check_trainable(manifest)
    out_dir = ensure_output_dir(args.out, force=args.force)

    console.print(f"[bold cyan]🏋️  Training {cfg.arch}[/bold cyan] [dim]({cfg.optimizer}, lr {cfg.lr:g}, batch {cfg.batch_size}, {cfg.epochs} epochs, seed {cfg.seed})[/dim]")
    describe_compute(threads, console)
    console.print(f"[dim]   {manifest.summary()}[/dim]\n")

    with make_progress(console) as progress:
        task = progress.add_task(f"Epoch 1/{cfg.epochs}", total=None, status="")

        def on_batch(epoch, batch, n_batches, loss):
            progress.update(task, description=f"Epoch {epoch}/{cfg.epochs}", completed=batch, total=n_batches, status=f"loss {loss:.4f}")

        def on_epoch(record):
            progress.console.print(
                f" 📈 Epoch {record.epoch}: train loss {record.train_loss:.4f} acc {record.train_acc:.2%}"
                f" [dim]|[/dim] val loss {record.val_loss:.4f} acc {record.val_acc:.2%}"
            )

        result = train(cfg, manifest, on_batch=on_batch, on_epoch=on_epoch)

    history_path = write_history(result.history, out_dir / HISTORY_NAME)
    if result.stopped_early:
        console.print(f" [yellow]⏹️ Early stop after epoch {result.history[-1].epoch} (patience {cfg.patience})[/yellow]")

    report = evaluate(result.model, manifest, "val", batch_size=cfg.batch_size, workers=threads)
    console.print()
    console.print(metrics_table({f"{cfg.arch} (val, epoch {result.best_epoch})": report}))
    console.print(confusion_table(report.confusion))

    console.print("\n[bold green]✅ Training Complete![/bold green]")
    console.print(f" 💾 Checkpoint: [u]{cfg.checkpoint_path}[/u]")
    console.print(f" 📝 History: [u]{history_path}[/u]")
