"""
Binary classification metrics (positive class = TB) and their rendering.

Undefined ratios (zero denominators) are reported as 0 together with an explicit
flag so reports stay machine-comparable.
"""
from typing import Dict, Iterable, Optional

from pydantic import BaseModel, ConfigDict, Field, NonNegativeInt
from rich.table import Table

from ..errors import ContractError
from ..utils.formatting import format_percent

POSITIVE = 1


class ConfusionMatrix(BaseModel):
    model_config = ConfigDict(frozen=True)

    tp: NonNegativeInt = 0
    fn: NonNegativeInt = 0
    fp: NonNegativeInt = 0
    tn: NonNegativeInt = 0

    @property
    def total(self) -> int:
        return self.tp + self.fn + self.fp + self.tn

    def __add__(self, other: "ConfusionMatrix") -> "ConfusionMatrix":
        return ConfusionMatrix(tp=self.tp + other.tp, fn=self.fn + other.fn, fp=self.fp + other.fp, tn=self.tn + other.tn)

    @classmethod
    def from_predictions(cls, predictions: Iterable[int], labels: Iterable[int]) -> "ConfusionMatrix":
        tp = fn = fp = tn = 0
        for pred, label in zip(predictions, labels):
            if label == POSITIVE:
                if pred == POSITIVE:
                    tp += 1
                else:
                    fn += 1
            elif pred == POSITIVE:
                fp += 1
            else:
                tn += 1
        return cls(tp=tp, fn=fn, fp=fp, tn=tn)


class Metrics(BaseModel):
    accuracy: float = Field(ge=0, le=1)
    precision: float = Field(ge=0, le=1)
    recall: float = Field(ge=0, le=1)
    f1: float = Field(ge=0, le=1)
    undefined: Dict[str, bool]


class EvalReport(BaseModel):
    arch: Optional[str] = None
    split: Optional[str] = None
    samples: NonNegativeInt
    confusion: ConfusionMatrix
    accuracy: float = Field(ge=0, le=1)
    precision: float = Field(ge=0, le=1)
    recall: float = Field(ge=0, le=1)
    f1: float = Field(ge=0, le=1)
    mean_loss: float = Field(ge=0)
    undefined: Dict[str, bool]

    @classmethod
    def build(cls, cm: ConfusionMatrix, mean_loss: float, arch: Optional[str] = None, split: Optional[str] = None) -> "EvalReport":
        metrics = metrics_from_cm(cm)
        return cls(arch=arch, split=split, samples=cm.total, confusion=cm, mean_loss=mean_loss, **metrics.model_dump())


def _ratio(numerator: int, denominator: int):
    if denominator == 0:
        return 0.0, True
    return numerator / denominator, False


def metrics_from_cm(cm: ConfusionMatrix) -> Metrics:
    if cm.total == 0:
        raise ContractError("Cannot compute metrics from an empty confusion matrix")

    accuracy = (cm.tp + cm.tn) / cm.total
    precision, precision_undefined = _ratio(cm.tp, cm.tp + cm.fp)
    recall, recall_undefined = _ratio(cm.tp, cm.tp + cm.fn)
    if precision + recall == 0:
        f1, f1_undefined = 0.0, True
    else:
        f1, f1_undefined = 2 * precision * recall / (precision + recall), False

    return Metrics(
        accuracy=accuracy,
        precision=precision,
        recall=recall,
        f1=f1,
        undefined={"precision": precision_undefined, "recall": recall_undefined, "f1": f1_undefined},
    )


# ================= RENDERING =================

def metrics_table(reports: Dict[str, EvalReport]) -> Table:
    """Rows F1 Score, Accuracy, Loss, Precision, Recall; one column per model. Loss is cross-entropy x 100."""
    table = Table(title="Resulting metrics", header_style="bold cyan")
    table.add_column("Metrics", style="bold")
    for name in reports:
        table.add_column(name, justify="right")

    rows = [
        ("F1 Score", lambda r: format_percent(r.f1) + (" [dim](undef.)[/dim]" if r.undefined.get("f1") else "")),
        ("Accuracy", lambda r: format_percent(r.accuracy)),
        ("Loss", lambda r: format_percent(r.mean_loss)),
        ("Precision", lambda r: format_percent(r.precision) + (" [dim](undef.)[/dim]" if r.undefined.get("precision") else "")),
        ("Recall", lambda r: format_percent(r.recall) + (" [dim](undef.)[/dim]" if r.undefined.get("recall") else "")),
    ]
    for label, render in rows:
        table.add_row(label, *(render(report) for report in reports.values()))
    return table


def confusion_table(cm: ConfusionMatrix, title: str = "Confusion matrix") -> Table:
    table = Table(title=title, header_style="bold cyan")
    table.add_column("Actual \\ Predicted", style="bold")
    table.add_column("TB", justify="right")
    table.add_column("Normal", justify="right")
    table.add_row("TB", f"[green]{cm.tp}[/green]", f"[red]{cm.fn}[/red]")
    table.add_row("Normal", f"[red]{cm.fp}[/red]", f"[green]{cm.tn}[/green]")
    return table
