"""
Exception hierarchy for tbnet.

Every error carries the exit code the CLI reports for it:
0 success, 1 usage error, 2 data error, 3 runtime error.
"""


class TbnetError(Exception):
    exit_code = 3


# ================= USAGE =================

class UsageError(TbnetError):
    exit_code = 1


class ConfigError(UsageError):
    pass


class OutputExistsError(UsageError):
    pass


# ================= ENGINE =================

class EngineError(TbnetError, ValueError):
    exit_code = 3


class ShapeError(EngineError):
    pass


class LabelError(EngineError):
    pass


class ContractError(EngineError):
    pass


class DegenerateBatchError(EngineError):
    pass


class BackwardError(ContractError):
    pass


# ================= DATA =================

class DataError(TbnetError):
    exit_code = 2


class LayoutError(DataError):
    pass


class EmptyClassError(DataError):
    pass


class QuotaError(DataError):
    def __init__(self, label: str, needed: int, available: int):
        self.label = label
        self.needed = needed
        self.available = available
        super().__init__(f"Class '{label}' needs {needed} images but only {available} are available.")


class ImageError(DataError):
    def __init__(self, path, reason: str = "could not decode image"):
        self.path = str(path)
        super().__init__(f"{reason}: {self.path}")


class ManifestError(DataError):
    pass


class CheckpointError(DataError):
    pass


class FormatError(CheckpointError):
    pass


class IntegrityError(CheckpointError):
    pass


class ArchitectureMismatchError(CheckpointError):
    pass


# ================= TRAINING =================

class TrainingError(TbnetError):
    exit_code = 3


class NonFiniteLossError(TrainingError):
    def __init__(self, epoch: int, batch: int, lr: float, loss: float):
        self.epoch = epoch
        self.batch = batch
        self.lr = lr
        self.loss = loss
        super().__init__(f"Loss became {loss} at epoch {epoch}, batch {batch} (lr={lr:g}). Training aborted.")
