from .checkpoint import load_checkpoint, read_checkpoint, save_checkpoint
from .evaluate import Prediction, evaluate, predict_image, predict_split
from .metrics import ConfusionMatrix, EvalReport, confusion_table, metrics_from_cm, metrics_table
from .optim import SGD, Adam, adam_step, sgd_step
from .trainer import EpochRecord, TrainConfig, TrainResult, train, write_history
