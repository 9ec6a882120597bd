"""CNN power predictor: layers, training, data and model files."""
from .cnn import CnnModel, adam_step, backward, conv2d_same, forward, init_model, mae_loss, relu
from .data import Dataset, generate_dataset, read_dataset_csv, write_dataset_csv
from .io import load_model, save_model
from .train import TrainConfig, TrainResult, infer_allocation, raw_allocation, train

__all__ = [
    "CnnModel", "Dataset", "TrainConfig", "TrainResult",
    "adam_step", "backward", "conv2d_same", "forward", "init_model", "mae_loss", "relu",
    "generate_dataset", "read_dataset_csv", "write_dataset_csv",
    "load_model", "save_model", "infer_allocation", "raw_allocation", "train",
]
