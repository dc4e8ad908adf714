"""LipNet-mini backbone, optimizer, checkpoints and training."""
from .checkpoint import load_checkpoint, load_tensors, save_checkpoint, save_tensors
from .gru import GruParams, bigru_backward, bigru_forward, gru_backward, gru_forward
from .lipnet import LipNet, LipNetConfig, build_lipnet, lipnet_backward, lipnet_forward, stcnn_block_forward
from .optim import AdamState, adam_step
from .train import Sample, TrainConfig, dataset_loss, evaluate_model, load_split, predict, train_epoch

__all__ = [
    "load_checkpoint", "load_tensors", "save_checkpoint", "save_tensors",
    "GruParams", "bigru_backward", "bigru_forward", "gru_backward", "gru_forward",
    "LipNet", "LipNetConfig", "build_lipnet", "lipnet_backward", "lipnet_forward", "stcnn_block_forward",
    "AdamState", "adam_step",
    "Sample", "TrainConfig", "dataset_loss", "evaluate_model", "load_split", "predict", "train_epoch",
]
