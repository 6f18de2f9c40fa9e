"""Layer stacks, training and weight files for the tile classifiers."""
from .estimators import FeatureExtractor, TileClassifier
from .gradcheck import GradCheckRow, check_all_layers
from .layers import Conv2D, Dense, Dropout, Flatten, MaxPool2D, ReLU, Softmax, cross_entropy, softmax
from .model import (ARCHITECTURES, FEATURE_SHAPE, IMAGE_SHAPE, Model, backward, build_architecture,
                    extract_features, forward)
from .training import TrainConfig, TrainLog, loss_and_grads, train
from .weights import load_weights, save_weights

__all__ = [
    "ARCHITECTURES", "Conv2D", "Dense", "Dropout", "FEATURE_SHAPE", "FeatureExtractor", "Flatten", "GradCheckRow",
    "IMAGE_SHAPE", "MaxPool2D", "Model", "ReLU", "Softmax", "TileClassifier", "TrainConfig",
    "TrainLog", "backward", "build_architecture", "check_all_layers", "cross_entropy", "extract_features", "forward",
    "load_weights", "loss_and_grads", "save_weights", "softmax", "train",
]
