"""Joint humerus/scapula segmentation: phantoms, training, metrics."""

from ._core import (
    Model,
    SsegError,
    corrupt_labels,
    evaluate,
    generate_phantom,
    preprocess_image,
    self_train,
    split_kfold,
)

__all__ = [
    "Model",
    "SsegError",
    "corrupt_labels",
    "evaluate",
    "generate_phantom",
    "preprocess_image",
    "self_train",
    "split_kfold",
]
