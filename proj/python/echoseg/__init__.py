"""U-Net and MatAE-U-Net segmentation of echocardiography frames."""

from ._echoseg import (
    ConfigError,
    DivergenceError,
    FormatError,
    IntegrityError,
    Model,
    ShapeError,
    ValidationError,
    __version__,
    dice,
    generate_phantom,
    gradcheck,
    iou,
    pixel_accuracy,
    train,
)

__all__ = [
    "ConfigError",
    "DivergenceError",
    "FormatError",
    "IntegrityError",
    "Model",
    "ShapeError",
    "ValidationError",
    "__version__",
    "dice",
    "generate_phantom",
    "gradcheck",
    "iou",
    "pixel_accuracy",
    "train",
]
