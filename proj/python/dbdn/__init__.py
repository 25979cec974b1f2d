"""Dense bi-directional super-resolution: models, metrics and training CLI."""

from ._dbdn import (
    CheckpointError,
    Network,
    ShapeError,
    bicubic_resize,
    count_params,
    grad_check,
    grad_check_ops,
    load_image,
    psnr,
    quantize,
    rgb_to_y,
    run_cli,
    save_png,
    ssim,
)

__all__ = [
    "CheckpointError",
    "Network",
    "ShapeError",
    "bicubic_resize",
    "count_params",
    "grad_check",
    "grad_check_ops",
    "load_image",
    "psnr",
    "quantize",
    "rgb_to_y",
    "run_cli",
    "save_png",
    "ssim",
]
