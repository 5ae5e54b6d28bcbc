"""Python bindings for the mspc core library."""

from ._core import (
    ConfigError,
    ContractViolation,
    IoError,
    compare,
    config_digest,
    constraint_penalty,
    densify,
    evaluate,
    is_feasible,
    make_misaligned_task,
    make_shapes_task,
    pairwise_scale_ratios,
    read_checkpoint,
    reference_grid,
    rsp_transform,
    sliced_wasserstein,
    train,
    warp,
)

__all__ = [
    "ConfigError",
    "ContractViolation",
    "IoError",
    "compare",
    "config_digest",
    "constraint_penalty",
    "densify",
    "evaluate",
    "is_feasible",
    "make_misaligned_task",
    "make_shapes_task",
    "pairwise_scale_ratios",
    "read_checkpoint",
    "reference_grid",
    "rsp_transform",
    "sliced_wasserstein",
    "train",
    "warp",
]
