"""Complex-valued network building blocks with hand-written backward passes."""

from .layers import (
    ComplexConv2d,
    ComplexDropout,
    ComplexPReLU,
    ResBlock,
    StaleActivationError,
    Upsample2x,
    complex_conv2d,
    complex_dropout,
    complex_prelu,
)
from .gradcheck import GradCheckResult, activation_pattern, check_gradients
from .optim import OptimizerState, adam_step, loss_mse_complex, loss_mse_complex_grad
from .unet import CvUNet, CvUNetConfig, DataConsistencyLayer

__all__ = [
    "ComplexConv2d",
    "ComplexDropout",
    "ComplexPReLU",
    "CvUNet",
    "CvUNetConfig",
    "DataConsistencyLayer",
    "GradCheckResult",
    "OptimizerState",
    "ResBlock",
    "StaleActivationError",
    "Upsample2x",
    "activation_pattern",
    "adam_step",
    "check_gradients",
    "complex_conv2d",
    "complex_dropout",
    "complex_prelu",
    "loss_mse_complex",
    "loss_mse_complex_grad",
]
