"""Forward and backward primitives for the attention module and backbone."""
from .activations import activation, activation_backward, log_softmax, log_softmax_backward, sigmoid, softmax
from .conv import Conv3dParams, conv3d, conv3d_backward, conv_output_extents
from .gradcheck import GradReport, gradcheck, relative_error
from .norm import BatchNormState, batchnorm3d, batchnorm3d_backward, dropout3d, dropout3d_backward
from .pool import maxpool3d, maxpool3d_backward
from .upsample import (
    resize_to,
    resize_to_backward,
    upsample_bilinear_spatial,
    upsample_bilinear_spatial_backward,
    upsample_temporal,
    upsample_temporal_backward,
)

__all__ = [
    "activation", "activation_backward", "log_softmax", "log_softmax_backward", "sigmoid", "softmax",
    "Conv3dParams", "conv3d", "conv3d_backward", "conv_output_extents",
    "GradReport", "gradcheck", "relative_error",
    "BatchNormState", "batchnorm3d", "batchnorm3d_backward", "dropout3d", "dropout3d_backward",
    "maxpool3d", "maxpool3d_backward",
    "resize_to", "resize_to_backward", "upsample_bilinear_spatial", "upsample_bilinear_spatial_backward",
    "upsample_temporal", "upsample_temporal_backward",
]
