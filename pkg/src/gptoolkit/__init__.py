"""Gaussian-process toolkit: exact regression, Laplace classification
(probit binary and softmax multi-class) and the GP latent variable model."""

from ._backend import BACKEND
from .kernels import KernelExpr, Noise, Periodic, SE, parse_kernel_spec

__all__ = ["BACKEND", "KernelExpr", "Noise", "Periodic", "SE", "parse_kernel_spec"]
__version__ = "0.1.0"
