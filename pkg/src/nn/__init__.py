"""Dense reverse-mode autodiff, layers and optimisers on numpy."""

from .tensor import Graph, Tensor

__all__ = ["Graph", "Tensor"]
