"""Penalized DRO toolkit.

Thin wrapper over the compiled extension: divergence conjugates, the joint
dual objective L(x, eta), its stochastic gradients, the optimizers
(normalized momentum, SGD, projected SGD) and the certification suites.
"""

from ._drokit import *  # noqa: F401,F403
from . import _drokit as _ext

__all__ = [name for name in dir(_ext) if not name.startswith("_")]
