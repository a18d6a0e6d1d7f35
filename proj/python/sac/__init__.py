"""Self assessment classifier: numerics, dataset generation, training and evaluation."""

from ._core import *  # noqa: F401,F403
from ._core import __version__  # noqa: F401
