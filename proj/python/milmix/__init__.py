"""Feature-bag MIL toolkit: mixup augmentation, attention heads, experiments."""

from ._core import *  # noqa: F401,F403
from ._core import __doc__ as _doc

__doc__ = _doc
__version__ = "0.1.0"
