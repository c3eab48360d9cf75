"""Counterfactual synthetic segmentation pipeline and desk-scale trainer.

Thin re-export of the compiled extension. The extension lives inside this
package in an installed wheel; in a raw build tree it sits next to the build
artifacts and is importable as a top-level module.
"""

try:
    from ._magicforge import *  # noqa: F401,F403
    from . import _magicforge as _ext
except ImportError:  # build-tree layout
    from _magicforge import *  # noqa: F401,F403
    import _magicforge as _ext

__all__ = [name for name in dir(_ext) if not name.startswith("_")]
__version__ = "0.1.0"
