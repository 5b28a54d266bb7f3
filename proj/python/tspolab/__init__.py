"""Python surface for the tspo lab: dataset synthesis, the frame-selection
agent, group-relative policy training, and the evaluation bench."""

try:
    from ._tspo import *  # noqa: F401,F403  (installed package layout)
    from ._tspo import __doc__ as _core_doc
except ImportError:  # build-tree layout: extension sits on sys.path directly
    from _tspo import *  # noqa: F401,F403
    from _tspo import __doc__ as _core_doc

__all__ = [name for name in dir() if not name.startswith("_")]
