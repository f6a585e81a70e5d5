"""SIW component synthesis and 2-D full-wave verification."""

from ._core import *  # noqa: F401,F403
from ._core import __version__  # noqa: F401
