"""Near-field pose tracking simulator."""

from ._nftrack import *  # noqa: F401,F403
from ._nftrack import __version__  # noqa: F401
