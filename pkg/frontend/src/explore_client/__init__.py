"""External exploration client: drives a swarmexp server over its wire protocol.

Everything the client knows about the world arrives over the socket; no
simulator code is imported.  See PROTOCOL.md in the server repository for
the frame and message layout this package implements.
"""

__version__ = "0.1.0"

from .client import SessionHandle, connect_and_configure, run_episode  # noqa: F401
from .plotting import plot_episode  # noqa: F401
