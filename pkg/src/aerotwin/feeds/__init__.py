"""Feed adapters that pull external sources into pipelines."""

from .rest_poller import RestPoller
from .tcp_client import TcpStreamClient

__all__ = ["RestPoller", "TcpStreamClient"]
