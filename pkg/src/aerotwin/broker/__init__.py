"""Context broker: entity store, HTTP API, subscriptions, notifications."""

from .client import BrokerApiError, BrokerClient
from .core import BrokerError, ChangeEvent, ContextBroker, Subscription
from .server import BrokerServer, parse_query_expression, parse_time_window

__all__ = [
    "BrokerApiError", "BrokerClient", "BrokerError", "BrokerServer",
    "ChangeEvent", "ContextBroker", "Subscription",
    "parse_query_expression", "parse_time_window",
]
