from __future__ import annotations

from typing import TYPE_CHECKING, Optional

from ..signals import Signals

if TYPE_CHECKING:
    from .host import EventContext, EventHost

# Global registry to hold the singleton
_event_host: Optional[EventHost] = None


def set_event_host(host: EventHost):
    """Set the global event host singleton"""
    global _event_host
    if _event_host is not None:
        raise RuntimeError("Event host is already set")
    _event_host = host


def get_event_host() -> EventHost:
    """Get the global event host singleton"""
    if _event_host is None:
        raise RuntimeError("Event host is not set. Call set_event_host() first.")
    return _event_host


def broadcast(signal, *args, _metadata=None, **kwargs):
    """Convenience function to broadcast an event"""
    get_event_host().broadcast(signal, *args, _metadata=_metadata, **kwargs)


def local_broadcast(signal, *args, _metadata=None, **kwargs):
    """Broadcast an event that is not forwarded to recorders"""
    _metadata = dict(_metadata or {})
    _metadata['_local_only'] = True
    get_event_host().broadcast(signal, *args, _metadata=_metadata, **kwargs)


def consumer(signal: str):
    """Decorator to register a function as a consumer for a signal"""
    return get_event_host().consumer(signal)


def event_context(**metadata) -> EventContext:
    return get_event_host().context(**metadata)


def log(message: str, **fields):
    broadcast(Signals.LOG, message, **fields)


def warn(message: str, **fields):
    broadcast(Signals.WARNING, message, **fields)
