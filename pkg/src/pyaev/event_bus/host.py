from __future__ import annotations

import logging
import threading
from typing import Any, Callable, Dict, List

from ..signals import Signals
from .event import Event, get_context
from .handler import EventHandler
from .runtime import set_event_host

logger = logging.getLogger('pyaev.event_bus')


class EventContext:
    """Stamp metadata onto every event broadcast inside the block"""

    def __init__(self, host: EventHost, metadata: Dict[str, Any]):
        self._host = host
        self._metadata = metadata
        self._original_metadata: Dict[str, Any] = {}

    @property
    def metadata(self) -> Dict[str, Any]:
        return self._metadata

    def __enter__(self):
        with self._host.lock:
            for k, v in self.metadata.items():
                if k in get_context():
                    self._original_metadata[k] = get_context()[k]
                get_context()[k] = v
        return self

    def __exit__(self, exc_type, exc_value, traceback):
        with self._host.lock:
            for k in self.metadata:
                if k in self._original_metadata:
                    get_context()[k] = self._original_metadata[k]
                else:
                    get_context().pop(k, None)
        return False


class EventHost(EventHandler):
    def __init__(self, name=None):
        if name is None:
            name = f"EventHost-{id(self)}"

        super().__init__(name)
        self.consumers: Dict[str, List[Callable]] = {}
        self.lock: threading.RLock = threading.RLock()

    def process(self, event: Event) -> Event:
        with self.lock:
            target_consumers = list(self.consumers.get(event.signal, []))

        for func in target_consumers:
            try:
                func(*event.args, **event.kwargs)
            except Exception as e:
                logger.exception("consumer %s failed on '%s'", func.__name__, event.signal)
                if event.signal != Signals.CONSUMER_ERROR:
                    self.broadcast(Signals.CONSUMER_ERROR, str(event.signal), func.__name__, e)

        return event

    def broadcast(self, signal, *args, _metadata=None, **kwargs):
        event = Event(signal, args, kwargs, dict(_metadata or {}))
        with self.lock:
            self.receive(event)

    def consumer(self, signal: str):
        """Decorator to register a function as a consumer for a signal"""
        def decorator(func):
            with self.lock:
                self.consumers.setdefault(signal, []).append(func)
            return func
        return decorator

    def remove_consumer(self, signal: str, func: Callable):
        with self.lock:
            funcs = self.consumers.get(signal, [])
            if func in funcs:
                funcs.remove(func)
            if not funcs:
                self.consumers.pop(signal, None)

    def context(self, **metadata) -> EventContext:
        return EventContext(self, metadata)

    def get_registered_consumers(self, signal=None):
        """Get registered consumers, optionally for a specific signal"""
        if signal:
            return self.consumers.get(signal, [])
        return self.consumers.copy()


events = EventHost('pyaev')
set_event_host(events)
