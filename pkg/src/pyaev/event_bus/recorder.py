from __future__ import annotations

import threading
from pathlib import Path
from typing import Iterable, List, Optional

from .event import Event
from .handler import EventHandler


class EventRecorder(EventHandler):
    """Append every forwarded event to a JSON-lines file"""

    def __init__(self, path: Path, name=None):
        super().__init__(name or f"EventRecorder-{path.name}", history_limit=0)
        self.path = Path(path)
        self.path.parent.mkdir(parents=True, exist_ok=True)
        self._lock = threading.Lock()
        self._file = open(self.path, 'a', encoding='utf-8')

    def process(self, event: Event) -> Event:
        with self._lock:
            if not self._file.closed:
                self._file.write(event.serialize() + '\n')
                self._file.flush()
        return event

    def close(self):
        with self._lock:
            self._file.close()

    def __enter__(self):
        return self

    def __exit__(self, exc_type, exc_value, traceback):
        self.close()
        return False


class EventCollector(EventHandler):
    """Keep forwarded events in memory, optionally for a subset of signals"""

    def __init__(self, signals: Optional[Iterable[str]] = None, name=None):
        super().__init__(name, history_limit=None)
        self.signals = set(signals) if signals is not None else None

    def receive(self, event: Event):
        if self.signals is None or event.signal in self.signals:
            super().receive(event)

    def process(self, event: Event) -> Event:
        return event

    @property
    def events(self) -> List[Event]:
        return list(self.event_history)


def read_events(path: Path) -> List[Event]:
    with open(path, 'r', encoding='utf-8') as f:
        return [Event.deserialize(line) for line in f if line.strip()]
