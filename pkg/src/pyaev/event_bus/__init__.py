from .event import Event, get_context
from .handler import EventHandler
from .host import EventContext, EventHost, events
from .recorder import EventCollector, EventRecorder, read_events
from .runtime import (
    broadcast,
    consumer,
    event_context,
    get_event_host,
    local_broadcast,
    log,
    warn,
)
