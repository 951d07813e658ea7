from pyaev.event_bus import (
    Event,
    EventCollector,
    EventHost,
    EventRecorder,
    broadcast,
    event_context,
    events,
    local_broadcast,
    log,
    read_events,
    warn,
)
from pyaev.signals import Signals


def test_consumer_receives_args():
    host = EventHost('test')
    seen = []

    @host.consumer('ping')
    def on_ping(value, label=None):
        seen.append((value, label))

    host.broadcast('ping', 3, label='x')
    assert seen == [(3, 'x')]

    host.remove_consumer('ping', on_ping)
    host.broadcast('ping', 4)
    assert seen == [(3, 'x')]


def test_failing_consumer_reports_error():
    host = EventHost('test')
    errors = []

    @host.consumer('boom')
    def explode():
        raise ValueError("nope")

    @host.consumer(Signals.CONSUMER_ERROR)
    def on_error(signal, name, error):
        errors.append((signal, name))

    host.broadcast('boom')
    assert errors == [('boom', 'explode')]


def test_forwarding_and_context(collector):
    with event_context(stage='gen'):
        log("hello", vehicles=3)
    warn("careful")

    logged = [e for e in collector.events if e.signal == Signals.LOG and e.args == ("hello",)]
    assert logged and logged[-1].metadata['stage'] == 'gen'
    assert logged[-1].kwargs == {'vehicles': 3}
    warned = [e for e in collector.events if e.signal == Signals.WARNING]
    assert warned[-1].args == ("careful",)
    assert 'stage' not in warned[-1].metadata


def test_collector_filters_signals():
    only_warnings = EventCollector(signals=[Signals.WARNING])
    events.forward_to(only_warnings)
    try:
        log("ignored")
        warn("kept")
    finally:
        events.remove_forwarding(only_warnings)
    assert [e.args[0] for e in only_warnings.events] == ["kept"]


def test_local_broadcast_is_not_forwarded(collector):
    local_broadcast(Signals.LOG, "local only")
    assert not any(e.args == ("local only",) for e in collector.events)


def test_recorder_writes_json_lines(tmp_path):
    path = tmp_path / "events.jsonl"
    recorder = EventRecorder(path)
    events.forward_to(recorder)
    try:
        broadcast(Signals.STAGE_STARTED, stage='gen', digest='abc')
        log("done")
    finally:
        events.remove_forwarding(recorder)
        recorder.close()

    recorded = read_events(path)
    assert [str(e.signal) for e in recorded] == ['stage_started', 'log']
    assert recorded[0].kwargs == {'stage': 'gen', 'digest': 'abc'}


def test_event_round_trip_keeps_metadata():
    event = Event('x', (1, 'a'), {'k': [1, 2]}, {'time': 1.0, 'run': 'r'})
    again = Event.deserialize(event.serialize())
    assert again.signal == 'x'
    assert again.args == (1, 'a')
    assert again.kwargs == {'k': [1, 2]}
    assert again.metadata['run'] == 'r'
