import logging
from typing import Any, Callable

log = logging.getLogger("EventBus")

Handler = Callable[[dict[str, Any]], None]

# Events emitted by the solvers and the experiment runner.
TRACE_ROW = "trace_row"
SOLVER_STARTED = "solver_started"
SOLVER_FINISHED = "solver_finished"
STAGNATION_MUTATION = "stagnation_mutation"
RUN_FAILED = "run_failed"


class EventBus:
    """Lightweight pub/sub used to report solver progress."""

    def __init__(self):
        self.subscribers: dict[str, list[Handler]] = {}

    def subscribe(self, event_type: str, callback: Handler):
        log.debug("Subscribed to event: %s", event_type)
        self.subscribers.setdefault(event_type, []).append(callback)

    def unsubscribe(self, event_type: str, callback: Handler):
        handlers = self.subscribers.get(event_type, [])
        if callback in handlers:
            handlers.remove(callback)

    def emit(self, event_type: str, data: dict[str, Any] | None = None):
        """Send an event to all subscribers. Handler failures are logged, not raised."""
        for cb in list(self.subscribers.get(event_type, [])):
            try:
                cb(data or {})
            except Exception as e:
                log.error("Event handler error for %s: %s", event_type, e)
