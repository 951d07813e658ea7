from enum import StrEnum


class Signals(StrEnum):
    # Logging
    LOG = "log"
    WARNING = "warning"

    # Pipeline stages
    STAGE_STARTED = "stage_started"
    STAGE_FINISHED = "stage_finished"
    STAGE_CACHED = "stage_cached"

    # Solver progress
    SOLVE_FINISHED = "solve_finished"
    VEHICLE_DISPATCHED = "vehicle_dispatched"
    NODE_PROCESSED = "node_processed"
    INCUMBENT_UPDATED = "incumbent_updated"

    # Diagnostics
    VALIDATION_ISSUE = "validation_issue"
    CONSUMER_ERROR = "consumer_error"
