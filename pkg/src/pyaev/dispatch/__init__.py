from .schedule import (
    DispatchSchedule,
    ScheduleCheck,
    check_schedule,
    read_schedules_csv,
    write_schedules_csv,
)
from .storage import (
    BOUND_ROLES,
    BoundRole,
    StorageBounds,
    StorageDuals,
    StorageLp,
    build_storage_lp,
    extract_duals,
    extract_schedule,
    price_array,
)
from .individual import Anchor, solve_individual, solve_storage
from .reference import (
    FleetReference,
    build_reference,
    default_threads,
    dispatch_fleet,
    read_reference_csv,
    write_reference_csv,
)
