from .envelope import (
    ENVELOPE_COLUMNS,
    AevEnvelope,
    AggregateProfile,
    AggregationParamRule,
    envelope_frame,
    read_envelope_csv,
    sum_profiles,
    write_envelope_csv,
)
from .mapping import (
    DEFAULT_MAPPINGS,
    GroupCoverage,
    ScalingMap,
    check_group_width,
    group_coverage,
    groups_per_week,
    mapping_index,
    step_groups,
)
from .scaling import SocMinSource, apply_scaling, base_series
from .simple import SaHeuristics, simple_aggregation
