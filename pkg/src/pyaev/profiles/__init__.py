from .types import (
    HOURS_PER_DAY,
    HOURS_PER_WEEK,
    SERIES_FIELDS,
    VEHICLE_ID,
    WEEKDAY_NAMES,
    EvParams,
    EvProfile,
    FleetGenSpec,
    PriceGenSpec,
    PriceSeries,
    TimeGrid,
    UncontrolledMode,
    UncontrolledVariant,
)
from .validation import ProfileValidation, validate_profile
from .generator import generate_commuter_fleet, generate_vehicle
from .prices import generate_prices, load_prices_csv, write_prices_csv
from .csv_io import load_profiles_csv, params_path, write_profiles_csv
from .uncontrolled import uncontrolled_schedule
