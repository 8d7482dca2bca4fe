"""Peak-storage minimisation for staggered periodic replenishment."""
from .core import (
    Budgets,
    InputError,
    Instance,
    Item,
    Mode,
    ResourceError,
    ShiftVector,
    average_space_bound,
    crt_solve,
    cycle_length,
    item_level,
    primes_in_range,
    random_regime_check,
    random_shift_vector,
    total_level,
)
from .peak import PeakResult, brute_optimum, peak_events, peak_ip, peak_scan

__version__ = "0.1.0"
