import math
from typing import Sequence

from tactkit.errors import StatsError


def snr_larger_better(responses: Sequence[float]) -> float:
    """Larger-the-better signal-to-noise ratio in decibels:
    ``-10 log10(mean(1 / y**2))``. Low replicates are punished heavily."""
    if len(responses) == 0:
        raise StatsError("SNR needs at least one response")
    total = 0.0
    for y in responses:
        if not (y > 0 and math.isfinite(y)):
            raise StatsError(f"SNR needs finite positive responses, got {y!r}")
        total += 1.0 / (y * y)
    return -10.0 * math.log10(total / len(responses))


def normalize_responses(responses: Sequence[float], alpha: float) -> list:
    """Divide every response by ``alpha``. Shifts SNR by ``-20 log10(alpha)``."""
    if not alpha > 0:
        raise StatsError(f"normaliser must be positive, got {alpha!r}")
    return [y / alpha for y in responses]
