"""Compatibility scoring, time shifts, placement ranking and cluster simulation."""

from ._core import (
    FluidFlow,
    RingshiftError,
    builtin_profiles,
    import_profile,
    max_min_allocation,
    rank,
    score,
    simulate,
    square_wave,
    summarize,
    testbed,
    time_shifts,
    two_tier,
)

__all__ = [
    "FluidFlow",
    "RingshiftError",
    "builtin_profiles",
    "import_profile",
    "max_min_allocation",
    "rank",
    "score",
    "simulate",
    "square_wave",
    "summarize",
    "testbed",
    "time_shifts",
    "two_tier",
]
