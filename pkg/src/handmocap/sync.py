"""Nearest-neighbor timestamp alignment between two event streams.

The tracker samples at ~720 Hz while the depth camera runs at ~60 Hz, so
each depth frame is paired with the sensor frame whose timestamp is
nearest. With sensor inter-arrival at most T microseconds, every gap is
at most ceil(T/2) provided the depth timestamps lie inside the sensor
stream's span; at 720 Hz that bound is ceil(1389/2) = 695 us, i.e. the
advertised 0.7 ms worst case.

Timestamps are non-negative integer microseconds throughout. Ties between
two equally near sensor events break toward the earlier one, and depth
events outside the sensor span pair with the nearest endpoint and carry
an `extrapolated` flag.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass

import numpy as np

from .errors import InvalidInputError


@dataclass(frozen=True)
class TimedEvent:
    timestamp_us: int
    event_id: int

    def __post_init__(self):
        ts = self.timestamp_us
        if not isinstance(ts, (int, np.integer)) or isinstance(ts, bool):
            raise InvalidInputError("timestamp_us must be an integer")
        if ts < 0:
            raise InvalidInputError("timestamp_us must be non-negative")
        object.__setattr__(self, "timestamp_us", int(ts))
        object.__setattr__(self, "event_id", int(self.event_id))


@dataclass(frozen=True)
class AlignedPair:
    depth_id: int
    sensor_id: int
    gap_us: int
    extrapolated: bool


@dataclass(frozen=True)
class GapStats:
    max_us: int
    mean_us: float
    histogram: dict  # gap value (us) -> count, exact


def _check_sorted(events, name: str) -> None:
    for prev, cur in zip(events, events[1:]):
        if cur.timestamp_us <= prev.timestamp_us:
            raise InvalidInputError(
                f"{name} timestamps must be strictly increasing "
                f"({prev.timestamp_us} then {cur.timestamp_us})")


def align(depth, sensors) -> list[AlignedPair]:
    """Pair each depth event with its nearest sensor event, O(n+m).

    Both inputs must be sorted strictly increasing. An empty sensor stream
    cannot produce pairs and is rejected; an empty depth stream yields [].
    """
    depth = list(depth)
    sensors = list(sensors)
    if not sensors:
        raise InvalidInputError("sensor stream is empty, no pairs possible")
    _check_sorted(depth, "depth")
    _check_sorted(sensors, "sensor")
    lo = sensors[0].timestamp_us
    hi = sensors[-1].timestamp_us
    pairs = []
    j = 0
    for ev in depth:
        t = ev.timestamp_us
        # Advance while the next sensor event is strictly nearer; on a tie
        # the earlier event (current j) wins.
        while (j + 1 < len(sensors)
               and abs(sensors[j + 1].timestamp_us - t)
               < abs(sensors[j].timestamp_us - t)):
            j += 1
        near = sensors[j]
        pairs.append(AlignedPair(ev.event_id, near.event_id,
                                 abs(near.timestamp_us - t),
                                 not (lo <= t <= hi)))
    return pairs


def gap_stats(pairs) -> GapStats:
    """Exact max/mean/histogram over the gaps of aligned pairs."""
    pairs = list(pairs)
    if not pairs:
        raise InvalidInputError("no pairs to summarize")
    gaps = [p.gap_us for p in pairs]
    return GapStats(max(gaps), sum(gaps) / len(gaps), dict(Counter(gaps)))


def periodic_events(rate_hz: float, duration_us: int, *,
                    start_us: int = 0, first_id: int = 0) -> list[TimedEvent]:
    """Uniform-rate stream: timestamps round(start + i * 1e6/rate), i >= 0.

    Events cover [start_us, start_us + duration_us] inclusive.
    """
    if rate_hz <= 0:
        raise InvalidInputError("rate_hz must be positive")
    if duration_us < 0:
        raise InvalidInputError("duration_us must be non-negative")
    period = 1e6 / rate_hz
    n = int(duration_us / period) + 1
    return [TimedEvent(start_us + round(i * period), first_id + i)
            for i in range(n)]
