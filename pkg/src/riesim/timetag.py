"""Synthetic timestamp streams and dead-time extraction from inter-arrival histograms.

This reproduces the bench methodology for measuring t_d(lambda) without
hardware: generate Poisson arrivals at a known true rate, suppress events
inside the recovery window of the previous registered event, histogram the
surviving inter-arrival gaps, and read the dead time off the onset of the
first populated bin.  Sweeping the true rate recovers the full rate-dependent
dead-time curve.

Timestamps are quantized to the tagger resolution (8 ps by default) and the
on-disk format is one integer per line, picoseconds since stream start.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .detector import DeadTimeCurve

__all__ = [
    "TimestampStream",
    "InterArrivalHistogram",
    "SweepPoint",
    "InsufficientDataError",
    "EstimationError",
    "FixedPointError",
    "generate_poisson_stream",
    "apply_dead_time",
    "interarrival_histogram",
    "estimate_dead_time",
    "sweep_dead_time",
    "read_timestamps",
    "write_timestamps",
    "write_sweep_csv",
]

DEFAULT_RESOLUTION_S = 8e-12
DEFAULT_BIN_WIDTH_S = 0.5e-9
DEFAULT_MAX_GAP_S = 200e-9
DEFAULT_MIN_COUNT = 2


class InsufficientDataError(ValueError):
    """Too few timestamps to carry out the requested analysis."""


class EstimationError(ValueError):
    """No histogram bin qualifies as the dead-time onset."""


class FixedPointError(RuntimeError):
    """Self-consistent rate-dependent filtering failed to converge."""

    def __init__(self, message: str, trace):
        super().__init__(message)
        self.trace = list(trace)


@dataclass(frozen=True)
class TimestampStream:
    """Strictly increasing arrival times in seconds over [0, duration]."""

    timestamps_s: np.ndarray
    duration_s: float
    resolution_s: float = DEFAULT_RESOLUTION_S

    def __post_init__(self):
        t = np.asarray(self.timestamps_s, dtype=float)
        if t.ndim != 1:
            raise ValueError("timestamps must be a 1-d array")
        if t.size and (np.any(np.diff(t) <= 0) or t[0] < 0 or t[-1] > self.duration_s):
            raise ValueError("timestamps must be strictly increasing within [0, duration]")
        object.__setattr__(self, "timestamps_s", t)

    def __len__(self) -> int:
        return int(self.timestamps_s.size)

    @property
    def observed_rate_cps(self) -> float:
        return len(self) / self.duration_s if self.duration_s > 0 else 0.0


@dataclass(frozen=True)
class InterArrivalHistogram:
    """Counts of consecutive-gap durations in uniform bins starting at zero."""

    bin_width_s: float
    counts: np.ndarray

    def __post_init__(self):
        if self.bin_width_s <= 0:
            raise ValueError("bin width must be positive")
        object.__setattr__(self, "counts", np.asarray(self.counts, dtype=np.int64))

    @property
    def bin_edges_s(self) -> np.ndarray:
        return np.arange(self.counts.size + 1) * self.bin_width_s

    def write_csv(self, path) -> None:
        with Path(path).open("w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["bin_lower_edge_s", "count"])
            for i, count in enumerate(self.counts):
                writer.writerow([repr(i * self.bin_width_s), int(count)])


def _quantize(times_s: np.ndarray, resolution_s: float, duration_s: float) -> np.ndarray:
    """Snap to the tagger grid, merge duplicates, drop anything past duration."""
    ticks = np.round(times_s / resolution_s)
    ticks = np.unique(ticks)
    out = ticks * resolution_s
    return out[out <= duration_s]


def generate_poisson_stream(
    beta_cps: float,
    duration_s: float,
    seed: int,
    resolution_s: float = DEFAULT_RESOLUTION_S,
) -> TimestampStream:
    """Homogeneous Poisson arrivals at true rate beta over [0, duration].

    Inter-arrival gaps are exponential with mean 1/beta; the stream is
    deterministic per seed and quantized to the tagger resolution.
    """
    if beta_cps <= 0:
        raise ValueError("true rate must be positive")
    if duration_s < 0:
        raise ValueError("duration must be >= 0")
    rng = np.random.default_rng(seed)
    times = []
    t_last = 0.0
    expected = beta_cps * duration_s
    block = max(int(expected + 10.0 * np.sqrt(expected + 1.0)) + 16, 1024)
    while t_last <= duration_s:
        gaps = rng.exponential(1.0 / beta_cps, size=block)
        chunk = t_last + np.cumsum(gaps)
        times.append(chunk)
        t_last = chunk[-1]
        block = max(block // 4, 1024)
    all_times = np.concatenate(times)
    all_times = all_times[all_times <= duration_s]
    return TimestampStream(
        timestamps_s=_quantize(all_times, resolution_s, duration_s),
        duration_s=duration_s,
        resolution_s=resolution_s,
    )


def _filter_constant(times_s: np.ndarray, dead_s: float) -> np.ndarray:
    """Non-paralyzable thinning: keep an event iff it lies at least dead_s
    past the previously kept event.  Suppressed events never extend the window."""
    n = times_s.size
    if n == 0 or dead_s <= 0:
        return times_s.copy()
    # next_idx[i]: first index at or past times[i] + dead_s, assuming i was kept
    next_idx = np.searchsorted(times_s, times_s + dead_s, side="left")
    kept = np.empty(n, dtype=np.int64)
    k = 0
    i = 0
    while i < n:
        kept[k] = i
        k += 1
        i = next_idx[i]
    return times_s[kept[:k]]


def apply_dead_time(
    stream: TimestampStream,
    *,
    constant_dead_time_s: float | None = None,
    curve: DeadTimeCurve | None = None,
    max_iterations: int = 20,
    rel_tol: float = 1e-6,
) -> TimestampStream:
    """Suppress events inside the detector recovery window.

    Exactly one of `constant_dead_time_s` or `curve` must be given.  With a
    curve the dead window is t_d evaluated at the *output* observed rate,
    which is found by fixed-point iteration starting from the input rate.
    """
    if (constant_dead_time_s is None) == (curve is None):
        raise ValueError("give exactly one of constant_dead_time_s or curve")
    t = stream.timestamps_s
    if constant_dead_time_s is not None:
        if constant_dead_time_s < 0:
            raise ValueError("dead time must be >= 0")
        kept = _filter_constant(t, constant_dead_time_s)
        return TimestampStream(kept, stream.duration_s, stream.resolution_s)

    if max_iterations < 1:
        raise ValueError("max_iterations must be >= 1")
    rate = stream.observed_rate_cps
    trace = []
    prev_change = 0.0
    for iteration in range(max_iterations):
        dead_s = curve.dead_time_at(rate)
        kept = _filter_constant(t, dead_s)
        new_rate = kept.size / stream.duration_s if stream.duration_s > 0 else 0.0
        trace.append((iteration, dead_s, new_rate))
        if rate == new_rate or (rate > 0 and abs(new_rate - rate) / rate < rel_tol):
            return TimestampStream(kept, stream.duration_s, stream.resolution_s)
        change = new_rate - rate
        if prev_change * change < 0.0:
            # The kept count is a step function of the window, so the exact
            # fixed point can fall between two count plateaus and plain
            # iteration then cycles.  Once the two candidate windows agree
            # to better than the tagger resolution they are physically
            # indistinguishable: accept the current solution.
            if abs(curve.dead_time_at(new_rate) - dead_s) < stream.resolution_s:
                return TimestampStream(kept, stream.duration_s, stream.resolution_s)
            rate = 0.5 * (rate + new_rate)
        else:
            rate = new_rate
        prev_change = change
    rates_seen = " -> ".join(f"{entry[2]:.6g}" for entry in trace)
    raise FixedPointError(
        f"rate-dependent dead-time filter did not converge in {max_iterations} "
        f"iterations (observed rates {rates_seen} cps)",
        trace,
    )


def interarrival_histogram(
    stream: TimestampStream,
    bin_width_s: float = DEFAULT_BIN_WIDTH_S,
    max_gap_s: float = DEFAULT_MAX_GAP_S,
) -> InterArrivalHistogram:
    """Histogram of adjacent arrival-time differences within [0, max_gap]."""
    if bin_width_s <= 0:
        raise ValueError("bin width must be positive")
    if len(stream) < 2:
        raise InsufficientDataError(
            f"insufficient data: need at least 2 timestamps for an inter-arrival "
            f"histogram, got {len(stream)}"
        )
    gaps = np.diff(stream.timestamps_s)
    gaps = gaps[gaps <= max_gap_s]
    n_bins = int(np.ceil(max_gap_s / bin_width_s))
    counts, _ = np.histogram(gaps, bins=n_bins, range=(0.0, n_bins * bin_width_s))
    return InterArrivalHistogram(bin_width_s=bin_width_s, counts=counts)


def estimate_dead_time(hist: InterArrivalHistogram, min_count: int = DEFAULT_MIN_COUNT) -> float:
    """Dead time from the onset of the first statistically populated bin.

    Returns the lower edge of the first bin holding at least `min_count`
    gaps, so the estimate sits within one bin width below the true dead
    time.  min_count > 1 guards against a stray outlier defining the onset.
    """
    if min_count < 1:
        raise ValueError("min_count must be >= 1")
    qualifying = np.nonzero(hist.counts >= min_count)[0]
    if qualifying.size == 0:
        raise EstimationError(
            f"no histogram bin reaches min_count={min_count}; "
            "acquire more data or lower the threshold"
        )
    return float(qualifying[0] * hist.bin_width_s)


@dataclass(frozen=True)
class SweepPoint:
    """One recovered point of the dead-time curve."""

    lambda_obs_cps: float
    dead_time_est_s: float


def sweep_dead_time(
    rates_cps,
    truth_curve: DeadTimeCurve,
    duration_s: float,
    bin_width_s: float,
    seed: int,
    max_gap_s: float = DEFAULT_MAX_GAP_S,
    min_count: int = DEFAULT_MIN_COUNT,
) -> list[SweepPoint]:
    """Recover t_d(lambda) from synthetic streams at each true rate.

    For each rate: generate -> rate-dependent filter against the truth curve
    -> histogram -> onset estimate.  Per-rate streams use derived seeds
    (seed + index) so points are independent and order-stable.
    """
    rates = list(rates_cps)
    if not rates:
        raise ValueError("rate list must not be empty")
    points = []
    for index, beta in enumerate(rates):
        stream = generate_poisson_stream(beta, duration_s, seed + index)
        filtered = apply_dead_time(stream, curve=truth_curve)
        hist = interarrival_histogram(filtered, bin_width_s, max_gap_s)
        estimate = estimate_dead_time(hist, min_count)
        points.append(SweepPoint(filtered.observed_rate_cps, estimate))
    return points


def read_timestamps(path, resolution_s: float = DEFAULT_RESOLUTION_S) -> TimestampStream:
    """Read a timestamp file: one integer per line, picoseconds, ascending."""
    path = Path(path)
    ticks = []
    with path.open() as fh:
        for lineno, line in enumerate(fh, start=1):
            text = line.strip()
            if not text:
                continue
            try:
                ticks.append(int(text))
            except ValueError:
                raise ValueError(f"{path}: malformed timestamp at line {lineno}: {text!r}") from None
    if not ticks:
        raise InsufficientDataError(f"{path}: insufficient data, no timestamps in file")
    times = np.asarray(ticks, dtype=float) * 1e-12
    if np.any(np.diff(times) <= 0):
        raise ValueError(f"{path}: timestamps must be strictly ascending")
    duration = float(times[-1])
    return TimestampStream(times, duration_s=duration, resolution_s=resolution_s)


def write_timestamps(stream: TimestampStream, path) -> None:
    """Write picosecond-integer timestamps, one per line."""
    ticks = np.round(stream.timestamps_s * 1e12).astype(np.int64)
    with Path(path).open("w") as fh:
        for tick in ticks:
            fh.write(f"{tick}\n")


def write_sweep_csv(points, path) -> None:
    """Recovered-curve CSV with schema lambda_obs_cps,t_d_est_s."""
    with Path(path).open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["lambda_obs_cps", "t_d_est_s"])
        for pt in points:
            writer.writerow([repr(float(pt.lambda_obs_cps)), repr(float(pt.dead_time_est_s))])
