"""Non-paralyzable single-photon detector model with rate-dependent dead time.

The central nonlinearity is the effective dead time t_d(lambda): a tabulated,
piecewise-linear function of the observed count rate.  A free-running SPAD
recovering from an avalanche is unavailable for t_d, and because quenching
recovery slows under heavy loading, t_d itself grows with the count rate
(23.3 ns at low rates rising to about 31.5 ns in the high-count regime for
the detector this model is anchored to).

Availability under steady Poisson loading at observed rate lambda:

    Pr(available) ~= exp(-lambda * t_d(lambda))        (exponential model)
    Pr(available) >= 1 - lambda * t_d(lambda)          (conservative linear bound)

and the observed/true rate relation for a non-paralyzable detector is

    true rate beta = lambda / (1 - t_d * lambda),  valid while lambda*t_d < 1.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from enum import Enum
from math import exp
from pathlib import Path

import numpy as np

__all__ = [
    "AvailabilityModel",
    "DeadTimeCurve",
    "DetectorUnit",
    "ArrivalResult",
    "SaturationError",
    "default_dead_time_curve",
    "dead_time_at",
    "availability",
    "click_probability",
    "busy_fraction",
    "observed_to_true_rate",
    "true_to_observed_rate",
]


class SaturationError(ValueError):
    """Raised when lambda * t_d(lambda) >= 1 where the linear model needs it below 1."""


class AvailabilityModel(Enum):
    """How steady loading converts to availability: exact exponential form or
    the conservative linear lower bound (valid only below saturation)."""

    EXPONENTIAL = "exponential"
    LINEAR_BOUND = "linear_bound"


@dataclass(frozen=True)
class DeadTimeCurve:
    """Tabulated effective dead time versus observed count rate.

    Evaluation is piecewise-linear between table points and clamps to the
    first/last dead time outside the tabulated range.  Rates must be strictly
    increasing and all dead times positive.
    """

    rates_cps: np.ndarray
    dead_times_s: np.ndarray

    def __post_init__(self):
        rates = np.asarray(self.rates_cps, dtype=float)
        times = np.asarray(self.dead_times_s, dtype=float)
        if rates.ndim != 1 or times.ndim != 1 or rates.size != times.size:
            raise ValueError("curve needs matching 1-d rate and dead-time arrays")
        if rates.size == 0:
            raise ValueError("dead-time curve has no points")
        if np.any(np.diff(rates) <= 0):
            raise ValueError("curve rates must be strictly increasing")
        if np.any(times <= 0):
            raise ValueError("all dead times must be positive")
        object.__setattr__(self, "rates_cps", rates)
        object.__setattr__(self, "dead_times_s", times)

    def dead_time_at(self, rate_cps):
        """Interpolated dead time in seconds; accepts a scalar or an array."""
        out = np.interp(rate_cps, self.rates_cps, self.dead_times_s)
        return float(out) if np.isscalar(rate_cps) else out

    @classmethod
    def from_points(cls, points) -> "DeadTimeCurve":
        """Build from an iterable of (rate_cps, dead_time_s) pairs."""
        pts = list(points)
        return cls(
            rates_cps=np.array([p[0] for p in pts], dtype=float),
            dead_times_s=np.array([p[1] for p in pts], dtype=float),
        )

    @classmethod
    def constant(cls, dead_time_s: float) -> "DeadTimeCurve":
        """Flat curve: the same dead time at every rate."""
        return cls.from_points([(0.0, dead_time_s)])

    @classmethod
    def from_csv(cls, path) -> "DeadTimeCurve":
        """Load a two-column CSV (lambda_cps, t_d_seconds) with a header row,
        rows sorted ascending by rate."""
        path = Path(path)
        with path.open(newline="") as fh:
            reader = csv.reader(fh)
            try:
                header = next(reader)
            except StopIteration:
                raise ValueError(f"{path}: empty dead-time curve file") from None
            if len(header) < 2:
                raise ValueError(f"{path}: expected two columns, got header {header!r}")
            points = []
            for lineno, row in enumerate(reader, start=2):
                if not row:
                    continue
                try:
                    points.append((float(row[0]), float(row[1])))
                except (ValueError, IndexError):
                    raise ValueError(f"{path}: malformed row at line {lineno}: {row!r}") from None
        if not points:
            raise ValueError(f"{path}: dead-time curve has no data rows")
        return cls.from_points(points)

    def to_csv(self, path) -> None:
        with Path(path).open("w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["lambda_cps", "t_d_seconds"])
            for rate, t_d in zip(self.rates_cps, self.dead_times_s):
                writer.writerow([repr(float(rate)), repr(float(t_d))])


# Anchor table for the default curve: plateau at the nominal 23.3 ns below a
# few Mcps, rising once the rate passes ~4 Mcps, saturating near 31.5 ns in
# the high-count regime.  Endpoints are the measured values for a free-running
# SPCM-class SPAD; intermediate anchors are a digitization of that rise.
_DEFAULT_CURVE_POINTS = (
    (0.0, 23.3e-9),
    (2.0e6, 23.3e-9),
    (4.0e6, 24.0e-9),
    (8.0e6, 26.6e-9),
    (12.0e6, 28.8e-9),
    (16.0e6, 30.2e-9),
    (20.0e6, 31.0e-9),
    (25.0e6, 31.5e-9),
    (60.0e6, 31.5e-9),
)


def default_dead_time_curve() -> DeadTimeCurve:
    """The default SPAD recovery curve (23.3 ns low-rate, ~31.5 ns high-rate)."""
    return DeadTimeCurve.from_points(_DEFAULT_CURVE_POINTS)


def dead_time_at(curve: DeadTimeCurve, rate_cps: float) -> float:
    """Effective dead time at the given observed count rate."""
    if rate_cps < 0:
        raise ValueError("count rate must be >= 0")
    return curve.dead_time_at(rate_cps)


def busy_fraction(rate_cps: float, curve: DeadTimeCurve) -> float:
    """lambda * t_d(lambda): the fraction of time the detector is recovering."""
    if rate_cps < 0:
        raise ValueError("count rate must be >= 0")
    return rate_cps * curve.dead_time_at(rate_cps)


def availability(rate_cps: float, curve: DeadTimeCurve, model: AvailabilityModel) -> float:
    """Probability the detector is live at a random signal arrival time.

    The exponential form exp(-lambda*t_d) is the Poisson no-event probability
    over one dead-time window; the linear bound 1 - lambda*t_d is tighter
    (smaller) everywhere and only defined below saturation.
    """
    busy = busy_fraction(rate_cps, curve)
    if model is AvailabilityModel.EXPONENTIAL:
        return exp(-busy)
    if model is AvailabilityModel.LINEAR_BOUND:
        if busy >= 1.0:
            raise SaturationError(
                f"linear availability undefined at busy fraction {busy:.4f} >= 1 "
                f"(rate {rate_cps:.4g} cps)"
            )
        return 1.0 - busy
    raise ValueError(f"unknown availability model {model!r}")


def click_probability(
    p0: float, rate_cps: float, curve: DeadTimeCurve, model: AvailabilityModel
) -> float:
    """p0 * Pr(available): the signal click probability under loading."""
    if not 0.0 < p0 <= 1.0:
        raise ValueError(f"p0 must be in (0, 1], got {p0}")
    return p0 * availability(rate_cps, curve, model)


def observed_to_true_rate(observed_cps: float, dead_time_s: float) -> float:
    """Invert non-paralyzable pile-up: beta = lambda / (1 - t_d * lambda)."""
    if observed_cps < 0:
        raise ValueError("observed rate must be >= 0")
    loss = dead_time_s * observed_cps
    if loss >= 1.0:
        raise SaturationError(
            f"observed rate {observed_cps:.4g} cps saturates dead time {dead_time_s:.3g} s"
        )
    return observed_cps / (1.0 - loss)


def true_to_observed_rate(true_cps: float, dead_time_s: float) -> float:
    """Forward non-paralyzable pile-up: lambda = beta / (1 + t_d * beta)."""
    if true_cps < 0:
        raise ValueError("true rate must be >= 0")
    return true_cps / (1.0 + dead_time_s * true_cps)


class ArrivalResult(Enum):
    CLICK = "click"
    SUPPRESSED = "suppressed"


@dataclass
class DetectorUnit:
    """Event-level non-paralyzable detector.

    An arrival inside the dead window is suppressed and does not extend it.
    An arrival on a live detector clicks with probability p0; only a click
    re-arms the dead window, whose width is the curve evaluated at the
    configured steady-state loading rate (not an online estimate).
    """

    p0: float
    curve: DeadTimeCurve
    loading_rate_cps: float = 0.0
    dead_until_s: float = 0.0
    _dead_time_s: float = field(init=False, repr=False)
    _last_arrival_s: float = field(default=-np.inf, init=False, repr=False)

    def __post_init__(self):
        if not 0.0 < self.p0 <= 1.0:
            raise ValueError(f"p0 must be in (0, 1], got {self.p0}")
        if self.loading_rate_cps < 0:
            raise ValueError("loading rate must be >= 0")
        self._dead_time_s = self.curve.dead_time_at(self.loading_rate_cps)

    def process_arrival(self, t_s: float, rng) -> ArrivalResult:
        """Feed one arrival at time t_s; timestamps must be non-decreasing."""
        if t_s < self._last_arrival_s:
            raise ValueError(
                f"arrivals must be monotone: got {t_s} after {self._last_arrival_s}"
            )
        self._last_arrival_s = t_s
        if t_s < self.dead_until_s:
            return ArrivalResult.SUPPRESSED
        if self.p0 < 1.0 and rng.random() >= self.p0:
            return ArrivalResult.SUPPRESSED
        self.dead_until_s = t_s + self._dead_time_s
        return ArrivalResult.CLICK
