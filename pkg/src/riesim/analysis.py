"""Closed-form results: QBER law, stealth threshold, mutual information, bounds.

All information quantities are in bits.  The sifted channel under the attack
is an erasure-and-error channel: with probability eps Bob records nothing,
otherwise he gets a bit through a binary symmetric channel with crossover e.
The suppression ratio r = p_perp / p_parallel controls everything observable:

    observed QBER        e_obs(r) = r / (2 (1 + r))
    Bob's information    I(A;B)   = 1 - h2(e_obs(r))     per sifted bit
    Eve's information    I(A;E)   = 1 / (1 + r)          per sifted bit

so an eavesdropper who drives r below the threshold paired with the abort
QBER (0.282 for the 11% threshold) stays invisible while knowing more of the
key than Bob does.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from math import log2
from pathlib import Path

from .detector import DeadTimeCurve, SaturationError, busy_fraction

__all__ = [
    "ChannelParams",
    "StealthScanRow",
    "binary_entropy",
    "e_obs",
    "r_threshold",
    "r_threshold_closed_form",
    "sift_probability",
    "mutual_info_erasure_bsc",
    "mutual_info_eve_sifted",
    "mutual_info_bob_sifted",
    "r_bound",
    "stealth_scan",
    "write_stealth_csv",
    "mutual_info_curve",
    "write_mutual_info_csv",
]


@dataclass(frozen=True)
class ChannelParams:
    """Erasure-and-error channel: BEC(epsilon) followed by BSC(e)."""

    epsilon: float
    e: float

    def __post_init__(self):
        if not 0.0 <= self.epsilon <= 1.0:
            raise ValueError(f"erasure probability must be in [0, 1], got {self.epsilon}")
        if not 0.0 <= self.e <= 0.5:
            raise ValueError(f"conditional error must be in [0, 0.5], got {self.e}")


def binary_entropy(x: float) -> float:
    """h2(x) = -x log2 x - (1-x) log2 (1-x), with h2(0) = h2(1) = 0."""
    if not 0.0 <= x <= 1.0:
        raise ValueError(f"binary entropy needs x in [0, 1], got {x}")
    if x == 0.0 or x == 1.0:
        return 0.0
    return -x * log2(x) - (1.0 - x) * log2(1.0 - x)


def e_obs(r: float) -> float:
    """Observed sifted-key QBER as a function of the suppression ratio:
    r / (2 (1 + r)), increasing from 0 toward 1/2."""
    if r < 0:
        raise ValueError(f"ratio must be >= 0, got {r}")
    return r / (2.0 * (1.0 + r))


def r_threshold_closed_form(e_abort: float) -> float:
    """Invert e_obs algebraically: r = 2 e / (1 - 2 e)."""
    if not 0.0 < e_abort < 0.5:
        raise ValueError(f"abort QBER must be in (0, 0.5), got {e_abort}")
    return 2.0 * e_abort / (1.0 - 2.0 * e_abort)


def r_threshold(e_abort: float) -> float:
    """Suppression ratio at which the observed QBER reaches the abort value.

    Found by bisection on e_obs (the closed form 2e/(1-2e) must agree; the
    test suite checks both paths to 1e-9).
    """
    if not 0.0 < e_abort < 0.5:
        raise ValueError(f"abort QBER must be in (0, 0.5), got {e_abort}")
    lo, hi = 0.0, 1.0
    while e_obs(hi) < e_abort:
        hi *= 2.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if e_obs(mid) < e_abort:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def sift_probability(p_par: float, p_perp: float) -> float:
    """(p_parallel + p_perp) / 4: both bases uniform, basis-match times click."""
    for name, value in (("p_par", p_par), ("p_perp", p_perp)):
        if not 0.0 <= value <= 1.0:
            raise ValueError(f"{name} must be in [0, 1], got {value}")
    return (p_par + p_perp) / 4.0


def mutual_info_erasure_bsc(params: ChannelParams) -> float:
    """I(A;B) over the full erasure alphabet: (1 - eps) (1 - h2(e)).

    An erasure carries nothing, a surviving bit carries 1 - h2(e), so the
    information simply scales with the survival probability.
    """
    return (1.0 - params.epsilon) * (1.0 - binary_entropy(params.e))


def mutual_info_eve_sifted(r: float) -> float:
    """Eve's information per sifted detected bit: 1 / (1 + r).

    A sifted click came from a basis-matched interception (Eve knows the
    bit) with probability p_par / (p_par + p_perp), else her record is
    uncorrelated.
    """
    if r < 0:
        raise ValueError(f"ratio must be >= 0, got {r}")
    return 1.0 / (1.0 + r)


def mutual_info_bob_sifted(r: float) -> float:
    """Bob's information per sifted bit: 1 - h2(e_obs(r))."""
    return 1.0 - binary_entropy(e_obs(r))


def r_bound(lambda_par_cps: float, lambda_perp_cps: float, curve: DeadTimeCurve) -> float:
    """Conservative suppression-ratio bound from the linear availability model:

        (1 - lambda_perp * t_d(lambda_perp)) / (1 - lambda_par * t_d(lambda_par))

    Oriented so that heavier orthogonal-path loading drives the bound down,
    consistent with r = p_perp / p_parallel.  Both rates must sit below
    saturation of the linear model.
    """
    busy_perp = busy_fraction(lambda_perp_cps, curve)
    busy_par = busy_fraction(lambda_par_cps, curve)
    for name, busy in (("lambda_perp", busy_perp), ("lambda_par", busy_par)):
        if busy >= 1.0:
            raise SaturationError(
                f"{name} saturates the linear availability model (busy fraction {busy:.4f})"
            )
    return (1.0 - busy_perp) / (1.0 - busy_par)


@dataclass(frozen=True)
class StealthScanRow:
    """One cell of the loading-rate scan; valid is False where the linear
    model saturates (r_bound is then meaningless and stealthy is False)."""

    lambda_par_cps: float
    lambda_perp_cps: float
    r_bound: float
    stealthy: bool
    valid: bool = True


def stealth_scan(
    lambda_par_list,
    lambda_perp_grid,
    curve: DeadTimeCurve,
    e_abort: float = 0.11,
) -> list[StealthScanRow]:
    """Evaluate the conservative bound over a Cartesian loading-rate grid.

    A row is stealthy when its bound sits below the threshold ratio for the
    given abort QBER; rows outside the linear model's validity are flagged,
    not dropped.
    """
    par_list = list(lambda_par_list)
    perp_list = list(lambda_perp_grid)
    if not par_list or not perp_list:
        raise ValueError("scan grids must not be empty")
    threshold = r_threshold(e_abort)
    rows = []
    for lam_par in par_list:
        for lam_perp in perp_list:
            try:
                bound = r_bound(lam_par, lam_perp, curve)
            except SaturationError:
                rows.append(StealthScanRow(lam_par, lam_perp, float("nan"), False, valid=False))
            else:
                rows.append(StealthScanRow(lam_par, lam_perp, bound, bound < threshold))
    return rows


def write_stealth_csv(rows, path, e_abort: float = 0.11) -> None:
    """Scan CSV with schema lambda_par_cps,lambda_perp_cps,r_bound,stealthy."""
    with Path(path).open("w", newline="") as fh:
        fh.write(f"# r_threshold={r_threshold(e_abort)!r} e_abort={e_abort!r}\n")
        writer = csv.writer(fh)
        writer.writerow(["lambda_par_cps", "lambda_perp_cps", "r_bound", "stealthy"])
        for row in rows:
            writer.writerow([
                repr(float(row.lambda_par_cps)),
                repr(float(row.lambda_perp_cps)),
                repr(float(row.r_bound)),
                str(row.stealthy).lower(),
            ])


def mutual_info_curve(r_values) -> list[tuple[float, float, float]]:
    """(r, I(A;B), I(A;E)) triples for a grid of suppression ratios."""
    return [
        (float(r), mutual_info_bob_sifted(float(r)), mutual_info_eve_sifted(float(r)))
        for r in r_values
    ]


def write_mutual_info_csv(triples, path, e_abort: float = 0.11) -> None:
    """Information-curve CSV with schema r,i_ab,i_ae and the stealth
    threshold recorded as comment metadata."""
    with Path(path).open("w", newline="") as fh:
        fh.write(f"# r_threshold={r_threshold(e_abort)!r} e_abort={e_abort!r}\n")
        writer = csv.writer(fh)
        writer.writerow(["r", "i_ab", "i_ae"])
        for r, i_ab, i_ae in triples:
            writer.writerow([repr(r), repr(i_ab), repr(i_ae)])
