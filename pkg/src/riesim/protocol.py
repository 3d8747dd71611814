"""Round-by-round BBM92/BB84 engine with active basis choice and sifting.

Each round: Alice's state is drawn (or fixed for branch conditioning), the
adversary transform is applied, Bob picks a basis and the signal routes
through the polarizing beam splitter, and the signal detector clicks with a
probability set by its loading-dependent availability.  Rounds where Alice's
and Bob's bases match and a click occurred enter the sifted key; the run
aborts when the observed QBER reaches the configured threshold.

The entanglement-based protocol is simulated in its effective
prepare-and-measure reduction: Alice's measurement on her half defines the
state entering the channel, which is the picture all the closed-form
predictions are written in.

Every round consumes exactly seven uniform variates in a fixed order
(alice basis, alice bit, eve basis, eve Born outcome, bob basis, routing,
click), so the scalar `run_round` and the vectorized simulation kernel
produce identical streams, and rounds can be chunked across workers without
changing the result.
"""

from __future__ import annotations

import csv
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .adversary import (
    AttackConfig,
    AttackMode,
    deterministic_suppression,
    intercept,
    loading_for_branch,
)
from .detector import (
    AvailabilityModel,
    DeadTimeCurve,
    availability,
    default_dead_time_curve,
)
from .quantum import Basis, PolarizationState, projection_prob, route_through_pbs

__all__ = [
    "ProtocolConfig",
    "RoundRecord",
    "BranchStats",
    "SimulationReport",
    "run_round",
    "run_simulation",
    "branch_table",
    "resolve_outcome",
]

CHUNK_SIZE = 1 << 16

_BASES = (Basis.Z, Basis.X)


@dataclass(frozen=True)
class ProtocolConfig:
    """Receiver and run parameters for one simulation."""

    n_rounds: int
    p0: float
    seed: int
    abort_threshold: float = 0.11
    basis_prior: float = 0.5
    dead_time_curve: DeadTimeCurve = field(default_factory=default_dead_time_curve)
    availability_model: AvailabilityModel = AvailabilityModel.EXPONENTIAL
    transmission: float = 1.0
    background_rate_cps: float = 0.0
    fixed_alice: PolarizationState | None = None

    def __post_init__(self):
        if self.n_rounds < 1:
            raise ValueError("n_rounds must be >= 1")
        if not 0.0 < self.p0 <= 1.0:
            raise ValueError(f"p0 must be in (0, 1], got {self.p0}")
        if not 0.0 < self.abort_threshold < 0.5:
            raise ValueError("abort threshold must be in (0, 0.5)")
        if not 0.0 < self.basis_prior < 1.0:
            raise ValueError("basis prior must be in (0, 1)")
        if not 0.0 < self.transmission <= 1.0:
            raise ValueError("transmission must be in (0, 1]")
        if self.background_rate_cps < 0:
            raise ValueError("background rate must be >= 0")


@dataclass(frozen=True)
class RoundRecord:
    """Everything observable about one protocol round.

    outcome is Bob's bit, or None for an erasure (no click); error is defined
    only on sifted rounds.
    """

    alice_basis: Basis
    alice_bit: int
    eve_basis: Basis | None
    eve_bit: int | None
    bob_basis: Basis
    outcome: int | None
    sifted: bool
    error: bool | None


@dataclass(frozen=True)
class BranchStats:
    """Raw counts for one (eve_basis, eve_bit, bob_basis) attack branch."""

    n_rounds: int
    n_clicks: int
    n_sifted: int
    n_errors: int

    @property
    def click_rate(self) -> float | None:
        return self.n_clicks / self.n_rounds if self.n_rounds else None

    @property
    def conditional_error_rate(self) -> float | None:
        return self.n_errors / self.n_sifted if self.n_sifted else None


@dataclass(frozen=True)
class SimulationReport:
    """Aggregated outcome of a run; byte-identical per (config, seed)."""

    n_rounds: int
    n_clicks: int
    n_sifted: int
    n_errors: int
    n_sifted_eve_match: int | None
    qber_observed: float | None
    sift_probability: float
    erasure_probability: float
    abort: bool
    attack_mode: AttackMode
    seed: int
    fixed_alice: PolarizationState | None
    per_branch_stats: dict[tuple[Basis, int, Basis], BranchStats] | None

    def to_text(self) -> str:
        lines = [
            f"n_rounds: {self.n_rounds}",
            f"n_clicks: {self.n_clicks}",
            f"n_sifted: {self.n_sifted}",
            f"n_errors: {self.n_errors}",
            f"qber_observed: {'none' if self.qber_observed is None else repr(self.qber_observed)}",
            f"sift_probability: {self.sift_probability!r}",
            f"erasure_probability: {self.erasure_probability!r}",
            f"abort: {str(self.abort).lower()}",
            f"attack_mode: {self.attack_mode.value}",
            f"seed: {self.seed}",
            f"fixed_alice: {'none' if self.fixed_alice is None else str(self.fixed_alice)}",
        ]
        if self.n_sifted_eve_match is not None:
            lines.append(f"n_sifted_eve_match: {self.n_sifted_eve_match}")
        if self.per_branch_stats is not None:
            lines.append("branches:")
            for key in sorted(self.per_branch_stats, key=_branch_sort_key):
                stats = self.per_branch_stats[key]
                eve_basis, eve_bit, bob_basis = key
                lines.append(
                    f"  {eve_basis.value}{eve_bit} bob={bob_basis.value}: "
                    f"rounds={stats.n_rounds} clicks={stats.n_clicks} "
                    f"sifted={stats.n_sifted} errors={stats.n_errors}"
                )
        return "\n".join(lines) + "\n"

    def write_text(self, path) -> None:
        Path(path).write_text(self.to_text())

    def write_branch_csv(self, path) -> None:
        """One row per attack branch (requires an active attack)."""
        if self.per_branch_stats is None:
            raise ValueError("no branch statistics: run used attack mode 'none'")
        with Path(path).open("w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(
                ["eve_basis", "eve_bit", "bob_basis", "n_rounds", "n_clicks",
                 "click_rate", "n_sifted", "n_errors", "conditional_error_rate"]
            )
            for key in sorted(self.per_branch_stats, key=_branch_sort_key):
                stats = self.per_branch_stats[key]
                eve_basis, eve_bit, bob_basis = key
                writer.writerow([
                    eve_basis.value, eve_bit, bob_basis.value,
                    stats.n_rounds, stats.n_clicks,
                    "" if stats.click_rate is None else repr(stats.click_rate),
                    stats.n_sifted, stats.n_errors,
                    "" if stats.conditional_error_rate is None else repr(stats.conditional_error_rate),
                ])


def _branch_sort_key(key):
    eve_basis, eve_bit, bob_basis = key
    return (eve_basis.value, eve_bit, bob_basis.value)


def resolve_outcome(fired_detectors, rng) -> int | None:
    """Squash a round's set of fired detectors to a bit or an erasure.

    A double click (both detectors firing) resolves to a uniformly random
    bit and still counts as a click; this keeps the 50% conditional error of
    orthogonally resent rounds intact.  Under the default noise model (noise
    loads detectors but never clicks in the signal window) at most one
    detector sees the signal, so the double branch is a convention, not a
    frequent path.
    """
    fired = list(fired_detectors)
    if not fired:
        return None
    if len(fired) == 1:
        return fired[0]
    return int(rng.random() < 0.5)


def _branch_availabilities(config: ProtocolConfig, attack: AttackConfig) -> tuple[float, float]:
    """(aligned, orthogonal) availability of the signal-path detector."""
    bg = config.background_rate_cps
    curve = config.dead_time_curve
    model = config.availability_model
    avail_bg = availability(bg, curve, model)
    if attack.mode is AttackMode.RIE_NON_DETERMINISTIC:
        return avail_bg, availability(bg + attack.lambda_perp_cps, curve, model)
    if attack.mode is AttackMode.RIE_DETERMINISTIC:
        step = deterministic_suppression(attack.delta_s, curve, bg, 1.0)
        return avail_bg, avail_bg * step
    return avail_bg, avail_bg


def run_round(config: ProtocolConfig, attack: AttackConfig, rng) -> RoundRecord:
    """Play a single protocol round on the given random stream."""
    avail_aligned, avail_orth = _branch_availabilities(config, attack)

    alice_basis = Basis.Z if rng.random() < config.basis_prior else Basis.X
    alice_bit = int(rng.random() < 0.5)
    if config.fixed_alice is not None:
        alice_basis = config.fixed_alice.basis
        alice_bit = config.fixed_alice.bit
    alice_state = PolarizationState(alice_basis, alice_bit)

    if attack.mode is AttackMode.NONE:
        rng.random()  # eve basis slot
        rng.random()  # eve Born slot
        action = None
        signal_state = alice_state
    else:
        action = intercept(alice_state, attack, rng)
        signal_state = action.resent_state

    bob_basis = Basis.Z if rng.random() < config.basis_prior else Basis.X
    detector = route_through_pbs(signal_state, bob_basis, rng)

    if attack.mode is AttackMode.RIE_NON_DETERMINISTIC:
        loading = loading_for_branch(action, bob_basis, attack)[detector]
        avail = availability(
            config.background_rate_cps + loading,
            config.dead_time_curve,
            config.availability_model,
        )
    elif action is None or bob_basis is action.eve_basis:
        avail = avail_aligned
    else:
        avail = avail_orth
    p_click = config.transmission * config.p0 * avail
    clicked = rng.random() < p_click

    outcome = resolve_outcome([detector] if clicked else [], rng)
    sifted = clicked and alice_basis is bob_basis
    error = (outcome != alice_bit) if sifted else None
    return RoundRecord(
        alice_basis=alice_basis,
        alice_bit=alice_bit,
        eve_basis=None if action is None else action.eve_basis,
        eve_bit=None if action is None else action.eve_bit,
        bob_basis=bob_basis,
        outcome=outcome,
        sifted=sifted,
        error=error,
    )


@dataclass
class _ChunkCounts:
    n_clicks: int = 0
    n_sifted: int = 0
    n_errors: int = 0
    n_sifted_eve_match: int = 0
    branch_rounds: np.ndarray = field(default_factory=lambda: np.zeros(8, dtype=np.int64))
    branch_clicks: np.ndarray = field(default_factory=lambda: np.zeros(8, dtype=np.int64))
    branch_sifted: np.ndarray = field(default_factory=lambda: np.zeros(8, dtype=np.int64))
    branch_errors: np.ndarray = field(default_factory=lambda: np.zeros(8, dtype=np.int64))

    def add(self, other: "_ChunkCounts") -> None:
        self.n_clicks += other.n_clicks
        self.n_sifted += other.n_sifted
        self.n_errors += other.n_errors
        self.n_sifted_eve_match += other.n_sifted_eve_match
        self.branch_rounds += other.branch_rounds
        self.branch_clicks += other.branch_clicks
        self.branch_sifted += other.branch_sifted
        self.branch_errors += other.branch_errors


def _simulate_chunk(config: ProtocolConfig, attack: AttackConfig, n: int, rng) -> _ChunkCounts:
    """Vectorized evaluation of n rounds; stream-equivalent to run_round."""
    avail_aligned, avail_orth = _branch_availabilities(config, attack)
    u = rng.random((n, 7))

    alice_basis = (u[:, 0] >= config.basis_prior).astype(np.int8)  # 0 = Z, 1 = X
    alice_bit = (u[:, 1] < 0.5).astype(np.int8)
    if config.fixed_alice is not None:
        alice_basis.fill(0 if config.fixed_alice.basis is Basis.Z else 1)
        alice_bit.fill(config.fixed_alice.bit)

    attacking = attack.mode is not AttackMode.NONE
    if attacking:
        eve_basis = (u[:, 2] >= attack.eve_basis_prior).astype(np.int8)
        born_one = np.where(eve_basis == alice_basis, alice_bit, 0.5)
        eve_bit = (u[:, 3] < born_one).astype(np.int8)
        signal_basis, signal_bit = eve_basis, eve_bit
    else:
        signal_basis, signal_bit = alice_basis, alice_bit

    bob_basis = (u[:, 4] >= config.basis_prior).astype(np.int8)
    route_one = np.where(signal_basis == bob_basis, signal_bit, 0.5)
    detector = (u[:, 5] < route_one).astype(np.int8)

    if attacking:
        aligned = bob_basis == eve_basis
    else:
        aligned = np.ones(n, dtype=bool)
    p_click = config.transmission * config.p0 * np.where(aligned, avail_aligned, avail_orth)
    clicked = u[:, 6] < p_click

    sifted = clicked & (alice_basis == bob_basis)
    errors = sifted & (detector != alice_bit)

    counts = _ChunkCounts(
        n_clicks=int(clicked.sum()),
        n_sifted=int(sifted.sum()),
        n_errors=int(errors.sum()),
        n_sifted_eve_match=int((sifted & (eve_basis == alice_basis)).sum()) if attacking else 0,
    )
    if attacking:
        branch = (eve_basis.astype(np.int64) * 4 + eve_bit * 2 + bob_basis).astype(np.int64)
        counts.branch_rounds = np.bincount(branch, minlength=8)
        counts.branch_clicks = np.bincount(branch[clicked], minlength=8)
        counts.branch_sifted = np.bincount(branch[sifted], minlength=8)
        counts.branch_errors = np.bincount(branch[errors], minlength=8)
    return counts


def _chunk_sizes(n_rounds: int) -> list[int]:
    full, rem = divmod(n_rounds, CHUNK_SIZE)
    return [CHUNK_SIZE] * full + ([rem] if rem else [])


def _run_chunk_job(args) -> _ChunkCounts:
    config, attack, chunk_index, n = args
    rng = np.random.default_rng(np.random.SeedSequence([config.seed, chunk_index]))
    return _simulate_chunk(config, attack, n, rng)


def run_simulation(
    config: ProtocolConfig, attack: AttackConfig, workers: int = 1
) -> SimulationReport:
    """Run the full Monte Carlo and aggregate into a report.

    Chunks use substreams derived from (seed, chunk index), so the report is
    identical for any worker count, including sequential execution.
    """
    sizes = _chunk_sizes(config.n_rounds)
    jobs = [(config, attack, i, n) for i, n in enumerate(sizes)]
    total = _ChunkCounts()
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            for counts in pool.map(_run_chunk_job, jobs):
                total.add(counts)
    else:
        for job in jobs:
            total.add(_run_chunk_job(job))

    attacking = attack.mode is not AttackMode.NONE
    qber = total.n_errors / total.n_sifted if total.n_sifted else None
    per_branch = None
    if attacking:
        per_branch = {}
        for code in range(8):
            key = (_BASES[code >> 2], (code >> 1) & 1, _BASES[code & 1])
            per_branch[key] = BranchStats(
                n_rounds=int(total.branch_rounds[code]),
                n_clicks=int(total.branch_clicks[code]),
                n_sifted=int(total.branch_sifted[code]),
                n_errors=int(total.branch_errors[code]),
            )
    return SimulationReport(
        n_rounds=config.n_rounds,
        n_clicks=total.n_clicks,
        n_sifted=total.n_sifted,
        n_errors=total.n_errors,
        n_sifted_eve_match=total.n_sifted_eve_match if attacking else None,
        qber_observed=qber,
        sift_probability=total.n_sifted / config.n_rounds,
        erasure_probability=1.0 - total.n_clicks / config.n_rounds,
        abort=qber is not None and qber >= config.abort_threshold,
        attack_mode=attack.mode,
        seed=config.seed,
        fixed_alice=config.fixed_alice,
        per_branch_stats=per_branch,
    )


@dataclass(frozen=True)
class BranchRow:
    """One rendered row of the fixed-Alice branch table."""

    eve_basis: Basis
    eve_bit: int
    bob_basis: Basis
    n_rounds: int
    click_rate: float | None
    kept: bool
    conditional_error_rate: float | None
    insufficient_data: bool


def branch_table(report: SimulationReport, fixed_alice: PolarizationState) -> list[BranchRow]:
    """Per-branch click and conditional-error rates for a fixed Alice state.

    Requires the report to have been collected with that same Alice-state
    conditioning; a branch with no rounds is flagged rather than dropped.
    """
    if report.per_branch_stats is None:
        raise ValueError("report carries no branch statistics (attack mode 'none')")
    if report.fixed_alice != fixed_alice:
        raise ValueError(
            f"report was conditioned on {report.fixed_alice}, not {fixed_alice}"
        )
    rows = []
    for key in sorted(report.per_branch_stats, key=_branch_sort_key):
        stats = report.per_branch_stats[key]
        eve_basis, eve_bit, bob_basis = key
        rows.append(
            BranchRow(
                eve_basis=eve_basis,
                eve_bit=eve_bit,
                bob_basis=bob_basis,
                n_rounds=stats.n_rounds,
                click_rate=stats.click_rate,
                kept=bob_basis is fixed_alice.basis,
                conditional_error_rate=stats.conditional_error_rate,
                insufficient_data=stats.n_rounds == 0,
            )
        )
    return rows
