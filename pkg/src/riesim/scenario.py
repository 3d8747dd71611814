"""Scenario configuration: one JSON file describing a full run.

The file is schema-validated before anything executes; unknown keys are
rejected so a typo cannot silently fall back to a default.  Command-line
flags override the corresponding file values.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

from .adversary import AttackConfig, AttackMode
from .detector import AvailabilityModel, DeadTimeCurve, default_dead_time_curve
from .protocol import ProtocolConfig
from .quantum import Basis, PolarizationState
from .timetag import DEFAULT_BIN_WIDTH_S, DEFAULT_MAX_GAP_S, DEFAULT_MIN_COUNT

__all__ = ["ScenarioConfig", "ScenarioError", "SweepSettings", "ScanSettings", "MutualInfoSettings"]


class ScenarioError(ValueError):
    """Configuration file failed validation."""


def _take(section: dict, allowed, where: str) -> None:
    unknown = set(section) - set(allowed)
    if unknown:
        raise ScenarioError(f"unknown key(s) in {where}: {', '.join(sorted(unknown))}")


@dataclass(frozen=True)
class SweepSettings:
    rates_cps: tuple[float, ...] = (1e6, 5e6, 20e6, 40e6)
    duration_s: float = 0.05
    bin_width_s: float = DEFAULT_BIN_WIDTH_S
    max_gap_s: float = DEFAULT_MAX_GAP_S
    min_count: int = DEFAULT_MIN_COUNT


@dataclass(frozen=True)
class ScanSettings:
    lambda_par_cps: tuple[float, ...] = (1e6, 2e6, 5e6, 10e6)
    lambda_perp_cps: tuple[float, ...] = tuple(0.5e6 * i for i in range(1, 61))
    e_abort: float = 0.11


@dataclass(frozen=True)
class MutualInfoSettings:
    r_start: float = 0.0
    r_stop: float = 1.0
    r_step: float = 0.01
    e_abort: float = 0.11

    def grid(self) -> list[float]:
        values = []
        k = 0
        while True:
            r = self.r_start + k * self.r_step
            if r > self.r_stop + 1e-12:
                break
            values.append(round(r, 12))
            k += 1
        return values


@dataclass(frozen=True)
class ScenarioConfig:
    seed: int = 1
    out: str = "."
    workers: int = 1
    curve: DeadTimeCurve = field(default_factory=default_dead_time_curve)
    protocol: dict = field(default_factory=dict)
    attack: AttackConfig = field(default_factory=AttackConfig)
    sweep: SweepSettings = field(default_factory=SweepSettings)
    scan: ScanSettings = field(default_factory=ScanSettings)
    mutualinfo: MutualInfoSettings = field(default_factory=MutualInfoSettings)

    def protocol_config(self) -> ProtocolConfig:
        """Materialize the protocol section (requires n_rounds and p0)."""
        section = dict(self.protocol)
        if "n_rounds" not in section or "p0" not in section:
            raise ScenarioError("protocol section needs at least n_rounds and p0")
        try:
            return ProtocolConfig(seed=self.seed, dead_time_curve=self.curve, **section)
        except (TypeError, ValueError) as exc:
            raise ScenarioError(f"invalid protocol section: {exc}") from exc


def _parse_curve(section, base_dir: Path) -> DeadTimeCurve:
    if section is None:
        return default_dead_time_curve()
    _take(section, {"default", "table", "csv"}, "dead_time_curve")
    given = [k for k in ("default", "table", "csv") if section.get(k)]
    if len(given) != 1:
        raise ScenarioError("dead_time_curve needs exactly one of: default, table, csv")
    if given[0] == "default":
        return default_dead_time_curve()
    try:
        if given[0] == "table":
            return DeadTimeCurve.from_points(section["table"])
        return DeadTimeCurve.from_csv(base_dir / section["csv"])
    except (TypeError, ValueError, OSError) as exc:
        raise ScenarioError(f"invalid dead_time_curve: {exc}") from exc


def _parse_protocol(section) -> dict:
    if section is None:
        return {}
    allowed = {
        "n_rounds", "p0", "abort_threshold", "basis_prior", "availability_model",
        "transmission", "background_rate_cps", "fixed_alice",
    }
    _take(section, allowed, "protocol")
    out = dict(section)
    if "availability_model" in out:
        try:
            out["availability_model"] = AvailabilityModel(out["availability_model"])
        except ValueError:
            raise ScenarioError(
                f"unknown availability_model {out['availability_model']!r}"
            ) from None
    fixed = out.get("fixed_alice")
    if fixed is not None:
        if not isinstance(fixed, (list, tuple)) or len(fixed) != 2:
            raise ScenarioError(f'fixed_alice must be ["Z"|"X", 0|1] or null, got {fixed!r}')
        try:
            out["fixed_alice"] = PolarizationState(Basis(fixed[0]), int(fixed[1]))
        except (TypeError, ValueError):
            raise ScenarioError(
                f'fixed_alice must be ["Z"|"X", 0|1] or null, got {fixed!r}'
            ) from None
    return out


def _parse_attack(section) -> AttackConfig:
    if section is None:
        return AttackConfig()
    allowed = {"mode", "lambda_parallel_cps", "lambda_perp_cps", "delta_s", "eve_basis_prior"}
    _take(section, allowed, "attack")
    out = dict(section)
    if "mode" in out:
        try:
            out["mode"] = AttackMode(out["mode"])
        except ValueError:
            raise ScenarioError(f"unknown attack mode {out['mode']!r}") from None
    try:
        return AttackConfig(**out)
    except (TypeError, ValueError) as exc:
        raise ScenarioError(f"invalid attack section: {exc}") from exc


def _parse_sweep(section) -> SweepSettings:
    if section is None:
        return SweepSettings()
    allowed = {"rates_cps", "duration_s", "bin_width_s", "max_gap_s", "min_count"}
    _take(section, allowed, "sweep")
    out = dict(section)
    if "rates_cps" in out:
        out["rates_cps"] = tuple(float(r) for r in out["rates_cps"])
    try:
        return SweepSettings(**out)
    except TypeError as exc:
        raise ScenarioError(f"invalid sweep section: {exc}") from exc


def _parse_scan(section) -> ScanSettings:
    if section is None:
        return ScanSettings()
    allowed = {"lambda_par_cps", "lambda_perp_cps", "lambda_perp_grid", "e_abort"}
    _take(section, allowed, "scan")
    out = {}
    if "lambda_par_cps" in section:
        out["lambda_par_cps"] = tuple(float(r) for r in section["lambda_par_cps"])
    if "lambda_perp_cps" in section and "lambda_perp_grid" in section:
        raise ScenarioError("scan: give lambda_perp_cps or lambda_perp_grid, not both")
    if "lambda_perp_cps" in section:
        out["lambda_perp_cps"] = tuple(float(r) for r in section["lambda_perp_cps"])
    if "lambda_perp_grid" in section:
        grid = section["lambda_perp_grid"]
        _take(grid, {"start_cps", "stop_cps", "num"}, "scan.lambda_perp_grid")
        try:
            start, stop, num = float(grid["start_cps"]), float(grid["stop_cps"]), int(grid["num"])
        except (KeyError, TypeError, ValueError):
            raise ScenarioError("scan.lambda_perp_grid needs start_cps, stop_cps, num") from None
        if num < 1 or stop < start:
            raise ScenarioError("scan.lambda_perp_grid must have num >= 1 and stop >= start")
        step = (stop - start) / (num - 1) if num > 1 else 0.0
        out["lambda_perp_cps"] = tuple(start + i * step for i in range(num))
    if "e_abort" in section:
        out["e_abort"] = float(section["e_abort"])
    try:
        return ScanSettings(**out)
    except TypeError as exc:
        raise ScenarioError(f"invalid scan section: {exc}") from exc


def _parse_mutualinfo(section) -> MutualInfoSettings:
    if section is None:
        return MutualInfoSettings()
    allowed = {"r_start", "r_stop", "r_step", "e_abort"}
    _take(section, allowed, "mutualinfo")
    try:
        return MutualInfoSettings(**{k: float(v) for k, v in section.items()})
    except TypeError as exc:
        raise ScenarioError(f"invalid mutualinfo section: {exc}") from exc


def load_scenario(path=None, data: dict | None = None) -> ScenarioConfig:
    """Parse and validate a scenario, from a JSON file or an in-memory dict."""
    base_dir = Path(".")
    if path is not None:
        path = Path(path)
        base_dir = path.parent
        try:
            data = json.loads(path.read_text())
        except OSError as exc:
            raise ScenarioError(f"cannot read config {path}: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise ScenarioError(f"config {path} is not valid JSON: {exc}") from exc
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ScenarioError("config root must be a JSON object")
    allowed = {"seed", "out", "workers", "dead_time_curve", "protocol", "attack",
               "sweep", "scan", "mutualinfo"}
    _take(data, allowed, "config root")
    scan = _parse_scan(data.get("scan"))
    if not scan.lambda_par_cps or not scan.lambda_perp_cps:
        raise ScenarioError("scan grids must not be empty")
    mutualinfo = _parse_mutualinfo(data.get("mutualinfo"))
    if not mutualinfo.grid():
        raise ScenarioError("mutualinfo grid is empty")
    sweep = _parse_sweep(data.get("sweep"))
    if not sweep.rates_cps:
        raise ScenarioError("sweep.rates_cps must not be empty")
    return ScenarioConfig(
        seed=int(data.get("seed", 1)),
        out=str(data.get("out", ".")),
        workers=int(data.get("workers", 1)),
        curve=_parse_curve(data.get("dead_time_curve"), base_dir),
        protocol=_parse_protocol(data.get("protocol")),
        attack=_parse_attack(data.get("attack")),
        sweep=sweep,
        scan=scan,
        mutualinfo=mutualinfo,
    )
