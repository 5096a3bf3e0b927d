"""Headless trial and suite runners behind the CLI.

A trial drives one session to termination with a pilot and returns the log
plus its metrics report; a suite runs several trials (optionally in parallel
worker processes) and aggregates the four rate metrics plus the DoA error
into a rates table with one row per trial plus the mean row.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

from .evaluation import ConfusionCounts, Metrics, TrialReport, metrics, trial_metrics
from .pilots import Pilot, WaypointPilot, make_pilot
from .session import Scenario, Session, SessionConfig, apply_noise_mode, load_scenario
from .triallog import TrialLog
from .vehicle import FlcCommand

# Patrol routes through the default maze, used when a suite asks for waypoint
# trials without giving explicit waypoints. Both transit quickly into the
# AP wing and then orbit it at moderate range, dodging the kiosk and shelves.
# Ray-petal waypoint lists: each petal runs out -> in -> out along a ray
# aimed straight at the access point, so the bearing stays constant along
# the leg and the trailing averaging window causes no angular lag. Petal
# transitions happen at the far radius. Lists fill a 3-minute trial with
# dwells at every stop; no loop closing needed.
DEFAULT_ROUTES: dict[str, tuple[tuple[float, float], ...]] = {
    "petal-west": (
        (5.56, 4.09),
        (7.61, 5.52),
        (5.56, 4.09),
        (5.52, 5.57),
        (7.36, 6.06),
        (5.52, 5.57),
        (5.62, 7.41),
        (7.36, 6.94),
        (5.62, 7.41),
        (6.95, 8.55),
        (7.80, 7.70),
        (6.95, 8.55),
    ),
    "petal-east": (
        (8.0, 2.6),
        (9.73, 2.36),
        (9.30, 4.83),
        (9.73, 2.36),
        (11.62, 3.88),
        (10.20, 5.30),
        (11.62, 3.88),
        (11.60, 6.50),
        (10.70, 6.50),
        (11.60, 6.50),
        (10.98, 8.48),
        (10.20, 7.70),
        (10.98, 8.48),
    ),
}


def run_trial(
    scenario: Scenario,
    pilot: Pilot,
    seed: int = 0,
    config: SessionConfig | None = None,
    max_ticks: int | None = None,
) -> tuple[TrialLog, TrialReport]:
    """Drive a session to termination and report on the resulting log."""
    if isinstance(pilot, WaypointPilot):
        fld = scenario.build_field(0)
        for w in pilot.waypoints:
            if not fld.contains(w):
                raise ValueError(f"waypoint {w} outside map bounds")
    session = Session(scenario, seed=seed, config=config)
    pilot.reset(session)
    cmd = FlcCommand()
    rss_every = session.config.rss_every
    while not session.terminal:
        session.tick(cmd)
        if session.tick_index % rss_every == 0:
            cmd = pilot.command(session)
        if max_ticks is not None and session.tick_index >= max_ticks:
            break
    report = trial_metrics(session.log)
    return session.log, report


@dataclass(frozen=True)
class TrialSpec:
    name: str
    pilot_kind: str
    seed: int
    pilot_params: dict = field(default_factory=dict)


@dataclass
class SuiteReport:
    trials: list[tuple[str, TrialReport]]
    failures: list[tuple[str, str]]

    @property
    def pooled_counts(self) -> ConfusionCounts:
        total = ConfusionCounts()
        for _, rep in self.trials:
            total.add(rep.counts)
        return total

    @property
    def mean_rates(self) -> Metrics:
        """Mean of the per-trial rates, ignoring undefined entries."""

        def mean_of(attr: str) -> float | None:
            vals = [
                getattr(rep.rates, attr)
                for _, rep in self.trials
                if getattr(rep.rates, attr) is not None
            ]
            return sum(vals) / len(vals) if vals else None

        return Metrics(
            sensitivity=mean_of("sensitivity"),
            specificity=mean_of("specificity"),
            precision=mean_of("precision"),
            accuracy=mean_of("accuracy"),
        )

    @property
    def pooled_rates(self) -> Metrics:
        return metrics(self.pooled_counts)

    def doa_mean_error_los(self) -> float | None:
        """Mean absolute DoA error over all LOS samples of all trials."""
        total, n = 0.0, 0
        for _, rep in self.trials:
            if rep.doa_mean_error_los is not None:
                total += rep.doa_mean_error_los * rep.doa_samples_los
                n += rep.doa_samples_los
        return total / n if n else None

    @property
    def connection_losses(self) -> int:
        return sum(1 for _, rep in self.trials if rep.connection_lost)

    def to_dict(self) -> dict:
        pooled = self.pooled_rates
        mean = self.mean_rates
        return {
            "trials": {name: rep.to_dict() for name, rep in self.trials},
            "failures": dict(self.failures),
            "mean": {
                "sensitivity": mean.sensitivity,
                "specificity": mean.specificity,
                "precision": mean.precision,
                "accuracy": mean.accuracy,
            },
            "pooled": {
                "sensitivity": pooled.sensitivity,
                "specificity": pooled.specificity,
                "precision": pooled.precision,
                "accuracy": pooled.accuracy,
            },
            "doa_mean_error_los_rad": self.doa_mean_error_los(),
            "connection_losses": self.connection_losses,
            "mean_distance_m": (
                sum(rep.distance for _, rep in self.trials) / len(self.trials)
                if self.trials
                else None
            ),
            "mean_covered_cells": (
                sum(rep.visited_cells for _, rep in self.trials) / len(self.trials)
                if self.trials
                else None
            ),
        }

    def to_table(self) -> str:
        from .evaluation import format_rates_table

        rows = [(name, rep.rates) for name, rep in self.trials]
        rows.append(("Mean", self.mean_rates))
        lines = [format_rates_table(rows)]
        doa = self.doa_mean_error_los()
        if doa is not None:
            lines.append(f"\nDoA mean |error| (LOS): {doa:.3f} rad "
                         f"({math.degrees(doa):.1f} deg)")
        lines.append(f"Connection losses: {self.connection_losses}/{len(self.trials)}")
        return "\n".join(lines)


def default_suite_specs(count: int = 8, base_seed: int = 300) -> list[TrialSpec]:
    """Alternating gradient-follower and waypoint trials, distinct seeds."""
    specs = []
    routes = list(DEFAULT_ROUTES.values())
    for i in range(count):
        if i % 2 == 0:
            specs.append(TrialSpec(f"trial{i + 1}", "gradient", seed=base_seed + i))
        else:
            specs.append(
                TrialSpec(
                    f"trial{i + 1}",
                    "waypoint",
                    seed=base_seed + i,
                    pilot_params={"waypoints": routes[(i // 2) % len(routes)], "loop": True},
                )
            )
    return specs


def _run_spec(args: tuple[str, str | dict, TrialSpec]) -> tuple[str, TrialReport]:
    scenario_ref, noise, spec = args
    scenario = load_scenario(scenario_ref)
    scenario = apply_noise_mode(scenario, noise)
    pilot = make_pilot(spec.pilot_kind, seed=spec.seed, **spec.pilot_params)
    _, report = run_trial(scenario, pilot, seed=spec.seed)
    return spec.name, report


def run_suite(
    scenario_ref: str,
    specs: list[TrialSpec],
    noise: str | dict = "default",
    workers: int = 1,
) -> SuiteReport:
    """Run all trials; failures are recorded and do not stop the suite."""
    if not specs:
        raise ValueError("suite needs at least one trial")
    jobs = [(scenario_ref, noise, spec) for spec in specs]
    results: list[tuple[str, TrialReport]] = []
    failures: list[tuple[str, str]] = []
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = {pool.submit(_run_spec, job): job[2].name for job in jobs}
            for fut, name in futures.items():
                try:
                    results.append(fut.result())
                except Exception as exc:  # noqa: BLE001 - suite keeps going
                    failures.append((name, str(exc)))
    else:
        for job in jobs:
            try:
                results.append(_run_spec(job))
            except Exception as exc:  # noqa: BLE001
                failures.append((job[2].name, str(exc)))
    order = {spec.name: i for i, spec in enumerate(specs)}
    results.sort(key=lambda item: order[item[0]])
    return SuiteReport(trials=results, failures=failures)
