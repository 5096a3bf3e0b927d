"""Quantitative verification: sign-consistency counts, rates and mission metrics.

The core check compares the scalar product of gradient estimate and odometer
velocity against the temporal derivative of the central-receiver RSS: when
the platform drives along the estimated direction of arrival the signal
should rise, and the confusion counts quantify how often it does. On top of
that the module computes the mission-level metrics used in reports: traveled
distance, grid coverage, RSS gain over the start value, DoA error against the
true bearing, and the connection-loss outcome.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

from .estimation import GradientEstimate
from .field import WallSegment
from .geometry import Point, segments_intersect, wrap_angle
from .triallog import TrialLog


def scalar_product(g: GradientEstimate, nu: Point) -> float:
    """Inner product of gradient and body velocity: positive = driving uphill."""
    return g.gx * nu[0] + g.gy * nu[1]


def temporal_derivative(series: list[float], ts: float) -> list[float]:
    """Forward differences over a uniformly sampled series (length n-1)."""
    if len(series) < 2:
        raise ValueError("need at least 2 samples")
    if ts <= 0.0:
        raise ValueError("sample interval must be > 0")
    return [(b - a) / ts for a, b in zip(series, series[1:])]


@dataclass(frozen=True)
class EvalConfig:
    tau: float = 0.1  # dead zone for the scalar product
    sample_interval: float = 0.2
    derivative_source: str = "filtered"  # filtered | ewma | raw central RSS

    def __post_init__(self) -> None:
        if self.tau <= 0.0:
            raise ValueError("tau must be > 0")
        if self.derivative_source not in ("filtered", "ewma", "raw"):
            raise ValueError("derivative_source must be filtered, ewma or raw")


@dataclass
class ConfusionCounts:
    tp: int = 0
    fp: int = 0
    tn: int = 0
    fn: int = 0
    skipped: int = 0

    def total_classified(self) -> int:
        return self.tp + self.fp + self.tn + self.fn

    def add(self, other: "ConfusionCounts") -> None:
        self.tp += other.tp
        self.fp += other.fp
        self.tn += other.tn
        self.fn += other.fn
        self.skipped += other.skipped


def classify(p: float, drc: float, cfg: EvalConfig) -> str | None:
    """Label one sample; None when |p| is inside the dead zone."""
    if abs(p) <= cfg.tau:
        return None
    if p > cfg.tau:
        return "tp" if drc > 0.0 else "fp"
    return "tn" if drc <= 0.0 else "fn"


def confusion_update(
    counts: ConfusionCounts, p: float, drc: float, cfg: EvalConfig
) -> ConfusionCounts:
    label = classify(p, drc, cfg)
    if label is None:
        counts.skipped += 1
    else:
        setattr(counts, label, getattr(counts, label) + 1)
    return counts


@dataclass(frozen=True)
class Metrics:
    sensitivity: float | None
    specificity: float | None
    precision: float | None
    accuracy: float | None

    def as_tuple(self) -> tuple[float | None, ...]:
        return (self.sensitivity, self.specificity, self.precision, self.accuracy)


def metrics(counts: ConfusionCounts) -> Metrics:
    """Sensitivity, specificity, precision, accuracy; None when undefined."""

    def ratio(num: int, den: int) -> float | None:
        return num / den if den > 0 else None

    return Metrics(
        sensitivity=ratio(counts.tp, counts.tp + counts.fn),
        specificity=ratio(counts.tn, counts.fp + counts.tn),
        precision=ratio(counts.tp, counts.tp + counts.fp),
        accuracy=ratio(counts.tp + counts.tn, counts.total_classified()),
    )


def doa_error(est: float, truth: float) -> float:
    """Absolute angular error on the circle, in [0, pi]."""
    return abs(wrap_angle(est - truth))


@dataclass
class CoverageGrid:
    """Visit counts over square cells; mirrors the exploration coverage metric."""

    origin: Point = (0.0, 0.0)
    cell_size: float = 0.15
    bounds: tuple[Point, Point] | None = None
    counts: dict[tuple[int, int], int] = field(default_factory=dict)
    out_of_bounds: int = 0

    def visit(self, position: Point) -> None:
        if self.bounds is not None:
            (xmin, ymin), (xmax, ymax) = self.bounds
            if not (xmin <= position[0] <= xmax and ymin <= position[1] <= ymax):
                self.out_of_bounds += 1
                return
        cx = math.floor((position[0] - self.origin[0]) / self.cell_size)
        cy = math.floor((position[1] - self.origin[1]) / self.cell_size)
        self.counts[(cx, cy)] = self.counts.get((cx, cy), 0) + 1

    @property
    def visited_cells(self) -> int:
        return len(self.counts)

    @property
    def covered_area(self) -> float:
        return self.visited_cells * self.cell_size**2


def coverage_update(grid: CoverageGrid, position: Point) -> CoverageGrid:
    grid.visit(position)
    return grid


@dataclass(frozen=True)
class EvalSample:
    t: float
    p: float
    drc: float
    g: GradientEstimate
    nu: Point


@dataclass
class TrialReport:
    status: str
    execution_time: float
    distance: float
    visited_cells: int
    covered_area: float
    connection_lost: bool
    connection_loss_time: float | None
    rss_start: float
    rss_gain: float
    doa_mean_error_los: float | None
    doa_max_error_los: float | None
    doa_mean_error_nlos: float | None
    doa_samples_los: int
    doa_samples_nlos: int
    counts: ConfusionCounts
    rates: Metrics
    collisions: int
    symbols_found: list[str]
    samples: int

    def to_dict(self) -> dict:
        return {
            "status": self.status,
            "execution_time_s": self.execution_time,
            "distance_m": self.distance,
            "visited_cells": self.visited_cells,
            "covered_area_m2": self.covered_area,
            "connection_lost": self.connection_lost,
            "connection_loss_time_s": self.connection_loss_time,
            "rss_start_dbm": self.rss_start,
            "rss_gain_db": self.rss_gain,
            "doa_mean_error_los_rad": self.doa_mean_error_los,
            "doa_max_error_los_rad": self.doa_max_error_los,
            "doa_mean_error_nlos_rad": self.doa_mean_error_nlos,
            "doa_samples_los": self.doa_samples_los,
            "doa_samples_nlos": self.doa_samples_nlos,
            "confusion": {
                "tp": self.counts.tp,
                "fp": self.counts.fp,
                "tn": self.counts.tn,
                "fn": self.counts.fn,
                "skipped": self.counts.skipped,
            },
            "sensitivity": self.rates.sensitivity,
            "specificity": self.rates.specificity,
            "precision": self.rates.precision,
            "accuracy": self.rates.accuracy,
            "collisions": self.collisions,
            "symbols_found": self.symbols_found,
            "samples": self.samples,
        }


def _map_geometry(map_doc: dict) -> tuple[Point, tuple[WallSegment, ...], tuple[Point, Point]]:
    ap = (float(map_doc["ap"][0]), float(map_doc["ap"][1]))
    walls = tuple(
        WallSegment(
            p1=tuple(w["p1"]), p2=tuple(w["p2"]), attenuation_db=w["attenuation_db"]
        )
        for w in map_doc.get("walls", [])
    )
    b = map_doc["bounds"]
    bounds = ((float(b[0][0]), float(b[0][1])), (float(b[1][0]), float(b[1][1])))
    return ap, walls, bounds


def _is_los(position: Point, ap: Point, walls: tuple[WallSegment, ...]) -> bool:
    return not any(
        w.attenuation_db > 0.0 and segments_intersect(position, ap, w.p1, w.p2)
        for w in walls
    )


def eval_samples(log: TrialLog, cfg: EvalConfig | None = None) -> list[EvalSample]:
    """Per-sample scalar products and RSS derivatives from a trial log.

    When the derivative is taken over the window-filtered central RSS, two
    kinds of sample pairs are dropped because their difference is not a
    signal derivative: pairs straddling a window resize (means over
    different supports), and pairs whose window content mixes standing and
    driving phases (the windowed slope is near zero there regardless of the
    instantaneous motion, so its sign carries no information).
    """
    cfg = cfg or EvalConfig(sample_interval=log.header["config"]["rss_interval_s"])
    sample_recs = [r for r in log.records if r.get("rss") is not None]
    if len(sample_recs) < 2:
        return []
    key = {"filtered": "filt", "ewma": "ewma", "raw": "raw"}[cfg.derivative_source]
    rc = [r["rss"][key][4] for r in sample_recs]
    drc = temporal_derivative(rc, cfg.sample_interval)
    speeds = [math.hypot(r["odo"][3], r["odo"][4]) for r in sample_recs]
    windowed = cfg.derivative_source == "filtered"
    out = []
    for i, r in enumerate(sample_recs[:-1]):
        if r.get("g") is None:
            continue
        if windowed:
            if sample_recs[i + 1].get("win") != r.get("win"):
                continue
            win = int(r.get("win") or 1)
            if i + 1 < win:
                continue  # window still filling after power-on
            if win > 1:
                lo = i + 1 - win
                moving = sum(1 for v in speeds[lo : i + 1] if v > 0.03)
                frac = moving / win
                if 0.15 < frac < 0.85:
                    continue
        g = GradientEstimate(gx=r["g"][0], gy=r["g"][1])
        nu = (r["odo"][3], r["odo"][4])
        out.append(EvalSample(t=r["t"], p=scalar_product(g, nu), drc=drc[i], g=g, nu=nu))
    return out


def write_eval_csv(samples: list[EvalSample], path: str | Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "p", "drc", "gx", "gy", "nu_x", "nu_y"])
        for s in samples:
            w.writerow([s.t, s.p, s.drc, s.g.gx, s.g.gy, s.nu[0], s.nu[1]])


def trial_metrics(log: TrialLog, cfg: EvalConfig | None = None) -> TrialReport:
    """Full report over one trial log; a pure function of the log content."""
    if not log.records:
        raise ValueError("empty trial log")
    config = log.header["config"]
    if cfg is None:
        cfg = EvalConfig(
            tau=config.get("tau", 0.1),
            sample_interval=config["rss_interval_s"],
            derivative_source=config.get("derivative_source", "filtered"),
        )
    scenario = log.header["scenario"]
    ap, walls, bounds = _map_geometry(scenario["map"])

    distance = 0.0
    prev: Point | None = None
    coverage = CoverageGrid(
        origin=bounds[0], cell_size=config.get("coverage_cell_m", 0.15), bounds=bounds
    )
    collisions = 0
    prev_coll = False
    loss_time: float | None = None
    status = "RUNNING"
    err_los: list[float] = []
    err_nlos: list[float] = []
    rc_raw: list[float] = []
    found: list[str] = []

    for r in log.records:
        x, y, heading = r["pose"]
        if prev is not None:
            distance += math.hypot(x - prev[0], y - prev[1])
        prev = (x, y)
        coll = bool(r.get("coll", False))
        if coll and not prev_coll:
            collisions += 1
        prev_coll = coll
        status = r.get("status", status)
        for ev in r.get("events", ()):
            if ev.get("type") == "status" and ev.get("value") == "SIGNAL_LOST":
                loss_time = r["t"]
            if ev.get("type") == "symbol_found":
                found.append(ev["id"])
        if r.get("rss") is not None:
            coverage.visit((x, y))
            rc_raw.append(r["rss"]["raw"][4])
            if r.get("doa") is not None:
                truth = wrap_angle(math.atan2(ap[1] - y, ap[0] - x) - heading)
                err = doa_error(r["doa"][0], truth)
                if _is_los((x, y), ap, walls):
                    err_los.append(err)
                else:
                    err_nlos.append(err)

    counts = ConfusionCounts()
    samples = eval_samples(log, cfg)
    for s in samples:
        confusion_update(counts, s.p, s.drc, cfg)

    return TrialReport(
        status=status,
        execution_time=log.records[-1]["t"],
        distance=distance,
        visited_cells=coverage.visited_cells,
        covered_area=coverage.covered_area,
        connection_lost=status == "SIGNAL_LOST",
        connection_loss_time=loss_time,
        rss_start=rc_raw[0] if rc_raw else float("nan"),
        rss_gain=(sum(rc_raw) / len(rc_raw) - rc_raw[0]) if rc_raw else float("nan"),
        doa_mean_error_los=(sum(err_los) / len(err_los)) if err_los else None,
        doa_max_error_los=max(err_los) if err_los else None,
        doa_mean_error_nlos=(sum(err_nlos) / len(err_nlos)) if err_nlos else None,
        doa_samples_los=len(err_los),
        doa_samples_nlos=len(err_nlos),
        counts=counts,
        rates=metrics(counts),
        collisions=collisions,
        symbols_found=found,
        samples=len(samples),
    )


def format_rates_table(rows: list[tuple[str, Metrics]]) -> str:
    """Plain-text table with the four rate columns, one row per trial."""

    def fmt(v: float | None) -> str:
        return f"{v:.2f}" if v is not None else "  - "

    lines = [f"{'':12s} {'Sensitivity':>11s} {'Specificity':>11s} {'Precision':>9s} {'Accuracy':>8s}"]
    for name, m in rows:
        lines.append(
            f"{name:12s} {fmt(m.sensitivity):>11s} {fmt(m.specificity):>11s} "
            f"{fmt(m.precision):>9s} {fmt(m.accuracy):>8s}"
        )
    return "\n".join(lines)
