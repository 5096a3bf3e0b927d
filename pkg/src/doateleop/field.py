"""Synthetic indoor RSS field: deterministic ground truth for the estimator.

The mean field follows the log-distance path-loss law. Two stochastic layers
sit on top, both fully determined by the field seed so that every query is
reproducible:

* slow shadowing: zero-mean Gaussian with exponential spatial correlation,
  realized once on a coarse grid at build time and bilinearly interpolated;
* small-scale fading: zero-mean Gaussian resampled per half-wavelength cell
  and per time quantum, generated by a counter-style hash so queries never
  mutate state.

Wall segments subtract a fixed attenuation per crossing of the straight line
between the query point and the access point, which is what carves out the
non-line-of-sight pockets of the maze maps.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from statistics import NormalDist

import numpy as np

from .geometry import Point, dist, segments_intersect

SPEED_OF_LIGHT = 299_792_458.0
RSS_FLOOR_DBM = -120.0
RSS_CEIL_DBM = -20.0

_STD_NORMAL = NormalDist()

_MAP_KEYS = {"format_version", "bounds", "walls", "ap", "propagation", "seed"}
_WALL_KEYS = {"p1", "p2", "attenuation_db"}
_PROP_KEYS = {
    "ref_power_dbm",
    "ref_distance_m",
    "path_loss_exponent",
    "shadowing_sigma_db",
    "shadowing_corr_length_m",
    "fading_sigma_db",
    "fading_time_corr_s",
    "frequency_hz",
}


class MapFormatError(ValueError):
    """Raised for structurally invalid map documents."""


def clamp_rss(value: float) -> float:
    """Clamp a dBm value into the physical [-120, -20] band."""
    return min(max(value, RSS_FLOOR_DBM), RSS_CEIL_DBM)


def _mix64(*values: int) -> int:
    """splitmix64-style combiner; stable across runs and platforms."""
    h = 0x9E3779B97F4A7C15
    for v in values:
        h = (h + (v & 0xFFFFFFFFFFFFFFFF)) & 0xFFFFFFFFFFFFFFFF
        h = ((h ^ (h >> 30)) * 0xBF58476D1CE4E5B9) & 0xFFFFFFFFFFFFFFFF
        h = ((h ^ (h >> 27)) * 0x94D049BB133111EB) & 0xFFFFFFFFFFFFFFFF
        h = h ^ (h >> 31)
    return h


def _hash_gauss(*values: int) -> float:
    """Standard-normal draw addressed purely by integer coordinates."""
    u = ((_mix64(*values) >> 11) + 0.5) * 2.0**-53
    return _STD_NORMAL.inv_cdf(u)


@dataclass(frozen=True)
class WallSegment:
    p1: Point
    p2: Point
    attenuation_db: float

    def __post_init__(self) -> None:
        if self.p1 == self.p2:
            raise ValueError("wall endpoints must be distinct")
        if not (math.isfinite(self.attenuation_db) and self.attenuation_db >= 0.0):
            raise ValueError("wall attenuation must be finite and >= 0 dB")


@dataclass(frozen=True)
class PropagationParams:
    ref_power_dbm: float = -42.0
    ref_distance_m: float = 1.0
    path_loss_exponent: float = 3.0
    shadowing_sigma_db: float = 0.0
    shadowing_corr_length_m: float = 5.0
    fading_sigma_db: float = 0.0
    fading_time_corr_s: float = 0.4
    frequency_hz: float = 2.4e9

    def __post_init__(self) -> None:
        vals = [
            self.ref_power_dbm,
            self.ref_distance_m,
            self.path_loss_exponent,
            self.shadowing_sigma_db,
            self.shadowing_corr_length_m,
            self.fading_sigma_db,
            self.fading_time_corr_s,
            self.frequency_hz,
        ]
        if not all(math.isfinite(v) for v in vals):
            raise ValueError("propagation parameters must be finite")
        if self.ref_distance_m <= 0.0:
            raise ValueError("ref_distance_m must be > 0")
        if self.path_loss_exponent < 1.0:
            raise ValueError("path_loss_exponent must be >= 1")
        if self.shadowing_sigma_db < 0.0 or self.fading_sigma_db < 0.0:
            raise ValueError("noise sigmas must be >= 0 dB")
        if self.shadowing_corr_length_m <= 0.0:
            raise ValueError("shadowing_corr_length_m must be > 0")
        if self.fading_time_corr_s <= 0.0:
            raise ValueError("fading_time_corr_s must be > 0")
        if self.frequency_hz <= 0.0:
            raise ValueError("frequency_hz must be > 0")

    @property
    def wavelength_m(self) -> float:
        return SPEED_OF_LIGHT / self.frequency_hz


def _build_shadow_grid(
    bounds: tuple[Point, Point],
    params: PropagationParams,
    seed: int,
    max_nodes: int = 900,
) -> tuple[np.ndarray, float, float, float]:
    """Correlated shadowing realization on a coarse grid.

    Node spacing is half the correlation length, widened if needed to keep
    the Cholesky factorization small; the exponential covariance makes the
    interpolated field decorrelate over roughly the correlation length.
    """
    (xmin, ymin), (xmax, ymax) = bounds
    width, height = xmax - xmin, ymax - ymin
    step = params.shadowing_corr_length_m / 2.0
    step = max(step, math.sqrt(max(width * height, 1e-9) / max_nodes))
    nx = int(math.ceil(width / step)) + 2
    ny = int(math.ceil(height / step)) + 2
    xs = xmin + np.arange(nx) * step
    ys = ymin + np.arange(ny) * step
    gx, gy = np.meshgrid(xs, ys, indexing="ij")
    pts = np.stack([gx.ravel(), gy.ravel()], axis=1)
    d = np.linalg.norm(pts[:, None, :] - pts[None, :, :], axis=2)
    cov = np.exp(-d / params.shadowing_corr_length_m)
    cov[np.diag_indices_from(cov)] += 1e-9
    chol = np.linalg.cholesky(cov)
    rng = np.random.default_rng(_mix64(seed, 0x5AD0))
    z = chol @ rng.standard_normal(pts.shape[0])
    grid = params.shadowing_sigma_db * z.reshape(nx, ny)
    return grid, step, xmin, ymin


@dataclass(frozen=True)
class FieldModel:
    """Immutable synthetic RSS field; safe for unlimited concurrent readers."""

    bounds: tuple[Point, Point]
    ap_position: Point
    params: PropagationParams
    walls: tuple[WallSegment, ...] = ()
    seed: int = 0
    _shadow: np.ndarray | None = field(default=None, repr=False, compare=False)
    _shadow_step: float = field(default=1.0, repr=False, compare=False)

    @property
    def wavelength_m(self) -> float:
        return self.params.wavelength_m

    def contains(self, position: Point) -> bool:
        (xmin, ymin), (xmax, ymax) = self.bounds
        return xmin <= position[0] <= xmax and ymin <= position[1] <= ymax

    def _clamp_position(self, position: Point) -> Point:
        (xmin, ymin), (xmax, ymax) = self.bounds
        return (
            min(max(position[0], xmin), xmax),
            min(max(position[1], ymin), ymax),
        )

    def wall_loss_db(self, position: Point) -> float:
        """Total attenuation of walls crossed between position and the AP."""
        loss = 0.0
        for w in self.walls:
            if segments_intersect(position, self.ap_position, w.p1, w.p2):
                loss += w.attenuation_db
        return loss

    def is_los(self, position: Point) -> bool:
        """True when no attenuating wall cuts the path to the AP.

        Zero-attenuation segments are radio-transparent barriers (furniture,
        kiosks); they block driving but not the signal.
        """
        return not any(
            w.attenuation_db > 0.0
            and segments_intersect(position, self.ap_position, w.p1, w.p2)
            for w in self.walls
        )

    def _shadowing_db(self, x: float, y: float) -> float:
        if self._shadow is None:
            return 0.0
        (xmin, ymin), _ = self.bounds
        fx = (x - xmin) / self._shadow_step
        fy = (y - ymin) / self._shadow_step
        nx, ny = self._shadow.shape
        ix = min(max(int(fx), 0), nx - 2)
        iy = min(max(int(fy), 0), ny - 2)
        tx = min(max(fx - ix, 0.0), 1.0)
        ty = min(max(fy - iy, 0.0), 1.0)
        g = self._shadow
        return (
            g[ix, iy] * (1 - tx) * (1 - ty)
            + g[ix + 1, iy] * tx * (1 - ty)
            + g[ix, iy + 1] * (1 - tx) * ty
            + g[ix + 1, iy + 1] * tx * ty
        )

    def _fading_db(self, x: float, y: float, t: float) -> float:
        p = self.params
        if p.fading_sigma_db == 0.0:
            return 0.0
        cell = p.wavelength_m / 2.0
        ix = math.floor(x / cell)
        iy = math.floor(y / cell)
        it = math.floor(t / p.fading_time_corr_s)
        return p.fading_sigma_db * _hash_gauss(self.seed, 0xFAD, ix, iy, it)

    def rss_at(self, position: Point, t: float = 0.0) -> float:
        """Received signal strength in dBm at a position and time.

        Positions outside the map and distances below ref_distance/10 are
        clamped rather than rejected; the result is clamped to the physical
        [-120, -20] dBm band.
        """
        p = self.params
        x, y = self._clamp_position(position)
        d = max(dist((x, y), self.ap_position), p.ref_distance_m / 10.0)
        value = p.ref_power_dbm - 10.0 * p.path_loss_exponent * math.log10(
            d / p.ref_distance_m
        )
        value -= self.wall_loss_db((x, y))
        value -= self._shadowing_db(x, y)
        value -= self._fading_db(x, y, t)
        return clamp_rss(value)

    def analytic_gradient(self, position: Point) -> Point:
        """Exact gradient of the noise-free log-distance law, in dB/m.

        Oracle for the finite-difference estimator: only valid when both
        stochastic layers are disabled and no wall cuts the neighborhood.
        """
        p = self.params
        if p.shadowing_sigma_db != 0.0 or p.fading_sigma_db != 0.0:
            raise ValueError("analytic gradient requires a noise-free field")
        dx = self.ap_position[0] - position[0]
        dy = self.ap_position[1] - position[1]
        d = max(math.hypot(dx, dy), p.ref_distance_m / 10.0)
        mag = 10.0 * p.path_loss_exponent / (d * math.log(10.0))
        return (mag * dx / d, mag * dy / d)

    def bearing_to_ap(self, position: Point) -> float:
        return math.atan2(
            self.ap_position[1] - position[1], self.ap_position[0] - position[0]
        )


def directional_gain_db(
    boresight: float, bearing: float, g_max_db: float = 0.0, exponent: float = 2.0
) -> float:
    """Cosine-lobe receive gain for a corner antenna, in dB.

    Disabled (0 dB everywhere) when g_max_db is 0, which is the default used
    throughout the acceptance runs.
    """
    if g_max_db == 0.0:
        return 0.0
    rel = math.cos(bearing - boresight)
    return g_max_db * max(0.0, rel) ** exponent


def build_field(
    bounds: tuple[Point, Point],
    ap: Point,
    params: PropagationParams,
    walls: tuple[WallSegment, ...] = (),
    seed: int = 0,
) -> FieldModel:
    """Validate parameters and construct an immutable field."""
    (xmin, ymin), (xmax, ymax) = bounds
    if not all(math.isfinite(v) for v in (xmin, ymin, xmax, ymax, ap[0], ap[1])):
        raise ValueError("bounds and AP position must be finite")
    if xmax <= xmin or ymax <= ymin:
        raise ValueError("bounds must span a positive area")
    if not (xmin <= ap[0] <= xmax and ymin <= ap[1] <= ymax):
        raise ValueError("AP position outside map bounds")
    shadow = None
    step = 1.0
    if params.shadowing_sigma_db > 0.0:
        shadow, step, _, _ = _build_shadow_grid(bounds, params, seed)
    return FieldModel(
        bounds=((xmin, ymin), (xmax, ymax)),
        ap_position=(float(ap[0]), float(ap[1])),
        params=params,
        walls=tuple(walls),
        seed=seed,
        _shadow=shadow,
        _shadow_step=step,
    )


def _require_point(raw: object, what: str) -> Point:
    if (
        not isinstance(raw, (list, tuple))
        or len(raw) != 2
        or not all(isinstance(v, (int, float)) for v in raw)
    ):
        raise MapFormatError(f"{what} must be a [x, y] pair")
    return (float(raw[0]), float(raw[1]))


def map_from_dict(doc: dict) -> FieldModel:
    """Build a field from a parsed map document, rejecting unknown keys."""
    if not isinstance(doc, dict):
        raise MapFormatError("map document must be a JSON object")
    unknown = set(doc) - _MAP_KEYS
    if unknown:
        raise MapFormatError(f"unknown map keys: {sorted(unknown)}")
    for key in ("bounds", "ap", "propagation", "seed"):
        if key not in doc:
            raise MapFormatError(f"map document missing key '{key}'")
    raw_bounds = doc["bounds"]
    if not isinstance(raw_bounds, list) or len(raw_bounds) != 2:
        raise MapFormatError("bounds must be [[xmin, ymin], [xmax, ymax]]")
    bounds = (
        _require_point(raw_bounds[0], "bounds[0]"),
        _require_point(raw_bounds[1], "bounds[1]"),
    )
    ap = _require_point(doc["ap"], "ap")
    prop = doc["propagation"]
    if not isinstance(prop, dict):
        raise MapFormatError("propagation must be an object")
    unknown = set(prop) - _PROP_KEYS
    if unknown:
        raise MapFormatError(f"unknown propagation keys: {sorted(unknown)}")
    try:
        params = PropagationParams(**prop)
    except (TypeError, ValueError) as exc:
        raise MapFormatError(f"bad propagation parameters: {exc}") from exc
    walls = []
    for i, w in enumerate(doc.get("walls", [])):
        if not isinstance(w, dict) or set(w) - _WALL_KEYS:
            raise MapFormatError(f"walls[{i}] must have keys p1, p2, attenuation_db")
        try:
            walls.append(
                WallSegment(
                    p1=_require_point(w["p1"], f"walls[{i}].p1"),
                    p2=_require_point(w["p2"], f"walls[{i}].p2"),
                    attenuation_db=float(w.get("attenuation_db", 0.0)),
                )
            )
        except (KeyError, ValueError) as exc:
            raise MapFormatError(f"walls[{i}]: {exc}") from exc
    seed = doc["seed"]
    if not isinstance(seed, int):
        raise MapFormatError("seed must be an integer")
    try:
        return build_field(bounds, ap, params, tuple(walls), seed)
    except ValueError as exc:
        raise MapFormatError(str(exc)) from exc


def load_map(path: str | Path) -> FieldModel:
    with open(path, encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise MapFormatError(f"{path}: not valid JSON ({exc})") from exc
    return map_from_dict(doc)
