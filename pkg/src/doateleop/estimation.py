"""RSS filtering, gradient and DoA pipeline.

Per receiver the chain is temporal smoothing (exponential filter) followed by
a moving-average window sized to cover about ten wavelengths of travel, which
is what suppresses spatial multipath fading. The four filtered corner values
feed a central finite difference for the gradient; its four-quadrant angle is
the direction of arrival, convertible to the camera frame and rendered as a
cosine-lobe color bar around the video border.

Angle conventions: body/camera frame angles use the math convention (0 along
the frame's x-axis, i.e. to the right; pi/2 forward). Color-bar segment
centers use the screen convention (0 at the top-center of the border, which
is the camera forward direction; positive counterclockwise, so +pi/2 is the
left edge midpoint). The bridge between the two is a fixed pi/2 rotation.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, replace
from enum import Enum

from .geometry import wrap_angle
from .vehicle import AntennaArray


class Frame(Enum):
    BODY = "body"
    CAMERA = "camera"


class NoGradientError(ValueError):
    """Gradient magnitude below the usable threshold; UI shows a neutral bar."""


@dataclass
class EwmaFilter:
    """First-order smoother: out = last + alpha * (sample - last)."""

    alpha: float
    last: float | None = None

    def __post_init__(self) -> None:
        if not (0.0 < self.alpha <= 1.0):
            raise ValueError("alpha must be in (0, 1]")

    def update(self, sample: float) -> float:
        if not math.isfinite(sample):
            raise ValueError("sample must be finite")
        if self.last is None:
            self.last = sample
        else:
            self.last = self.last + self.alpha * (sample - self.last)
        return self.last


class MafFilter:
    """Fixed-window running mean over the most recent samples."""

    def __init__(self, capacity: int):
        if capacity < 1:
            raise ValueError("capacity must be >= 1")
        self._buf: deque[float] = deque(maxlen=capacity)

    @property
    def capacity(self) -> int:
        return self._buf.maxlen or 1

    def update(self, sample: float) -> float:
        if not math.isfinite(sample):
            raise ValueError("sample must be finite")
        self._buf.append(sample)
        return sum(self._buf) / len(self._buf)

    def resize(self, capacity: int) -> None:
        """Change the window, keeping the newest min(capacity, count) samples."""
        if capacity < 1:
            raise ValueError("capacity must be >= 1")
        if capacity == self.capacity:
            return
        kept = list(self._buf)[-capacity:]
        self._buf = deque(kept, maxlen=capacity)

    def mean(self) -> float | None:
        if not self._buf:
            return None
        return sum(self._buf) / len(self._buf)


def maf_window_size(
    speed: float,
    sample_rate: float,
    wavelength: float,
    n_max: int = 100,
    v_min: float = 0.02,
) -> int:
    """Window length covering ~10 wavelengths of travel at the current speed.

    Rounds half away from zero (so 12.5 -> 13); speeds below v_min pin the
    window at n_max since a near-static platform gains nothing from a short
    window.
    """
    if sample_rate <= 0.0 or wavelength <= 0.0:
        raise ValueError("sample_rate and wavelength must be > 0")
    if speed < v_min:
        return n_max
    n = math.floor(10.0 * wavelength * sample_rate / speed + 0.5)
    return min(max(n, 1), n_max)


@dataclass(frozen=True)
class CornerRssSet:
    """Filtered per-receiver readings in dBm at one sampling instant."""

    r_fr: float
    r_fl: float
    r_br: float
    r_bl: float
    r_c: float
    timestamp: float = 0.0

    def corners(self) -> tuple[float, float, float, float]:
        return (self.r_fr, self.r_fl, self.r_br, self.r_bl)


@dataclass(frozen=True)
class GradientEstimate:
    """2-D RSS gradient in dB/m, body frame."""

    gx: float
    gy: float

    @property
    def magnitude(self) -> float:
        return math.hypot(self.gx, self.gy)


@dataclass(frozen=True)
class DoaEstimate:
    theta: float
    frame: Frame
    magnitude: float


def rss_gradient(corners: CornerRssSet, array: AntennaArray) -> GradientEstimate:
    """Central finite difference over the corner rectangle."""
    gx = ((corners.r_fr - corners.r_fl) + (corners.r_br - corners.r_bl)) / (
        2.0 * array.delta_sx
    )
    gy = ((corners.r_fr - corners.r_br) + (corners.r_fl - corners.r_bl)) / (
        2.0 * array.delta_sy
    )
    return GradientEstimate(gx=gx, gy=gy)


def doa(g: GradientEstimate, epsilon: float = 1e-6) -> DoaEstimate:
    """Four-quadrant direction of the gradient, in the body frame.

    theta 0 points to the body right (+x), pi/2 to the body front.
    """
    mag = g.magnitude
    if mag <= epsilon:
        raise NoGradientError(f"gradient magnitude {mag:g} below {epsilon:g}")
    return DoaEstimate(theta=math.atan2(g.gy, g.gx), frame=Frame.BODY, magnitude=mag)


def to_camera_frame(d: DoaEstimate, camera_yaw: float) -> DoaEstimate:
    if d.frame is not Frame.BODY:
        raise ValueError("expected a body-frame estimate")
    return DoaEstimate(
        theta=wrap_angle(d.theta - camera_yaw), frame=Frame.CAMERA, magnitude=d.magnitude
    )


def rss_to_percent(dbm: float, lo: float = -90.0, hi: float = -30.0) -> float:
    """Linear map of [lo, hi] dBm onto [0, 100] percent, clamped."""
    pct = (dbm - lo) / (hi - lo) * 100.0
    return min(max(pct, 0.0), 100.0)


def percent_to_bars(percent: float) -> int:
    """Five-bar glyph level: ceil(percent / 20)."""
    return math.ceil(min(max(percent, 0.0), 100.0) / 20.0)


def segment_centers(k: int) -> list[float]:
    """Screen-angle centers of the border segments.

    Index 0 is the top-center segment (camera forward); angles increase
    counterclockwise and cover (-pi, pi] uniformly.
    """
    if k < 8:
        raise ValueError("need at least 8 segments")
    return [wrap_angle(2.0 * math.pi * i / k) for i in range(k)]


@dataclass(frozen=True)
class ColorBar:
    """Border segment values in [-1, 1] (green positive, red negative)."""

    segments: tuple[float, ...]
    brightness: float

    def peak_index(self) -> int:
        best = 0
        for i, v in enumerate(self.segments):
            if v > self.segments[best]:
                best = i
        return best


def color_bar(
    d: DoaEstimate | None,
    corners: CornerRssSet,
    k: int = 16,
    g_sat: float = 2.0,
    rss_lo: float = -90.0,
    rss_hi: float = -30.0,
) -> ColorBar:
    """Cosine lobe around the DoA, scaled by gradient strength.

    d must be a camera-frame estimate, or None when no usable gradient exists
    (all segments neutral). Camera-frame angle pi/2 (straight ahead) lands on
    screen angle 0, the top-center segment.
    """
    mean_rss = sum(corners.corners()) / 4.0
    brightness = rss_to_percent(mean_rss, rss_lo, rss_hi) / 100.0
    if d is None:
        return ColorBar(segments=(0.0,) * k, brightness=brightness)
    if d.frame is not Frame.CAMERA:
        raise ValueError("color bar expects a camera-frame estimate")
    screen_doa = wrap_angle(d.theta - math.pi / 2.0)
    s = min(max(d.magnitude / g_sat, 0.0), 1.0)
    values = tuple(s * math.cos(psi - screen_doa) for psi in segment_centers(k))
    return ColorBar(segments=values, brightness=brightness)


@dataclass(frozen=True)
class EstimationConfig:
    """Tunables of the estimation pipeline; exposed in the scenario file."""

    alpha: float = 0.4
    n_max: int = 100
    v_min: float = 0.02
    epsilon: float = 1e-6
    g_sat: float = 2.0
    segments: int = 16
    maf_hysteresis: float = 0.2
    min_support: int = 5  # samples before estimates are published
    rss_lo: float = -90.0
    rss_hi: float = -30.0

    def passthrough(self) -> "EstimationConfig":
        """Identity-filter variant used for noise-free channels."""
        return replace(self, alpha=1.0, n_max=1)


_RECEIVERS = ("fr", "fl", "br", "bl", "c")


@dataclass(frozen=True)
class PipelineOutput:
    corners: CornerRssSet
    ewma: tuple[float, float, float, float, float]
    gradient: GradientEstimate
    doa_body: DoaEstimate | None
    doa_camera: DoaEstimate | None
    bar: ColorBar
    window_size: int


class DoaPipeline:
    """Stateful per-session pipeline driven at the RSS sampling rate."""

    def __init__(
        self,
        config: EstimationConfig,
        array: AntennaArray,
        sample_rate: float,
        wavelength: float,
    ):
        self.config = config
        self.array = array
        self.sample_rate = sample_rate
        self.wavelength = wavelength
        self._ewma = {r: EwmaFilter(config.alpha) for r in _RECEIVERS}
        n0 = maf_window_size(0.0, sample_rate, wavelength, config.n_max, config.v_min)
        self._maf = {r: MafFilter(n0) for r in _RECEIVERS}
        self._window = n0
        self._samples_seen = 0

    @property
    def window_size(self) -> int:
        return self._window

    def _adapt_window(self, speed: float) -> None:
        target = maf_window_size(
            speed, self.sample_rate, self.wavelength, self.config.n_max, self.config.v_min
        )
        # Hysteresis: resizing churns the buffers, so only follow changes
        # of at least the configured fraction.
        if abs(target - self._window) >= self.config.maf_hysteresis * self._window:
            self._window = target
            for f in self._maf.values():
                f.resize(target)

    def update(
        self, raw: tuple[float, float, float, float, float], speed: float,
        camera_yaw: float, t: float,
    ) -> PipelineOutput:
        """Process one 5-receiver sample (FR, FL, BR, BL, C order)."""
        self._adapt_window(speed)
        ewma_vals = []
        filt_vals = []
        for name, sample in zip(_RECEIVERS, raw):
            e = self._ewma[name].update(sample)
            ewma_vals.append(e)
            filt_vals.append(self._maf[name].update(e))
        corners = CornerRssSet(
            r_fr=filt_vals[0],
            r_fl=filt_vals[1],
            r_br=filt_vals[2],
            r_bl=filt_vals[3],
            r_c=filt_vals[4],
            timestamp=t,
        )
        grad = rss_gradient(corners, self.array)
        self._samples_seen += 1
        # No estimate until the window has minimal support: the first few
        # samples after power-on are dominated by unaveraged fading.
        settled = self._samples_seen >= min(self.config.min_support, self.config.n_max)
        try:
            if not settled:
                raise NoGradientError("filters not settled")
            d_body = doa(grad, self.config.epsilon)
            d_cam = to_camera_frame(d_body, camera_yaw)
        except NoGradientError:
            d_body = None
            d_cam = None
        bar = color_bar(
            d_cam,
            corners,
            k=self.config.segments,
            g_sat=self.config.g_sat,
            rss_lo=self.config.rss_lo,
            rss_hi=self.config.rss_hi,
        )
        return PipelineOutput(
            corners=corners,
            ewma=tuple(ewma_vals),  # type: ignore[arg-type]
            gradient=grad,
            doa_body=d_body,
            doa_camera=d_cam,
            bar=bar,
            window_size=self._window,
        )
