"""Indoor line-of-sight optical channel.

Geometry of the room, Lambertian LED emission, photodetector gain and
the noise level that realises a target average SNR.

Coordinates: room corner at the origin, z pointing up. LEDs hang at
z = 3 m and look straight down, detectors sit on a table at z = 0.8 m
and look straight up. Both arrays are centred on the room centre,
spread along x for two devices and on an axis-aligned square grid for
four (row-major order: -x/-y, +x/-y, -x/+y, +x/+y).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "Vec3",
    "LedSpec",
    "PdSpec",
    "Geometry",
    "ChannelMatrix",
    "NoiseModel",
    "mode_number",
    "channel_gain",
    "build_channel",
    "received_power_sq",
    "received_power_sq_moments",
    "sigma_for_snr",
    "reference_geometry",
    "format_channel_table",
    "GeometryConfig",
]

DOWN = (0.0, 0.0, -1.0)
UP = (0.0, 0.0, 1.0)


@dataclass(frozen=True)
class Vec3:
    x: float
    y: float
    z: float

    def __post_init__(self):
        if not all(math.isfinite(c) for c in (self.x, self.y, self.z)):
            raise ValueError(f"non-finite coordinate in {self!r}")

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.z], dtype=float)

    def norm(self) -> float:
        return math.sqrt(self.x * self.x + self.y * self.y + self.z * self.z)

    def __sub__(self, other: "Vec3") -> "Vec3":
        return Vec3(self.x - other.x, self.y - other.y, self.z - other.z)


def _unit(v) -> Vec3:
    v = v if isinstance(v, Vec3) else Vec3(*v)
    n = v.norm()
    if n == 0.0:
        raise ValueError("orientation must be a nonzero vector")
    return Vec3(v.x / n, v.y / n, v.z / n)


def mode_number(phi_half_deg: float) -> float:
    """Lambertian mode number ``-ln 2 / ln cos(phi_half)``.

    >>> round(mode_number(60.0), 12)
    1.0
    """
    if not 0.0 < phi_half_deg < 90.0:
        raise ValueError(f"half-power semiangle must lie in (0, 90) degrees, got {phi_half_deg}")
    c = math.cos(math.radians(phi_half_deg))
    if c >= 1.0:
        raise ValueError(f"half-power semiangle {phi_half_deg} is too narrow to represent")
    return -math.log(2.0) / math.log(c)


@dataclass(frozen=True)
class LedSpec:
    position: Vec3
    orientation: Vec3 = field(default_factory=lambda: Vec3(*DOWN))
    half_power_semiangle: float = 60.0

    def __post_init__(self):
        object.__setattr__(self, "orientation", _unit(self.orientation))
        # validates the angle range as a side effect
        mode_number(self.half_power_semiangle)

    @property
    def mode_number(self) -> float:
        return mode_number(self.half_power_semiangle)


@dataclass(frozen=True)
class PdSpec:
    position: Vec3
    orientation: Vec3 = field(default_factory=lambda: Vec3(*UP))
    area: float = 1e-4
    fov: float = 85.0
    responsivity: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "orientation", _unit(self.orientation))
        if not self.area > 0:
            raise ValueError(f"detector area must be positive, got {self.area}")
        if not 0.0 < self.fov <= 90.0:
            raise ValueError(f"FOV must lie in (0, 90] degrees, got {self.fov}")
        if not self.responsivity > 0:
            raise ValueError(f"responsivity must be positive, got {self.responsivity}")


def _angle_between(a: Vec3, b: Vec3) -> float:
    """Angle in radians between two vectors, from their normalised dot product."""
    c = (a.x * b.x + a.y * b.y + a.z * b.z) / (a.norm() * b.norm())
    return math.acos(min(1.0, max(-1.0, c)))


def channel_gain(led: LedSpec, pd: PdSpec) -> float:
    """DC gain of the line-of-sight path from ``led`` to ``pd``.

    Returns exactly 0 when the incidence angle exceeds the detector FOV
    (an angle equal to the FOV is still inside). Emission behind the LED
    also yields 0.
    """
    ray = pd.position - led.position
    dist = ray.norm()
    if dist == 0.0:
        raise ValueError("LED and photodetector positions coincide")
    phi = _angle_between(led.orientation, ray)
    theta = _angle_between(pd.orientation, led.position - pd.position)
    if theta > math.radians(pd.fov):
        return 0.0
    cos_phi = math.cos(phi)
    if cos_phi <= 0.0:
        return 0.0
    n = led.mode_number
    return (n + 1.0) / (2.0 * math.pi) * cos_phi**n * math.cos(theta) * pd.area / dist**2


@dataclass(frozen=True)
class Geometry:
    """Room plus LED and photodetector placement."""

    room: tuple[float, float, float]
    leds: tuple[LedSpec, ...]
    pds: tuple[PdSpec, ...]
    d_tx: float
    d_rx: float

    def __post_init__(self):
        object.__setattr__(self, "leds", tuple(self.leds))
        object.__setattr__(self, "pds", tuple(self.pds))
        if len(self.leds) not in (1, 2, 4):
            raise ValueError(f"LED count must be 1, 2 or 4, got {len(self.leds)}")
        if not self.pds:
            raise ValueError("at least one photodetector is required")
        X, Y, Z = self.room
        if min(X, Y, Z) <= 0:
            raise ValueError(f"room dimensions must be positive, got {self.room}")
        for dev in (*self.leds, *self.pds):
            p = dev.position
            if not (0.0 <= p.x <= X and 0.0 <= p.y <= Y and 0.0 <= p.z <= Z):
                raise ValueError(f"device at ({p.x}, {p.y}, {p.z}) lies outside the {X}x{Y}x{Z} m room")

    @property
    def n_tx(self) -> int:
        return len(self.leds)

    @property
    def n_rx(self) -> int:
        return len(self.pds)

    def subset(self, led_indices) -> "Geometry":
        """Same room and detectors, keeping only the LEDs at ``led_indices``."""
        return Geometry(self.room, tuple(self.leds[i] for i in led_indices), self.pds, self.d_tx, self.d_rx)


def _grid_offsets(count: int, spacing: float) -> list[tuple[float, float]]:
    h = spacing / 2.0
    if count == 1:
        return [(0.0, 0.0)]
    if count == 2:
        return [(-h, 0.0), (h, 0.0)]
    if count == 4:
        return [(-h, -h), (h, -h), (-h, h), (h, h)]
    raise ValueError(f"only 1, 2 or 4 devices can be placed, got {count}")


def reference_geometry(
    n_tx: int = 2,
    n_rx: int = 2,
    d_tx: float = 1.0,
    d_rx: float = 0.1,
    *,
    room: tuple[float, float, float] = (5.0, 5.0, 3.5),
    led_height: float = 3.0,
    pd_height: float = 0.8,
    half_power_semiangle: float = 60.0,
    area: float = 1e-4,
    fov: float = 85.0,
    responsivity: float = 1.0,
) -> Geometry:
    """Build the reference indoor setup (5x5x3.5 m room) with symmetric placement."""
    for name, count, d in (("d_tx", n_tx, d_tx), ("d_rx", n_rx, d_rx)):
        if count > 1 and not (math.isfinite(d) and d > 0):
            raise ValueError(f"{name} must be a positive spacing, got {d}")
    cx, cy = room[0] / 2.0, room[1] / 2.0
    leds = [
        LedSpec(Vec3(cx + dx, cy + dy, led_height), Vec3(*DOWN), half_power_semiangle)
        for dx, dy in _grid_offsets(n_tx, d_tx)
    ]
    pds = [
        PdSpec(Vec3(cx + dx, cy + dy, pd_height), Vec3(*UP), area, fov, responsivity)
        for dx, dy in _grid_offsets(n_rx, d_rx)
    ]
    return Geometry(room, tuple(leds), tuple(pds), d_tx, d_rx)


@dataclass(frozen=True)
class ChannelMatrix:
    """Nonnegative ``n_rx x n_tx`` matrix of line-of-sight gains."""

    gains: np.ndarray

    def __post_init__(self):
        g = np.array(self.gains, dtype=float)
        if g.ndim != 2:
            raise ValueError(f"channel matrix must be 2-D, got shape {g.shape}")
        if np.any(g < 0) or not np.all(np.isfinite(g)):
            raise ValueError("channel gains must be finite and nonnegative")
        g.setflags(write=False)
        object.__setattr__(self, "gains", g)

    @property
    def n_rx(self) -> int:
        return self.gains.shape[0]

    @property
    def n_tx(self) -> int:
        return self.gains.shape[1]

    def columns(self, idx) -> "ChannelMatrix":
        return ChannelMatrix(self.gains[:, list(idx)])


@dataclass(frozen=True)
class NoiseModel:
    sigma: float

    def __post_init__(self):
        if not self.sigma >= 0:
            raise ValueError(f"noise standard deviation must be >= 0, got {self.sigma}")

    def sample(self, rng: np.random.Generator, shape) -> np.ndarray:
        if self.sigma == 0:
            return np.zeros(shape)
        return rng.normal(0.0, self.sigma, size=shape)


def build_channel(geom: Geometry) -> ChannelMatrix:
    """``H[i, j]`` is the gain from LED ``j`` to detector ``i``."""
    return ChannelMatrix(np.array([[channel_gain(led, pd) for led in geom.leds] for pd in geom.pds]))


def received_power_sq(H: ChannelMatrix | np.ndarray, sigma_x: float) -> float:
    """Average received power ``sigma_x^2 / (2 N_r) * sum(h_ij^2)``.

    This closed form assumes a one-hot transmit vector whose active entry
    carries half the IFFT-output power on every LED (two-LED NDC).
    :func:`received_power_sq_moments` handles arbitrary transmit statistics.
    """
    if not sigma_x > 0:
        raise ValueError(f"sigma_x must be positive, got {sigma_x}")
    g = H.gains if isinstance(H, ChannelMatrix) else np.asarray(H, dtype=float)
    return float(sigma_x**2 / (2.0 * g.shape[0]) * np.sum(g**2))


def received_power_sq_moments(H: ChannelMatrix | np.ndarray, second_moment: np.ndarray) -> float:
    """Average received power ``(1/N_r) sum_i E|H_i x|^2`` given ``E[x x^T]``."""
    g = H.gains if isinstance(H, ChannelMatrix) else np.asarray(H, dtype=float)
    S = np.asarray(second_moment, dtype=float)
    if S.shape != (g.shape[1], g.shape[1]):
        raise ValueError(f"second moment must be {g.shape[1]}x{g.shape[1]}, got {S.shape}")
    return float(np.trace(g @ S @ g.T) / g.shape[0])


def sigma_for_snr(snr_db: float, responsivity: float, pr_sq: float) -> float:
    """Noise standard deviation giving average SNR ``r^2 P_r^2 / sigma^2``."""
    if not pr_sq > 0:
        raise ValueError(f"received power must be positive, got {pr_sq}")
    return math.sqrt(responsivity**2 * pr_sq / 10.0 ** (snr_db / 10.0))


def format_channel_table(geom: Geometry, H: ChannelMatrix | None = None) -> str:
    """Plain-text dump of the geometry and channel matrix (9 significant digits)."""
    H = H if H is not None else build_channel(geom)
    X, Y, Z = geom.room
    lines = [
        "# vlcofdm channel dump",
        f"# room {X:.9g} {Y:.9g} {Z:.9g}",
        f"# d_tx {geom.d_tx:.9g} d_rx {geom.d_rx:.9g}",
        "# convention: origin at room corner, z up; LEDs face -z, PDs face +z",
    ]
    for j, led in enumerate(geom.leds, 1):
        p = led.position
        lines.append(
            f"# led{j} pos {p.x:.9g} {p.y:.9g} {p.z:.9g} phi_half {led.half_power_semiangle:.9g} "
            f"n {led.mode_number:.9g}"
        )
    for i, pd in enumerate(geom.pds, 1):
        p = pd.position
        lines.append(
            f"# pd{i} pos {p.x:.9g} {p.y:.9g} {p.z:.9g} area {pd.area:.9g} fov {pd.fov:.9g} "
            f"r {pd.responsivity:.9g}"
        )
    lines.append("pd\\led " + " ".join(f"led{j}" for j in range(1, H.n_tx + 1)))
    for i, row in enumerate(H.gains, 1):
        lines.append(f"pd{i} " + " ".join(f"{v:.9g}" for v in row))
    return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class GeometryConfig:
    """Declarative form of :func:`reference_geometry` plus an optional LED subset.

    ``led_subset`` holds 1-based LED numbers, e.g. ``(2, 3)`` keeps the
    diagonal pair of the 2x2 grid.
    """

    n_tx: int = 2
    n_rx: int = 2
    d_tx: float = 1.0
    d_rx: float = 0.1
    room: tuple[float, float, float] = (5.0, 5.0, 3.5)
    led_height: float = 3.0
    pd_height: float = 0.8
    half_power_semiangle: float = 60.0
    area: float = 1e-4
    fov: float = 85.0
    responsivity: float = 1.0
    led_subset: tuple[int, ...] | None = None

    def build(self) -> Geometry:
        geom = reference_geometry(
            self.n_tx,
            self.n_rx,
            self.d_tx,
            self.d_rx,
            room=tuple(self.room),
            led_height=self.led_height,
            pd_height=self.pd_height,
            half_power_semiangle=self.half_power_semiangle,
            area=self.area,
            fov=self.fov,
            responsivity=self.responsivity,
        )
        if self.led_subset is not None:
            if any(not 1 <= i <= self.n_tx for i in self.led_subset):
                raise ValueError(f"LED subset {self.led_subset} out of range 1..{self.n_tx}")
            geom = geom.subset([i - 1 for i in self.led_subset])
        return geom
