"""Sun, cloud, border and skydome labelling of skyangular maps."""

import datetime as _dt
import math
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .envmap import SkyangularGeometry
from .tonemap import MuLawLog2

__all__ = [
    "BORDER",
    "SKYDOME",
    "CLOUD",
    "SUN",
    "CLASS_NAMES",
    "CaptureMeta",
    "SolarPosition",
    "solar_position",
    "sun_direction",
    "solar_mask",
    "cloud_ratio",
    "cloud_mask",
    "disk",
    "morph_brush",
    "compose_label",
    "label_image",
]

BORDER, SKYDOME, CLOUD, SUN = 0, 1, 2, 3
CLASS_NAMES = {"border": BORDER, "skydome": SKYDOME, "cloud": CLOUD, "sun": SUN}


@dataclass(frozen=True)
class CaptureMeta:
    latitude: float
    longitude: float
    timestamp: _dt.datetime

    def __post_init__(self):
        if not -90 <= self.latitude <= 90:
            raise ValueError(f"latitude out of range: {self.latitude}")
        if not -180 <= self.longitude <= 180:
            raise ValueError(f"longitude out of range: {self.longitude}")
        if not isinstance(self.timestamp, _dt.datetime):
            raise TypeError("timestamp must be a datetime")

    @property
    def utc(self):
        ts = self.timestamp
        if ts.tzinfo is None:
            return ts.replace(tzinfo=_dt.timezone.utc)
        return ts.astimezone(_dt.timezone.utc)

    @classmethod
    def from_dict(cls, d):
        ts = d["timestamp"]
        if isinstance(ts, str):
            ts = _dt.datetime.fromisoformat(ts.replace("Z", "+00:00"))
        return cls(float(d["latitude"]), float(d["longitude"]), ts)

    def to_dict(self):
        return {"latitude": self.latitude, "longitude": self.longitude,
                "timestamp": self.utc.isoformat()}


@dataclass(frozen=True)
class SolarPosition:
    azimuth: float    # degrees clockwise from north
    elevation: float  # degrees above the horizon

    def to_dict(self):
        return {"azimuth": self.azimuth, "elevation": self.elevation}


def _julian_day(ts):
    epoch = _dt.datetime(2000, 1, 1, 12, tzinfo=_dt.timezone.utc)
    return 2451545.0 + (ts - epoch).total_seconds() / 86400.0


def solar_position(meta):
    """Geometric solar azimuth/elevation (no refraction).

    Low-order solar coordinates (mean longitude and anomaly, equation of
    centre), declination, equation of time and hour angle; good to a few
    hundredths of a degree between 1950 and 2050.
    """
    ts = meta.utc
    jc = (_julian_day(ts) - 2451545.0) / 36525.0

    mean_long = (280.46646 + jc * (36000.76983 + jc * 0.0003032)) % 360.0
    mean_anom = 357.52911 + jc * (35999.05029 - 0.0001537 * jc)
    ecc = 0.016708634 - jc * (0.000042037 + 0.0000001267 * jc)
    m = math.radians(mean_anom)
    centre = (math.sin(m) * (1.914602 - jc * (0.004817 + 0.000014 * jc))
              + math.sin(2 * m) * (0.019993 - 0.000101 * jc)
              + math.sin(3 * m) * 0.000289)
    omega = math.radians(125.04 - 1934.136 * jc)
    app_long = math.radians(mean_long + centre - 0.00569 - 0.00478 * math.sin(omega))
    mean_obliq = 23.0 + (26.0 + (21.448 - jc * (46.815 + jc * (0.00059 - jc * 0.001813))) / 60.0) / 60.0
    obliq = math.radians(mean_obliq + 0.00256 * math.cos(omega))

    decl = math.asin(math.sin(obliq) * math.sin(app_long))

    y = math.tan(obliq / 2) ** 2
    l0 = math.radians(mean_long)
    eq_time = 4.0 * math.degrees(
        y * math.sin(2 * l0)
        - 2 * ecc * math.sin(m)
        + 4 * ecc * y * math.sin(m) * math.cos(2 * l0)
        - 0.5 * y * y * math.sin(4 * l0)
        - 1.25 * ecc * ecc * math.sin(2 * m)
    )

    minutes = ts.hour * 60 + ts.minute + (ts.second + ts.microsecond * 1e-6) / 60.0
    true_solar = (minutes + eq_time + 4.0 * meta.longitude) % 1440.0
    hour_angle = math.radians(true_solar / 4.0 - 180.0)

    lat = math.radians(meta.latitude)
    cos_zen = (math.sin(lat) * math.sin(decl)
               + math.cos(lat) * math.cos(decl) * math.cos(hour_angle))
    zenith = math.acos(max(-1.0, min(1.0, cos_zen)))

    az = math.atan2(math.sin(hour_angle),
                    math.cos(hour_angle) * math.sin(lat) - math.tan(decl) * math.cos(lat))
    azimuth = (math.degrees(az) + 180.0) % 360.0
    return SolarPosition(azimuth, 90.0 - math.degrees(zenith))


def sun_direction(pos):
    """Unit vector (east, north, up) towards the sun."""
    az = math.radians(pos.azimuth)
    el = math.radians(pos.elevation)
    return np.array([math.cos(el) * math.sin(az), math.cos(el) * math.cos(az), math.sin(el)])


def solar_mask(pos, geom, radius_deg=2.5):
    """Pixels within ``radius_deg`` of the sun; empty when the sun is below the horizon."""
    if pos.elevation <= 0:
        return np.zeros((geom.resolution, geom.resolution), dtype=bool)
    s = sun_direction(pos)
    cos_dist = geom.directions @ s
    return geom.disc & (cos_dist >= math.cos(math.radians(radius_deg)))


def cloud_ratio(img, operator=None):
    """Blue-red ratio ``(B - R) / (B + R)`` of the tone-mapped image, 0 where ``B + R = 0``."""
    operator = MuLawLog2() if operator is None else operator
    ldr = operator.forward(np.asarray(img, dtype=np.float64))
    r, b = ldr[..., 0], ldr[..., 2]
    s = b + r
    out = np.zeros(s.shape)
    nz = s > 0
    out[nz] = (b[nz] - r[nz]) / s[nz]
    return out


def cloud_mask(ratio, threshold=0.05, disc=None):
    """Cloud where the blue-red ratio is below ``threshold`` (grey, not blue)."""
    ratio = np.asarray(ratio)
    if disc is None:
        disc = SkyangularGeometry(ratio.shape[0]).disc if ratio.shape[0] == ratio.shape[1] \
            else np.ones(ratio.shape, dtype=bool)
    return (ratio < threshold) & disc


def disk(diameter):
    radius = diameter // 2
    yy, xx = np.mgrid[-radius:radius + 1, -radius:radius + 1]
    return xx * xx + yy * yy <= radius * radius


def _dilate(mask, se):
    return ndimage.binary_dilation(mask, structure=se, border_value=0)


def _erode(mask, se):
    # outside the image counts as foreground so edges are not eaten away
    return ndimage.binary_erosion(mask, structure=se, border_value=1)


def morph_brush(mask, brush_px=15):
    """Closing then opening with a disc of diameter ``brush_px``."""
    if brush_px < 1 or brush_px % 2 == 0:
        raise ValueError("brush_px must be a positive odd number")
    mask = np.asarray(mask, dtype=bool)
    se = disk(brush_px)
    closed = _erode(_dilate(mask, se), se)
    return _dilate(_erode(closed, se), se)


def compose_label(sun, cloud, geom):
    """Single-channel label map; precedence border > sun > cloud > skydome."""
    shape = (geom.resolution, geom.resolution)
    sun = np.asarray(sun, dtype=bool)
    cloud = np.asarray(cloud, dtype=bool)
    if sun.shape != shape or cloud.shape != shape:
        raise ValueError(f"masks {sun.shape}/{cloud.shape} do not match geometry {shape}")
    labels = np.full(shape, SKYDOME, dtype=np.uint8)
    labels[cloud] = CLOUD
    labels[sun] = SUN
    labels[~geom.disc] = BORDER
    return labels


def label_image(img, meta=None, cloud_threshold=0.05, brush_px=15, sun_radius_deg=2.5,
                operator=None):
    """Full labelling of an environment map.

    Returns ``(labels, solar_position_or_None)``.
    """
    geom = SkyangularGeometry(np.shape(img)[0])
    if meta is not None:
        pos = solar_position(meta)
        sun = solar_mask(pos, geom, sun_radius_deg)
    else:
        pos = None
        sun = np.zeros((geom.resolution,) * 2, dtype=bool)
    clouds = cloud_mask(cloud_ratio(img, operator), cloud_threshold, geom.disc)
    if brush_px > 1:
        clouds = morph_brush(clouds, brush_px) & geom.disc
    return compose_label(sun, clouds, geom), pos
