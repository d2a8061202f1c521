"""Procedural skyangular skies for fixtures, demos and tests.

The sky model is deliberately simple: a blue dome that brightens and
whitens towards the horizon, a circumsolar glow, an optional cloud layer and
a sun region whose size, peak exposure and share of the integrated
illumination are set directly.
"""

import math

import numpy as np
from scipy import ndimage

from .envmap import SkyangularGeometry, integrated_illumination, luminance
from .segmentation import CaptureMeta, SolarPosition, solar_position, sun_direction

__all__ = ["sunny_sky", "uniform_sky", "fixture_sky", "FIXTURES", "SUN_FRACTION", "SUN_EV",
           "SUN_SHARE"]

SUN_FRACTION = 0.036   # share of on-disc pixels inside the sun region
SUN_EV = 13.4          # dynamic range of the whole map, stops
SUN_SHARE = 0.61       # share of integrated illumination inside the sun region

_SKY_BLUE = np.array([0.35, 0.55, 1.0])
_WHITE = np.array([1.0, 1.0, 1.0])


def uniform_sky(resolution, radiance=1.0):
    geom = SkyangularGeometry(resolution)
    img = np.zeros((resolution, resolution, 3))
    img[geom.disc] = radiance
    return img


def _clouds(geom, coverage, rng, smooth):
    noise = rng.standard_normal((geom.resolution, geom.resolution))
    field = ndimage.gaussian_filter(noise, smooth * geom.resolution, mode="wrap")
    thr = np.quantile(field[geom.disc], 1.0 - coverage)
    # soft edges, 0..1 opacity
    width = field[geom.disc].std() * 0.15
    return np.clip((field - thr) / width, 0.0, 1.0)


def sunny_sky(resolution=256, azimuth=135.0, elevation=55.0, sun_ev=SUN_EV,
              sun_fraction=SUN_FRACTION, sun_share=SUN_SHARE, core_deg=0.6, glow_width=0.08,
              sky_level=1.0, sky_color=None, cloud_cover=0.0, seed=0):
    """Synthetic clear or partly cloudy sky with a calibrated sun region.

    The sun region is the angular cap around the sun direction holding
    ``sun_fraction`` of the on-disc pixels.  Inside it a peaked glow is
    added on top of the sky and scaled so that the region carries
    ``sun_share`` of the integrated illumination.  Pixels within ``core_deg``
    of the sun (at least the nearest one) form the saturated solar core and
    are set so that ``log2(max - min)`` luminance equals ``sun_ev``.
    ``glow_width`` is the glow's e-folding angle as a fraction of the cap.
    With ``sun_share=None`` no glow is added and the core alone is the sun.
    ``sky_color`` replaces the zenith blue; it is rescaled to the default
    blue's luminance so only the hue changes.
    """
    geom = SkyangularGeometry(resolution)
    rng = np.random.default_rng(seed)
    d = geom.directions
    disc = geom.disc
    omega = geom.solid_angles
    z = np.clip(d[..., 2], 0.0, 1.0)
    sun = sun_direction(SolarPosition(azimuth, elevation))
    cos_g = np.clip(d @ sun, -1.0, 1.0)
    gamma = np.arccos(cos_g)

    # dome: darker and bluer towards the zenith, whiter at the horizon
    blue = _SKY_BLUE
    if sky_color is not None:
        blue = np.asarray(sky_color, dtype=np.float64)
        blue = blue * (luminance(_SKY_BLUE) / luminance(blue))
    horizon = np.exp(-4.0 * z)[..., None]
    sky = sky_level * (0.6 * blue * (1 - horizon) + 0.9 * _WHITE * horizon)
    sky *= (1.0 + 1.5 * np.exp(-gamma / 0.5))[..., None]
    if cloud_cover > 0:
        alpha = _clouds(geom, cloud_cover, rng, smooth=0.03)[..., None]
        grey = sky_level * 1.1 * (0.7 + 0.3 * z)[..., None] * _WHITE
        sky = sky * (1 - alpha) + grey * alpha
    sky[~disc] = 0.0

    # sun region: cap holding sun_fraction of the disc pixels
    order = np.sort(gamma[disc])
    cap = order[int(round(sun_fraction * order.size)) - 1]
    region = disc & (gamma <= cap)

    core = region & (gamma <= math.radians(core_deg))
    core[np.unravel_index(np.argmax(np.where(region, -gamma, -np.inf)), gamma.shape)] = True
    floor = luminance(sky)[disc].min()
    peak = 2.0 ** sun_ev + floor
    img = sky.copy()
    img[core] = peak * _WHITE

    if sun_share is None:
        img[~disc] = 0.0
        return img

    glow = np.exp(-gamma / (glow_width * cap)) * region
    glow[core] = 0.0
    total = integrated_illumination(img, omega)
    in_region = integrated_illumination(img * region[..., None], omega)
    # glow amplitude so that region / total == sun_share
    need = (sun_share * total - in_region) / (1 - sun_share)
    if need < 0:
        raise ValueError("sun peak alone exceeds the requested illumination share")
    img += (need / float(np.sum(omega * glow))) * glow[..., None] * _WHITE
    if luminance(img).max() > peak * (1 + 1e-12):
        raise ValueError("glow exceeds the sun peak; widen the sun region")
    img[~disc] = 0.0
    return img


# name -> (sky keyword arguments, capture metadata); sun placed by ephemeris
FIXTURES = {
    "sunny": (dict(resolution=256), dict(latitude=46.81, longitude=-71.21,
                                         timestamp="2015-06-21T15:00:00+00:00")),
    "sun_disc": (dict(resolution=256, sun_ev=15.0, sun_share=None, core_deg=1.0),
                 dict(latitude=46.81, longitude=-71.21, timestamp="2015-06-21T15:00:00+00:00")),
    "cloudy": (dict(resolution=256, cloud_cover=0.35, seed=7, sky_color=(0.08, 0.3, 1.0)),
               dict(latitude=46.81, longitude=-71.21, timestamp="2016-03-20T18:00:00+00:00")),
}


def fixture_sky(name, resolution=None):
    """Build a named fixture sky; returns ``(image, CaptureMeta)``."""
    kwargs, meta = FIXTURES[name]
    if resolution is not None:
        kwargs = dict(kwargs, resolution=resolution)
    meta = CaptureMeta.from_dict(meta)
    pos = solar_position(meta)
    return sunny_sky(azimuth=pos.azimuth, elevation=pos.elevation, **kwargs), meta
