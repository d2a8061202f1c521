"""Skyangular geometry, luminance and illumination metrics.

A skyangular environment map is a square image holding the upper hemisphere
as a disc.  Pixel centres are mapped to disc coordinates ``(u, v)`` in
``[-1, 1]`` with ``u`` pointing right (east, +X) and ``v`` pointing up (north,
+Y).  The radius ``r = hypot(u, v)`` encodes the zenith angle, by default with
the equidistant law ``theta = r * pi / 2``.  Pixels whose centre lies outside
the unit disc (``r > 1``) are border pixels and carry no light.
"""

from dataclasses import dataclass
from functools import cached_property

import numpy as np

__all__ = [
    "BT709",
    "SkyangularGeometry",
    "geometry_for",
    "solid_angles",
    "directions",
    "luminance",
    "dynamic_range_ev",
    "integrated_illumination",
    "clip_to_ev",
    "equalize_exposure",
    "exposure_scale",
    "reexpose",
    "irradiance",
    "render_diffuse_sphere",
    "sphere_flux",
    "fibonacci_sphere",
]

BT709 = np.array([0.2126, 0.7152, 0.0722])

PROJECTIONS = ("equidistant", "equisolid")


@dataclass(frozen=True)
class SkyangularGeometry:
    resolution: int
    projection: str = "equidistant"

    def __post_init__(self):
        if self.resolution < 2:
            raise ValueError("resolution must be at least 2")
        if self.projection not in PROJECTIONS:
            raise ValueError(f"unknown projection {self.projection!r}")

    @cached_property
    def uv(self):
        n = self.resolution
        c = (np.arange(n) + 0.5) * (2.0 / n) - 1.0
        u, v = np.meshgrid(c, -c)
        return u, v

    @cached_property
    def radius(self):
        return np.hypot(*self.uv)

    @cached_property
    def disc(self):
        """Boolean mask of on-disc (non-border) pixels."""
        return self.radius <= 1.0

    @cached_property
    def zenith_angle(self):
        r = np.minimum(self.radius, 1.0)
        if self.projection == "equidistant":
            return r * (np.pi / 2)
        return 2.0 * np.arcsin(r / np.sqrt(2.0))

    def _jacobian(self):
        # steradians per unit disc area, d(omega) / (du dv)
        if self.projection == "equisolid":
            return np.full_like(self.radius, 2.0)
        # sin(theta) / r * dtheta/dr, with sin(r pi/2) / r = (pi/2) sinc(r/2)
        r = np.minimum(self.radius, 1.0)
        return (np.pi / 2) ** 2 * np.sinc(r / 2)

    @cached_property
    def solid_angles(self):
        cell = (2.0 / self.resolution) ** 2
        omega = self._jacobian() * cell
        omega[~self.disc] = 0.0
        return omega

    @cached_property
    def directions(self):
        """Unit direction per pixel as ``(N, N, 3)``; border pixels are zero."""
        u, v = self.uv
        r = self.radius
        theta = self.zenith_angle
        with np.errstate(invalid="ignore", divide="ignore"):
            s = np.where(r > 0, np.sin(theta) / r, 0.0)
        xyz = np.stack([u * s, v * s, np.cos(theta)], axis=-1)
        xyz[~self.disc] = 0.0
        return xyz

    def pixel_of(self, direction):
        """Fractional (row, col) of a unit direction with ``z >= 0``."""
        x, y, z = direction
        theta = np.arccos(np.clip(z, -1.0, 1.0))
        if self.projection == "equidistant":
            r = theta / (np.pi / 2)
        else:
            r = np.sqrt(2.0) * np.sin(theta / 2)
        rho = np.hypot(x, y)
        u = r * x / rho if rho > 0 else 0.0
        v = r * y / rho if rho > 0 else 0.0
        n = self.resolution
        col = (u + 1.0) * n / 2 - 0.5
        row = (1.0 - v) * n / 2 - 0.5
        return row, col


def geometry_for(img, projection="equidistant"):
    img = np.asarray(img)
    if img.shape[0] != img.shape[1]:
        raise ValueError(f"skyangular images must be square, got {img.shape[:2]}")
    return SkyangularGeometry(img.shape[0], projection)


def solid_angles(geom):
    """Per-pixel solid angle in steradians, zero on border pixels."""
    return geom.solid_angles


def directions(geom):
    return geom.directions


def luminance(img):
    """BT.709 linear luminance of an ``(..., 3)`` array."""
    return np.asarray(img, dtype=np.float64) @ BT709


def _default_mask(img):
    img = np.asarray(img)
    if img.ndim >= 2 and img.shape[0] == img.shape[1]:
        return SkyangularGeometry(img.shape[0]).disc
    return np.ones(img.shape[:2], dtype=bool)


def dynamic_range_ev(img, mask=None):
    """Dynamic range in stops, ``log2(max|I| - min|I|)`` over on-disc pixels.

    ``|I|`` is BT.709 luminance.  ``mask`` defaults to the skyangular disc
    for square images and to every pixel otherwise.
    """
    if mask is None:
        mask = _default_mask(img)
    lum = luminance(img)[mask]
    if lum.size == 0:
        raise ValueError("no pixels selected")
    span = lum.max() - lum.min()
    if not span > 0:
        raise ValueError("dynamic range undefined for a constant image")
    return float(np.log2(span))


def integrated_illumination(img, omega):
    """Solid-angle weighted luminance sum."""
    img = np.asarray(img)
    omega = np.asarray(omega)
    if img.shape[:2] != omega.shape:
        raise ValueError(f"image {img.shape[:2]} and solid angles {omega.shape} differ")
    return float(np.sum(omega * luminance(img)))


def clip_to_ev(img, ev):
    if not np.isfinite(ev):
        raise ValueError("ev must be finite")
    return np.minimum(img, 2.0 ** ev)


def exposure_scale(img, reference, omega):
    """Factor that makes ``img`` carry the same integrated illumination as ``reference``."""
    own = integrated_illumination(img, omega)
    if not own > 0:
        raise ValueError("cannot equalize an image with zero illumination")
    return integrated_illumination(reference, omega) / own


def equalize_exposure(img, reference, omega):
    return np.asarray(img) * exposure_scale(img, reference, omega)


def reexpose(img, stops):
    """Scale by ``2**-stops``."""
    return np.asarray(img) * 2.0 ** (-stops)


# --------------------------------------------------------------------------
# diffuse probe


def _lights(img, omega, dirs, block=1):
    """Point lights ``(directions, power)`` from a map, optionally merged in blocks.

    Merging sums ``omega * I`` over ``block x block`` pixel tiles and places
    the result at the tile's solid-angle weighted mean direction, so the total
    power of every channel is kept exactly.
    """
    img = np.asarray(img, dtype=np.float64)
    omega = np.asarray(omega, dtype=np.float64)
    dirs = np.asarray(dirs, dtype=np.float64)
    power = img * omega[..., None]
    if block > 1:
        h, w = omega.shape
        if h % block or w % block:
            raise ValueError(f"map size {h}x{w} is not divisible by block {block}")

        def tile_sum(a):
            return a.reshape(h // block, block, w // block, block, -1).sum(axis=(1, 3))

        power = tile_sum(power)
        dirs = tile_sum(dirs * omega[..., None])
        omega = tile_sum(omega[..., None])[..., 0]
        norm = np.linalg.norm(dirs, axis=-1, keepdims=True)
        dirs = np.divide(dirs, norm, out=np.zeros_like(dirs), where=norm > 0)
    sel = omega > 0
    return dirs[sel], power[sel]


def _block_for(omega, env_resolution):
    n = np.shape(omega)[0]
    if env_resolution is None or n <= env_resolution:
        return 1
    return max(1, n // env_resolution)


def irradiance(img, omega, dirs, normals, env_resolution=None, chunk=512):
    """Cosine-weighted irradiance ``sum(omega * I * max(0, n . d))`` per normal.

    ``normals`` is ``(M, 3)``; returns ``(M, 3)``.  With ``env_resolution``
    the map is first merged into at most that many lights per side.
    """
    d, power = _lights(img, omega, dirs, _block_for(omega, env_resolution))
    normals = np.asarray(normals, dtype=np.float64).reshape(-1, 3)
    out = np.empty((normals.shape[0], 3))
    for start in range(0, normals.shape[0], chunk):
        cos = np.maximum(normals[start:start + chunk] @ d.T, 0.0)
        out[start:start + chunk] = cos @ power
    return out


def render_diffuse_sphere(img, omega, dirs, out_resolution=128, albedo=1.0,
                          env_resolution=128):
    """Orthographic top-down view of a white Lambertian sphere lit by ``img``.

    The sphere fills the output disc; the pixel at disc position ``(u, v)``
    shows the surface with normal ``(u, v, sqrt(1 - u^2 - v^2))``, so the view
    shares its axes with the skyangular map.  Pixel values are outgoing
    radiance ``albedo / pi * E(n)``; pixels off the sphere are zero.  The
    map is merged to ``env_resolution`` lights per side (``None`` keeps every
    pixel).
    """
    n = out_resolution
    c = (np.arange(n) + 0.5) * (2.0 / n) - 1.0
    u, v = np.meshgrid(c, -c)
    r2 = u * u + v * v
    on = r2 <= 1.0
    normals = np.stack([u[on], v[on], np.sqrt(1.0 - r2[on])], axis=-1)
    out = np.zeros((n, n, 3))
    out[on] = irradiance(img, omega, dirs, normals, env_resolution) * (albedo / np.pi)
    return out


def fibonacci_sphere(count):
    """Near-uniform unit vectors on the full sphere."""
    i = np.arange(count) + 0.5
    z = 1.0 - 2.0 * i / count
    phi = np.pi * (1.0 + 5.0 ** 0.5) * i
    rho = np.sqrt(1.0 - z * z)
    return np.stack([rho * np.cos(phi), rho * np.sin(phi), z], axis=-1)


def sphere_flux(img, omega, dirs, samples=4096, env_resolution=128):
    """Total light reflected by a white unit Lambertian sphere, per channel.

    Integrates irradiance over the whole sphere surface with a Fibonacci
    quadrature.  Analytically this equals ``pi`` times the solid-angle
    weighted radiance sum, for any light distribution.
    """
    normals = fibonacci_sphere(samples)
    e = irradiance(img, omega, dirs, normals, env_resolution)
    return e.mean(axis=0) * 4.0 * np.pi
