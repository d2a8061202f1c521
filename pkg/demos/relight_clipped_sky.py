"""
Relighting with a clipped sun
=============================

A sky whose sun is clipped to a lower exposure and then rescaled to the
same total illumination still puts the same energy on a white sphere, but
the light is no longer concentrated in one direction.  The shading
contrast collapses even though the energy stays the same.

The script clips the bundled 15 EV sun-disc sky to 15, 13, 11 and 9 EV,
re-equalizes each version and renders a top-down diffuse sphere.
"""

import numpy as np

from edrsky import envmap, fixture_path, hdr_io
from _out import out_dir

img = hdr_io.read_hdr(fixture_path("sun_disc.hdr")).astype(np.float64)
geom = envmap.geometry_for(img)
omega, dirs = geom.solid_angles, geom.directions
out = out_dir("relight")

base = None
for ev in (15, 13, 11, 9):
    clipped = envmap.equalize_exposure(envmap.clip_to_ev(img, ev), img, omega)
    render = envmap.render_diffuse_sphere(clipped, omega, dirs, out_resolution=96)
    flux = envmap.luminance(envmap.sphere_flux(clipped, omega, dirs))
    peak = envmap.luminance(render).max()
    base = base or (peak, flux)
    hdr_io.write_hdr(render.astype(np.float32), out / f"sphere_ev{ev}.hdr")
    hdr_io.write_png8(out / f"sphere_ev{ev}.png", render / base[0])
    print(f"EV {ev:2d}: brightest sphere pixel {peak / base[0]:6.3f}, "
          f"reflected energy {flux / base[1]:.6f} (relative to EV 15)")

print(f"renders in {out}")
