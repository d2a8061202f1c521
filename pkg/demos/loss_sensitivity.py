"""
How losses react to a truncated dynamic range
=============================================

Clip a sky at ``2^t`` for t = 0..15 and compare it with the original.  A
loss on tone-mapped values barely notices, because the tone map has
already compressed the bright end.  The band-wise cascade loss exposes
where the difference lives: only the bands above the clip level are
non-zero.
"""

import numpy as np

from edrsky import envmap, fixture_path, hdr_io, losses
from _out import out_dir

img = hdr_io.read_hdr(fixture_path("sunny.hdr")).astype(np.float64)
geom = envmap.geometry_for(img)
rows = losses.sensitivity_sweep(img, geom.solid_angles, 15)
path = out_dir("losses") / "sensitivity.csv"
hdr_io.write_report(rows, path)

print(f"{'t':>3s} {'L1 HDR':>10s} {'L1 LDR':>10s} {'illum':>8s}")
for r in rows:
    print(f"{r['t']:3d} {r['L1_HDR']:10.4f} {r['L1_LDR']:10.6f} {r['illum_ratio']:8.4f}")

# %%
# Cascade over 2^i bands for a 10 EV clip
clipped = envmap.clip_to_ev(img, 10)
bands = losses.cascade_bands_loss(img, clipped, "l1", losses.BandSpec(15), mask=geom.disc)
for term in bands.terms:
    if term.count:
        print(f"band {term.index:2d}: {term.count:6d} px  L1 {term.value:10.3f}")

# %%
# Exposure cascade with clamped brackets: while 2^10 still saturates the
# clamp both images look identical; darker brackets reveal the lost sun
exp = losses.cascade_exposure_loss(img, clipped, "l1", 14, mask=geom.disc, tonemap_clamp=True)
for term in exp.terms:
    print(f"exposure 2^-{term.index:<2d} L1 {term.value:.3g}")
print(f"wrote {path}")
