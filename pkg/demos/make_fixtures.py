"""
Regenerate the bundled sample skies
===================================

The package ships three small procedural skies in ``src/edrsky/data`` so the
demos and the acceptance suite run from a clean checkout:

* ``sunny.hdr``: clear sky whose sun region covers 3.6% of the disc, with a
  13.4 EV dynamic range and 61% of the integrated illumination
* ``sun_disc.hdr``: a 15 EV sky whose sun is a compact saturated disc,
  used for the relighting demo
* ``cloudy.hdr``: partly cloudy sky for the labelling demo

Each map gets a JSON sidecar with its capture metadata.  The sun is placed
where the ephemeris says it was for that metadata.
"""

import json
import pathlib

from edrsky import hdr_io
from edrsky.envmap import SkyangularGeometry, dynamic_range_ev, integrated_illumination
from edrsky.synthetic import FIXTURES, fixture_sky

out = pathlib.Path(__file__).resolve().parents[1] / "src" / "edrsky" / "data"
out.mkdir(exist_ok=True)

for name in FIXTURES:
    img, meta = fixture_sky(name)
    hdr_io.write_hdr(img, out / f"{name}.hdr")
    (out / f"{name}.json").write_text(json.dumps(meta.to_dict(), indent=2) + "\n")
    # report what was actually stored, after RGBE quantisation
    back = hdr_io.read_hdr(out / f"{name}.hdr")
    omega = SkyangularGeometry(back.shape[0]).solid_angles
    print(f"{name:9s} EV={dynamic_range_ev(back):6.3f}  "
          f"illumination={integrated_illumination(back, omega):9.4f}")
