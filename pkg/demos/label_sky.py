"""
Labelling sun, cloud, sky and border
====================================

The sun position follows from the capture time and place.  Clouds are the
pixels whose tone-mapped blue-red ratio is low (grey rather than blue), and
a disc-shaped brush smooths the cloud mask.  The sun label wins where the
two overlap.

The ratio test has a known blind spot: clear sky near the horizon is pale
and gets labelled as cloud.  On this sample most false cloud pixels sit
more than 60 degrees from the zenith.
"""

import json

import numpy as np

from edrsky import fixture_path, hdr_io, pipeline, segmentation
from _out import out_dir

src = fixture_path("cloudy.hdr")
img = hdr_io.read_hdr(src).astype(np.float64)
meta = pipeline.load_meta(src)
labels, pos = segmentation.label_image(img, meta, cloud_threshold=0.05, brush_px=15)

print(f"captured {meta.utc.isoformat()} at {meta.latitude}, {meta.longitude}")
print(f"sun azimuth {pos.azimuth:.2f} deg, elevation {pos.elevation:.2f} deg")
counts = np.bincount(labels.ravel(), minlength=4)
for name, cid in segmentation.CLASS_NAMES.items():
    print(f"{name:8s} {counts[cid]:6d} px")

out = out_dir("label")
hdr_io.write_label_png(out / "cloudy_labels.png", labels)
# a brighter copy that is easier to look at
hdr_io.write_png8(out / "cloudy_labels_view.png", np.repeat(labels[..., None] / 3.0, 3, -1), gamma=1.0)
(out / "cloudy_labels.json").write_text(json.dumps(pos.to_dict(), indent=2))
print(f"labels in {out}")
