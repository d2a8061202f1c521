"""
Preparing a small dataset
=========================

Rotation about the zenith is the only augmentation that keeps a sky
physically plausible.  Rotating before the power-of-two box downsampling
lets the average absorb interpolation error.  The audit checks how much
integrated illumination survived, and the split keeps every capture date
inside a single subset.
"""

import datetime as dt

import numpy as np

from edrsky import pipeline
from edrsky.segmentation import CaptureMeta
from edrsky.synthetic import fixture_sky
from _out import out_dir

rng = np.random.default_rng(0)
for name in ("sunny", "cloudy"):
    img, _ = fixture_sky(name, 1024)
    for angle in rng.uniform(0, 360, 2):
        small = pipeline.downsample_pow2(pipeline.rotate_about_zenith(img, angle), 1)
        row = pipeline.retention_audit(img, small)
        print(f"{name:7s} rotate {angle:6.1f} deg -> {small.shape[0]}^2: "
              f"illumination kept {row['illum_ratio']:.4f}, "
              f"EV {row['ev_before']:.2f} -> {row['ev_after']:.2f}")

# %%
# Split 60 days of captures, 5 per day, by date
start = dt.datetime(2016, 1, 1, tzinfo=dt.timezone.utc)
records = [pipeline.DatasetRecord(f"day{d:02d}_{h}.hdr",
                                  CaptureMeta(46.8, -71.2, start + dt.timedelta(days=d, hours=9 + h)))
           for d in range(60) for h in range(5)]
records = pipeline.split_dataset(records, (0.8, 0.1, 0.1), seed=0)
for split in pipeline.SPLITS:
    days = {r.meta.utc.date() for r in records if r.split == split}
    print(f"{split:5s} {sum(r.split == split for r in records):4d} images on {len(days)} days")

path = out_dir("preprocess") / "manifest.json"
pipeline.write_manifest(records, path, {"seed": 0})
print(f"wrote {path}")
