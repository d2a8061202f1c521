"""Illumination-preserving preprocessing: rotation, downsampling, audits, splits."""

import json
import math
import os
from dataclasses import dataclass, replace

import numpy as np

from .envmap import SkyangularGeometry, dynamic_range_ev, integrated_illumination
from .hdr_io import atomic_write
from .segmentation import CaptureMeta

__all__ = [
    "DatasetRecord",
    "rotate_about_zenith",
    "downsample_pow2",
    "retention_audit",
    "split_dataset",
    "write_manifest",
    "read_manifest",
    "load_meta",
]

SPLITS = ("train", "val", "test")


def rotate_about_zenith(img, angle):
    """Rotate a skyangular map by ``angle`` degrees (counter-clockwise in the image).

    Bilinear interpolation that only draws on on-disc source pixels; the
    interpolation weights are renormalised where a footprint straddles the
    border.  Border pixels of the result are zero.
    """
    img = np.asarray(img)
    geom = SkyangularGeometry(img.shape[0])
    n = geom.resolution
    a = math.radians(angle)
    ca, sa = math.cos(a), math.sin(a)
    u, v = geom.uv
    disc = geom.disc
    # inverse rotation of the output disc coordinates
    us = ca * u[disc] + sa * v[disc]
    vs = -sa * u[disc] + ca * v[disc]
    col = (us + 1.0) * n / 2 - 0.5
    row = (1.0 - vs) * n / 2 - 0.5
    c0 = np.floor(col).astype(np.intp)
    r0 = np.floor(row).astype(np.intp)
    fc = col - c0
    fr = row - r0

    acc = np.zeros((us.size, img.shape[2]))
    wsum = np.zeros(us.size)
    for dr, dc, w in ((0, 0, (1 - fr) * (1 - fc)), (0, 1, (1 - fr) * fc),
                      (1, 0, fr * (1 - fc)), (1, 1, fr * fc)):
        rr = r0 + dr
        cc = c0 + dc
        ok = (rr >= 0) & (rr < n) & (cc >= 0) & (cc < n)
        rr = np.clip(rr, 0, n - 1)
        cc = np.clip(cc, 0, n - 1)
        ok &= disc[rr, cc]
        w = np.where(ok, w, 0.0)
        acc += w[:, None] * img[rr, cc]
        wsum += w
    out = np.zeros(img.shape, dtype=np.result_type(img.dtype, np.float32))
    with np.errstate(invalid="ignore", divide="ignore"):
        out[disc] = np.where(wsum[:, None] > 0, acc / wsum[:, None], 0.0)
    return out


def downsample_pow2(img, factor_exp):
    """Inter-area downsampling by ``2**factor_exp`` (mean of each block)."""
    img = np.asarray(img)
    if factor_exp < 0:
        raise ValueError("factor_exp must be non-negative")
    k = 2 ** factor_exp
    h, w = img.shape[:2]
    if h % k or w % k:
        raise ValueError(f"image {h}x{w} is not divisible by {k}")
    blocks = img.reshape(h // k, k, w // k, k, *img.shape[2:])
    return blocks.mean(axis=(1, 3), dtype=np.float64).astype(np.result_type(img.dtype, np.float32))


def retention_audit(before, after):
    """EV, integrated illumination and per-channel mean retention."""
    omega_b = SkyangularGeometry(np.shape(before)[0]).solid_angles
    omega_a = SkyangularGeometry(np.shape(after)[0]).solid_angles
    ill_b = integrated_illumination(before, omega_b)
    ill_a = integrated_illumination(after, omega_a)
    row = {
        "ev_before": _safe_ev(before),
        "ev_after": _safe_ev(after),
        "illum_before": ill_b,
        "illum_after": ill_a,
        "illum_ratio": ill_a / ill_b if ill_b > 0 else math.nan,
    }
    row["ev_ratio"] = row["ev_after"] / row["ev_before"] if row["ev_before"] else math.nan
    mb = np.asarray(before, dtype=np.float64).reshape(-1, 3).mean(axis=0)
    ma = np.asarray(after, dtype=np.float64).reshape(-1, 3).mean(axis=0)
    for name, b, a in zip("rgb", mb, ma):
        row[f"mean_ratio_{name}"] = float(a / b) if b > 0 else math.nan
    return row


def _safe_ev(img):
    try:
        return dynamic_range_ev(img)
    except ValueError:
        return math.nan


@dataclass(frozen=True)
class DatasetRecord:
    image_path: str
    meta: CaptureMeta = None
    label_path: str = None
    split: str = None

    def to_dict(self):
        return {"image_path": self.image_path,
                "meta": self.meta.to_dict() if self.meta else None,
                "label_path": self.label_path,
                "split": self.split}

    @classmethod
    def from_dict(cls, d):
        meta = CaptureMeta.from_dict(d["meta"]) if d.get("meta") else None
        return cls(d["image_path"], meta, d.get("label_path"), d.get("split"))


def _date_key(record):
    return record.meta.utc.date().isoformat() if record.meta else "unknown"


def split_dataset(records, fractions=(0.8, 0.1, 0.1), seed=0):
    """Assign train/val/test by capture date.

    Dates are shuffled with ``seed`` and handed out in order until each split
    reaches its share of images; no date spans two splits.
    """
    records = list(records)
    if not records:
        raise ValueError("no records to split")
    fractions = np.asarray(fractions, dtype=np.float64)
    if fractions.shape != (3,) or np.any(fractions < 0) or not np.isclose(fractions.sum(), 1.0):
        raise ValueError("fractions must be three non-negative numbers summing to 1")
    groups = {}
    for rec in records:
        groups.setdefault(_date_key(rec), []).append(rec)
    dates = sorted(groups)
    order = np.random.default_rng(seed).permutation(len(dates))
    bounds = np.cumsum(fractions) * len(records)
    last = int(np.flatnonzero(fractions)[-1])
    assigned = {}
    done = 0
    for k in order:
        date = dates[k]
        # first split whose cumulative quota is not yet filled; never a zero-share one
        idx = int(np.searchsorted(bounds, done, side="right"))
        assigned[date] = SPLITS[min(idx, last)]
        done += len(groups[date])
    return [replace(rec, split=assigned[_date_key(rec)]) for rec in records]


def write_manifest(records, path, extra=None):
    doc = {"records": [r.to_dict() for r in records]}
    if extra:
        doc.update(extra)
    with atomic_write(path, "w") as fh:
        json.dump(doc, fh, indent=2)


def read_manifest(path):
    with open(path) as fh:
        doc = json.load(fh)
    return [DatasetRecord.from_dict(d) for d in doc["records"]]


def load_meta(image_path):
    """Capture metadata from the JSON sidecar next to an image, if present."""
    side = os.path.splitext(os.fspath(image_path))[0] + ".json"
    if not os.path.exists(side):
        return None
    with open(side) as fh:
        return CaptureMeta.from_dict(json.load(fh))
