"""Reconstruction losses with exposure-band and class selection.

All losses are means over the selected pixels (and channels), so a mask
restricts the sample set rather than zeroing part of the image.  An empty
selection contributes 0 and is flagged.
"""

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .envmap import clip_to_ev, integrated_illumination, luminance
from .tonemap import MuLawLog2

__all__ = [
    "EmptySelectionWarning",
    "BandSpec",
    "Term",
    "LossBreakdown",
    "l1",
    "l2",
    "get_inner",
    "band_index",
    "band_masks",
    "cascade_bands_loss",
    "cascade_exposure_loss",
    "selective_loss",
    "scale_invariant_loss",
    "sensitivity_sweep",
]


class EmptySelectionWarning(RuntimeWarning):
    pass


def _select(a, b, mask):
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch {a.shape} vs {b.shape}")
    if mask is None:
        return a, b
    mask = np.asarray(mask, dtype=bool)
    if mask.shape != a.shape[:mask.ndim]:
        raise ValueError(f"mask shape {mask.shape} does not match image {a.shape}")
    return a[mask], b[mask]


def _mean_or_zero(x):
    if x.size == 0:
        warnings.warn("loss evaluated over an empty selection", EmptySelectionWarning,
                      stacklevel=3)
        return 0.0
    return float(np.mean(x))


def l1(a, b, mask=None):
    """Mean absolute difference over the pixels selected by ``mask``."""
    a, b = _select(a, b, mask)
    return _mean_or_zero(np.abs(a - b))


def l2(a, b, mask=None):
    """Mean squared difference over the pixels selected by ``mask``."""
    a, b = _select(a, b, mask)
    return _mean_or_zero(np.square(a - b))


INNER_LOSSES = {"l1": l1, "l2": l2}


def get_inner(inner):
    """Resolve an inner loss: ``"l1"``, ``"l2"`` or a callable ``f(a, b, mask)``."""
    if callable(inner):
        return inner
    try:
        return INNER_LOSSES[inner.lower()]
    except KeyError:
        raise ValueError(f"unknown inner loss {inner!r}") from None


def _weight(weights, index):
    if weights is None:
        return 1.0
    if callable(weights):
        return float(weights(index))
    if isinstance(weights, dict):
        return float(weights.get(index, 1.0))
    if np.isscalar(weights):
        return float(weights)
    return float(weights[index])


@dataclass(frozen=True)
class BandSpec:
    """Exposure bands ``[0, 1), [1, 2), [2, 4), ... [2**(ev_max-1), inf)``."""

    ev_max: int = 15

    def __post_init__(self):
        if self.ev_max < 0:
            raise ValueError("ev_max must be non-negative")

    @property
    def count(self):
        return self.ev_max + 1

    def bounds(self, i):
        lo = 0.0 if i == 0 else 2.0 ** (i - 1)
        hi = math.inf if i == self.ev_max else 2.0 ** i
        return lo, hi


@dataclass
class Term:
    index: int
    weight: float
    value: float
    count: int

    @property
    def empty(self):
        return self.count == 0


@dataclass
class LossBreakdown:
    total: float
    terms: list = field(default_factory=list)

    def __float__(self):
        return self.total

    def rows(self):
        return [{"term": t.index, "weight": t.weight, "value": t.value,
                 "count": t.count, "empty": t.empty} for t in self.terms]


def band_index(lum, bands=BandSpec()):
    """Band of each luminance value; exact at powers of two."""
    _, e = np.frexp(np.asarray(lum, dtype=np.float64))
    return np.clip(e, 0, bands.ev_max)


def band_masks(real_img, bands=BandSpec(), mask=None):
    """One boolean mask per band, keyed on the luminance of ``real_img``."""
    idx = band_index(luminance(real_img), bands)
    if mask is None:
        mask = np.ones(idx.shape, dtype=bool)
    return [(idx == i) & mask for i in range(bands.count)]


def _run_terms(real_img, fake_img, inner, masks, weights):
    fn = get_inner(inner)
    terms = []
    total = 0.0
    for i, m in enumerate(masks):
        count = int(np.count_nonzero(m))
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", EmptySelectionWarning)
            value = fn(real_img, fake_img, m) if count else 0.0
        w = _weight(weights, i)
        terms.append(Term(i, w, value, count))
        total += w * value
    return LossBreakdown(total, terms)


def cascade_bands_loss(real_img, fake_img, inner="l1", bands=BandSpec(), weights=None,
                       mask=None):
    """Sum of per-band inner losses, bands taken from the real image."""
    if np.shape(real_img) != np.shape(fake_img):
        raise ValueError("shape mismatch")
    masks = band_masks(real_img, bands, mask)
    return _run_terms(real_img, fake_img, inner, masks, weights)


def cascade_exposure_loss(real_img, fake_img, inner="l1", exposures=4, weights=None,
                          mask=None, tonemap_clamp=False, gamma=2.2):
    """Sum of inner losses over re-exposed copies ``2**-i * I``, ``i < exposures``.

    With ``tonemap_clamp`` each exposure is gamma encoded and clamped to
    [0, 1] before the inner loss.
    """
    if exposures < 1:
        raise ValueError("need at least one exposure")
    real_img = np.asarray(real_img, dtype=np.float64)
    fake_img = np.asarray(fake_img, dtype=np.float64)
    if real_img.shape != fake_img.shape:
        raise ValueError("shape mismatch")
    fn = get_inner(inner)
    terms = []
    total = 0.0
    count = real_img.shape[0] * real_img.shape[1] if mask is None else int(np.count_nonzero(mask))
    for i in range(exposures):
        r = real_img * 2.0 ** -i
        f = fake_img * 2.0 ** -i
        if tonemap_clamp:
            r = np.clip(r, 0.0, 1.0) ** (1.0 / gamma)
            f = np.clip(f, 0.0, 1.0) ** (1.0 / gamma)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", EmptySelectionWarning)
            value = fn(r, f, mask) if count else 0.0
        w = _weight(weights, i)
        terms.append(Term(i, w, value, count))
        total += w * value
    return LossBreakdown(total, terms)


def selective_loss(real_img, fake_img, labels, class_weights, inner="l1"):
    """``sum_c alpha_c * inner(real in class c, fake in class c)``.

    ``class_weights`` maps class id to weight; only listed classes contribute.
    ``inner`` may also be a callable ``f(real, fake, mask) -> float`` such as
    a partially applied cascade loss.
    """
    labels = np.asarray(labels)
    masks = []
    ids = sorted(class_weights)
    for cid in ids:
        masks.append(labels == cid)
    fn = get_inner(inner)
    terms = []
    total = 0.0
    for cid, m in zip(ids, masks):
        count = int(np.count_nonzero(m))
        value = float(fn(real_img, fake_img, m)) if count else 0.0
        w = float(class_weights[cid])
        terms.append(Term(int(cid), w, value, count))
        total += w * value
    return LossBreakdown(total, terms)


def scale_invariant_loss(real_img, fake_img):
    """Scale-invariant log error: ``mean(d^2) - mean(d)^2``, ``d = ln r - ln f``."""
    r = np.asarray(real_img, dtype=np.float64).ravel()
    f = np.asarray(fake_img, dtype=np.float64).ravel()
    if r.shape != f.shape:
        raise ValueError("shape mismatch")
    if np.any(r <= 0) or np.any(f <= 0):
        raise ValueError("scale-invariant loss needs strictly positive pixels")
    d = np.log(r) - np.log(f)
    n = d.size
    return float(np.sum(d * d) / n - np.sum(d) ** 2 / n ** 2)


def sensitivity_sweep(img, omega, ev_max=15, operator=None, mask=None):
    """Global L1/L2 between ``img`` and ``clip_to_ev(img, t)`` for ``t = 0..ev_max``.

    Losses are reported in HDR space and after ``operator`` (default
    mu-law-log2), together with the retained illumination ratio.  ``mask``
    defaults to pixels with non-zero solid angle.
    """
    operator = MuLawLog2() if operator is None else operator
    img = np.asarray(img, dtype=np.float64)
    if mask is None:
        mask = np.asarray(omega) > 0
    full = integrated_illumination(img, omega)
    ldr = operator.forward(img)
    rows = []
    for t in range(ev_max + 1):
        clipped = clip_to_ev(img, t)
        ldr_c = operator.forward(clipped)
        rows.append({
            "t": t,
            "L1_HDR": l1(img, clipped, mask),
            "L2_HDR": l2(img, clipped, mask),
            "L1_LDR": l1(ldr, ldr_c, mask),
            "L2_LDR": l2(ldr, ldr_c, mask),
            "illum_ratio": integrated_illumination(clipped, omega) / full if full > 0 else 1.0,
        })
    return rows
