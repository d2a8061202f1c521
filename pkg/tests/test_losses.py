import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra import numpy as hnp

from edrsky import envmap, losses
from edrsky.envmap import SkyangularGeometry
from edrsky.losses import BandSpec, EmptySelectionWarning


def grey(values):
    v = np.asarray(values, dtype=float)
    return np.repeat(v[..., None], 3, axis=-1)


# --- l1 / l2 --------------------------------------------------------------------

def test_l1_l2_examples():
    a, b = grey([[0.0, 2.0]]), grey([[0.0, 0.0]])
    assert losses.l1(a, a) == 0 and losses.l2(a, a) == 0
    assert losses.l1(a, b) == 1.0
    assert losses.l2(a, b) == 2.0


def test_full_mask_equals_no_mask(rng):
    a, b = rng.random((8, 8, 3)), rng.random((8, 8, 3))
    full = np.ones((8, 8), bool)
    assert losses.l1(a, b, full) == losses.l1(a, b)
    assert losses.l2(a, b, full) == losses.l2(a, b)


def test_mask_means_over_selection_only():
    a, b = grey([[4.0, 0.0, 0.0]]), grey([[0.0, 0.0, 0.0]])
    assert losses.l1(a, b, np.array([[True, False, False]])) == 4.0


def test_l2_bounds_l1_squared_on_singletons(rng):
    a, b = rng.random((5, 5, 3)), rng.random((5, 5, 3))
    for idx in np.ndindex(5, 5):
        m = np.zeros((5, 5), bool)
        m[idx] = True
        assert losses.l2(a, b, m) >= losses.l1(a, b, m) ** 2 - 1e-15


def test_empty_mask_is_zero_with_warning():
    a = grey([[1.0, 2.0]])
    with pytest.warns(EmptySelectionWarning):
        assert losses.l1(a, 0 * a, np.zeros((1, 2), bool)) == 0.0


def test_shape_mismatch():
    with pytest.raises(ValueError):
        losses.l1(np.ones((2, 2, 3)), np.ones((2, 3, 3)))
    with pytest.raises(ValueError):
        losses.l1(np.ones((2, 2, 3)), np.ones((2, 2, 3)), np.ones((3, 3), bool))
    with pytest.raises(ValueError):
        losses.get_inner("lpips")


# --- bands ----------------------------------------------------------------------

def test_band_example():
    real = grey([[0.5, 1.5, 3.0]])
    masks = losses.band_masks(real)
    assert masks[0].tolist() == [[True, False, False]]
    assert masks[1].tolist() == [[False, True, False]]
    assert masks[2].tolist() == [[False, False, True]]


def test_band_edges_are_half_open():
    lum = np.array([0.0, 0.999, 1.0, 2.0, 3.999, 4.0, 2.0 ** 14, 2.0 ** 15, 2.0 ** 20])
    assert losses.band_index(lum).tolist() == [0, 0, 1, 2, 2, 3, 15, 15, 15]
    spec = BandSpec(15)
    assert spec.bounds(0) == (0.0, 1.0)
    assert spec.bounds(3) == (4.0, 8.0)
    assert spec.bounds(15) == (2.0 ** 14, math.inf)


def test_band_index_agrees_with_bounds(rng):
    spec = BandSpec(15)
    lum = np.concatenate([np.exp2(rng.uniform(-5, 18, 5000)), 2.0 ** np.arange(-3, 18)])
    idx = losses.band_index(lum, spec)
    for value, i in zip(lum, idx):
        lo, hi = spec.bounds(i)
        assert lo <= value < hi


def test_bands_partition_disc_brute_force(rng):
    geom = SkyangularGeometry(48)
    img = np.exp2(rng.uniform(-3, 17, (48, 48, 3)))
    masks = losses.band_masks(img, BandSpec(15), geom.disc)
    lum = envmap.luminance(img)
    for i, m in enumerate(masks):
        lo, hi = BandSpec(15).bounds(i)
        expected = geom.disc & (lum >= lo) & (lum < hi)
        assert np.array_equal(m, expected)
    assert sum(int(m.sum()) for m in masks) == int(geom.disc.sum())


def test_cascade_bands_identical_is_zero(sunny):
    out = losses.cascade_bands_loss(sunny, sunny)
    assert out.total == 0 and all(t.value == 0 for t in out.terms)
    assert len(out.terms) == 16


def test_cascade_bands_weights_and_empty_flag():
    real = grey([[0.5, 1.5, 3.0]])
    fake = grey([[0.0, 0.0, 0.0]])
    out = losses.cascade_bands_loss(real, fake, "l1", BandSpec(3), weights={1: 10.0})
    assert [t.value for t in out.terms] == [0.5, 1.5, 3.0, 0.0]
    assert out.total == pytest.approx(0.5 + 15.0 + 3.0)
    assert [t.empty for t in out.terms] == [False, False, False, True]
    assert losses.cascade_bands_loss(real, fake, "l1", BandSpec(3), weights=2.0).total == 10.0
    assert losses.cascade_bands_loss(real, fake, "l1", BandSpec(3),
                                     weights=lambda i: i).total == pytest.approx(7.5)


def test_cascade_bands_top_band_catches_overflow():
    real = grey([[2.0 ** 20]])
    out = losses.cascade_bands_loss(real, 0 * real, "l1", BandSpec(15))
    assert out.terms[15].count == 1 and out.terms[15].value == 2.0 ** 20


def test_cascade_bands_keyed_on_real_image():
    real = grey([[0.5, 3.0]])
    fake = grey([[100.0, 3.0]])
    out = losses.cascade_bands_loss(real, fake, "l1", BandSpec(3))
    assert out.terms[0].value == 99.5 and out.terms[2].value == 0


# --- exposure cascade -----------------------------------------------------------

def test_cascade_exposure_identical_is_zero(sunny):
    out = losses.cascade_exposure_loss(sunny, sunny, exposures=4, tonemap_clamp=True)
    assert out.total == 0 and len(out.terms) == 4


def test_cascade_exposure_single_equals_inner(rng):
    a, b = rng.random((6, 6, 3)) * 5, rng.random((6, 6, 3)) * 5
    for inner in ("l1", "l2"):
        out = losses.cascade_exposure_loss(a, b, inner, exposures=1)
        assert out.total == losses.get_inner(inner)(a, b)


def test_cascade_exposure_halves_each_bracket():
    fake = np.full((4, 4, 3), 3.0)
    real = 2 * fake
    out = losses.cascade_exposure_loss(real, fake, "l1", exposures=2)
    assert out.terms[1].value == out.terms[0].value / 2


def test_cascade_exposure_clamp_saturates():
    real = np.full((2, 2, 3), 100.0)
    fake = np.full((2, 2, 3), 50.0)
    out = losses.cascade_exposure_loss(real, fake, "l1", exposures=3, tonemap_clamp=True)
    assert all(t.value == 0 for t in out.terms)


def test_cascade_exposure_validation():
    with pytest.raises(ValueError):
        losses.cascade_exposure_loss(np.ones((2, 2, 3)), np.ones((2, 2, 3)), exposures=0)


def test_cascade_exposure_mask_selects():
    real = grey([[8.0, 0.0]])
    fake = grey([[0.0, 0.0]])
    out = losses.cascade_exposure_loss(real, fake, "l1", exposures=2,
                                       mask=np.array([[True, False]]))
    assert [t.value for t in out.terms] == [8.0, 4.0]


# --- selective ------------------------------------------------------------------

def test_selective_weights_per_class():
    real = grey([[1.0, 2.0, 4.0]])
    fake = grey([[0.0, 0.0, 0.0]])
    labels = np.array([[1, 1, 3]])
    out = losses.selective_loss(real, fake, labels, {1: 10.0, 3: 0.1})
    assert out.total == pytest.approx(10 * 1.5 + 0.1 * 4)


def test_selective_with_cascade_inner():
    real = grey([[0.5, 3.0, 3.0]])
    fake = grey([[0.0, 0.0, 3.0]])
    labels = np.array([[3, 3, 1]])
    inner = lambda a, b, m: losses.cascade_bands_loss(a, b, "l1", BandSpec(3), None, m).total  # noqa: E731
    out = losses.selective_loss(real, fake, labels, {3: 1.0}, inner)
    assert out.total == pytest.approx(0.5 + 3.0)


# --- scale invariant -------------------------------------------------------------

def test_scale_invariant_examples(rng):
    img = rng.uniform(0.1, 10, (8, 8, 3))
    assert losses.scale_invariant_loss(img, img) == 0
    for alpha in (0.1, 1, 10):
        assert abs(losses.scale_invariant_loss(img, alpha * img)) <= 1e-9
    real = np.array([math.e, math.e ** 2])
    assert losses.scale_invariant_loss(real, np.ones(2)) == pytest.approx(0.25)


def test_scale_invariant_rejects_non_positive():
    with pytest.raises(ValueError):
        losses.scale_invariant_loss(np.array([1.0, 0.0]), np.ones(2))


# --- sensitivity sweep -------------------------------------------------------------

def test_sweep_rows_and_monotone_ratio(sunny, geom256):
    rows = losses.sensitivity_sweep(sunny, geom256.solid_angles, 15)
    assert [r["t"] for r in rows] == list(range(16))
    ratios = [r["illum_ratio"] for r in rows]
    assert all(a <= b for a, b in zip(ratios, ratios[1:]))
    # the map tops out below 2^14, so the last two rows are exact
    for r in rows[-2:]:
        assert r["illum_ratio"] == 1.0 and r["L1_HDR"] == 0 and r["L2_LDR"] == 0


def test_sweep_l1_at_zero_is_mean_excess():
    geom = SkyangularGeometry(64)
    lum = np.exp2(np.random.default_rng(3).uniform(-4, 12, (64, 64)))
    img = grey(lum) * geom.disc[..., None]
    row = losses.sensitivity_sweep(img, geom.solid_angles, 12)[0]
    sel = lum[geom.disc]
    assert row["L1_HDR"] == pytest.approx(np.mean(sel - np.minimum(sel, 1.0)), rel=1e-12)


def test_global_l1_insensitive_to_the_top_stop(sunny, geom256):
    # the loss-module invariant compares t=14 with t=15
    rows = losses.sensitivity_sweep(sunny, geom256.solid_angles, 15)
    assert abs(rows[14]["L1_HDR"] - rows[15]["L1_HDR"]) <= 0.01 * rows[0]["L1_HDR"]


@settings(max_examples=40, deadline=None)
@given(hnp.arrays(np.float64, (5, 5, 3), elements=st.floats(0, 1e4)),
       hnp.arrays(np.float64, (5, 5, 3), elements=st.floats(0, 1e4)))
def test_losses_are_non_negative_and_zero_on_self(a, b):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", EmptySelectionWarning)
        for fn in (losses.l1, losses.l2):
            assert fn(a, b) >= 0 and fn(a, a) == 0
        assert losses.cascade_bands_loss(a, b).total >= 0
        assert losses.cascade_bands_loss(a, a).total == 0
        assert losses.cascade_exposure_loss(a, b, tonemap_clamp=True).total >= 0
