import datetime as dt
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra import numpy as hnp

from edrsky import segmentation as seg
from edrsky.envmap import SkyangularGeometry
from edrsky.segmentation import CaptureMeta, SolarPosition
from edrsky.tonemap import MuLawLog2


def meta(lat, lon, iso):
    return CaptureMeta.from_dict({"latitude": lat, "longitude": lon, "timestamp": iso})


# --- ephemeris ------------------------------------------------------------------

def test_equator_equinox_noon_is_overhead():
    # equation of time is about -7.5 min on 2024-03-20
    pos = seg.solar_position(meta(0.0, 0.0, "2024-03-20T12:07:30+00:00"))
    assert pos.elevation == pytest.approx(90.0, abs=1.0)


def test_quebec_summer_solstice_noon():
    # local solar noon at 71.21 W is about 16:47 UTC
    pos = seg.solar_position(meta(46.81, -71.21, "2015-06-21T16:47:00+00:00"))
    assert pos.elevation == pytest.approx(90 - 46.81 + 23.44, abs=0.5)
    assert pos.azimuth == pytest.approx(180.0, abs=2.0)


def test_winter_midnight_below_horizon():
    pos = seg.solar_position(meta(45.0, 0.0, "2020-12-21T00:00:00+00:00"))
    assert pos.elevation < 0


def test_morning_sun_is_east():
    pos = seg.solar_position(meta(45.0, 0.0, "2020-06-21T07:00:00+00:00"))
    assert 0 < pos.azimuth < 180 and pos.elevation > 0


def test_naive_timestamp_is_utc():
    a = seg.solar_position(meta(10.0, 20.0, "2010-05-01T10:00:00"))
    b = seg.solar_position(meta(10.0, 20.0, "2010-05-01T12:00:00+02:00"))
    assert a == b


def test_capture_meta_validation():
    with pytest.raises(ValueError):
        CaptureMeta(91.0, 0.0, dt.datetime(2020, 1, 1))
    with pytest.raises(ValueError):
        CaptureMeta(0.0, 181.0, dt.datetime(2020, 1, 1))
    with pytest.raises(TypeError):
        CaptureMeta(0.0, 0.0, "2020-01-01")
    with pytest.raises(ValueError):
        meta(0.0, 0.0, "yesterday")
    m = meta(1.5, -2.5, "2020-01-01T00:00:00Z")
    assert CaptureMeta.from_dict(m.to_dict()) == m


# --- solar mask -----------------------------------------------------------------

def test_zenith_sun_mask_is_centred():
    geom = SkyangularGeometry(64)
    mask = seg.solar_mask(SolarPosition(0.0, 90.0), geom, 10.0)
    rows, cols = np.nonzero(mask)
    assert rows.mean() == pytest.approx(31.5) and cols.mean() == pytest.approx(31.5)
    assert np.array_equal(mask, mask[::-1]) and np.array_equal(mask, mask[:, ::-1])


def test_mask_solid_angle_matches_cap():
    geom = SkyangularGeometry(512)
    mask = seg.solar_mask(SolarPosition(200.0, 40.0), geom, 2.5)
    cap = 2 * math.pi * (1 - math.cos(math.radians(2.5)))
    assert geom.solid_angles[mask].sum() == pytest.approx(cap, rel=0.05)


def test_below_horizon_is_empty():
    geom = SkyangularGeometry(32)
    assert not seg.solar_mask(SolarPosition(90.0, -5.0), geom).any()


@pytest.mark.parametrize("elevation", [5.0, 30.0, 60.0, 89.0])
def test_mask_angular_radius_bound(elevation):
    geom = SkyangularGeometry(256)
    pos = SolarPosition(37.0, elevation)
    mask = seg.solar_mask(pos, geom, 2.5)
    assert mask.any()
    ang = np.degrees(np.arccos(np.clip(geom.directions[mask] @ seg.sun_direction(pos), -1, 1)))
    pixel_deg = 90.0 / (geom.resolution / 2)
    assert ang.max() <= 2.5 + pixel_deg


def test_sun_direction_axes():
    assert np.allclose(seg.sun_direction(SolarPosition(90.0, 0.0)), [1, 0, 0], atol=1e-12)
    assert np.allclose(seg.sun_direction(SolarPosition(0.0, 0.0)), [0, 1, 0], atol=1e-12)


# --- cloud ratio / mask -----------------------------------------------------------

def _from_ldr(r, g, b):
    inv = MuLawLog2().inverse
    return np.array([[[inv(r), inv(g), inv(b)]]])


def test_cloud_ratio_examples():
    assert seg.cloud_ratio(_from_ldr(0.4, 0.1, 0.4))[0, 0] == pytest.approx(0.0, abs=1e-12)
    assert seg.cloud_ratio(_from_ldr(0.2, 0.5, 0.3))[0, 0] == pytest.approx(0.2, abs=1e-9)
    assert seg.cloud_ratio(np.array([[[0.0, 0.0, 3.0]]]))[0, 0] == 1.0
    assert seg.cloud_ratio(np.zeros((1, 1, 3)))[0, 0] == 0.0


@settings(max_examples=60, deadline=None)
@given(hnp.arrays(np.float64, (4, 4, 3), elements=st.floats(0, 2.0 ** 16)))
def test_cloud_ratio_range(img):
    r = seg.cloud_ratio(img)
    assert np.all(r >= -1) and np.all(r <= 1)


def test_cloud_mask_examples():
    geom = SkyangularGeometry(32)
    blue = np.zeros((32, 32, 3))
    blue[..., 2] = 1.0
    assert not seg.cloud_mask(seg.cloud_ratio(blue), 0.2).any()
    grey = np.ones((32, 32, 3))
    assert np.array_equal(seg.cloud_mask(seg.cloud_ratio(grey), 0.2), geom.disc)
    assert not seg.cloud_mask(seg.cloud_ratio(grey), -1.0).any()


# --- morphology -------------------------------------------------------------------

def test_morph_constants():
    assert not seg.morph_brush(np.zeros((40, 40), bool)).any()
    assert seg.morph_brush(np.ones((40, 40), bool)).all()


def test_morph_removes_isolated_pixel():
    m = np.zeros((41, 41), bool)
    m[20, 20] = True
    assert not seg.morph_brush(m, 15).any()


def test_morph_fills_small_hole_and_keeps_blob():
    m = np.zeros((60, 60), bool)
    m[10:50, 10:50] = True
    m[30, 30] = False
    out = seg.morph_brush(m, 7)
    assert out[30, 30] and out[12:48, 12:48].all() and not out[:5].any()


def test_morph_brush_validation():
    for bad in (0, 4, -3):
        with pytest.raises(ValueError):
            seg.morph_brush(np.zeros((5, 5), bool), bad)


def test_disk_shape():
    d = seg.disk(5)
    assert d.shape == (5, 5) and d.sum() == 13 and seg.disk(1).tolist() == [[True]]


@settings(max_examples=40, deadline=None)
@given(hnp.arrays(np.bool_, (24, 24)), st.sampled_from([1, 3, 5]))
def test_morph_idempotent(mask, brush):
    once = seg.morph_brush(mask, brush)
    assert np.array_equal(seg.morph_brush(once, brush), once)


# --- labels -----------------------------------------------------------------------

def test_compose_empty_masks():
    geom = SkyangularGeometry(16)
    empty = np.zeros((16, 16), bool)
    labels = seg.compose_label(empty, empty, geom)
    assert np.array_equal(labels == seg.BORDER, ~geom.disc)
    assert np.all(labels[geom.disc] == seg.SKYDOME)


def test_compose_precedence():
    geom = SkyangularGeometry(16)
    sun = np.zeros((16, 16), bool)
    cloud = np.zeros((16, 16), bool)
    sun[8, 8] = cloud[8, 8] = cloud[8, 9] = True
    sun[0, 0] = cloud[0, 1] = True  # border corner
    labels = seg.compose_label(sun, cloud, geom)
    assert labels[8, 8] == seg.SUN and labels[8, 9] == seg.CLOUD
    assert labels[0, 0] == seg.BORDER and labels[0, 1] == seg.BORDER
    assert np.bincount(labels.ravel(), minlength=4).sum() == 256
    with pytest.raises(ValueError):
        seg.compose_label(sun[:8], cloud, geom)


def test_label_cloudy_fixture(cloudy):
    from edrsky.synthetic import FIXTURES

    m = CaptureMeta.from_dict(FIXTURES["cloudy"][1])
    labels, pos = seg.label_image(cloudy, m)
    geom = SkyangularGeometry(cloudy.shape[0])
    counts = np.bincount(labels.ravel(), minlength=4)
    assert pos is not None and pos.elevation > 0
    assert np.array_equal(labels == seg.BORDER, ~geom.disc)
    assert counts[seg.SUN] > 0 and counts[seg.CLOUD] > 0 and counts[seg.SKYDOME] > 0
    # the sun mask survives: precedence over cloud
    assert np.all(labels[seg.solar_mask(pos, geom)] == seg.SUN)


def test_label_without_meta_has_no_sun(sunny):
    labels, pos = seg.label_image(sunny, None)
    assert pos is None and not (labels == seg.SUN).any()
