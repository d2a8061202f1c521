import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from edrsky import envmap
from edrsky.envmap import SkyangularGeometry


def unit_sky(n):
    geom = SkyangularGeometry(n)
    img = np.zeros((n, n, 3))
    img[geom.disc] = 1.0
    return geom, img


# --- luminance ---------------------------------------------------------------

@pytest.mark.parametrize("rgb,expected", [((1, 1, 1), 1.0), ((1, 0, 0), 0.2126),
                                          ((0, 2, 0), 1.4304)])
def test_luminance_examples(rgb, expected):
    assert envmap.luminance(np.array(rgb, float)) == pytest.approx(expected, abs=1e-12)


# --- dynamic range -----------------------------------------------------------

def test_ev_of_two_luminances():
    img = np.array([[[1.0] * 3, [9.0] * 3]])
    assert envmap.dynamic_range_ev(img) == pytest.approx(3.0)


def test_ev_direct_evaluation():
    img = np.array([[[0.5] * 3, [8192.5] * 3]])
    assert envmap.dynamic_range_ev(img) == pytest.approx(13.0)


def test_ev_constant_image_is_an_error():
    with pytest.raises(ValueError, match="constant"):
        envmap.dynamic_range_ev(np.ones((4, 4, 3)))


def test_ev_ignores_border_pixels():
    geom, img = unit_sky(32)
    img[geom.disc.nonzero()[0][0], geom.disc.nonzero()[1][0]] = 5.0
    # border zeros would give log2(5); on-disc min is 1
    assert envmap.dynamic_range_ev(img) == pytest.approx(2.0)


# --- solid angles --------------------------------------------------------------

@pytest.mark.parametrize("n,tol", [(256, 1e-3), (512, 1e-3), (1024, 1e-3)])
def test_solid_angles_sum_to_hemisphere(n, tol):
    assert SkyangularGeometry(n).solid_angles.sum() == pytest.approx(2 * math.pi, rel=tol)


def test_solid_angle_convergence_improves_with_resolution():
    errs = [abs(SkyangularGeometry(n).solid_angles.sum() - 2 * math.pi) for n in (64, 256, 1024)]
    assert errs[0] > errs[1] > errs[2]


def test_equisolid_projection_also_covers_hemisphere():
    geom = SkyangularGeometry(512, "equisolid")
    assert geom.solid_angles.sum() == pytest.approx(2 * math.pi, rel=1e-3)


def test_border_pixels_have_zero_solid_angle():
    geom = SkyangularGeometry(64)
    assert geom.solid_angles[0, 0] == 0.0
    assert np.all(geom.solid_angles[~geom.disc] == 0)
    assert np.all(geom.solid_angles[geom.disc] > 0)


def test_solid_angles_are_symmetric_under_quarter_turns():
    omega = SkyangularGeometry(128).solid_angles
    for k in range(1, 4):
        assert np.array_equal(np.rot90(omega, k), omega)


def test_bad_geometry_rejected():
    with pytest.raises(ValueError):
        SkyangularGeometry(1)
    with pytest.raises(ValueError):
        SkyangularGeometry(16, "stereographic")


# --- directions ----------------------------------------------------------------

def test_directions_are_unit_and_upper_hemisphere():
    geom = SkyangularGeometry(128)
    d = geom.directions[geom.disc]
    assert np.allclose(np.linalg.norm(d, axis=-1), 1.0)
    assert np.all(d[:, 2] >= 0)
    assert np.all(geom.directions[~geom.disc] == 0)


def test_axis_convention():
    geom = SkyangularGeometry(101)
    centre = geom.directions[50, 50]
    assert np.allclose(centre, [0, 0, 1])
    # right of centre is east (+X), top is north (+Y)
    assert geom.directions[50, 99, 0] > 0.99
    assert geom.directions[1, 50, 1] > 0.99


@pytest.mark.parametrize("projection", ["equidistant", "equisolid"])
def test_pixel_of_inverts_directions(projection):
    geom = SkyangularGeometry(64, projection)
    for r, c in [(10, 20), (32, 32), (50, 12), (5, 31)]:
        if geom.disc[r, c]:
            assert np.allclose(geom.pixel_of(geom.directions[r, c]), (r, c))


# --- integrated illumination -----------------------------------------------------

def test_unit_hemisphere_illumination():
    geom, img = unit_sky(512)
    assert envmap.integrated_illumination(img, geom.solid_angles) == pytest.approx(
        2 * math.pi, rel=1e-3)


def test_illumination_brute_force_and_linearity(rng):
    geom = SkyangularGeometry(32)
    img = rng.random((32, 32, 3))
    brute = sum(geom.solid_angles[i, j] * (0.2126 * img[i, j, 0] + 0.7152 * img[i, j, 1]
                                           + 0.0722 * img[i, j, 2])
                for i in range(32) for j in range(32))
    assert envmap.integrated_illumination(img, geom.solid_angles) == pytest.approx(brute)
    assert envmap.integrated_illumination(3.5 * img, geom.solid_angles) == pytest.approx(3.5 * brute)
    assert envmap.integrated_illumination(0 * img, geom.solid_angles) == 0.0


def test_illumination_shape_mismatch():
    with pytest.raises(ValueError):
        envmap.integrated_illumination(np.ones((4, 4, 3)), np.ones((5, 5)))


def test_metrics_invariant_under_quarter_turns(sunny, geom256):
    ill = envmap.integrated_illumination(sunny, geom256.solid_angles)
    ev = envmap.dynamic_range_ev(sunny)
    for k in (1, 2, 3):
        turned = np.rot90(sunny, k)
        assert envmap.integrated_illumination(turned, geom256.solid_angles) == pytest.approx(ill, rel=1e-12)
        assert envmap.dynamic_range_ev(turned) == ev


# --- clipping and exposure -------------------------------------------------------

def test_clip_examples():
    assert envmap.clip_to_ev(np.array([10.0]), 3).tolist() == [8.0]
    img = np.array([1.0, 2.0, 7.9])
    assert np.array_equal(envmap.clip_to_ev(img, 3), img)
    with pytest.raises(ValueError):
        envmap.clip_to_ev(img, math.inf)


def test_clip_is_idempotent_and_bounds_ev(sunny):
    once = envmap.clip_to_ev(sunny, 9)
    assert np.array_equal(envmap.clip_to_ev(once, 9), once)
    assert envmap.dynamic_range_ev(once) <= 9


def test_illumination_monotone_in_clip_ev(sunny, geom256):
    values = [envmap.integrated_illumination(envmap.clip_to_ev(sunny, t), geom256.solid_angles)
              for t in range(16)]
    assert all(a <= b for a, b in zip(values, values[1:]))


def test_equalize_examples(geom256):
    _, unit = unit_sky(256)
    omega = geom256.solid_angles
    ref = unit * 2.0
    assert envmap.exposure_scale(unit, ref, omega) == pytest.approx(2.0)
    assert np.array_equal(envmap.equalize_exposure(unit, unit, omega), unit)
    with pytest.raises(ValueError):
        envmap.equalize_exposure(0 * unit, unit, omega)


def test_clip_then_equalize_restores_illumination(sunny, geom256):
    omega = geom256.solid_angles
    out = envmap.equalize_exposure(envmap.clip_to_ev(sunny, 9), sunny, omega)
    assert envmap.integrated_illumination(out, omega) == pytest.approx(
        envmap.integrated_illumination(sunny, omega), rel=1e-6)


def test_reexpose_group():
    img = np.array([1.0, 3.0, 8.0])
    assert np.array_equal(envmap.reexpose(img, 0), img)
    assert np.array_equal(envmap.reexpose(img, 1), img / 2)
    assert np.array_equal(envmap.reexpose(envmap.reexpose(img, 1), -1), img)


# --- diffuse probe -------------------------------------------------------------

def test_uniform_sky_up_irradiance_is_pi():
    geom, img = unit_sky(512)
    e = envmap.irradiance(img, geom.solid_angles, geom.directions, [[0, 0, 1]])
    assert np.allclose(e, math.pi, rtol=5e-3)


def test_tilted_normal_sees_less_of_the_sky():
    geom, img = unit_sky(256)
    normals = [[0, 0, 1], [1, 0, 0], [0, 0, -1]]
    e = envmap.irradiance(img, geom.solid_angles, geom.directions, normals)[:, 0]
    # analytic: pi, pi/2, 0
    assert e == pytest.approx([math.pi, math.pi / 2, 0.0], abs=5e-3)


def test_black_sky_renders_black():
    geom = SkyangularGeometry(64)
    out = envmap.render_diffuse_sphere(np.zeros((64, 64, 3)), geom.solid_angles,
                                       geom.directions, 32)
    assert out.shape == (32, 32, 3) and not out.any()


def test_render_is_linear(rng):
    geom = SkyangularGeometry(64)
    a, b = rng.random((64, 64, 3)), rng.random((64, 64, 3))
    r = lambda x: envmap.render_diffuse_sphere(x, geom.solid_angles, geom.directions, 24)  # noqa: E731
    assert np.allclose(r(2 * a + 3 * b), 2 * r(a) + 3 * r(b))


def test_uniform_sky_render_top_pixel():
    geom, img = unit_sky(256)
    out = envmap.render_diffuse_sphere(img, geom.solid_angles, geom.directions, 65)
    # outgoing radiance of a white Lambertian surface facing up: E / pi = 1
    assert out[32, 32] == pytest.approx([1.0] * 3, rel=5e-3)
    assert not out[0, 0].any()


def test_merged_lights_keep_total_power(sunny, geom256):
    fine = envmap.sphere_flux(sunny, geom256.solid_angles, geom256.directions,
                              env_resolution=None)
    coarse = envmap.sphere_flux(sunny, geom256.solid_angles, geom256.directions,
                                env_resolution=32)
    assert coarse == pytest.approx(fine, rel=1e-3)


def test_sphere_flux_equals_pi_times_radiant_sum(sunny, geom256):
    omega = geom256.solid_angles
    expected = math.pi * np.tensordot(omega, sunny, axes=([0, 1], [0, 1]))
    flux = envmap.sphere_flux(sunny, omega, geom256.directions)
    assert flux == pytest.approx(expected, rel=2e-3)


def test_clip_equalize_keeps_render_energy(sunny, geom256):
    omega, dirs = geom256.solid_angles, geom256.directions
    before = envmap.luminance(envmap.sphere_flux(sunny, omega, dirs))
    for ev in (13, 11, 9, 5):
        out = envmap.equalize_exposure(envmap.clip_to_ev(sunny, ev), sunny, omega)
        after = envmap.luminance(envmap.sphere_flux(out, omega, dirs))
        assert after == pytest.approx(before, rel=1e-2)


def test_fibonacci_points_are_balanced():
    pts = envmap.fibonacci_sphere(2000)
    assert np.allclose(np.linalg.norm(pts, axis=1), 1)
    assert np.abs(pts.mean(axis=0)).max() < 1e-3


@settings(max_examples=25, deadline=None)
@given(st.floats(0.01, 100), st.integers(0, 3))
def test_illumination_scales_and_rotates(alpha, k):
    geom = SkyangularGeometry(32)
    img = np.random.default_rng(5).random((32, 32, 3))
    base = envmap.integrated_illumination(img, geom.solid_angles)
    out = envmap.integrated_illumination(alpha * np.rot90(img, k), geom.solid_angles)
    assert out == pytest.approx(alpha * base, rel=1e-9)
