"""Extended-dynamic-range sky environment maps: I/O, metrics, tone mapping,
exposure-aware losses, sky segmentation, preprocessing and per-pixel MLP heads."""

from importlib import resources

from . import ann, envmap, hdr_io, losses, pipeline, segmentation, synthetic, tonemap
from .envmap import (
    SkyangularGeometry,
    clip_to_ev,
    dynamic_range_ev,
    equalize_exposure,
    integrated_illumination,
    luminance,
    render_diffuse_sphere,
)
from .hdr_io import read_hdr, write_hdr, write_report

__version__ = "0.1.0"

__all__ = [
    "ann",
    "envmap",
    "hdr_io",
    "losses",
    "pipeline",
    "segmentation",
    "synthetic",
    "tonemap",
    "SkyangularGeometry",
    "clip_to_ev",
    "dynamic_range_ev",
    "equalize_exposure",
    "integrated_illumination",
    "luminance",
    "render_diffuse_sphere",
    "read_hdr",
    "write_hdr",
    "write_report",
    "fixture_path",
]


def fixture_path(name):
    """Path of a bundled sample file, e.g. ``fixture_path("sunny.hdr")``."""
    path = resources.files("edrsky") / "data" / name
    if not path.is_file():
        raise FileNotFoundError(f"no bundled fixture named {name!r}")
    return str(path)
