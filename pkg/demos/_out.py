"""Shared output location for the demo scripts."""

import os
import pathlib


def out_dir(name):
    root = pathlib.Path(os.environ.get("EDRSKY_DEMO_OUT", pathlib.Path(__file__).parent / "output"))
    path = root / name
    path.mkdir(parents=True, exist_ok=True)
    return path
