"""Invertible tone-mapping operators.

Every operator is a strictly monotone map on ``I >= 0`` with a closed-form
inverse, applied per channel in linear RGB.
"""

import math
import os
from dataclasses import dataclass

import numpy as np

__all__ = [
    "Tonemapper",
    "Gamma",
    "LogN",
    "MuLaw",
    "MuLawLog2",
    "DeepCloudsRecip",
    "apply",
    "invert",
    "error_propagation",
    "sweep_curves",
    "get_operator",
    "default_mu",
    "default_gamma",
]

DEEPCLOUDS_OFFSET = 1.01


def default_mu():
    return float(os.environ.get("EDRSKY_MU", 5000.0))


def default_gamma():
    return float(os.environ.get("EDRSKY_GAMMA", 2.2))


class Tonemapper:
    name = "identity"
    increasing = True

    def forward(self, x):
        raise NotImplementedError

    def inverse(self, y):
        raise NotImplementedError

    def in_range(self, y):
        """True where ``y`` is a valid compressed value."""
        return np.asarray(y) >= 0

    def __call__(self, x):
        return self.forward(x)


def _positive(**params):
    for key, value in params.items():
        if not value > 0:
            raise ValueError(f"{key} must be positive, got {value}")


def _nonneg(x):
    x = np.asarray(x, dtype=np.float64)
    if np.any(x < 0):
        raise ValueError("tone mapping is defined for non-negative intensities only")
    return x


@dataclass(frozen=True)
class Gamma(Tonemapper):
    gamma: float = 2.2
    name = "gamma"

    def __post_init__(self):
        _positive(gamma=self.gamma)

    def forward(self, x):
        return np.power(_nonneg(x), 1.0 / self.gamma)

    def inverse(self, y):
        return np.power(y, self.gamma)


@dataclass(frozen=True)
class LogN(Tonemapper):
    """``log_n(I + 1)``."""

    base: float = 2.0
    name = "logn"

    def __post_init__(self):
        _positive(base=self.base)
        if self.base == 1:
            raise ValueError("logarithm base must differ from 1")

    def forward(self, x):
        return np.log1p(_nonneg(x)) / math.log(self.base)

    def inverse(self, y):
        return np.expm1(np.asarray(y, dtype=np.float64) * math.log(self.base))


@dataclass(frozen=True)
class MuLaw(Tonemapper):
    """``ln(1 + mu I) / ln(1 + mu)``."""

    mu: float = 5000.0
    name = "mulaw"

    def __post_init__(self):
        _positive(mu=self.mu)

    def forward(self, x):
        return np.log1p(self.mu * _nonneg(x)) / math.log1p(self.mu)

    def inverse(self, y):
        return np.expm1(np.asarray(y, dtype=np.float64) * math.log1p(self.mu)) / self.mu


@dataclass(frozen=True)
class MuLawLog2(Tonemapper):
    """``log2(mu_law(I) + 1)``; maps [0, 1] onto [0, 1]."""

    mu: float = 5000.0
    name = "mulawlog2"

    def __post_init__(self):
        _positive(mu=self.mu)

    def forward(self, x):
        m = np.log1p(self.mu * _nonneg(x)) / math.log1p(self.mu)
        return np.log1p(m) / math.log(2.0)

    def inverse(self, y):
        m = np.expm1(np.asarray(y, dtype=np.float64) * math.log(2.0))
        return np.expm1(m * math.log1p(self.mu)) / self.mu


@dataclass(frozen=True)
class DeepCloudsRecip(Tonemapper):
    """``1 / (1 + I + 0.01)``, strictly decreasing, onto ``(0, 1/1.01]``."""

    name = "deepclouds"
    increasing = False

    def forward(self, x):
        return 1.0 / (DEEPCLOUDS_OFFSET + _nonneg(x))

    def inverse(self, y):
        y = np.asarray(y, dtype=np.float64)
        return np.maximum(1.0 / y - DEEPCLOUDS_OFFSET, 0.0)

    def in_range(self, y):
        y = np.asarray(y)
        return (y > 0) & (y <= 1.0 / DEEPCLOUDS_OFFSET)


def apply(op, img):
    return op.forward(img)


def invert(op, img):
    img = np.asarray(img, dtype=np.float64)
    if not np.all(op.in_range(img)):
        raise ValueError(f"values outside the range of the {op.name} operator")
    return op.inverse(img)


def error_propagation(op, intensity, delta=0.01):
    """HDR error caused by an LDR error ``delta``: ``I - inv(fwd(I) - delta)``."""
    target = op.forward(intensity) - delta
    if not np.all(op.in_range(target)):
        raise ValueError("fwd(I) - delta falls outside the operator range")
    return np.asarray(intensity, dtype=np.float64) - op.inverse(target)


def sweep_curves(ops, intensities, delta=0.01):
    """Tabulate operator value and propagated error over an intensity grid.

    Rows where ``fwd(I) - delta`` leaves the operator range get ``nan`` error.
    """
    intensities = np.asarray(intensities, dtype=np.float64).ravel()
    if intensities.size == 0:
        raise ValueError("empty intensity grid")
    rows = []
    for op in ops:
        values = op.forward(intensities)
        target = values - delta
        valid = op.in_range(target)
        err = np.full_like(intensities, np.nan)
        err[valid] = intensities[valid] - op.inverse(target[valid])
        for i, v, e in zip(intensities, values, err):
            rows.append({"operator": describe(op), "intensity": float(i),
                         "value": float(v), "error": float(e)})
    return rows


def describe(op):
    if isinstance(op, Gamma):
        return f"gamma({op.gamma:g})"
    if isinstance(op, LogN):
        return f"log{op.base:g}"
    if isinstance(op, (MuLaw, MuLawLog2)):
        return f"{op.name}({op.mu:g})"
    return op.name


def get_operator(name, mu=None, gamma=None, base=2.0):
    """Build an operator from a CLI-style name."""
    key = name.lower().replace("-", "").replace("_", "")
    mu = default_mu() if mu is None else mu
    gamma = default_gamma() if gamma is None else gamma
    if key == "gamma":
        return Gamma(gamma)
    if key in ("log", "logn"):
        return LogN(base)
    if key.startswith("log") and key[3:].replace(".", "", 1).isdigit():
        return LogN(float(key[3:]))
    if key == "mulaw":
        return MuLaw(mu)
    if key == "mulawlog2":
        return MuLawLog2(mu)
    if key in ("deepclouds", "deepcloudsrecip", "recip"):
        return DeepCloudsRecip()
    raise ValueError(f"unknown tone-mapping operator {name!r}")
