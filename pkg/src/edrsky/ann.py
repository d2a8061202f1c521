"""Per-pixel MLP inverse tone-mapper (1x1-convolution network).

Every pixel is mapped independently through ``hidden_layers`` ReLU layers
of ``hidden_width`` units and a linear output layer.  Networks are plain
numpy with hand-written backpropagation and an Adam optimiser.
"""

import json
import math
from dataclasses import asdict, dataclass

import numpy as np

from .envmap import dynamic_range_ev, integrated_illumination
from .hdr_io import atomic_write

__all__ = [
    "MlpSpec",
    "MlpParameters",
    "TrainConfig",
    "TrainingDiverged",
    "init_params",
    "forward",
    "backward",
    "train",
    "predict_image",
    "attach_priori",
    "evaluate_head",
    "save_params",
    "load_params",
]

_MAGIC = b"EDRSKY-MLP 1\n"


class TrainingDiverged(RuntimeError):
    pass


@dataclass(frozen=True)
class MlpSpec:
    input_channels: int = 3
    hidden_layers: int = 9
    hidden_width: int = 32
    output_channels: int = 3

    def __post_init__(self):
        if min(self.input_channels, self.hidden_width, self.output_channels) < 1:
            raise ValueError("channel counts must be at least 1")
        if self.hidden_layers < 0:
            raise ValueError("hidden_layers must be non-negative")

    @property
    def layer_sizes(self):
        return ([self.input_channels] + [self.hidden_width] * self.hidden_layers
                + [self.output_channels])

    @property
    def parameter_count(self):
        s = self.layer_sizes
        return sum(a * b + b for a, b in zip(s[:-1], s[1:]))


@dataclass
class MlpParameters:
    """Weights ``W[k]`` of shape ``(fan_in, fan_out)`` and biases ``b[k]``.

    ``x_shift/x_scale`` and ``y_shift/y_scale`` are fixed affine maps applied
    before the first and after the last layer.
    """

    weights: list
    biases: list
    x_shift: np.ndarray = None
    x_scale: np.ndarray = None
    y_shift: np.ndarray = None
    y_scale: np.ndarray = None

    def __post_init__(self):
        n_in = self.weights[0].shape[0]
        n_out = self.weights[-1].shape[1]
        if self.x_shift is None:
            self.x_shift = np.zeros(n_in)
        if self.x_scale is None:
            self.x_scale = np.ones(n_in)
        if self.y_shift is None:
            self.y_shift = np.zeros(n_out)
        if self.y_scale is None:
            self.y_scale = np.ones(n_out)

    @property
    def spec(self):
        sizes = [self.weights[0].shape[0]] + [w.shape[1] for w in self.weights]
        hidden = sizes[1:-1]
        return MlpSpec(sizes[0], len(hidden), hidden[0] if hidden else 1, sizes[-1])

    def copy(self):
        return MlpParameters([w.copy() for w in self.weights], [b.copy() for b in self.biases],
                             self.x_shift.copy(), self.x_scale.copy(),
                             self.y_shift.copy(), self.y_scale.copy())

    def arrays(self):
        return self.weights + self.biases


@dataclass
class TrainConfig:
    lr: float = 1e-4
    batch_size: int = 256
    epochs: int = 200
    loss: str = "l2"
    seed: int = 0
    optimizer: str = "adam"
    normalize: bool = True
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    lr_decay: float = 1.0  # multiplicative per epoch

    def __post_init__(self):
        if not self.lr > 0:
            raise ValueError("learning rate must be positive")
        if self.batch_size < 1 or self.epochs < 0:
            raise ValueError("bad batch size or epoch count")
        if self.loss not in ("l1", "l2"):
            raise ValueError(f"unknown loss {self.loss!r}")
        if self.optimizer not in ("adam", "sgd"):
            raise ValueError(f"unknown optimizer {self.optimizer!r}")


def init_params(spec, rng=None):
    """He-uniform weights (bound ``sqrt(6 / fan_in)``), zero biases."""
    rng = np.random.default_rng(rng)
    sizes = spec.layer_sizes
    weights, biases = [], []
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        bound = math.sqrt(6.0 / fan_in)
        weights.append(rng.uniform(-bound, bound, size=(fan_in, fan_out)))
        biases.append(np.zeros(fan_out))
    return MlpParameters(weights, biases)


def _features(params, x):
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-1] != params.weights[0].shape[0]:
        raise ValueError(f"expected {params.weights[0].shape[0]} input channels, got {x.shape[-1]}")
    return x


def _forward_cache(params, x):
    h = (x - params.x_shift) / params.x_scale
    acts = [h]
    last = len(params.weights) - 1
    for k, (w, b) in enumerate(zip(params.weights, params.biases)):
        z = h @ w + b
        h = np.maximum(z, 0.0) if k < last else z
        acts.append(h)
    return acts


def forward(params, pixels):
    """Evaluate the network on ``(..., C)`` per-pixel features."""
    x = _features(params, pixels)
    lead = x.shape[:-1]
    acts = _forward_cache(params, x.reshape(-1, x.shape[-1]))
    y = acts[-1] * params.y_scale + params.y_shift
    return y.reshape(*lead, -1)


def _loss_and_grad(pred, target, loss):
    diff = pred - target
    n = diff.size
    if loss == "l2":
        return float(np.sum(diff * diff) / n), 2.0 * diff / n
    # subgradient 0 at equality
    return float(np.sum(np.abs(diff)) / n), np.sign(diff) / n


def backward(params, pixels, target, loss="l2"):
    """Loss and exact gradients w.r.t. every weight and bias.

    The loss is the mean over all pixels and channels of the squared
    (``l2``) or absolute (``l1``) difference between the network output and
    ``target``.  Returns ``(loss, grad_weights, grad_biases)``.
    """
    x = _features(params, pixels).reshape(-1, params.weights[0].shape[0])
    t = np.asarray(target, dtype=np.float64).reshape(x.shape[0], -1)
    acts = _forward_cache(params, x)
    pred = acts[-1] * params.y_scale + params.y_shift
    value, g = _loss_and_grad(pred, t, loss)
    if not math.isfinite(value):
        raise TrainingDiverged(f"non-finite loss {value}")
    g = g * params.y_scale
    nl = len(params.weights)
    gw = [None] * nl
    gb = [None] * nl
    for k in range(nl - 1, -1, -1):
        gw[k] = acts[k].T @ g
        gb[k] = g.sum(axis=0)
        if k:
            g = (g @ params.weights[k].T) * (acts[k] > 0)
    return value, gw, gb


def _batches(n, batch_size, rng):
    order = rng.permutation(n)
    for start in range(0, n, batch_size):
        yield order[start:start + batch_size]


def train(spec, config, features, targets, params=None):
    """Fit an MLP to ``(features, targets)`` pixel pairs.

    Returns ``(params, history)`` where ``history`` holds the mean training
    loss of each epoch.  Deterministic for a fixed ``config.seed``.
    """
    x = np.asarray(features, dtype=np.float64).reshape(-1, spec.input_channels)
    y = np.asarray(targets, dtype=np.float64).reshape(-1, spec.output_channels)
    if x.shape[0] == 0 or x.shape[0] != y.shape[0]:
        raise ValueError("need a non-empty set of matching feature/target rows")
    rng = np.random.default_rng(config.seed)
    if params is None:
        params = init_params(spec, rng)
    else:
        params = params.copy()
    if config.normalize:
        params.x_shift = x.mean(axis=0)
        params.x_scale = np.where(x.std(axis=0) > 0, x.std(axis=0), 1.0)
        params.y_shift = y.mean(axis=0)
        params.y_scale = np.where(y.std(axis=0) > 0, y.std(axis=0), 1.0)

    arrays = params.arrays()
    m = [np.zeros_like(a) for a in arrays]
    v = [np.zeros_like(a) for a in arrays]
    step = 0
    lr = config.lr
    history = []
    for epoch in range(config.epochs):
        total = 0.0
        for idx in _batches(x.shape[0], config.batch_size, rng):
            value, gw, gb = backward(params, x[idx], y[idx], config.loss)
            total += value * idx.size
            grads = gw + gb
            step += 1
            for a, g, mk, vk in zip(arrays, grads, m, v):
                if config.optimizer == "sgd":
                    a -= lr * g
                    continue
                mk *= config.beta1
                mk += (1 - config.beta1) * g
                vk *= config.beta2
                vk += (1 - config.beta2) * g * g
                mhat = mk / (1 - config.beta1 ** step)
                vhat = vk / (1 - config.beta2 ** step)
                a -= lr * mhat / (np.sqrt(vhat) + config.eps)
        epoch_loss = total / x.shape[0]
        if not math.isfinite(epoch_loss) or epoch_loss > 1e30:
            raise TrainingDiverged(f"loss diverged at epoch {epoch}: {epoch_loss}")
        history.append(epoch_loss)
        lr *= config.lr_decay
    return params, history


def predict_image(params, features, output_space="log2"):
    """Run a head over an ``(H, W, C)`` feature image and decode to linear EDR."""
    out = forward(params, features)
    if output_space == "log2":
        return np.exp2(out)
    return out


def attach_priori(pixels, dirs, omega, label):
    """Append ``X, Y, Z, omega / max(omega), label / 3`` to each pixel's features."""
    pixels = np.asarray(pixels, dtype=np.float64)
    dirs = np.asarray(dirs)
    omega = np.asarray(omega)
    label = np.asarray(label)
    shape = pixels.shape[:2]
    if dirs.shape[:2] != shape or omega.shape != shape or label.shape != shape:
        raise ValueError("priori channels do not match the feature image geometry")
    om = omega / omega.max() if omega.max() > 0 else omega
    prior = np.concatenate([dirs, om[..., None], label[..., None] / 3.0], axis=-1)
    return np.concatenate([pixels, prior], axis=-1)


def evaluate_head(predictor, test_images, omega, output_space="log2"):
    """EV and integrated-illumination ratios plus HDR L1/L2 of a head.

    ``predictor`` is either :class:`MlpParameters` or a callable mapping an
    ``(H, W, C)`` feature image to a linear EDR image.  ``test_images`` is an
    iterable of ``(features, ground_truth)`` pairs.  Ratios compare averages
    over the test set, fake over real.
    """
    if isinstance(predictor, MlpParameters):
        params = predictor
        predictor = lambda f: predict_image(params, f, output_space)  # noqa: E731
    omega = np.asarray(omega)
    disc = omega > 0
    ev_f, ev_r, ill_f, ill_r, e1, e2 = [], [], [], [], [], []
    for features, truth in test_images:
        fake = np.asarray(predictor(features), dtype=np.float64)
        fake = np.where(disc[..., None], fake, 0.0)
        truth = np.asarray(truth, dtype=np.float64)
        ev_r.append(dynamic_range_ev(truth, disc))
        try:
            ev_f.append(dynamic_range_ev(fake, disc))
        except ValueError:
            ev_f.append(math.nan)
        ill_f.append(integrated_illumination(fake, omega))
        ill_r.append(integrated_illumination(truth, omega))
        d = (fake - truth)[disc]
        e1.append(float(np.mean(np.abs(d))))
        e2.append(float(np.mean(d * d)))
    return {
        "ev_ratio": float(np.mean(ev_f) / np.mean(ev_r)),
        "illum_ratio": float(np.mean(ill_f) / np.mean(ill_r)),
        "L1_HDR": float(np.mean(e1)),
        "L2_HDR": float(np.mean(e2)),
        "images": len(ill_r),
    }


def save_params(path, params, extra=None):
    """Checkpoint: magic line, JSON header line, little-endian float64 blob."""
    arrays = params.arrays() + [params.x_shift, params.x_scale, params.y_shift, params.y_scale]
    header = {
        "spec": asdict(params.spec),
        "shapes": [list(a.shape) for a in arrays],
        "dtype": "<f8",
    }
    if extra:
        header["extra"] = extra
    blob = b"".join(np.ascontiguousarray(a, dtype="<f8").tobytes() for a in arrays)
    with atomic_write(path) as fh:
        fh.write(_MAGIC + json.dumps(header).encode("utf-8") + b"\n" + blob)


def load_params(path):
    with open(path, "rb") as fh:
        if fh.readline() != _MAGIC:
            raise ValueError(f"{path}: not an MLP checkpoint")
        header = json.loads(fh.readline())
        blob = fh.read()
    arrays = []
    pos = 0
    for shape in header["shapes"]:
        count = int(np.prod(shape))
        arrays.append(np.frombuffer(blob, "<f8", count, pos).reshape(shape).copy())
        pos += 8 * count
    if pos != len(blob):
        raise ValueError(f"{path}: checkpoint size does not match header")
    nl = (len(arrays) - 4) // 2
    return MlpParameters(arrays[:nl], arrays[nl:2 * nl], *arrays[2 * nl:])
