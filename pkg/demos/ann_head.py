"""
Learning the inverse tone map with a per-pixel MLP
==================================================

The head sees one tone-mapped value at a time and predicts log2 radiance,
so it is an MLP applied independently to every pixel.  Here it learns to
undo mu-law-log2 over 30 stops.  The closed-form inverse serves as the
reference.
"""

import numpy as np

from edrsky import ann, envmap, fixture_path, hdr_io, tonemap
from _out import out_dir

op = tonemap.MuLawLog2(5000)
rng = np.random.default_rng(0)
intensity = np.exp2(rng.uniform(-16, 14, (6000, 1)))
x, y = op.forward(intensity), np.log2(intensity)
train, test = slice(0, 4000), slice(4000, None)

spec = ann.MlpSpec(1, hidden_layers=9, hidden_width=32, output_channels=1)
config = ann.TrainConfig(lr=1e-3, batch_size=64, epochs=60, lr_decay=0.95, seed=0)
params, history = ann.train(spec, config, x[train], y[train])
print(f"{spec.parameter_count} parameters, loss {history[0]:.4f} -> {history[-1]:.6f}")

rel = np.abs(np.exp2(ann.forward(params, x[test]) - y[test]) - 1)
print(f"held-out relative radiance error: mean {rel.mean():.2%}, median {np.median(rel):.2%}")

# %%
# Apply the scalar head to every channel of a real map and compare with
# the closed-form inverse
sky = hdr_io.read_hdr(fixture_path("sunny.hdr")).astype(np.float64)
omega = envmap.geometry_for(sky).solid_angles
ldr = op.forward(sky)


def head(features):
    return np.exp2(ann.forward(params, features[..., None])[..., 0])


for name, predictor in (("mlp head", head), ("closed form", op.inverse)):
    rep = ann.evaluate_head(predictor, [(ldr, sky)], omega)
    print(f"{name:12s} EV ratio {rep['ev_ratio']:.4f}  illumination ratio {rep['illum_ratio']:.4f}")

path = out_dir("ann") / "mulawlog2_head.mlp"
ann.save_params(path, params, {"mu": op.mu})
print(f"saved {path}")
