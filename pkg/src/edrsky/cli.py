"""``edrsky`` command line.

Every subcommand accepts ``--config FILE.json``; keys are flag names
(dashes or underscores) and explicit flags win over the file.  The resolved
configuration is echoed to stderr and saved next to the main output as
``<output>.config.json``.  Exit status: 0 ok, 1 runtime error, 2 usage error.
"""

import argparse
import contextlib
import csv
import json
import math
import os
import shutil
import sys
import tempfile
import time
from concurrent.futures import ProcessPoolExecutor
from functools import partial

import numpy as np

from . import __version__, fixture_path
from . import ann, envmap, hdr_io, losses, pipeline, segmentation, tonemap

EXIT_OK, EXIT_ERROR, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


# --------------------------------------------------------------------------
# helpers


def _out_parent(path):
    parent = os.path.dirname(os.path.abspath(path))
    os.makedirs(parent, exist_ok=True)
    return path


@contextlib.contextmanager
def staged_dir(out_dir):
    """Collect files in a scratch directory; move them into ``out_dir`` only on success."""
    out_dir = os.path.abspath(out_dir)
    parent = os.path.dirname(out_dir)
    os.makedirs(parent, exist_ok=True)
    tmp = tempfile.mkdtemp(prefix=".stage-", dir=parent)
    try:
        yield tmp
        os.makedirs(out_dir, exist_ok=True)
        for name in sorted(os.listdir(tmp)):
            os.replace(os.path.join(tmp, name), os.path.join(out_dir, name))
    finally:
        shutil.rmtree(tmp, ignore_errors=True)


def _write_config(config, path):
    with hdr_io.atomic_write(_out_parent(path), "w") as fh:
        json.dump(config, fh, indent=2, default=str)
        fh.write("\n")


def _print_rows(rows, stream=None):
    stream = stream or sys.stdout
    rows = list(rows)
    if not rows:
        return
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow(list(rows[0]))
    for row in rows:
        writer.writerow([hdr_io._cell(v) for v in row.values()])


def _pmap(fn, items, workers):
    items = list(items)
    if workers <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ProcessPoolExecutor(max_workers=min(workers, len(items))) as pool:
        return list(pool.map(fn, items))


def _operator(args, name=None):
    return tonemap.get_operator(name or args.op, mu=args.mu, gamma=args.gamma, base=args.base)


_geometry = envmap.geometry_for


def _parse_list(text, conv=float):
    try:
        return [conv(x) for x in str(text).split(",") if x.strip()]
    except ValueError:
        raise UsageError(f"cannot parse list {text!r}") from None


def _parse_alpha(items):
    """``["sun=0.1", "3=2", "0.5"]`` -> ``({3: 0.1, ...}, default_or_None)``."""
    weights = {}
    default = None
    for item in items or []:
        if "=" not in item:
            default = float(item)
            continue
        key, value = item.split("=", 1)
        key = key.strip().lower()
        if key in segmentation.CLASS_NAMES:
            idx = segmentation.CLASS_NAMES[key]
        else:
            try:
                idx = int(key)
            except ValueError:
                raise UsageError(f"bad --alpha key {key!r}") from None
        weights[idx] = float(value)
    return weights, default


def _input_or_fixture(path, name):
    return path if path else fixture_path(name)


# --------------------------------------------------------------------------
# subcommands


def cmd_tonemap(args):
    img = hdr_io.read_hdr(args.input)
    op = _operator(args)
    out = tonemap.invert(op, img) if args.invert else tonemap.apply(op, img)
    hdr_io.write_hdr(out.astype(np.float32), _out_parent(args.output))
    return args.output


def compare_maps(real, fake, op):
    """EV, integrated illumination and HDR/LDR losses of ``fake`` against ``real``."""
    if real.shape != fake.shape:
        raise ValueError(f"image sizes differ: {real.shape} vs {fake.shape}")
    geom = _geometry(real)
    omega = geom.solid_angles
    disc = geom.disc
    ev_r = pipeline._safe_ev(real)
    ev_f = pipeline._safe_ev(fake)
    ill_r = envmap.integrated_illumination(real, omega)
    ill_f = envmap.integrated_illumination(fake, omega)
    ldr_r, ldr_f = op.forward(real), op.forward(fake)
    return {
        "ev_real": ev_r,
        "ev_fake": ev_f,
        "ev_ratio": ev_f / ev_r if ev_r else math.nan,
        "illum_real": ill_r,
        "illum_fake": ill_f,
        "illum_ratio": ill_f / ill_r if ill_r > 0 else math.nan,
        "L1_HDR": losses.l1(real, fake, disc),
        "L2_HDR": losses.l2(real, fake, disc),
        "L1_LDR": losses.l1(ldr_r, ldr_f, disc),
        "L2_LDR": losses.l2(ldr_r, ldr_f, disc),
    }


def cmd_metrics(args):
    real = hdr_io.read_hdr(args.real)
    fake = hdr_io.read_hdr(args.fake)
    row = compare_maps(real, fake, _operator(args))
    if args.out:
        hdr_io.write_report([row], _out_parent(args.out))
        return args.out
    _print_rows([row])
    return None


def cmd_loss(args):
    real = hdr_io.read_hdr(args.real)
    fake = hdr_io.read_hdr(args.fake)
    geom = _geometry(real)
    labels = hdr_io.read_label_png(args.labels) if args.labels else None
    weights, default = _parse_alpha(args.alpha)
    mask = geom.disc
    if args.mask_class:
        if labels is None:
            raise UsageError("--mask-class needs --labels")
        mask = labels == segmentation.CLASS_NAMES[args.mask_class]
    kind = args.kind
    if kind in ("l1", "l2"):
        fn = losses.get_inner(kind)
        value = fn(real, fake, mask)
        breakdown = losses.LossBreakdown(value, [losses.Term(0, 1.0, value,
                                                             int(np.count_nonzero(mask)))])
    elif kind == "cascade-bands":
        breakdown = losses.cascade_bands_loss(
            real, fake, args.inner, losses.BandSpec(args.ev_max),
            weights if weights else default, mask)
    elif kind == "cascade-exposure":
        breakdown = losses.cascade_exposure_loss(
            real, fake, args.inner, args.exposures, weights if weights else default, mask,
            tonemap_clamp=args.tonemap_clamp, gamma=args.gamma or tonemap.default_gamma())
    elif kind == "selective":
        if labels is None:
            raise UsageError("selective loss needs --labels")
        class_weights = weights or {c: 1.0 for c in (segmentation.SKYDOME, segmentation.CLOUD,
                                                    segmentation.SUN)}
        breakdown = losses.selective_loss(real, fake, labels, class_weights, args.inner)
    elif kind == "scale-invariant":
        sel = real[mask], fake[mask]
        value = losses.scale_invariant_loss(*sel)
        breakdown = losses.LossBreakdown(value, [losses.Term(0, 1.0, value, sel[0].size // 3)])
    else:  # argparse guards the choices
        raise UsageError(f"unknown loss kind {kind!r}")
    rows = breakdown.rows() + [{"term": "total", "weight": "", "value": breakdown.total,
                                "count": "", "empty": ""}]
    if args.out:
        hdr_io.write_report(rows, _out_parent(args.out))
        return args.out
    _print_rows(rows)
    return None


def _meta_from_args(args, image_path):
    if args.lat is not None or args.lon is not None or args.time is not None:
        if None in (args.lat, args.lon, args.time):
            raise UsageError("--lat, --lon and --time must be given together")
        return segmentation.CaptureMeta.from_dict(
            {"latitude": args.lat, "longitude": args.lon, "timestamp": args.time})
    return pipeline.load_meta(image_path)


def cmd_label(args):
    img = hdr_io.read_hdr(args.input)
    meta = _meta_from_args(args, args.input)
    labels, pos = segmentation.label_image(
        img, meta, cloud_threshold=args.cloud_threshold, brush_px=args.brush,
        sun_radius_deg=args.sun_radius, operator=tonemap.MuLawLog2(args.mu or tonemap.default_mu()))
    out = _out_parent(args.output)
    side = {
        "image": os.path.abspath(args.input),
        "meta": meta.to_dict() if meta else None,
        "solar_position": pos.to_dict() if pos else None,
        "class_ids": segmentation.CLASS_NAMES,
        "class_counts": {name: int(np.count_nonzero(labels == cid))
                         for name, cid in segmentation.CLASS_NAMES.items()},
    }
    hdr_io.write_label_png(out, labels)
    _write_config(side, os.path.splitext(out)[0] + ".json")
    return args.output


def _preprocess_one(job):
    src, dst, angle, factor_exp = job
    img = hdr_io.read_hdr(src).astype(np.float64)
    out = pipeline.rotate_about_zenith(img, angle) if angle else img
    out = pipeline.downsample_pow2(out, factor_exp)
    hdr_io.write_hdr(out.astype(np.float32), dst)
    meta = pipeline.load_meta(src)
    if meta is not None:
        _write_config(meta.to_dict(), os.path.splitext(dst)[0] + ".json")
    row = {"image": os.path.basename(src), "angle": float(angle)}
    row.update(pipeline.retention_audit(img, out))
    return row


def _angles(mode, count, seed):
    if mode in (None, "none", "0"):
        return [0.0] * count
    if mode == "random":
        rng = np.random.default_rng(seed)
        return list(rng.uniform(0.0, 360.0, size=count))
    try:
        return [float(mode)] * count
    except ValueError:
        raise UsageError(f"--rotate expects 'random', 'none' or degrees, got {mode!r}") from None


def cmd_preprocess(args):
    inputs = list(args.inputs)
    names = [os.path.basename(p) for p in inputs]
    if len(set(names)) != len(names):
        raise UsageError("input file names must be unique")
    angles = _angles(args.rotate, len(inputs), args.seed)
    with staged_dir(args.out) as stage:
        jobs = [(src, os.path.join(stage, os.path.splitext(name)[0] + ".hdr"), a, args.downsample)
                for src, name, a in zip(inputs, names, angles)]
        rows = _pmap(_preprocess_one, jobs, args.workers)
        records = [pipeline.DatasetRecord(os.path.join(os.path.abspath(args.out), os.path.basename(j[1])),
                                          pipeline.load_meta(src))
                   for j, src in zip(jobs, inputs)]
        records = pipeline.split_dataset(records, _parse_list(args.fractions), seed=args.seed)
        for row, rec in zip(rows, records):
            row["split"] = rec.split
        hdr_io.write_report(rows, os.path.join(stage, "audit.csv"))
        pipeline.write_manifest(records, os.path.join(stage, "manifest.json"))
    return os.path.join(args.out, "manifest.json")


def _log_grid(lo_exp, hi_exp, points, zero=True):
    grid = np.logspace(lo_exp, hi_exp, points, base=2.0)
    return np.concatenate([[0.0], grid]) if zero else grid


def cmd_sweep(args):
    ops = [_operator(args, name) for name in args.ops.split(",")]
    grid = _log_grid(args.min_exp, args.max_exp, args.points)
    rows = tonemap.sweep_curves(ops, grid, args.delta)
    hdr_io.write_report(rows, _out_parent(args.out))
    return args.out


def _synthetic_pairs(count, lo_exp, hi_exp, rng, op):
    # scalar samples: the operator acts on each channel on its own
    intensity = np.exp2(rng.uniform(lo_exp, hi_exp, size=(count, 1)))
    return op.forward(intensity), np.log2(intensity)


def _image_pairs(paths, op, priori, rng, limit):
    feats, targets = [], []
    for path in paths:
        img = hdr_io.read_hdr(path).astype(np.float64)
        geom = _geometry(img)
        x = op.forward(img)
        if priori:
            labels, _ = segmentation.label_image(img, pipeline.load_meta(path))
            x = ann.attach_priori(x, geom.directions, geom.solid_angles, labels)
        keep = geom.disc & np.all(img > 0, axis=-1)
        feats.append(x[keep])
        targets.append(np.log2(img[keep]))
    x = np.concatenate(feats)
    y = np.concatenate(targets)
    if limit and x.shape[0] > limit:
        idx = rng.choice(x.shape[0], size=limit, replace=False)
        x, y = x[idx], y[idx]
    return x, y


def cmd_fit_ann(args):
    rng = np.random.default_rng(args.seed)
    op = tonemap.MuLawLog2(args.mu or tonemap.default_mu())
    if args.inputs:
        x, y = _image_pairs(args.inputs, op, args.priori, rng, args.samples)
    else:
        if args.priori:
            raise UsageError("--priori needs input images")
        x, y = _synthetic_pairs(args.samples, args.min_exp, args.max_exp, rng, op)
    n_test = max(1, int(round(x.shape[0] * args.holdout)))
    order = rng.permutation(x.shape[0])
    test, train_idx = order[:n_test], order[n_test:]
    spec = ann.MlpSpec(x.shape[1], args.layers, args.width, y.shape[1])
    config = ann.TrainConfig(lr=args.lr, batch_size=args.batch_size, epochs=args.epochs,
                             loss=args.loss, seed=args.seed, lr_decay=args.lr_decay)
    started = time.perf_counter()
    params, history = ann.train(spec, config, x[train_idx], y[train_idx])
    elapsed = time.perf_counter() - started
    pred = ann.forward(params, x[test])
    rel = np.abs(np.exp2(pred - y[test]) - 1.0)
    summary = {"train_samples": int(train_idx.size), "test_samples": int(n_test),
               "final_loss": history[-1] if history else math.nan,
               "mean_relative_error": float(rel.mean()),
               "p95_relative_error": float(np.quantile(rel, 0.95)),
               "mean_abs_log2_error": float(np.abs(pred - y[test]).mean()),
               "seconds": elapsed}
    out = _out_parent(args.out)
    ann.save_params(out, params, extra={"summary": summary, "mu": op.mu})
    curve = args.curve or os.path.splitext(out)[0] + "_loss.csv"
    hdr_io.write_report([{"epoch": i, "loss": v} for i, v in enumerate(history)],
                        _out_parent(curve))
    print(json.dumps(summary, indent=2))
    return args.out


def _render(img, size, env_res):
    geom = _geometry(img)
    return envmap.render_diffuse_sphere(img, geom.solid_angles, geom.directions, size,
                                        env_resolution=env_res)


def cmd_relight(args):
    img = hdr_io.read_hdr(args.input).astype(np.float64)
    render = _render(img, args.size, args.env_res)
    hdr_io.write_hdr(render.astype(np.float32), _out_parent(args.output))
    return args.output


def _fig2_row(img, reference, ev, size, env_res):
    geom = _geometry(img)
    omega, dirs = geom.solid_angles, geom.directions
    clipped = envmap.clip_to_ev(img, ev)
    scale = envmap.exposure_scale(clipped, reference, omega)
    equalized = clipped * scale
    render = envmap.render_diffuse_sphere(equalized, omega, dirs, size, env_resolution=env_res)
    flux = envmap.luminance(envmap.sphere_flux(equalized, omega, dirs, env_resolution=env_res))
    lum = envmap.luminance(render)
    row = {"ev": ev, "scale": scale,
           "illum": envmap.integrated_illumination(equalized, omega),
           "ev_measured": pipeline._safe_ev(equalized),
           "render_max": float(lum.max()),
           "render_sum": float(lum.sum()),
           "sphere_flux": float(flux)}
    return row, equalized, render


def cmd_demo_fig2(args):
    src = _input_or_fixture(args.input, "sun_disc.hdr")
    img = hdr_io.read_hdr(src).astype(np.float64)
    evs = _parse_list(args.evs)
    if not evs:
        raise UsageError("--evs must list at least one exposure value")
    job = partial(_fig2_row, img, img, size=args.size, env_res=args.env_res)
    results = _pmap(job, evs, min(args.workers, 4))
    base = results[0][0]
    rows = []
    with staged_dir(args.out) as stage:
        for row, equalized, render in results:
            tag = f"ev{row['ev']:g}"
            row["render_max_ratio"] = row["render_max"] / base["render_max"]
            row["sphere_flux_ratio"] = row["sphere_flux"] / base["sphere_flux"]
            row["render_sum_ratio"] = row["render_sum"] / base["render_sum"]
            hdr_io.write_hdr(equalized.astype(np.float32), os.path.join(stage, f"map_{tag}.hdr"))
            hdr_io.write_hdr(render.astype(np.float32), os.path.join(stage, f"sphere_{tag}.hdr"))
            peak = max(float(render.max()), 1e-12)
            hdr_io.write_png8(os.path.join(stage, f"sphere_{tag}.png"),
                              render / base["render_max"] if base["render_max"] > 0 else render / peak)
            rows.append(row)
        hdr_io.write_report(rows, os.path.join(stage, "fig2.csv"))
    _print_rows(rows)
    return os.path.join(args.out, "fig2.csv")


def demo_fig4b(img_path, out_csv, ev_max=15, operator=None):
    """Loss sensitivity to dynamic-range truncation of one map, written as CSV."""
    img = hdr_io.read_hdr(img_path).astype(np.float64)
    geom = _geometry(img)
    rows = losses.sensitivity_sweep(img, geom.solid_angles, ev_max, operator, geom.disc)
    hdr_io.write_report(rows, _out_parent(out_csv),
                        columns=["t", "L1_HDR", "L2_HDR", "L1_LDR", "L2_LDR", "illum_ratio"])
    return rows


def cmd_demo_fig4b(args):
    src = _input_or_fixture(args.input, "sunny.hdr")
    rows = demo_fig4b(src, args.out, args.ev_max, _operator(args))
    _print_rows(rows)
    return args.out


# --------------------------------------------------------------------------
# parser


def _common(p, seed=True):
    p.add_argument("--config", metavar="FILE", help="JSON file of option defaults")
    if seed:
        p.add_argument("--seed", type=int, default=0, help="random seed (default 0)")
    p.add_argument("--workers", type=int, default=os.cpu_count() or 1,
                   help="worker processes for batch work (default: logical cores)")


def _tonemap_opts(p, op_default="mulawlog2"):
    p.add_argument("--op", default=op_default,
                   help="gamma, log2 (logN), mulaw, mulawlog2 or deepclouds "
                        f"(default {op_default})")
    p.add_argument("--mu", type=float, default=None,
                   help="mu-law parameter (default $EDRSKY_MU or 5000)")
    p.add_argument("--gamma", type=float, default=None,
                   help="gamma exponent (default $EDRSKY_GAMMA or 2.2)")
    p.add_argument("--base", type=float, default=2.0, help="logN base (default 2)")


def build_parser():
    parser = argparse.ArgumentParser(
        prog="edrsky",
        description="Tools for extended-dynamic-range skyangular sky maps.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND")

    p = sub.add_parser("tonemap", help="apply or invert a tone-mapping operator")
    p.add_argument("input")
    p.add_argument("output", help=".hdr, .pfm or .png")
    _tonemap_opts(p)
    p.add_argument("--invert", action="store_true", help="apply the inverse operator")
    _common(p)
    p.set_defaults(func=cmd_tonemap, primary="output")

    p = sub.add_parser("metrics", help="EV, illumination and loss comparison of two maps")
    p.add_argument("real")
    p.add_argument("fake")
    p.add_argument("--out", help="CSV path (default: stdout)")
    _tonemap_opts(p)
    _common(p)
    p.set_defaults(func=cmd_metrics, primary="out")

    p = sub.add_parser("loss", help="global, cascade, selective or scale-invariant loss")
    p.add_argument("real")
    p.add_argument("fake")
    p.add_argument("--kind", default="l1",
                   choices=["l1", "l2", "cascade-bands", "cascade-exposure", "selective",
                            "scale-invariant"])
    p.add_argument("--inner", default="l1", choices=["l1", "l2"])
    p.add_argument("--ev-max", type=int, default=15)
    p.add_argument("--exposures", type=int, default=4)
    p.add_argument("--tonemap-clamp", action="store_true")
    p.add_argument("--alpha", action="append", metavar="KEY=W",
                   help="term weight; KEY is a band/exposure index or class name "
                        "(sun, cloud, skydome, border); repeatable")
    p.add_argument("--labels", help="label PNG for selective losses")
    p.add_argument("--mask-class", choices=sorted(segmentation.CLASS_NAMES),
                   help="restrict the loss to one label class")
    p.add_argument("--gamma", type=float, default=None)
    p.add_argument("--out", help="CSV path (default: stdout)")
    _common(p)
    p.set_defaults(func=cmd_loss, primary="out")

    p = sub.add_parser("label", help="sun/cloud/skydome/border label map")
    p.add_argument("input")
    p.add_argument("output", help="8-bit PNG of class ids 0-3")
    p.add_argument("--lat", type=float)
    p.add_argument("--lon", type=float)
    p.add_argument("--time", help="ISO-8601 timestamp, UTC unless an offset is given")
    p.add_argument("--cloud-threshold", type=float, default=0.05)
    p.add_argument("--brush", type=int, default=15)
    p.add_argument("--sun-radius", type=float, default=2.5)
    p.add_argument("--mu", type=float, default=None)
    _common(p)
    p.set_defaults(func=cmd_label, primary="output")

    p = sub.add_parser("preprocess", help="rotate, downsample, audit and split a set of maps")
    p.add_argument("inputs", nargs="+")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--rotate", default="random", help="'random', 'none' or degrees")
    p.add_argument("--downsample", type=int, default=1, help="factor exponent x, scale 1/2^x")
    p.add_argument("--fractions", default="0.8,0.1,0.1")
    _common(p)
    p.set_defaults(func=cmd_preprocess, primary="out")

    p = sub.add_parser("sweep", help="tone-mapping curves and propagated error as CSV")
    p.add_argument("--ops", default="gamma,log2,mulaw,mulawlog2,deepclouds")
    p.add_argument("--min-exp", type=float, default=-10.0)
    p.add_argument("--max-exp", type=float, default=15.0)
    p.add_argument("--points", type=int, default=101)
    p.add_argument("--delta", type=float, default=0.01)
    p.add_argument("--out", required=True)
    _tonemap_opts(p)
    _common(p)
    p.set_defaults(func=cmd_sweep, primary="out")

    p = sub.add_parser("fit-ann", help="train a per-pixel MLP inverse tone-mapper")
    p.add_argument("inputs", nargs="*",
                   help="HDR maps (RGB head); when omitted, a scalar per-channel head is "
                        "fit to log-uniform synthetic intensities")
    p.add_argument("--out", required=True, help="checkpoint path")
    p.add_argument("--curve", help="loss-curve CSV (default <out>_loss.csv)")
    p.add_argument("--layers", type=int, default=9)
    p.add_argument("--width", type=int, default=32)
    p.add_argument("--priori", action="store_true", help="append X, Y, Z, omega, label inputs")
    p.add_argument("--mu", type=float, default=None)
    p.add_argument("--epochs", type=int, default=200)
    p.add_argument("--lr", type=float, default=1e-4)
    p.add_argument("--lr-decay", type=float, default=1.0)
    p.add_argument("--batch-size", type=int, default=256)
    p.add_argument("--loss", default="l2", choices=["l1", "l2"])
    p.add_argument("--samples", type=int, default=6000)
    p.add_argument("--holdout", type=float, default=1 / 3)
    p.add_argument("--min-exp", type=float, default=-16.0)
    p.add_argument("--max-exp", type=float, default=14.0)
    _common(p)
    p.set_defaults(func=cmd_fit_ann, primary="out")

    p = sub.add_parser("relight", help="render a diffuse sphere lit by a map")
    p.add_argument("input")
    p.add_argument("output")
    p.add_argument("--size", type=int, default=128)
    p.add_argument("--env-res", type=int, default=128)
    _common(p)
    p.set_defaults(func=cmd_relight, primary="output")

    p = sub.add_parser("demo-fig2", help="clip to decreasing EV, equalize and relight")
    p.add_argument("input", nargs="?", help="HDR map (default: bundled sun_disc.hdr)")
    p.add_argument("--evs", default="15,13,11,9")
    p.add_argument("--out", default="fig2_out", help="output directory")
    p.add_argument("--size", type=int, default=128)
    p.add_argument("--env-res", type=int, default=128)
    _common(p)
    p.set_defaults(func=cmd_demo_fig2, primary="out")

    p = sub.add_parser("demo-fig4b", help="loss sensitivity to dynamic-range truncation")
    p.add_argument("input", nargs="?", help="HDR map (default: bundled sunny.hdr)")
    p.add_argument("--out", default="fig4b.csv", help="CSV path")
    p.add_argument("--ev-max", type=int, default=15)
    _tonemap_opts(p)
    _common(p)
    p.set_defaults(func=cmd_demo_fig4b, primary="out")
    return parser


def _load_config(path):
    try:
        with open(path) as fh:
            cfg = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise UsageError(f"cannot read config {path}: {exc}") from None
    if not isinstance(cfg, dict):
        raise UsageError("config file must hold a JSON object")
    return {k.replace("-", "_"): v for k, v in cfg.items()}


def parse_args(argv):
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command is None:
        parser.print_usage(sys.stderr)
        raise UsageError("a subcommand is required")
    if getattr(args, "config", None):
        cfg = _load_config(args.config)
        subparser = parser._subparsers._group_actions[0].choices[args.command]
        known = {a.dest for a in subparser._actions}
        unknown = sorted(set(cfg) - known)
        if unknown:
            raise UsageError(f"unknown config keys for {args.command}: {', '.join(unknown)}")
        subparser.set_defaults(**cfg)
        args = parser.parse_args(argv)
    return args


def resolved_config(args):
    skip = {"func", "primary"}
    cfg = {k: v for k, v in vars(args).items() if k not in skip}
    if "mu" in cfg and cfg["mu"] is None:
        cfg["mu"] = tonemap.default_mu()
    if "gamma" in cfg and cfg["gamma"] is None:
        cfg["gamma"] = tonemap.default_gamma()
    return cfg


def run(argv=None):
    argv = sys.argv[1:] if argv is None else list(argv)
    try:
        args = parse_args(argv)
    except SystemExit as exc:  # argparse usage errors and --help
        return int(exc.code or 0)
    except UsageError as exc:
        print(f"edrsky: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    config = resolved_config(args)
    print(json.dumps(config, default=str, sort_keys=True), file=sys.stderr)
    try:
        primary = args.func(args)
    except UsageError as exc:
        print(f"edrsky: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (OSError, ValueError, ann.TrainingDiverged) as exc:
        print(f"edrsky: error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    if primary:
        _write_config(config, os.fspath(primary) + ".config.json")
    return EXIT_OK


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
