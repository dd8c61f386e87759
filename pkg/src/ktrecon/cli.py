"""Command-line pipeline: phantom -> mask -> reconstruct -> evaluate -> report.

Configuration is a flat ``key = value`` text file (``#`` starts a comment);
unknown keys are hard errors so typos in hyperparameter names fail fast.
Every command writes a manifest echoing the resolved configuration, the
library version, and the seeds, sufficient to reproduce its outputs
bit-exactly.

Exit codes: 0 success, 2 configuration error, 3 numerical failure,
4 input/output error.
"""

import argparse
import csv
import struct
import sys
import zlib
from pathlib import Path

import numpy as np

from . import __version__
from .dataset import PhantomSpec, TensorFormatError, generate_phantom, load_tensor, save_tensor
from .estimator import validate_kspace_mask
from .kernels import (NumericalDegeneracyError, build_dictionary, default_specs,
                      select_landmarks)
from .metrics import MetricReport, evaluate
from .model import ModelConfig, default_hyperparams
from .sampling import acceleration_rate, apply_sampling, cartesian_mask, radial_mask
from .solver import DivergenceError, multi_restart, write_trace_csv
from .tensors import DataDims, extract_navigator, matrix_to_tensor


class ConfigError(ValueError):
    """Malformed configuration file or inconsistent settings."""


def _int(v): return int(v)
def _float(v): return float(v)
def _str(v): return v


def _float_or_auto(v):
    return None if v == "auto" else float(v)


def _int_tuple(v):
    if not v.strip():
        return ()
    return tuple(int(part) for part in v.split(","))


# every recognized key with its parser and default
CONFIG_SCHEMA = {
    # grid
    "n_f": (_int, 64), "n_p": (_int, 64), "n_fr": (_int, 32),
    # phantom
    "background_level": (_float, 0.9), "ring_radius": (_float, 14.0),
    "ring_amplitude": (_float, 3.0), "ring_period": (_int, 4),
    "ring_thickness": (_float, 4.0), "ring_level": (_float, 1.0),
    "noise_std": (_float, 0.0), "phantom_seed": (_int, 0),
    # sampling
    "mask_kind": (_str, "cartesian"), "acceleration": (_float, 4.0),
    "spokes_per_frame": (_int, 8), "upsilon": (_int, 6), "mask_seed": (_int, 0),
    # model
    "n_kernels": (_int, 1), "depth": (_int, 2), "inner_dims": (_int_tuple, (6,)),
    "n_landmarks": (_int, 16),
    # hyperparameters ("auto" scales the spectrum threshold to the data)
    "lambda1": (_float, 1e-3), "lambda2": (_float, 1.0),
    "lambda3": (_float_or_auto, None), "lambda4": (_float, 1e-3),
    "tau_x": (_float, 1e-2), "tau_z": (_float, 1e-2),
    "tau_a": (_float, 1e-2), "tau_b": (_float, 1e-2),
    "gamma0": (_float, 0.3), "zeta": (_float, 0.02),
    "max_outer": (_int, 300), "tol_rel": (_float, 1e-5),
    "b_tol": (_float, 1e-6), "b_max_iter": (_int, 300),
    # file paths
    "kspace": (_str, None), "mask": (_str, None),
    "truth": (_str, None), "estimate": (_str, None),
}


def parse_config(path) -> dict:
    values = {key: default for key, (_, default) in CONFIG_SCHEMA.items()}
    if path is None:
        return values
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc
    seen = set()
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value', got {raw!r}")
        key, _, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if key not in CONFIG_SCHEMA:
            raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
        if key in seen:
            raise ConfigError(f"{path}:{lineno}: duplicate key {key!r}")
        seen.add(key)
        parser = CONFIG_SCHEMA[key][0]
        try:
            values[key] = parser(value)
        except ValueError as exc:
            raise ConfigError(f"{path}:{lineno}: bad value for {key}: {value!r}") from exc
    return values


def _dims(cfg) -> DataDims:
    return DataDims(cfg["n_f"], cfg["n_p"], cfg["n_fr"])


def _format_value(value):
    if isinstance(value, tuple):
        return ",".join(str(v) for v in value)
    if value is None:
        return "auto"
    return repr(value) if isinstance(value, float) else str(value)


def write_manifest(out_dir: Path, command: str, cfg: dict, seeds, extra=None) -> None:
    lines = [f"command = {command}", f"version = {__version__}",
             f"seeds = {','.join(str(s) for s in seeds)}"]
    for key in sorted(cfg):
        lines.append(f"{key} = {_format_value(cfg[key])}")
    for key, value in (extra or {}).items():
        lines.append(f"{key} = {value}")
    (out_dir / f"manifest_{command}.txt").write_text("\n".join(lines) + "\n")


def write_png(path, gray_u8: np.ndarray) -> None:
    """Minimal 8-bit grayscale PNG writer (filter 0, fixed compression)."""
    height, width = gray_u8.shape

    def chunk(tag, payload):
        out = struct.pack(">I", len(payload)) + tag + payload
        return out + struct.pack(">I", zlib.crc32(tag + payload) & 0xFFFFFFFF)

    header = struct.pack(">IIBBBBB", width, height, 8, 0, 0, 0, 0)
    raw = b"".join(b"\x00" + row.tobytes() for row in np.ascontiguousarray(gray_u8))
    blob = (b"\x89PNG\r\n\x1a\n" + chunk(b"IHDR", header)
            + chunk(b"IDAT", zlib.compress(raw, 6)) + chunk(b"IEND", b""))
    Path(path).write_bytes(blob)


def series_to_u8(series: np.ndarray) -> np.ndarray:
    """Magnitudes min-max normalized over the whole series, 8-bit."""
    mag = np.abs(series)
    lo, hi = float(mag.min()), float(mag.max())
    if hi <= lo:
        return np.zeros(mag.shape, dtype=np.uint8)
    return np.rint(255.0 * (mag - lo) / (hi - lo)).astype(np.uint8)


def emit_pngs(out_dir: Path, stem: str, series: np.ndarray) -> None:
    u8 = series_to_u8(series)
    for t in range(series.shape[2]):
        write_png(out_dir / f"{stem}_{t:03d}.png", u8[:, :, t])


def cmd_generate(cfg, out_dir: Path, seeds, emit, workers) -> int:
    spec = PhantomSpec(dims=_dims(cfg), background_level=cfg["background_level"],
                       ring_radius=cfg["ring_radius"], ring_amplitude=cfg["ring_amplitude"],
                       ring_period=cfg["ring_period"], ring_thickness=cfg["ring_thickness"],
                       ring_level=cfg["ring_level"], noise_std=cfg["noise_std"],
                       seed=cfg["phantom_seed"])
    image, kspace = generate_phantom(spec)
    save_tensor(out_dir / "phantom_image.ckt", image)
    save_tensor(out_dir / "phantom_kspace.ckt", kspace)
    if "png" in emit:
        emit_pngs(out_dir, "phantom", image)
    write_manifest(out_dir, "generate", cfg, seeds)
    print(f"wrote phantom image and k-space ({spec.dims.n_f}x{spec.dims.n_p}"
          f"x{spec.dims.n_fr}) to {out_dir}")
    return 0


def cmd_mask(cfg, out_dir: Path, seeds, emit, workers) -> int:
    dims = _dims(cfg)
    if cfg["mask_kind"] == "cartesian":
        mask = cartesian_mask(dims, cfg["acceleration"], cfg["upsilon"], cfg["mask_seed"])
    elif cfg["mask_kind"] == "radial":
        mask = radial_mask(dims, cfg["spokes_per_frame"], cfg["upsilon"], cfg["mask_seed"])
    else:
        raise ConfigError(f"mask_kind must be 'cartesian' or 'radial', "
                          f"got {cfg['mask_kind']!r}")
    save_tensor(out_dir / "mask.ckt", mask)
    rate = acceleration_rate(mask)
    write_manifest(out_dir, "mask", cfg, seeds, extra={"achieved_acceleration": repr(rate)})
    print(f"wrote {cfg['mask_kind']} mask to {out_dir} "
          f"(achieved acceleration rate: {rate:.4f})")
    return 0


def cmd_reconstruct(cfg, out_dir: Path, seeds, emit, workers) -> int:
    kspace_path = cfg["kspace"] or out_dir / "phantom_kspace.ckt"
    mask_path = cfg["mask"] or out_dir / "mask.ckt"
    kspace = load_tensor(kspace_path, kind="complex")
    mask = load_tensor(mask_path, kind="mask")
    kspace, mask = validate_kspace_mask(kspace, mask, upsilon=cfg["upsilon"])
    dims = DataDims(*kspace.shape)
    if cfg["n_landmarks"] > dims.n_fr:
        raise ConfigError(f"n_landmarks {cfg['n_landmarks']} exceeds "
                          f"frame count {dims.n_fr}")

    observed = apply_sampling(mask, kspace)
    landmarks = select_landmarks(extract_navigator(observed, cfg["upsilon"]),
                                 cfg["n_landmarks"])
    dictionary = build_dictionary(landmarks, default_specs(landmarks, cfg["n_kernels"]))
    model = ModelConfig(dims=dims, n_l=cfg["n_landmarks"], m=cfg["n_kernels"],
                        q=cfg["depth"], inner_dims=cfg["inner_dims"])
    overrides = {key: cfg[key] for key in
                 ("lambda1", "lambda2", "lambda4", "tau_x", "tau_z", "tau_a", "tau_b",
                  "gamma0", "zeta", "max_outer", "tol_rel", "b_tol", "b_max_iter")}
    if cfg["lambda3"] is not None:
        overrides["lambda3"] = cfg["lambda3"]
    hp = default_hyperparams(observed, **overrides)

    result = multi_restart(model, dictionary, mask, observed, hp, seeds, workers=workers)
    for run in result.runs:
        save_tensor(out_dir / f"recon_seed{run.seed}.ckt",
                    matrix_to_tensor(run.state.X, dims))
        if "trace" in emit:
            write_trace_csv(run.reports, out_dir / f"trace_seed{run.seed}.csv")
        if "png" in emit:
            emit_pngs(out_dir, f"recon_seed{run.seed}",
                      matrix_to_tensor(run.state.X, dims))
    write_manifest(out_dir, "reconstruct", cfg, seeds,
                   extra={"best_seed": result.best_seed})
    best = next(r for r in result.runs if r.seed == result.best_seed)
    print(f"reconstructed {len(result.runs)} run(s); best objective "
          f"{best.final_objective:.6g} at seed {result.best_seed}")
    return 0


def _resolve_estimate(cfg, out_dir: Path):
    if cfg["estimate"]:
        return Path(cfg["estimate"])
    manifest = out_dir / "manifest_reconstruct.txt"
    if manifest.exists():
        for line in manifest.read_text().splitlines():
            if line.startswith("best_seed ="):
                seed = line.split("=", 1)[1].strip()
                return out_dir / f"recon_seed{seed}.ckt"
    raise ConfigError("no estimate given and no reconstruction manifest found")


def cmd_evaluate(cfg, out_dir: Path, seeds, emit, workers) -> int:
    truth_path = cfg["truth"] or out_dir / "phantom_image.ckt"
    estimate_path = _resolve_estimate(cfg, out_dir)
    truth = load_tensor(truth_path, kind="complex")
    estimate = load_tensor(estimate_path, kind="complex")
    report = evaluate(truth, estimate)
    if "csv" in emit:
        with open(out_dir / "metrics.csv", "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(("estimate",) + MetricReport.CSV_HEADER)
            writer.writerow([str(estimate_path)] + report.csv_row())
    if "png" in emit:
        emit_pngs(out_dir, "estimate", estimate)
    write_manifest(out_dir, "evaluate", cfg, seeds)
    print("  ".join(f"{k}={v:.6g}" for k, v in report.as_dict().items()))
    return 0


def cmd_report(cfg, out_dir: Path, seeds, emit, workers) -> int:
    rows = []
    for path in sorted(out_dir.rglob("metrics.csv")):
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            if header is None:
                continue
            for row in reader:
                rows.append([str(path.parent)] + row)
    write_manifest(out_dir, "report", cfg, seeds)
    if not rows:
        print(f"no metrics.csv files under {out_dir}")
        return 0
    with open(out_dir / "report.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(("directory", "estimate") + MetricReport.CSV_HEADER)
        writer.writerows(rows)
    for row in rows:
        print("  ".join(row))
    print(f"wrote {len(rows)} row(s) to {out_dir / 'report.csv'}")
    return 0


COMMANDS = {"generate": cmd_generate, "mask": cmd_mask, "reconstruct": cmd_reconstruct,
            "evaluate": cmd_evaluate, "report": cmd_report}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ktrecon",
        description="Reconstruct dynamic image series from under-sampled "
                    "(k,t)-space data and evaluate the results.")
    parser.add_argument("command", choices=sorted(COMMANDS))
    parser.add_argument("--config", metavar="PATH", default=None,
                        help="flat key = value configuration file")
    parser.add_argument("--seed", metavar="N", type=int, action="append",
                        help="solver restart seed (repeatable; default 0)")
    parser.add_argument("--out", metavar="DIR", default="out",
                        help="output directory (created if missing)")
    parser.add_argument("--workers", metavar="N", type=int, default=1,
                        help="parallel restart cap")
    parser.add_argument("--emit", metavar="KINDS", default="csv,trace",
                        help="comma list of artifact kinds: png,csv,trace")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = parse_config(args.config)
        seeds = args.seed if args.seed else [0]
        emit = {kind.strip() for kind in args.emit.split(",") if kind.strip()}
        unknown_kinds = emit - {"png", "csv", "trace"}
        if unknown_kinds:
            raise ConfigError(f"unknown emit kinds: {sorted(unknown_kinds)}")
        if args.workers < 1:
            raise ConfigError("--workers must be at least 1")
        out_dir = Path(args.out)
        out_dir.mkdir(parents=True, exist_ok=True)
        return COMMANDS[args.command](cfg, out_dir, seeds, emit, args.workers)
    # order matters: the format and linear-algebra errors subclass ValueError,
    # and the solver wraps per-seed failures in RuntimeError
    except (TensorFormatError, OSError) as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return 4
    except (np.linalg.LinAlgError, DivergenceError, NumericalDegeneracyError,
            RuntimeError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3
    except (ConfigError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


def run() -> None:
    sys.exit(main())


if __name__ == "__main__":
    run()
