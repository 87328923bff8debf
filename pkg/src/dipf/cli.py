"""Command-line entry point: ``dipf fuse | degrade | eval | inspect``.

Exit codes: 0 success, 1 numeric failure inside the pipeline, 2 usage or
input error. Every fusion override can also come from a flat
``key = value`` config file given with ``--config``; flags on the command
line win over the file.
"""

from __future__ import annotations

import argparse
import ast
import csv
import io
import json
import math
import sys
import zlib
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import degrade as dg
from ._validation import StageError
from .fusion import FusionConfig, fuse_pipeline
from .io import find_pairs, read_image, write_image
from .metrics import evaluate

EXIT_OK, EXIT_NUMERIC, EXIT_USAGE = 0, 1, 2
DIAGNOSTICS = "diagnostics.json"

# fusion overrides: name -> (type, low, high), bounds inclusive
OVERRIDES = {
    "eta": (float, 1e-6, 10.0),
    "kl_threshold": (float, 1e-9, 100.0),
    "delta_scale": (float, 1e-6, 10.0),
    "delta_log_base": (float, 1.01, 100.0),
    "gamma_mpc": (float, 1e-3, 10.0),
    "mpc_k": (float, 0.0, 20.0),
    "gabor_wavelength": (float, 2.0, 200.0),
    "gabor_sigma": (float, 0.5, 100.0),
    "beta": (float, 0.1, 5.0),
    "blend_denoised": (bool, None, None),
}
# run options that the config file may also carry
RUN_OPTIONS = {
    "threads": (int, 1, 256),
    "depth": (int, 8, 16),
    "seed": (int, 0, 2**32 - 1),
}

# high-band maps are dumped offset by +0.5
_DUMP_HIGH = ("H", "OH", "FOH")


class UsageError(Exception):
    """Bad arguments or unreadable input; maps to exit status 2."""


@dataclass
class RunConfig:
    subcommand: str
    vis: Path | None = None
    ir: Path | None = None
    pairs_dir: Path | None = None
    out: Path | None = None
    dump_dir: Path | None = None
    overrides: dict = field(default_factory=dict)
    seed: int = 0
    threads: int = 1
    depth: int = 8

    def fusion_config(self):
        return replace(FusionConfig(), **self.overrides)


# --- config handling ----------------------------------------------------


def _coerce(name, value, spec):
    kind, lo, hi = spec
    if kind is bool:
        if isinstance(value, bool):
            return value
        text = str(value).strip().lower()
        if text in ("1", "true", "yes", "on"):
            return True
        if text in ("0", "false", "no", "off"):
            return False
        raise UsageError(f"{name}: expected a boolean, got {value!r}")
    try:
        out = kind(value)
    except (TypeError, ValueError):
        raise UsageError(f"{name}: expected {kind.__name__}, got {value!r}") from None
    if kind is float and not math.isfinite(out):
        raise UsageError(f"{name}: must be finite")
    if name == "depth" and out not in (8, 16):
        raise UsageError("depth must be 8 or 16")
    if not lo <= out <= hi:
        raise UsageError(f"{name}={out} outside allowed range [{lo}, {hi}]")
    return out


def parse_config_file(path):
    """Read ``key = value`` lines; ``#`` starts a comment, TOML booleans and quotes accepted."""
    path = Path(path)
    if not path.is_file():
        raise UsageError(f"config file not found: {path}")
    values = {}
    for lineno, raw in enumerate(path.read_text().splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{lineno}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        key = key.replace("-", "_")
        if key not in OVERRIDES and key not in RUN_OPTIONS:
            raise UsageError(f"{path}:{lineno}: unknown key {key!r}")
        value = {"true": "True", "false": "False"}.get(value, value)
        try:
            value = ast.literal_eval(value)
        except (ValueError, SyntaxError):
            pass
        values[key] = value
    return values


def _merge_options(args):
    """Defaults < config file < command line, each value range-checked."""
    from_file = parse_config_file(args.config) if getattr(args, "config", None) else {}
    overrides, run = {}, {}
    for table, target in ((OVERRIDES, overrides), (RUN_OPTIONS, run)):
        for name, spec in table.items():
            value = getattr(args, name, None)
            if value is None:
                value = from_file.get(name)
            if value is not None:
                target[name] = _coerce(name, value, spec)
    return overrides, run


# --- fuse ---------------------------------------------------------------


def _offset(x):
    return np.asarray(x) + 0.5


def _normalized(x):
    x = np.asarray(x, dtype=np.float64)
    top = x.max()
    return x / top if top > 0 else np.zeros_like(x)


def dump_manifest(result):
    """``{file name: image in [0, 1]}`` for every documented intermediate."""
    it = result.intermediates
    out = {"t_coarse.png": it["t_coarse"], "t_refined.png": it["t_refined"]}
    for name in ("CL", "SL", "IRp"):
        out[f"{name}.png"] = it[name]
    for k in range(3):
        out[f"L{k + 1}.png"] = it["L"][k]
    for key in _DUMP_HIGH:
        for k in range(3):
            out[f"{key}{k + 1}.png"] = _offset(it[key][k])
    for k in range(3):
        out[f"MH{k + 1}.png"] = _normalized(it["MH"][k])
    out["L4.png"] = it["L4"]
    out["FH.png"] = _offset(it["FH"])
    out["FL.png"] = it["FL"]
    out["F.png"] = it["F"]
    return out


def _json_default(obj):
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"not serializable: {type(obj).__name__}")


def write_dumps(result, directory, depth=8):
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    for name, img in dump_manifest(result).items():
        # transmission maps are documented as 8-bit
        write_image(directory / name, img, 8 if name.startswith("t_") else depth)
    text = json.dumps(result.diagnostics, indent=2, sort_keys=True, default=_json_default)
    tmp = directory / (DIAGNOSTICS + ".tmp")
    tmp.write_text(text + "\n")
    tmp.replace(directory / DIAGNOSTICS)


def _load_pair(vis_path, ir_path):
    try:
        return read_image(vis_path), read_image(ir_path)
    except (FileNotFoundError, ValueError) as exc:
        raise StageError("input", str(exc)) from exc


def _fuse_one(vis_path, ir_path, out_path, dump_dir, cfg, depth):
    vis, ir = _load_pair(vis_path, ir_path)
    result = fuse_pipeline(vis, ir, cfg, keep_intermediates=dump_dir is not None)
    try:
        write_image(out_path, result.fused, depth)
    except (OSError, ValueError) as exc:
        raise StageError("output", str(exc)) from exc
    if dump_dir is not None:
        write_dumps(result, dump_dir, depth)
    return out_path


def cmd_fuse(run):
    cfg = run.fusion_config()
    if run.pairs_dir is None:
        if run.vis is None or run.ir is None or run.out is None:
            raise UsageError("fuse needs --vis, --ir and --out, or --pairs-dir and --out-dir")
        _fuse_one(run.vis, run.ir, run.out, run.dump_dir, cfg, run.depth)
        return EXIT_OK

    try:
        pairs = find_pairs(run.pairs_dir)
    except NotADirectoryError as exc:
        raise UsageError(str(exc)) from None
    if not pairs:
        raise UsageError(f"no name_vis/name_ir pairs found in {run.pairs_dir}")
    if run.out is None:
        raise UsageError("batch fuse needs --out-dir")
    jobs = []
    for name, (v, i) in pairs.items():
        dump = run.dump_dir / name if run.dump_dir is not None else None
        jobs.append((v, i, run.out / f"{name}_fused{v.suffix}", dump, cfg, run.depth))
    # results are collected in job order, so scheduling never changes the outputs
    with ThreadPoolExecutor(max_workers=run.threads) as pool:
        futures = [pool.submit(_fuse_one, *job) for job in jobs]
        for fut in futures:
            fut.result()
    return EXIT_OK


# --- degrade --------------------------------------------------------------


def _item_seed(seed, name):
    # per-file seeds depend on the file name only, not on the batch order
    return int(np.random.SeedSequence([seed, zlib.crc32(name.encode())]).generate_state(1)[0])


def _degrade_params(args):
    params = {}
    for key in ("sigma", "A", "t_pattern", "t_value", "density", "length", "angle", "intensity", "radius", "gain", "gamma"):
        value = getattr(args, key, None)
        if value is not None:
            params[key] = value
    return params


def _degrade_file(src, dst, kind, params, seed, depth):
    spec = dg.DegradeSpec(kind, params, seed)
    try:
        img = read_image(src)
    except (FileNotFoundError, ValueError) as exc:
        raise StageError("input", str(exc)) from exc
    write_image(dst, dg.apply_spec(img, spec), depth)
    return {"input": str(src), "output": str(dst), **spec.to_dict()}


def cmd_degrade(args, run):
    params = _degrade_params(args)
    try:
        dg.DegradeSpec(args.kind, params, run.seed)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    if args.input is None or run.out is None:
        raise UsageError("degrade needs --input and --out")
    src = Path(args.input)
    entries = []
    if src.is_dir():
        out_dir = run.out
        pairs = find_pairs(src)
        paired = {p for pair in pairs.values() for p in pair}
        jobs = []
        for name, pair in pairs.items():
            for role, path in zip(("vis", "ir"), pair):
                jobs.append((path, out_dir / path.name, _item_seed(run.seed, f"{name}_{role}")))
        singles = sorted(p for p in src.iterdir() if p.suffix.lower() in (".png", ".tif", ".tiff") and p not in paired)
        for path in singles:
            jobs.append((path, out_dir / path.name, _item_seed(run.seed, path.stem)))
        if not jobs:
            raise UsageError(f"no images found in {src}")
        with ThreadPoolExecutor(max_workers=run.threads) as pool:
            futures = [pool.submit(_degrade_file, s, d, args.kind, params, seed, run.depth) for s, d, seed in jobs]
            results = {str(s): fut.result() for (s, _, _), fut in zip(jobs, futures)}
        for name, (v, i) in pairs.items():
            entries.append({"pair": name, "vis": results[str(v)], "ir": results[str(i)]})
        entries.extend(results[str(p)] for p in singles)
        manifest = Path(args.manifest) if args.manifest else out_dir / "manifest.json"
    else:
        entries.append(_degrade_file(src, run.out, args.kind, params, run.seed, run.depth))
        manifest = Path(args.manifest) if args.manifest else run.out.with_name(run.out.stem + "_manifest.json")
    manifest.parent.mkdir(parents=True, exist_ok=True)
    manifest.write_text(json.dumps({"kind": args.kind, "seed": run.seed, "items": entries}, indent=2) + "\n")
    return EXIT_OK


# --- eval -----------------------------------------------------------------

FIELDS = ("pair_id", "q_mi", "q_ncie", "q_g", "q_m")


def _triples(args):
    if args.a or args.b or args.f:
        if not (args.a and args.b and args.f):
            raise UsageError("eval needs all of -a, -b and -f")
        return [(args.pair_id or Path(args.f).stem, Path(args.a), Path(args.b), Path(args.f))]
    if args.pairs_dir is None:
        return []
    if args.fused_dir is None:
        raise UsageError("eval --pairs-dir needs --fused-dir")
    try:
        pairs = find_pairs(args.pairs_dir)
    except NotADirectoryError as exc:
        raise UsageError(str(exc)) from None
    out = []
    for name, (v, i) in pairs.items():
        matches = sorted(Path(args.fused_dir).glob(f"{name}_fused.*"))
        if matches:
            out.append((name, v, i, matches[0]))
    return out


def format_csv(reports):
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(FIELDS)
    rows = [[r.pair_id, r.q_mi, r.q_ncie, r.q_g, r.q_m] for r in reports]
    for row in rows:
        writer.writerow([row[0]] + [f"{v:.6f}" for v in row[1:]])
    means = np.mean([row[1:] for row in rows], axis=0)
    writer.writerow(["mean"] + [f"{v:.6f}" for v in means])
    return buf.getvalue()


def cmd_eval(args, run):
    triples = _triples(args)
    if not triples:
        raise UsageError("eval: no (a, b, f) triples to score")
    reports = []
    for pair_id, a, b, f in triples:
        try:
            imgs = [read_image(p) for p in (a, b, f)]
        except (FileNotFoundError, ValueError) as exc:
            raise StageError("input", str(exc)) from exc
        reports.append(evaluate(*imgs, pair_id=pair_id))
    text = format_csv(reports)
    if run.out is None:
        sys.stdout.write(text)
    else:
        run.out.parent.mkdir(parents=True, exist_ok=True)
        run.out.write_text(text)
    return EXIT_OK


# --- inspect --------------------------------------------------------------


def cmd_inspect(args):
    path = Path(args.path)
    if path.is_dir():
        path = path / DIAGNOSTICS
    if not path.is_file():
        raise UsageError(f"no diagnostics found at {path}")
    try:
        data = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise UsageError(f"{path}: not valid JSON ({exc})") from None
    for key in args.key.split(".") if args.key else ():
        if not isinstance(data, dict) or key not in data:
            raise UsageError(f"key {args.key!r} not found")
        data = data[key]
    print(json.dumps(data, indent=2, sort_keys=True))
    return EXIT_OK


# --- argument parsing ------------------------------------------------------


def _add_common(p):
    p.add_argument("--config", help="flat key = value file; command-line flags win")
    p.add_argument("--threads", type=int, default=None, help="worker pool size for batch mode")
    p.add_argument("--depth", type=int, default=None, choices=(8, 16), help="output bit depth")
    p.add_argument("--seed", type=int, default=None)


def build_parser():
    parser = argparse.ArgumentParser(prog="dipf", description="Infrared and visible image fusion")
    sub = parser.add_subparsers(dest="subcommand", required=True)

    fuse = sub.add_parser("fuse", help="fuse one pair or a directory of pairs")
    fuse.add_argument("--vis", type=Path)
    fuse.add_argument("--ir", type=Path)
    fuse.add_argument("--out", type=Path, help="fused output file")
    fuse.add_argument("--pairs-dir", type=Path, help="directory of name_vis / name_ir images")
    fuse.add_argument("--out-dir", type=Path, help="output directory for batch mode")
    fuse.add_argument("--dump-intermediates", type=Path, metavar="DIR")
    for name, (kind, _, _) in OVERRIDES.items():
        flag = "--" + name.replace("_", "-")
        if kind is bool:
            fuse.add_argument(flag, action="store_const", const=True, default=None)
        else:
            fuse.add_argument(flag, type=kind, default=None)
    _add_common(fuse)

    deg = sub.add_parser("degrade", help="apply a seeded degradation to an image or a directory")
    deg.add_argument("--kind", required=True, choices=dg.KINDS)
    deg.add_argument("--input", required=True)
    deg.add_argument("--out", type=Path, required=True, help="output file, or directory for directory input")
    deg.add_argument("--manifest", help="manifest path (default next to the outputs)")
    deg.add_argument("--sigma", type=float, help="noise std on the 0-255 scale")
    deg.add_argument("--A", type=float, help="atmospheric light for haze")
    deg.add_argument("--t-pattern", choices=("constant", "ramp", "radial"))
    deg.add_argument("--t-value", type=float)
    deg.add_argument("--density", type=float)
    deg.add_argument("--length", type=int)
    deg.add_argument("--angle", type=float)
    deg.add_argument("--intensity", type=float)
    deg.add_argument("--radius", type=float)
    deg.add_argument("--gain", type=float)
    deg.add_argument("--gamma", type=float)
    _add_common(deg)

    ev = sub.add_parser("eval", help="score fused images, CSV output")
    ev.add_argument("-a", help="first source image")
    ev.add_argument("-b", help="second source image")
    ev.add_argument("-f", help="fused image")
    ev.add_argument("--pair-id")
    ev.add_argument("--pairs-dir", type=Path)
    ev.add_argument("--fused-dir", type=Path, help="holds name_fused.* for each pair")
    ev.add_argument("--out", type=Path, help="CSV path (default stdout)")
    _add_common(ev)

    ins = sub.add_parser("inspect", help="print diagnostics.json of a previous run")
    ins.add_argument("path", help="dump directory or diagnostics.json")
    ins.add_argument("--key", help="dotted path into the document, e.g. low.w2")
    return parser


def _run_config(args):
    overrides, run = _merge_options(args)
    out = getattr(args, "out", None)
    if args.subcommand == "fuse" and args.pairs_dir is not None:
        out = args.out_dir
    return RunConfig(
        subcommand=args.subcommand,
        vis=getattr(args, "vis", None),
        ir=getattr(args, "ir", None),
        pairs_dir=getattr(args, "pairs_dir", None),
        out=out,
        dump_dir=getattr(args, "dump_intermediates", None),
        overrides=overrides,
        seed=run.get("seed", 0),
        threads=run.get("threads", 1),
        depth=run.get("depth", 8),
    )


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    try:
        if args.subcommand == "inspect":
            return cmd_inspect(args)
        run = _run_config(args)
        if args.subcommand == "fuse":
            return cmd_fuse(run)
        if args.subcommand == "degrade":
            return cmd_degrade(args, run)
        return cmd_eval(args, run)
    except UsageError as exc:
        print(f"dipf: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except StageError as exc:
        print(f"dipf: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ArithmeticError, np.linalg.LinAlgError) as exc:
        print(f"dipf: numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (ValueError, OSError) as exc:
        print(f"dipf: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


def main_exit():
    sys.exit(main())


if __name__ == "__main__":
    main_exit()
