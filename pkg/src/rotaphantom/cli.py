"""Command-line entry point: ``rotaphantom {presets,simulate,analyze,compare,spiral}``.

Exit codes: 0 success, 1 usage error, 2 I/O error, 3 numeric or pipeline-stage failure.
Settings resolve as command-line flag, then ``--config`` JSON file, then built-in default.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import fields
from pathlib import Path

import numpy as np

from . import __version__
from .core import (FormatError, NonFiniteError, TraceParseError, VelocityTrace, read_sequence,
                   read_trace, write_sequence, write_trace)
from .embedding import write_embedding
from .mechsim import SimulationInstability, builtin_presets, derivative_trace, get_preset, simulate_release
from .metrics import AlignmentError, DEFAULT_GRID_HZ, build_report, format_table
from .plots import analysis_svg
from .render import GEOMETRIES, NOISE_PRESETS, render_sequence
from .spectral import AnalysisConfig, StageError, analyze_detailed, write_spectrogram
from .spiralgen import SpiralSpec, export_svg, points_csv, spiral_polyline

EXIT_OK, EXIT_USAGE, EXIT_IO, EXIT_NUMERIC = 0, 1, 2, 3
TRUTH_HZ = 100.0


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


# flag name -> (AnalysisConfig field, type, help)
_ANALYSIS_FLAGS = {
    "target-side": ("target_side", int, "downsampled frame side, pixels"),
    "k": ("k", int, "nearest neighbours per frame (default: max(10, round(0.02 n)))"),
    "window": ("window_s", float, "STFT window length, s"),
    "hop": ("hop_s", float, "STFT hop, s"),
    "pad-factor": ("pad_factor", int, "FFT length as a multiple of the window"),
    "f-min": ("f_min", float, "lowest frequency to resolve, Hz (window >= 2/f_min)"),
    "knot-spacing": ("knot_spacing_s", float, "spline knot spacing, s"),
    "velocity-hz": ("velocity_hz", float, "sampling rate of the output velocity trace, Hz"),
}


def _dump_json(obj, path):
    with open(path, "w", newline="\n") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _load_config(path):
    if path is None:
        return {}
    try:
        with open(path) as fh:
            cfg = json.load(fh)
    except OSError as exc:
        raise OSError(f"cannot read config {path}: {exc.strerror}") from exc
    except json.JSONDecodeError as exc:
        raise UsageError(f"config {path} is not valid JSON: {exc}") from exc
    if not isinstance(cfg, dict):
        raise UsageError(f"config {path} must hold a JSON object")
    return cfg


def _resolve(args, cfg, name, default):
    value = getattr(args, name, None)
    if value is not None:
        return value
    return cfg.get(name, default)


def _analysis_config(args, cfg):
    defaults = AnalysisConfig()
    known = {f.name for f in fields(AnalysisConfig)}
    unknown = set(cfg.get("analysis", {})) - known
    if unknown:
        raise UsageError(f"unknown analysis settings in config: {sorted(unknown)}")
    section = cfg.get("analysis", {})
    values = {}
    for flag, (field_name, _, _) in _ANALYSIS_FLAGS.items():
        value = getattr(args, field_name)
        if value is None:
            value = section.get(field_name, getattr(defaults, field_name))
        values[field_name] = value
    return AnalysisConfig(**values)


def cmd_presets(args):
    print(json.dumps([p.to_dict() for p in builtin_presets()], indent=2, sort_keys=True))
    return EXIT_OK


def cmd_simulate(args):
    cfg = _load_config(args.config)
    name = _resolve(args, cfg, "preset", "3dp")
    try:
        preset = get_preset(name)
    except KeyError as exc:
        raise UsageError(exc.args[0]) from None
    noise_name = _resolve(args, cfg, "noise", "mri")
    if noise_name not in NOISE_PRESETS:
        raise UsageError(f"unknown noise {noise_name!r}; valid: {', '.join(NOISE_PRESETS)}")
    seed = int(_resolve(args, cfg, "seed", 0))
    runs = int(_resolve(args, cfg, "runs", 1))
    fps = float(_resolve(args, cfg, "fps", preset.fps))
    duration = float(_resolve(args, cfg, "duration", preset.duration))
    if runs < 1 or fps <= 0 or duration <= 0 or seed < 0:
        raise UsageError("--runs, --fps and --duration must be positive and --seed non-negative")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    try:
        angles = simulate_release(preset.model, duration)
    except (SimulationInstability, ValueError) as exc:
        raise StageError("simulate", exc) from exc
    fine = derivative_trace(angles)
    step = int(round(1.0 / (TRUTH_HZ * (angles.times[1] - angles.times[0]))))
    truth = VelocityTrace(fine.times[::step], fine.velocities[::step])
    geom = GEOMETRIES[preset.name]
    written = []
    for i in range(runs):
        run_seed = seed + i
        try:
            seq = render_sequence(angles, geom, NOISE_PRESETS[noise_name], fps, run_seed)
        except ValueError as exc:
            raise StageError("render", exc) from exc
        stem = f"{preset.name}_{noise_name}_seed{run_seed}"
        write_sequence(seq, out / f"{stem}.mpsq")
        write_trace(truth, out / f"{stem}_truth.csv")
        written.append(stem)
        print(f"wrote {out / stem}.mpsq and {stem}_truth.csv")
    _dump_json({"preset": preset.to_dict(), "noise": noise_name, "fps": fps,
                "duration": duration, "seeds": [seed + i for i in range(runs)],
                "runs": written}, out / f"{preset.name}_{noise_name}_simulate.json")
    return EXIT_OK


def _interior_rms(velocity, truth, half_window):
    lo, hi = truth.times[0] + half_window, truth.times[-1] - half_window
    keep = (velocity.times >= lo - 1e-9) & (velocity.times <= hi + 1e-9)
    if not np.any(keep):
        return None
    err = velocity.velocities[keep] - np.interp(velocity.times[keep], truth.times, truth.velocities)
    return float(np.sqrt(np.mean(err**2)))


def cmd_analyze(args):
    cfg = _load_config(args.config)
    config = _analysis_config(args, cfg)
    src = Path(args.input)
    seq = read_sequence(src)
    truth = read_trace(args.truth) if args.truth else None
    try:
        result = analyze_detailed(seq, config)
    except StageError as exc:
        raise StageError(exc.stage, f"{src}: {exc.cause}") from exc
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    stem = src.stem
    write_trace(result.velocity, out / f"{stem}_velocity.csv")
    write_embedding(result.embedding, out / f"{stem}_embedding.csv")
    write_spectrogram(result.spectrogram, out / f"{stem}_spectrogram.csv")
    with open(out / f"{stem}_plot.svg", "w", newline="\n") as fh:
        fh.write(analysis_svg(result.embedding, result.velocity, truth))
    sidecar = {"input": src.name, "analysis": result.meta}
    if truth is not None:
        sidecar["truth"] = Path(args.truth).name
        sidecar["interior_rms_hz"] = _interior_rms(result.velocity, truth, config.window_s / 2)
    _dump_json(sidecar, out / f"{stem}_params.json")
    v = result.velocity.velocities
    print(f"{src.name}: max velocity {v.max():.3f} Hz over "
          f"[{result.velocity.times[0]:.1f}, {result.velocity.times[-1]:.1f}] s")
    if result.meta["aliasing_risk"]:
        print("warning: ridge reaches the top of the frequency axis; results may be aliased",
              file=sys.stderr)
    return EXIT_OK


def cmd_compare(args):
    cfg = _load_config(args.config)
    grid_hz = float(_resolve(args, cfg, "grid_hz", DEFAULT_GRID_HZ))
    unit = _resolve(args, cfg, "anova_unit", "samples")
    names = tuple(_resolve(args, cfg, "names", ["A", "B"]))
    label = _resolve(args, cfg, "label", "")
    group_a = [read_trace(p) for p in args.group_a]
    group_b = [read_trace(p) for p in args.group_b] if args.group_b else None
    if len(group_a) < 2:
        raise UsageError("group A needs at least 2 trace files")
    try:
        report = build_report(group_a, group_b, grid_hz=grid_hz, anova_unit=unit)
    except AlignmentError as exc:
        files = list(args.group_a) + list(args.group_b or [])
        traces = group_a + (group_b or [])
        spans = "\n".join(f"  {f}: [{t.times[0]:g}, {t.times[-1]:g}] s" for f, t in zip(files, traces))
        raise StageError("align", f"{exc}\n{spans}") from exc
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    body = report.to_dict()
    body["files_a"] = [os.path.basename(p) for p in args.group_a]
    body["files_b"] = [os.path.basename(p) for p in args.group_b or []]
    body["names"] = list(names)
    _dump_json(body, out / "report.json")
    table = format_table(report, label=label, names=names)
    with open(out / "table.txt", "w", newline="\n") as fh:
        fh.write(table)
    print(table, end="")
    return EXIT_OK


def cmd_spiral(args):
    cfg = _load_config(args.config)
    r0 = float(_resolve(args, cfg, "r0_mm", 3.0)) / 1000
    r1 = float(_resolve(args, cfg, "r1_mm", 20.0)) / 1000
    turns = float(_resolve(args, cfg, "turns", 5.0))
    spt = int(_resolve(args, cfg, "samples_per_turn", 256))
    stroke = float(_resolve(args, cfg, "stroke_mm", 0.5))
    if not 0 < r0 < r1:
        raise UsageError("radii must satisfy 0 < R0 < R1")
    try:
        spec = SpiralSpec(r0, r1, turns, spt)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    pts = spiral_polyline(spec, corrected=not args.as_written)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "spiral.svg", "w", newline="\n") as fh:
        fh.write(export_svg(pts, stroke))
    with open(out / "spiral.csv", "w", newline="\n") as fh:
        fh.write(points_csv(pts))
    print(f"wrote {out / 'spiral.svg'} and spiral.csv ({len(pts)} points)")
    return EXIT_OK


def build_parser():
    d = AnalysisConfig()
    parser = _Parser(prog="rotaphantom", description=__doc__.splitlines()[0],
                     formatter_class=argparse.RawDescriptionHelpFormatter)
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("presets", help="print the built-in mechanical presets as JSON")
    p.set_defaults(func=cmd_presets)

    p = sub.add_parser("simulate", help="simulate a phantom release and render image sequences")
    p.add_argument("--preset", help="preset name: " + ", ".join(x.name for x in builtin_presets())
                   + " (default: 3dp)")
    p.add_argument("--noise", choices=sorted(NOISE_PRESETS), help="noise model (default: mri)")
    p.add_argument("--seed", type=int, help="seed of the first run (default: 0)")
    p.add_argument("--runs", type=int, help="number of seeded runs, seeds seed..seed+runs-1 (default: 1)")
    p.add_argument("--fps", type=float, help="frame rate, Hz (default: preset value, 20)")
    p.add_argument("--duration", type=float, help="acquisition length, s (default: preset value)")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--config", help="JSON file with default settings")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("analyze", help="recover the rotation rate from an MPSQ sequence")
    p.add_argument("input", help="MPSQ sequence file")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--truth", help="ground-truth velocity CSV to overlay and score")
    p.add_argument("--config", help="JSON file; tunables go in an 'analysis' object")
    for flag, (field_name, typ, text) in _ANALYSIS_FLAGS.items():
        default = getattr(d, field_name)
        suffix = "" if default is None else f" (default: {default})"
        p.add_argument(f"--{flag}", dest=field_name, type=typ, help=text + suffix)
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("compare", help="consistency report over repeated velocity traces")
    p.add_argument("--group-a", nargs="+", required=True, help="velocity CSVs of group A")
    p.add_argument("--group-b", nargs="+", help="velocity CSVs of group B")
    p.add_argument("--grid-hz", type=float, help=f"common grid rate, Hz (default: {DEFAULT_GRID_HZ})")
    p.add_argument("--anova-unit", choices=["samples", "run_means"],
                   help="ANOVA observations: pooled grid samples or per-run means (default: samples)")
    p.add_argument("--names", nargs=2, metavar=("A", "B"), help="group labels (default: A B)")
    p.add_argument("--label", help="row label, e.g. the phantom name (default: empty)")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--config", help="JSON file with default settings")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("spiral", help="mainspring profile as SVG and CSV")
    p.add_argument("--r0-mm", dest="r0_mm", type=float, help="axle radius, mm (default: 3)")
    p.add_argument("--r1-mm", dest="r1_mm", type=float, help="outer radius, mm (default: 20)")
    p.add_argument("--turns", type=float, help="turns at rest (default: 5)")
    p.add_argument("--samples-per-turn", dest="samples_per_turn", type=int,
                   help="polyline samples per turn (default: 256)")
    p.add_argument("--stroke-mm", dest="stroke_mm", type=float, help="SVG stroke width, mm (default: 0.5)")
    p.add_argument("--as-written", action="store_true",
                   help="use the literal printed parametrisation instead of the Archimedean spiral")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--config", help="JSON file with default settings")
    p.set_defaults(func=cmd_spiral)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"rotaphantom {args.command}: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (FormatError, NonFiniteError, TraceParseError, OSError) as exc:
        print(f"rotaphantom {args.command}: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except StageError as exc:
        print(f"rotaphantom {args.command}: stage '{exc.stage}' failed: {exc.cause}", file=sys.stderr)
        return EXIT_NUMERIC
    except (ArithmeticError, ValueError) as exc:
        print(f"rotaphantom {args.command}: numeric error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
