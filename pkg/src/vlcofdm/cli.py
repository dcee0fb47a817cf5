"""Command-line front end.

Exit codes: 0 success, 2 configuration error, 3 runtime failure,
130 interrupted (completed CSV rows and the manifest are kept).
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import platform
import sys
import time
from dataclasses import replace
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__, kernels
from .channel import format_channel_table
from .config import PRESETS, ConfigError, RunConfig, load_config, parse_config, schema_text
from .sim import CSV_COLUMNS, BerPoint, csv_row, run_sweep, sweep_dtx

EXIT_CONFIG = 2
EXIT_RUNTIME = 3
MANIFEST = "manifest.json"


def _now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def _overrides(args) -> dict[str, str]:
    ov = {}
    if args.snr is not None:
        ov["sim.snr"] = args.snr
    if args.seed is not None:
        ov["sim.seed"] = str(args.seed)
    if args.min_errors is not None:
        ov["sim.min_errors"] = str(args.min_errors)
    if args.max_uses is not None:
        ov["sim.max_uses"] = str(args.max_uses)
    if args.workers is not None:
        ov["sim.workers"] = str(args.workers)
    if args.genie_index:
        ov["sim.genie_index"] = "true"
    return ov


def _point_meta(label: str, pt: BerPoint, d_tx: float | None = None) -> dict:
    m = {
        "curve": label,
        "snr_db": pt.snr_db,
        "trials": pt.trials,
        "channel_uses": pt.channel_uses,
        "stop_reason": pt.stop_reason,
        "decoder_failures": pt.decoder_failures,
        "sigma": pt.sigma,
        "elapsed_s": round(pt.elapsed, 3),
    }
    if d_tx is not None:
        m["d_tx"] = d_tx
    return m


def execute(cfg: RunConfig, out_dir: Path, *, command: list[str], overrides: dict[str, str], log=None) -> dict:
    """Run every curve of ``cfg`` into ``out_dir`` and write the manifest."""
    out_dir.mkdir(parents=True, exist_ok=True)
    log = log or (lambda msg: None)
    manifest = {
        "tool": "vlcofdm",
        "version": __version__,
        "kernel_backend": kernels.BACKEND,
        "python": platform.python_version(),
        "numpy": np.__version__,
        "command": command,
        "overrides": overrides,
        "config": cfg.text,
        "seeds": sorted({r.sim.seed for r in cfg.runs}),
        "outputs": [],
        "points": [],
        "status": "running",
        "started": _now(),
    }
    mpath = out_dir / MANIFEST

    def save():
        mpath.write_text(json.dumps(manifest, indent=2) + "\n")

    save()
    t0 = time.perf_counter()
    try:
        for run in cfg.runs:
            if cfg.is_spacing_sweep:
                path = out_dir / f"{run.label}_dtx.csv"
                with open(path, "w", newline="") as fh:
                    w = csv.writer(fh, lineterminator="\n")
                    w.writerow(("d_tx", *CSV_COLUMNS))
                    fh.flush()

                    def progress(d, pt, _w=w, _fh=fh, _label=run.label):
                        _w.writerow((f"{d:.12g}", *csv_row(pt)))
                        _fh.flush()
                        manifest["points"].append(_point_meta(_label, pt, d))
                        log(f"{_label} d_tx={d:g} snr={pt.snr_db:g} ber={pt.ber_total:.3e} ({pt.stop_reason})")

                    sweep_dtx(run.sim, cfg.dtx, progress=progress)
            else:
                path = out_dir / f"{run.label}.csv"

                def progress(pt, _label=run.label):
                    manifest["points"].append(_point_meta(_label, pt))
                    log(f"{_label} snr={pt.snr_db:g} ber={pt.ber_total:.3e} ({pt.stop_reason})")

                run_sweep(run.sim, csv_path=path, progress=progress)
            manifest["outputs"].append({"curve": run.label, "path": path.name, "sha256": _sha256(path)})
            save()
        manifest["status"] = "complete"
    except KeyboardInterrupt:
        manifest["status"] = "interrupted"
        raise
    except Exception as e:
        manifest["status"] = f"failed: {type(e).__name__}: {e}"
        raise
    finally:
        manifest["finished"] = _now()
        manifest["wall_clock_s"] = round(time.perf_counter() - t0, 3)
        save()
    return manifest


def _log(quiet: bool):
    if quiet:
        return None
    return lambda msg: print(msg, file=sys.stderr, flush=True)


def cmd_simulate(args) -> int:
    ov = _overrides(args)
    if args.preset is not None and args.config is not None:
        raise ConfigError("give either --config or --preset, not both")
    if args.preset is None and args.config is None:
        raise ConfigError("one of --config or --preset is required")
    cfg = load_config(args.config, preset=args.preset, overrides=ov)
    out = Path(args.out or (args.preset or Path(args.config).stem))
    execute(cfg, out, command=sys.argv[1:] if args.argv is None else args.argv, overrides=ov, log=_log(args.quiet))
    print(out / MANIFEST)
    return 0


def cmd_figures(args) -> int:
    args.config = None
    return cmd_simulate(args)


def cmd_channel_dump(args) -> int:
    if (args.preset is None) == (args.config is None):
        raise ConfigError("one of --config or --preset is required")
    cfg = load_config(args.config, preset=args.preset)
    geom = cfg.runs[0].sim.geometry
    text = format_channel_table(replace(geom, led_subset=None).build())
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    return 0


def cmd_replay(args) -> int:
    src = Path(args.manifest)
    try:
        old = json.loads(src.read_text())
        text = old["config"]
    except (OSError, ValueError, KeyError) as e:
        raise ConfigError(f"not a readable manifest: {e}", source=str(src)) from None
    cfg = parse_config(text, source=f"{src} (config)")
    out = Path(args.out or src.parent.with_name(src.parent.name + "-replay"))
    if out.resolve() == src.parent.resolve():
        raise ConfigError("replay output directory must differ from the original", field="--out")
    new = execute(cfg, out, command=sys.argv[1:] if args.argv is None else args.argv,
                  overrides=old.get("overrides", {}), log=_log(args.quiet))
    want = {o["path"]: o["sha256"] for o in old.get("outputs", [])}
    got = {o["path"]: o["sha256"] for o in new["outputs"]}
    if want != got:
        print("replay differs from the original outputs", file=sys.stderr)
        return EXIT_RUNTIME
    print(f"replay identical: {len(got)} file(s)")
    return 0


def cmd_schema(args) -> int:
    sys.stdout.write(schema_text())
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="vlcofdm", description="Optical OFDM link simulator for multi-LED indoor VLC.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    def run_flags(sp):
        sp.add_argument("--snr", metavar="START:STEP:STOP", help="SNR points in dB (or a comma list)")
        sp.add_argument("--seed", type=int)
        sp.add_argument("--min-errors", type=int)
        sp.add_argument("--max-uses", type=int)
        sp.add_argument("--genie-index", action="store_true", help="error-free index bits for indc curves")
        sp.add_argument("--workers", type=int)
        sp.add_argument("--out", help="output directory")
        sp.add_argument("-q", "--quiet", action="store_true")

    s = sub.add_parser("simulate", help="run a BER sweep")
    s.add_argument("--config")
    s.add_argument("--preset", help=", ".join(PRESETS))
    run_flags(s)
    s.set_defaults(func=cmd_simulate)

    f = sub.add_parser("figures", help="run a named preset")
    f.add_argument("preset", help=", ".join(PRESETS))
    run_flags(f)
    f.set_defaults(func=cmd_figures)

    c = sub.add_parser("channel-dump", help="print geometry and channel matrix")
    c.add_argument("--config")
    c.add_argument("--preset")
    c.add_argument("--out", help="write to this file instead of stdout")
    c.set_defaults(func=cmd_channel_dump)

    r = sub.add_parser("replay", help="re-run a manifest and compare outputs")
    r.add_argument("manifest")
    r.add_argument("--out")
    r.add_argument("-q", "--quiet", action="store_true")
    r.set_defaults(func=cmd_replay)

    sc = sub.add_parser("schema", help="list config sections, keys and defaults")
    sc.set_defaults(func=cmd_schema)
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    args.argv = argv
    try:
        return args.func(args)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except KeyboardInterrupt:
        print("interrupted; completed rows were kept", file=sys.stderr)
        return 130
    except Exception as e:
        print(f"runtime error: {type(e).__name__}: {e}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
