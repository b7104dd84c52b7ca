"""Command-line front end.

    isacdet calibrate CONFIG -o thresholds.csv
    isacdet slice CONFIG -o slices.csv [--seed S]
    isacdet pd-sweep CONFIG --axis snr2 --range -30:0:5 -o pd.csv
    isacdet psl CONFIG -o psl.csv

Every command accepts ``--set key=value`` overrides (dotted keys, JSON
values) and writes ``<output>.manifest.json`` next to its CSV. Exit codes:
0 success, 2 configuration error, 3 runtime error.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import logging
import os
import sys
import tempfile
import time
from datetime import datetime, timezone
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from . import __version__
from .config import ConfigError, RunConfig, load_config
from .constellation import ALL_KINDS, ConstellationKind
from .harness import (
    DETECTORS,
    ThresholdCache,
    calibrate_threshold,
    psl_statistics,
    slice_profiles,
    sweep,
)
from .rdmap import normalized_slice_db
from .waveform import delay_to_range

log = logging.getLogger("isacdet")

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 2, 3


def _fmt(v) -> str:
    if isinstance(v, float):
        return repr(float(v))
    if isinstance(v, np.floating):
        return repr(float(v))
    return str(v)


def _csv_text(header: Sequence[str], rows: Sequence[Sequence]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_fmt(v) for v in row])
    return buf.getvalue()


def _atomic_write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        Path(tmp).unlink(missing_ok=True)
        raise


def _emit(out: Path, header, rows, cfg: RunConfig, command: str, started: float, extra=None) -> None:
    text = _csv_text(header, rows)
    manifest = {
        "tool": "isacdet",
        "version": __version__,
        "command": command,
        "config_hash": cfg.content_hash(),
        "seed": cfg.seed,
        "scenario": cfg.model_dump(mode="json"),
        "outputs": [{"path": str(out), "sha256": hashlib.sha256(text.encode()).hexdigest()}],
        "started_utc": datetime.fromtimestamp(started, timezone.utc).isoformat(),
        "wall_clock_s": round(time.time() - started, 3),
    }
    if extra:
        manifest.update(extra)
    side = out.with_name(out.name + ".manifest.json")
    try:
        _atomic_write(out, text)
        _atomic_write(side, json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    except BaseException:
        out.unlink(missing_ok=True)
        side.unlink(missing_ok=True)
        raise


def read_thresholds(path: str | Path) -> dict[ConstellationKind, float]:
    with open(path, newline="") as fh:
        return {ConstellationKind.parse(r["constellation"]): float(r["gamma"])
                for r in csv.DictReader(fh)}


def parse_range(spec: str, axis: str) -> list:
    """``start:stop:step`` (inclusive stop) for SNR axes; names or ``all`` for constellations."""
    if axis == "constellation":
        if spec.strip().lower() == "all":
            return [k.value for k in ALL_KINDS]
        return [ConstellationKind.parse(s.strip()).value for s in spec.split(",") if s.strip()]
    parts = spec.split(":")
    try:
        if len(parts) == 1:
            return [float(parts[0])]
        if len(parts) != 3:
            raise ValueError
        start, stop, step = map(float, parts)
    except ValueError:
        raise ConfigError(f"range {spec!r} is not start:stop:step") from None
    if step <= 0:
        raise ConfigError(f"range step must be > 0, got {step}")
    n = int(np.floor((stop - start) / step + 1e-9)) + 1
    return [round(start + i * step, 12) for i in range(max(n, 0))]


def cmd_calibrate(cfg: RunConfig, args) -> tuple:
    rows = []
    for kind in cfg.kinds:
        sc = cfg.scenario(kind)
        log.info("calibrating %s with %d trials", kind.value, sc.n_calibration)
        rows.append([kind.value, calibrate_threshold(sc), sc.pfa, sc.n_calibration, sc.seed])
    return ["constellation", "gamma", "pfa", "trials", "seed"], rows


def cmd_slice(cfg: RunConfig, args) -> tuple:
    seed = cfg.seed if args.seed is None else args.seed
    sc = cfg.scenario()
    if sc.frame.m != 1:
        raise ConfigError("field 'frame.symbols': range slices need a single-symbol frame (symbols = 1)")
    ranges = delay_to_range(sc.grid.delays)
    rows = []
    kinds = cfg.kinds if args.constellations_from_config else ALL_KINDS
    for kind in kinds:
        for it, prof in enumerate(slice_profiles(sc, kind, seed), start=1):
            for r, v in zip(ranges, normalized_slice_db(prof[:, 0])):
                rows.append([float(r), kind.value, it, float(v)])
    return ["range_m", "constellation", "iteration", "value_db"], rows


def cmd_pd_sweep(cfg: RunConfig, args) -> tuple:
    points = parse_range(args.range, args.axis)
    if args.gamma is not None:
        preset = {k: args.gamma for k in ALL_KINDS}
    elif args.thresholds:
        preset = read_thresholds(args.thresholds)
    else:
        preset = None
    cache = ThresholdCache(preset)
    kinds = cfg.kinds[:1] if args.axis == "constellation" else cfg.kinds
    rows = []
    for kind in kinds:
        for r in sweep(cfg.scenario(kind), args.axis, points, DETECTORS, cache):
            rows.append([r.axis_value, r.detector, r.constellation.value, r.point.pd,
                         r.point.stderr, r.point.trials])
    return ["axis_value", "detector", "constellation", "pd", "stderr", "trials"], rows


def cmd_psl(cfg: RunConfig, args) -> tuple:
    rows = []
    for kind in cfg.kinds:
        mean, p95 = psl_statistics(cfg.scenario(kind), kind, cfg.trials)
        rows.append([kind.value, mean, p95, cfg.trials])
    return ["constellation", "psl_db_mean", "psl_db_p95", "trials"], rows


COMMANDS: dict[str, Callable] = {
    "calibrate": cmd_calibrate,
    "slice": cmd_slice,
    "pd-sweep": cmd_pd_sweep,
    "psl": cmd_psl,
}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="isacdet", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("config", help="JSON run configuration (schema v1)")
        sp.add_argument("-o", "--output", required=True, help="CSV output path")
        sp.add_argument("--set", dest="overrides", action="append", default=[],
                        metavar="KEY=VALUE", help="override a config field (repeatable)")
        sp.add_argument("-v", "--verbose", action="store_true")

    common(sub.add_parser("calibrate", help="noise-only threshold calibration"))
    sp = sub.add_parser("slice", help="first/second iteration range slices")
    common(sp)
    sp.add_argument("--seed", type=int, default=None)
    sp.add_argument("--constellations-from-config", action="store_true",
                    help="only the constellations listed in the config (default: all six)")
    sp = sub.add_parser("pd-sweep", help="probability of detection sweep")
    common(sp)
    sp.add_argument("--axis", choices=["snr1", "snr2", "constellation"], required=True)
    sp.add_argument("--range", required=True,
                    help="start:stop:step in dB, or constellation names / 'all'")
    g = sp.add_mutually_exclusive_group()
    g.add_argument("--thresholds", help="CSV written by 'calibrate'")
    g.add_argument("--gamma", type=float, help="fixed threshold for every constellation")
    common(sub.add_parser("psl", help="peak sidelobe level statistics"))
    return p


def _join_range(argv: list[str]) -> list[str]:
    # argparse would read "--range -30:0:5" as two options
    out, it = [], iter(argv)
    for a in it:
        if a == "--range":
            nxt = next(it, None)
            out.append(a if nxt is None else f"--range={nxt}")
        else:
            out.append(a)
    return out


def main(argv: Sequence[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    args = build_parser().parse_args(_join_range(argv))
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    started = time.time()
    try:
        cfg = load_config(args.config, args.overrides)
        header, rows = COMMANDS[args.command](cfg, args)
        _emit(Path(args.output), header, rows, cfg, args.command, started)
    except ConfigError as exc:
        print(f"isacdet: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:  # noqa: BLE001
        print(f"isacdet: error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
