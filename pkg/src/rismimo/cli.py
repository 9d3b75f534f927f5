"""Batch front end: parse experiment files, run sweeps, write CSV results
and a JSON run manifest, and evaluate the closed-form error probability.

Experiment files are TOML with an optional ``[defaults]`` table merged
into every ``[[entry]]`` table; each entry becomes one scheme sweep and
one CSV.  Exit codes: 0 success, 2 argument/parse errors (with line and
column for TOML problems), 3 configuration validation errors (naming the
offending field).
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import logging
import math
import os
import sys
import time
from importlib import metadata, resources
from pathlib import Path

try:
    import tomllib
except ModuleNotFoundError:  # Python 3.10
    import tomli as tomllib

from .channel import Geometry, path_loss_ris
from .alamouti import sep_theory
from .harness import ConfigError, SchemeConfig, compare_theory, run_sweep

log = logging.getLogger(__name__)

WORKERS_ENV = "RISMIMO_WORKERS"

CSV_COLUMNS = ("snr_db", "trials", "bits", "bit_errors", "ber", "ci95",
               "index_bit_errors", "cm_count")

EXIT_USAGE = 2
EXIT_INVALID_CONFIG = 3

#: Entry keys that pass straight through to SchemeConfig fields.
_CONFIG_KEYS = {f.name for f in dataclasses.fields(SchemeConfig)}
#: Convenience key that sets both hop K-factors at once.
_ALIAS_KEYS = {"k_factor_db"}


def _package_version() -> str:
    try:
        return metadata.version("rismimo")
    except metadata.PackageNotFoundError:
        return "unknown"


def preset_dir():
    return resources.files(__package__) / "presets"


def list_presets() -> list[str]:
    return sorted(p.name[: -len(".toml")] for p in preset_dir().iterdir() if p.name.endswith(".toml"))


def resolve_config_path(spec: str) -> Path:
    """Accept a filesystem path or the bare name of a bundled preset."""
    p = Path(spec)
    if p.exists():
        return p
    candidate = preset_dir() / f"{spec}.toml"
    if candidate.is_file():
        return Path(str(candidate))
    raise FileNotFoundError(f"no such config file or preset: {spec}")


def _coerce_override(text: str):
    """Parse an override value with TOML literal rules, string fallback."""
    try:
        return tomllib.loads(f"v = {text}")["v"]
    except tomllib.TOMLDecodeError:
        return text


def _entry_to_config(name: str, raw: dict) -> SchemeConfig:
    data = dict(raw)
    data.pop("name", None)
    if "k_factor_db" in data:
        k = data.pop("k_factor_db")
        data.setdefault("k_factor_sr_db", k)
        data.setdefault("k_factor_rd_db", k)
    unknown = set(data) - _CONFIG_KEYS
    if unknown:
        key = sorted(unknown)[0]
        raise ConfigError(f"entry {name!r}: {key}", "unknown configuration key")
    if "scheme" not in data:
        raise ConfigError(f"entry {name!r}: scheme", "required")
    if "snr_db" in data:
        data["snr_db"] = tuple(float(s) for s in data["snr_db"])
    if "fixed_pair" in data:
        data["fixed_pair"] = tuple(int(v) for v in data["fixed_pair"])
    try:
        cfg = SchemeConfig(**data)
    except TypeError as e:
        raise ConfigError(f"entry {name!r}", str(e)) from None
    try:
        cfg.validate()
    except ConfigError as e:
        raise ConfigError(f"entry {name!r}: {e.field}", str(e).split(": ", 1)[-1]) from None
    return cfg


def load_experiment(path: Path, overrides: dict | None = None):
    """Parse and validate an experiment file.

    Returns (entries, out_dir) where entries is a list of (name, config).
    Every entry is validated before anything runs.
    """
    with open(path, "rb") as fh:
        doc = tomllib.load(fh)
    out_dir = doc.get("output", {}).get("dir", "results")
    defaults = doc.get("defaults", {})
    raw_entries = doc.get("entry", [])
    if not raw_entries:
        raise ConfigError("entry", "experiment file defines no [[entry]] tables")
    entries = []
    seen = set()
    for idx, raw in enumerate(raw_entries):
        if "name" not in raw:
            raise ConfigError(f"entry[{idx}]: name", "required")
        name = str(raw["name"])
        if name in seen:
            raise ConfigError(f"entry {name!r}: name", "duplicate entry name")
        seen.add(name)
        merged = {**defaults, **raw}
        if overrides:
            for key, value in overrides.items():
                if key in _CONFIG_KEYS or key in _ALIAS_KEYS:
                    merged[key] = value
                else:
                    raise ConfigError(f"override {key!r}", "unknown configuration key")
        entries.append((name, _entry_to_config(name, merged)))
    return entries, out_dir


def write_curve_csv(path: Path, curve, payload_only: bool = False) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=CSV_COLUMNS)
        writer.writeheader()
        for row in curve.rows(payload_only=payload_only):
            writer.writerow({k: repr(v) if isinstance(v, float) else v for k, v in row.items()})


def _default_workers() -> int:
    env = os.environ.get(WORKERS_ENV)
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise ConfigError(WORKERS_ENV, f"not an integer: {env!r}") from None
    return 1


def cmd_run(args) -> int:
    overrides = {}
    for item in args.override:
        if "=" not in item:
            print(f"error: override must look like key=value, got {item!r}", file=sys.stderr)
            return EXIT_USAGE
        key, _, value = item.partition("=")
        overrides[key.strip()] = _coerce_override(value.strip())
    if args.seed is not None:
        overrides["seed"] = args.seed

    path = resolve_config_path(args.config)
    entries, out_dir = load_experiment(path, overrides)
    out = Path(args.out) if args.out else Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    workers = args.workers if args.workers is not None else _default_workers()

    manifest = {
        "config": str(path),
        "version": _package_version(),
        "workers": workers,
        "entries": {},
    }
    started = time.monotonic()
    for name, cfg in entries:
        log.info("running entry %s (%s)", name, cfg.scheme)
        t0 = time.monotonic()
        curve = run_sweep(cfg, workers=workers)
        csv_path = out / f"{name}.csv"
        write_curve_csv(csv_path, curve, payload_only=cfg.payload_ber_only)
        manifest["entries"][name] = {
            "config": dataclasses.asdict(cfg.normalized()),
            "csv": csv_path.name,
            "wall_time_s": round(time.monotonic() - t0, 3),
            "cm_per_detection": int(curve.cm_per_detection),
            "pinv_svd_fallbacks": int(curve.pinv_fallbacks),
        }
        if args.check_theory and cfg.scheme == "ris_alamouti" and cfg.mod_kind == "psk":
            report = compare_theory(curve, cfg)
            manifest["entries"][name]["theory_flagged_points"] = len(report.flagged)
            print(f"# theory comparison for {name}\n{report}")
    manifest["wall_time_s"] = round(time.monotonic() - started, 3)
    with open(out / "manifest.json", "w") as fh:
        json.dump(manifest, fh, indent=2, default=str)
    print(f"wrote {len(entries)} result file(s) to {out}")
    return 0


def cmd_theory(args) -> int:
    if args.order < 2:
        print("error: --order must be >= 2", file=sys.stderr)
        return EXIT_USAGE
    if args.elements < 2 or args.elements % 2:
        print("error: --elements must be an even integer >= 2", file=sys.stderr)
        return EXIT_USAGE
    if args.snr_stop < args.snr_start or args.snr_step <= 0:
        print("error: bad SNR range", file=sys.stderr)
        return EXIT_USAGE
    if args.pl_db is not None:
        pl = 10.0 ** (args.pl_db / 10.0)
    else:
        pl = path_loss_ris(Geometry(r_s=1.0, r_d=9.0, r_direct=9.85))
    print(f"# order={args.order} elements={args.elements} path_gain_db={10 * math.log10(pl):.3f}")
    print("snr_db,sep")
    snr = args.snr_start
    while snr <= args.snr_stop + 1e-9:
        sep = sep_theory(args.order, args.elements, pl, 10.0 ** (snr / 10.0))
        print(f"{snr:g},{sep:.6e}")
        snr += args.snr_step
    return 0


def cmd_presets(args) -> int:
    if args.action == "list":
        for name in list_presets():
            print(name)
        return 0
    print(f"error: unknown presets action {args.action!r}", file=sys.stderr)
    return EXIT_USAGE


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="rismimo",
        description="Link-level Monte Carlo simulator for surface-assisted MIMO schemes.",
    )
    parser.add_argument("-v", "--verbose", action="store_true", help="log per-point progress")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run every entry of an experiment file")
    p_run.add_argument("--config", required=True,
                       help="experiment TOML path, or the name of a bundled preset")
    p_run.add_argument("--out", help="output directory (default: from the file, else ./results)")
    p_run.add_argument("--seed", type=int, help="override the master seed of every entry")
    p_run.add_argument("--workers", type=int,
                       help=f"worker processes (default: ${WORKERS_ENV} or 1)")
    p_run.add_argument("--override", action="append", default=[], metavar="KEY=VALUE",
                       help="set a config field in every entry (repeatable)")
    p_run.add_argument("--check-theory", action="store_true",
                       help="print a theory comparison for compatible entries")
    p_run.set_defaults(func=cmd_run)

    p_theory = sub.add_parser("theory", help="closed-form symbol error probability table")
    p_theory.add_argument("--order", type=int, default=2, help="constellation order M")
    p_theory.add_argument("--elements", type=int, required=True, help="surface element count N")
    p_theory.add_argument("--pl-db", type=float,
                          help="path power gain in dB, negative for loss "
                               "(default: two-hop model at the default geometry)")
    p_theory.add_argument("--snr-start", type=float, required=True)
    p_theory.add_argument("--snr-stop", type=float, required=True)
    p_theory.add_argument("--snr-step", type=float, default=2.0)
    p_theory.set_defaults(func=cmd_theory)

    p_presets = sub.add_parser("presets", help="inspect bundled experiment presets")
    p_presets.add_argument("action", choices=["list"])
    p_presets.set_defaults(func=cmd_presets)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.func(args)
    except tomllib.TOMLDecodeError as e:
        # The decoder's message carries the line and column.
        print(f"error: config parse failure: {e}", file=sys.stderr)
        return EXIT_USAGE
    except FileNotFoundError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except ConfigError as e:
        print(f"error: invalid configuration: {e}", file=sys.stderr)
        return EXIT_INVALID_CONFIG


if __name__ == "__main__":
    sys.exit(main())
