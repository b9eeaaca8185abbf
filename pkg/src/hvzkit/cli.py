"""Command line interface.

Subcommands: chartab prints exact character tables; threshold scans the
essential-spectrum bottom for a symmetry type; hvz checks it against
separated-cluster trial states; minset examines the minimizer region;
spectrum solves for discrete states below the bottom. Runs write delimited
and JSON output plus figures into an output directory, together with a
fully resolved manifest that reproduces the run via --manifest.

Environment defaults: HVZKIT_GRID_N, HVZKIT_BOX, HVZKIT_SEED,
HVZKIT_THREADS and HVZKIT_CACHE seed the corresponding flags.

Exit codes: 0 success, 2 configuration problem, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import os
import re
import sys as _sys
from pathlib import Path

from . import __version__, symgroup, threshold, verify
from .eigensolve import ConvergenceError, EmptySectorError
from .fourier_grid import GridError
from .symgroup import CapExceededError, ShapeError
from .system import (
    ConfigError,
    enumerate_decompositions,
    load_system,
    system_to_dict,
    system_from_dict,
    validate,
)
from .threshold import FiberCache, ScanConfig

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERIC = 3

_SCAN_FIELDS = (
    "n", "box", "qmax", "coarse_step", "refine_rounds",
    "atol", "gap_tol", "eig_tol", "seed", "threads", "max_apply",
)


def _env(name: str, cast, fallback):
    raw = os.environ.get("HVZKIT_" + name)
    if raw is None:
        return fallback
    try:
        return cast(raw)
    except ValueError:
        return fallback


def _add_scan_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="system description file (YAML or JSON)")
    p.add_argument("--alpha", help='symmetry type label, e.g. "[2,1]" or "[2]x[1,1]"')
    p.add_argument("--out", default="hvzkit-out", help="output directory")
    p.add_argument("--grid-n", type=int, default=_env("GRID_N", int, 256))
    p.add_argument("--box", type=float, default=_env("BOX", float, 40.0))
    p.add_argument("--qmax", type=float, default=None)
    p.add_argument("--coarse-step", type=int, default=4)
    p.add_argument("--refine-rounds", type=int, default=2)
    p.add_argument("--atol", type=float, default=1e-6)
    p.add_argument("--gap-tol", type=float, default=1e-3)
    p.add_argument("--eig-tol", type=float, default=1e-9)
    p.add_argument("--seed", type=int, default=_env("SEED", int, 42))
    p.add_argument("--threads", type=int, default=_env("THREADS", int, 1))
    p.add_argument("--cache", default=_env("CACHE", str, None),
                   help="directory for persistent fiber energies")
    p.add_argument("--no-figures", action="store_true")
    p.add_argument("--manifest", help="re-run the settings stored in a manifest file")


def _config_from_args(args) -> ScanConfig:
    return ScanConfig(
        n=args.grid_n,
        box=args.box,
        qmax=args.qmax,
        coarse_step=args.coarse_step,
        refine_rounds=args.refine_rounds,
        atol=args.atol,
        gap_tol=args.gap_tol,
        eig_tol=args.eig_tol,
        seed=args.seed,
        threads=args.threads,
    )


def _load_inputs(args, command: str):
    """System, type and scan settings from flags or from a manifest."""
    extras = {}
    if args.manifest:
        data = json.loads(Path(args.manifest).read_text())
        if data.get("command") != command:
            raise ConfigError(
                f"manifest records a {data.get('command')!r} run, not {command!r}"
            )
        sys_obj = system_from_dict(data["system"])
        scan = {k: v for k, v in data["scan"].items() if k in _SCAN_FIELDS}
        cfg = ScanConfig(**scan)
        alpha_label = data["alpha"]
        extras = data.get("params", {})
        if not extras.get("figures", True):
            args.no_figures = True
    else:
        if not args.config:
            raise ConfigError("--config is required (or --manifest)")
        if not args.alpha:
            raise ConfigError("--alpha is required (or --manifest)")
        sys_obj = load_system(args.config)
        cfg = _config_from_args(args)
        alpha_label = args.alpha

    report = validate(sys_obj)
    for w in report.warnings:
        print(f"note: {w}")
    if report.errors:
        raise ConfigError("; ".join(report.errors))

    alpha = symgroup.parse_type(alpha_label)
    symgroup.check_type(alpha, sys_obj.species_group())
    return sys_obj, alpha, cfg, extras


def _write_manifest(
    outdir: Path, command: str, sys_obj, alpha, cfg: ScanConfig, params: dict,
    outputs: list[str],
) -> Path:
    manifest = {
        "command": command,
        "version": __version__,
        "alpha": alpha.label,
        "system": system_to_dict(sys_obj),
        "scan": dataclasses.asdict(cfg),
        "params": params,
        "outputs": outputs,
    }
    path = outdir / "manifest.json"
    path.write_text(json.dumps(manifest, indent=2))
    return path


def _sanitize(label: str) -> str:
    return re.sub(r"[^0-9A-Za-z]+", "-", label).strip("-")


def _outdir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _fmt_q(q) -> str:
    return "(" + ", ".join(f"{c:.6g}" for c in q) + ")"


# ---------------------------------------------------------------------------
# chartab
# ---------------------------------------------------------------------------


def cmd_chartab(args) -> int:
    if args.config:
        sizes = load_system(args.config).species_sizes
    elif args.sizes:
        try:
            sizes = tuple(int(s) for s in args.sizes.split(","))
        except ValueError as exc:
            raise ConfigError(f"bad --sizes {args.sizes!r}") from exc
    else:
        raise ConfigError("chartab needs --sizes or --config")
    group = symgroup.SpeciesGroup(sizes)
    table = symgroup.character_table(group)

    types = list(table)
    classes = list(next(iter(table.values())))
    print("type\t" + "\t".join(classes))
    for t in types:
        print(t + "\t" + "\t".join(str(table[t][c]) for c in classes))

    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        path = out / "chartab.json"
        path.write_text(symgroup.character_table_json(group))
        print(f"wrote {path}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# threshold
# ---------------------------------------------------------------------------


def _write_threshold_outputs(outdir: Path, report, no_figures: bool) -> list[str]:
    outputs = []
    jpath = outdir / "threshold.json"
    jpath.write_text(json.dumps(report.to_dict(), indent=2))
    outputs.append(str(jpath))

    for scan in report.scans:
        cpath = outdir / f"lambda_{_sanitize(scan.decomposition)}.csv"
        with open(cpath, "w", newline="") as fh:
            writer = csv.writer(fh)
            d = len(scan.min_q)
            writer.writerow(
                ["stage"] + [f"q{c}" for c in range(d)]
                + ["value", "beta1", "beta2", "e1", "e2"]
            )
            for stage, curve in [("coarse", scan.coarse)] + [
                (f"refine-{i + 1}", c) for i, c in enumerate(scan.refined)
            ]:
                for p in curve.points:
                    writer.writerow(
                        [stage] + [f"{c!r}" for c in p.q]
                        + [repr(p.value), p.pair[0], p.pair[1], repr(p.e1), repr(p.e2)]
                    )
        outputs.append(str(cpath))

    if not no_figures:
        from . import plots

        outputs.append(str(plots.plot_lambda_curves(report, outdir / "lambda_curves.png")))
    return outputs


def cmd_threshold(args) -> int:
    sys_obj, alpha, cfg, _extras = _load_inputs(args, "threshold")
    outdir = _outdir(args)
    cache = FiberCache(args.cache) if args.cache else FiberCache()
    report = threshold.essential_bottom(sys_obj, alpha, cfg, cache)

    print(f"type {report.alpha}: essential bottom = {report.mu:.12g}")
    print("minimizing decomposition(s): " + ", ".join(report.minimizing))
    for label in report.minimizing:
        qs = ", ".join(_fmt_q(q) for q in report.gamma_of(label))
        print(f"  {label}: minimizers at {qs}")
    for w in report.warnings:
        print(f"warning: {w}")

    outputs = _write_threshold_outputs(outdir, report, args.no_figures)
    mpath = _write_manifest(
        outdir, "threshold", sys_obj, alpha, cfg,
        {"figures": not args.no_figures}, outputs,
    )
    print("wrote " + " ".join(outputs + [str(mpath)]))
    return EXIT_OK


# ---------------------------------------------------------------------------
# hvz
# ---------------------------------------------------------------------------


def cmd_hvz(args) -> int:
    sys_obj, alpha, cfg, _extras = _load_inputs(args, "hvz")
    outdir = _outdir(args)
    cache = FiberCache(args.cache) if args.cache else FiberCache()
    report = threshold.essential_bottom(sys_obj, alpha, cfg, cache)
    scan = verify.hvz_scan(sys_obj, alpha, cfg, cache, report=report)

    print(f"type {alpha.label}: scan bottom = {scan.reference:.12g}")
    for w, g in zip(scan.levels, scan.gaps):
        print(
            f"  s={w.separation:8.3f} L={w.box:7.2f} n={w.n:5d} "
            f"quotient={w.quotient:.9f} gap={g:.3e}"
        )
    print(
        f"monotone decrease: {'yes' if scan.monotone else 'NO'}; "
        f"final relative gap {scan.final_gap_rel:.4f}"
    )

    outputs = []
    jpath = outdir / "hvz.json"
    jpath.write_text(json.dumps(scan.to_dict(), indent=2))
    outputs.append(str(jpath))
    if not args.no_figures:
        from . import plots

        outputs.append(str(plots.plot_hvz(scan, outdir / "hvz.png")))
    mpath = _write_manifest(
        outdir, "hvz", sys_obj, alpha, cfg,
        {"figures": not args.no_figures}, outputs,
    )
    print("wrote " + " ".join(outputs + [str(mpath)]))
    return EXIT_OK if scan.monotone else EXIT_NUMERIC


# ---------------------------------------------------------------------------
# minset
# ---------------------------------------------------------------------------


def cmd_minset(args) -> int:
    sys_obj, alpha, cfg, extras = _load_inputs(args, "minset")
    outdir = _outdir(args)
    cache = FiberCache(args.cache) if args.cache else FiberCache()
    dec_label = extras.get("dec", None) if args.manifest else args.dec
    center = extras.get("center", None) if args.manifest else (
        tuple(args.center) if args.center else None
    )
    halfwidth = extras.get("halfwidth", None) if args.manifest else args.halfwidth
    if center is not None:
        center = tuple(float(c) for c in center)

    diag = threshold.minimizer_diagnostics(
        sys_obj, alpha, cfg, cache,
        dec_label=dec_label, center=center, halfwidth=halfwidth,
    )

    print(f"type {alpha.label}, decomposition {diag.decomposition}:")
    print(f"  region center {_fmt_q(diag.center)}, halfwidth {diag.halfwidth:.6g}")
    checks = [
        ("discrete channel values", diag.all_discrete),
        ("single type pair in the lowest eigenspace", diag.single_component),
        ("type pair constant over the region", diag.pair_constant),
        ("smooth channel curve", diag.smooth),
        ("minimizer count stable under refinement", diag.counts_match),
    ]
    for name, ok in checks:
        print(f"  [{'pass' if ok else 'FAIL'}] {name}")
    if diag.lowest_pair:
        print(f"  lowest pair: {diag.lowest_pair}")
    print(f"  minimizers: {diag.count_coarse} (spacing h), {diag.count_fine} (h/2)")
    for w in diag.warnings:
        print(f"warning: {w}")

    outputs = []
    jpath = outdir / "minset.json"
    jpath.write_text(json.dumps(diag.to_dict(), indent=2))
    outputs.append(str(jpath))
    if not args.no_figures:
        from . import plots

        outputs.append(str(plots.plot_minimizer_region(diag, outdir / "minset.png")))
    params = {
        "dec": dec_label,
        "center": list(diag.center),
        "halfwidth": diag.halfwidth,
        "figures": not args.no_figures,
    }
    mpath = _write_manifest(outdir, "minset", sys_obj, alpha, cfg, params, outputs)
    print("wrote " + " ".join(outputs + [str(mpath)]))
    return EXIT_OK


# ---------------------------------------------------------------------------
# spectrum
# ---------------------------------------------------------------------------


def cmd_spectrum(args) -> int:
    sys_obj, alpha, cfg, extras = _load_inputs(args, "spectrum")
    outdir = _outdir(args)
    cache = FiberCache(args.cache) if args.cache else FiberCache()
    k = int(extras.get("k", args.k if not args.manifest else 4))
    refine = bool(extras.get("refine", args.refine)) if args.manifest else args.refine
    report = threshold.essential_bottom(sys_obj, alpha, cfg, cache)
    ds = verify.discrete_spectrum_below(
        sys_obj, alpha, report.mu, cfg, k=k,
        n=min(cfg.n, 128), box=cfg.box, refine=refine,
    )

    print(f"type {alpha.label}: essential bottom = {report.mu:.12g}")
    for e in ds.eigenvalues:
        mark = "discrete" if e < ds.mu - ds.atol else "at or above the bottom"
        print(f"  {e:.9f}  {mark}")
    print(f"{ds.count} state(s) below the bottom")
    if ds.max_shift is not None:
        print(f"refinement shift of discrete states: {ds.max_shift:.3e}")

    outputs = []
    jpath = outdir / "spectrum.json"
    jpath.write_text(json.dumps(ds.to_dict(), indent=2))
    outputs.append(str(jpath))
    if not args.no_figures:
        from . import plots

        outputs.append(str(plots.plot_spectrum(ds, outdir / "spectrum.png")))
    mpath = _write_manifest(
        outdir, "spectrum", sys_obj, alpha, cfg,
        {"k": k, "refine": refine, "figures": not args.no_figures}, outputs,
    )
    print("wrote " + " ".join(outputs + [str(mpath)]))
    return EXIT_OK


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hvzkit",
        description="essential-spectrum bottoms of symmetry-restricted "
        "many-particle fiber operators",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("chartab", help="print the exact character table")
    p.add_argument("--sizes", help='species sizes, e.g. "3" or "2,2"')
    p.add_argument("--config", help="derive sizes from a system file")
    p.add_argument("--out", default=None, help="also write chartab.json here")
    p.set_defaults(fn=cmd_chartab)

    p = sub.add_parser("threshold", help="scan the essential-spectrum bottom")
    _add_scan_flags(p)
    p.set_defaults(fn=cmd_threshold)

    p = sub.add_parser("hvz", help="trial-state convergence to the bottom")
    _add_scan_flags(p)
    p.set_defaults(fn=cmd_hvz)

    p = sub.add_parser("minset", help="minimizer-region diagnostics")
    _add_scan_flags(p)
    p.add_argument("--dec", help="decomposition label, default: the minimizing one")
    p.add_argument("--center", type=float, nargs="+", default=None,
                   help="region center Q components")
    p.add_argument("--halfwidth", type=float, default=None)
    p.set_defaults(fn=cmd_minset)

    p = sub.add_parser("spectrum", help="discrete states below the bottom")
    _add_scan_flags(p)
    p.add_argument("--k", type=int, default=4, help="eigenvalues to solve for")
    p.add_argument("--refine", action="store_true",
                   help="re-solve at doubled resolution")
    p.set_defaults(fn=cmd_spectrum)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except (ConfigError, ShapeError, CapExceededError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=_sys.stderr)
        return EXIT_CONFIG
    except (ConvergenceError, EmptySectorError, GridError) as exc:
        print(f"numerical failure: {exc}", file=_sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    raise SystemExit(main())
