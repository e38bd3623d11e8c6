"""Command-line front end.

Subcommands::

    weakmeas report   --scenario three-box
    weakmeas sweep    --scenario three-box --observable Pi_C --delta 2,10,50
    weakmeas sample   --scenario three-box --observable Pi_A --delta 20 --samples 100000 --seed 7
    weakmeas scenario list

Settings come from built-in defaults, then an optional flat JSON object
given with ``--config``, then command-line flags; later sources win.  The
output directory defaults to ``$WEAKMEAS_OUTPUT_DIR`` or ``weakmeas-output``.

Exit codes: 0 success, 2 bad configuration, 3 orthogonal selections,
4 quadrature failure, 5 post-selection too improbable.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import __version__
from .config import DEFAULTS
from .errors import (
    OrthogonalSelection,
    QuadratureNotConverged,
    TooImprobable,
    WeakMeasError,
    ZeroPostSelection,
)
from .measure import (
    postselection_probability,
    run_sharded,
    sample_postselected,
    sample_preselected,
)
from .pointer import (
    GaussianPointer,
    density_table,
    moments,
    postselected_distribution,
    preselected_distribution,
    shifted_gaussian_distance,
)
from .qcore import make_observable, make_state
from .scenarios import REGISTRY, Scenario, get_scenario
from .textio import fmt, metadata_lines, write_table
from .tsvf import reality_report, weak_value

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_ORTHOGONAL = 3
EXIT_QUADRATURE = 4
EXIT_IMPROBABLE = 5

OUTPUT_ENV = "WEAKMEAS_OUTPUT_DIR"
DEFAULT_OUTPUT = "weakmeas-output"


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    scenario: Optional[str] = None
    spin: Optional[int] = None
    pre: Optional[str] = None
    post: Optional[str] = None
    matrix: Optional[str] = None
    observable: Optional[str] = None
    delta: list = field(default_factory=lambda: [1.0])
    samples: int = 10000
    seed: int = 0
    output_dir: str = ""
    grid_points: int = 401
    certainty_tol: float = DEFAULTS.certainty
    mode: str = "physical"
    shards: int = 1

    def validate(self) -> None:
        inline = self.pre is not None or self.matrix is not None
        if (self.scenario is None) == (not inline):
            raise ConfigError("give exactly one of --scenario or an inline --pre/--matrix spec")
        if inline and (self.pre is None or self.matrix is None):
            raise ConfigError("an inline spec needs both --pre and --matrix")
        if self.samples < 0:
            raise ConfigError("samples must be nonnegative")
        if not self.delta or any(not (d > 0 and math.isfinite(d)) for d in self.delta):
            raise ConfigError("every delta must be positive and finite")
        if self.grid_points < 2:
            raise ConfigError("grid-points must be at least 2")
        if not 0 <= self.certainty_tol < 1:
            raise ConfigError("certainty-tol must lie in [0, 1)")
        if self.mode not in ("physical", "direct"):
            raise ConfigError("mode must be 'physical' or 'direct'")
        if self.shards < 1:
            raise ConfigError("shards must be at least 1")

    def echo(self) -> dict:
        return {k: v for k, v in asdict(self).items() if v is not None}


# -- parsing helpers ------------------------------------------------------------

def _parse_vector(text: str) -> list[complex]:
    try:
        return [complex(tok.strip().replace(" ", "")) for tok in text.split(",") if tok.strip()]
    except ValueError as exc:
        raise ConfigError(f"cannot parse vector {text!r}: {exc}") from exc


def _parse_matrix(text: str) -> np.ndarray:
    rows = [_parse_vector(r) for r in text.split(";") if r.strip()]
    if not rows or any(len(r) != len(rows[0]) for r in rows):
        raise ConfigError(f"matrix {text!r} must have rows of equal length separated by ';'")
    return np.array(rows, dtype=complex)


def _parse_deltas(value) -> list[float]:
    if isinstance(value, (int, float)):
        return [float(value)]
    if isinstance(value, list):
        return [float(v) for v in value]
    try:
        return [float(tok) for tok in str(value).split(",") if tok.strip()]
    except ValueError as exc:
        raise ConfigError(f"cannot parse delta list {value!r}") from exc


def _load_config_file(path: str) -> dict:
    try:
        data = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc
    if not isinstance(data, dict) or any(isinstance(v, dict) for v in data.values()):
        raise ConfigError("config file must be a flat JSON object")
    return {k.replace("-", "_"): v for k, v in data.items()}


_FIELDS = {f for f in RunConfig.__dataclass_fields__}


def build_config(args: argparse.Namespace) -> RunConfig:
    merged: dict = {}
    if getattr(args, "config", None):
        merged.update(_load_config_file(args.config))
    for name in _FIELDS:
        value = getattr(args, name, None)
        if value is not None:
            merged[name] = value
    unknown = set(merged) - _FIELDS
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(sorted(unknown))}")
    if "delta" in merged:
        merged["delta"] = _parse_deltas(merged["delta"])
    try:
        cfg = RunConfig(**merged)
        cfg.samples, cfg.seed = int(cfg.samples), int(cfg.seed)
        cfg.grid_points, cfg.shards = int(cfg.grid_points), int(cfg.shards)
        cfg.certainty_tol = float(cfg.certainty_tol)
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc
    if not cfg.output_dir:
        cfg.output_dir = os.environ.get(OUTPUT_ENV, DEFAULT_OUTPUT)
    cfg.validate()
    return cfg


def resolve_scenario(cfg: RunConfig) -> Scenario:
    if cfg.scenario is not None:
        try:
            return get_scenario(cfg.scenario, cfg.spin)
        except (KeyError, WeakMeasError) as exc:
            raise ConfigError(str(exc)) from exc
    try:
        pre = make_state(_parse_vector(cfg.pre))
        post = make_state(_parse_vector(cfg.post)) if cfg.post else None
        A = make_observable(_parse_matrix(cfg.matrix))
        label = cfg.observable or "A"
        return Scenario("inline", pre, post, ((label, A),), (), "inline specification",
                        default_observable=label)
    except WeakMeasError as exc:
        raise ConfigError(str(exc)) from exc


def _pick_observable(scn: Scenario, cfg: RunConfig):
    try:
        label = cfg.observable or scn.default_observable or scn.labels[0]
        return label, scn.observable(label)
    except KeyError as exc:
        raise ConfigError(exc.args[0]) from exc


def _meta(cfg: RunConfig, scn: Scenario, **extra) -> dict:
    meta = {"config": cfg.echo(), "scenario": scn.name, "seed": cfg.seed,
            "grid_points": cfg.grid_points}
    meta.update(extra)
    return meta


def _write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)


def _json(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, allow_nan=True) + "\n"


def _complex_dict(z) -> Optional[dict]:
    return None if z is None else {"real": complex(z).real, "imag": complex(z).imag}


def _guard_orthogonal(scn: Scenario) -> None:
    tsv = scn.tsv
    if not tsv.preselected_only and abs(tsv.overlap) <= DEFAULTS.orthogonal_guard:
        raise OrthogonalSelection(abs(tsv.overlap), DEFAULTS.orthogonal_guard)


# -- commands -------------------------------------------------------------------

def cmd_report(cfg: RunConfig, out=None) -> int:
    out = out or sys.stdout
    scn = resolve_scenario(cfg)
    _guard_orthogonal(scn)
    tsv = scn.tsv
    reports = [reality_report(label, A, tsv, cfg.certainty_tol) for label, A in scn.observables]
    meta = _meta(cfg, scn, certainty_tol=cfg.certainty_tol)
    blocks = metadata_lines(meta)
    blocks.append("")
    for rep in reports:
        blocks.append(rep.to_text())
        blocks.append("")
    prob = postselection_probability(None, tsv)
    if not tsv.preselected_only:
        blocks.append(f"postselection probability: {fmt(prob)}")
    for d in scn.discrepancies:
        blocks.append(f"open discrepancy [{d.quantity}]: stated {d.stated}, "
                      f"computed {fmt(d.computed)}; {d.note}")
    outdir = Path(cfg.output_dir)
    _write(outdir / "reality_report.txt", "\n".join(blocks).rstrip() + "\n")
    summary = {
        "toolkit": f"weakmeas {__version__}",
        "config": cfg.echo(),
        "scenario": scn.name,
        "preselected_only": tsv.preselected_only,
        "postselection_probability": None if tsv.preselected_only else prob,
        "observables": [r.to_dict() for r in reports],
        "discrepancies": [{"quantity": d.quantity, "stated": d.stated,
                           "computed": d.computed, "note": d.note} for d in scn.discrepancies],
    }
    _write(outdir / "weak_values.json", _json(summary))
    for rep in reports:
        ideal = "none" if rep.ideal_value is None else fmt(rep.ideal_value)
        wv = rep.weak_value
        print(f"{rep.label}: weak value {fmt(wv.real)}{'+' if wv.imag >= 0 else '-'}"
              f"{fmt(abs(wv.imag))}j; ideal element of reality: {ideal}", file=out)
    return EXIT_OK


def _distribution(A, scn: Scenario, delta: float):
    pointer = GaussianPointer(delta)
    if scn.post is None:
        return preselected_distribution(A, scn.pre, pointer)
    return postselected_distribution(A, scn.tsv, pointer)


def cmd_sweep(cfg: RunConfig, out=None) -> int:
    out = out or sys.stdout
    if len(cfg.delta) < 2:
        raise ConfigError("sweep needs at least two delta values")
    scn = resolve_scenario(cfg)
    _guard_orthogonal(scn)
    label, A = _pick_observable(scn, cfg)
    shift = weak_value(A, scn.tsv).value
    rows = []
    outdir = Path(cfg.output_dir)
    for k, delta in enumerate(sorted(cfg.delta)):
        dist = _distribution(A, scn, delta)
        mean, var = moments(dist)
        tv = shifted_gaussian_distance(dist, shift.real)
        rows.append((delta, mean, var, tv))
        table = density_table(dist, cfg.grid_points,
                              meta=_meta(cfg, scn, observable=label, index=k))
        _write(outdir / f"density_{k:03d}.csv", table)
    meta = _meta(cfg, scn, observable=label, weak_value=shift,
                 quadrature=f"composite Simpson 2**{DEFAULTS.quad_start_exponent}+1 "
                            f"to 2**{DEFAULTS.quad_cap_exponent}+1 points")
    _write(outdir / "sweep.csv",
           write_table(["delta", "mean", "variance", "tv_distance"], rows, meta))
    for delta, mean, var, tv in rows:
        print(f"delta={fmt(delta)} mean={fmt(mean)} variance={fmt(var)} tv={fmt(tv)}", file=out)
    return EXIT_OK


def cmd_sample(cfg: RunConfig, out=None) -> int:
    out = out or sys.stdout
    if cfg.samples < 1:
        raise ConfigError("sample needs --samples >= 1")
    if len(cfg.delta) != 1:
        raise ConfigError("sample takes a single delta")
    scn = resolve_scenario(cfg)
    _guard_orthogonal(scn)
    label, A = _pick_observable(scn, cfg)
    pointer = GaussianPointer(cfg.delta[0])
    tsv = scn.tsv
    if scn.post is None:
        def sampler(count, rng):
            return sample_preselected(A, scn.pre, pointer, count, rng)
        prob = 1.0
        mode = "preselected"
    else:
        prob = postselection_probability(A, tsv, pointer)
        mode = cfg.mode

        def sampler(count, rng):
            return sample_postselected(A, tsv, pointer, count, rng, mode=mode)
    try:
        record = run_sharded(sampler, cfg.samples, cfg.seed, cfg.shards)
    except TooImprobable:
        print(f"weakmeas: estimated post-selection probability {fmt(prob)} at delta="
              f"{fmt(pointer.delta)} ({fmt(postselection_probability(A, tsv))} without "
              f"the pointer)", file=sys.stderr)
        raise
    oracle_mean, oracle_var = moments(_distribution(A, scn, pointer.delta))
    meta = _meta(cfg, scn, observable=label, delta=pointer.delta, mode=mode)
    outdir = Path(cfg.output_dir)
    _write(outdir / "readings.csv", record.to_text(meta))
    summary = {
        "toolkit": f"weakmeas {__version__}",
        "config": cfg.echo(),
        "scenario": scn.name,
        "observable": label,
        "mode": mode,
        "seed": cfg.seed,
        "delta": pointer.delta,
        "postselected_count": record.postselected_count,
        "attempted_count": record.attempted_count,
        "acceptance_rate": record.acceptance_rate,
        "empirical_mean": record.mean(),
        "standard_error": record.standard_error() if record.postselected_count > 1 else None,
        "quadrature_mean": oracle_mean,
        "quadrature_variance": oracle_var,
        "postselection_probability": prob,
        "weak_value": _complex_dict(weak_value(A, tsv).value),
    }
    _write(outdir / "summary.json", _json(summary))
    print(f"mean={fmt(record.mean())} stderr={fmt(summary['standard_error'] or float('nan'))} "
          f"quadrature_mean={fmt(oracle_mean)} acceptance={fmt(record.acceptance_rate)}", file=out)
    return EXIT_OK


def cmd_scenario(args, out=None) -> int:
    out = out or sys.stdout
    if args.action == "list":
        for name in REGISTRY:
            scn = get_scenario(name)
            print(f"{name}\t{scn.description}", file=out)
        return EXIT_OK
    if not args.name:
        raise ConfigError("scenario show needs a name")
    try:
        scn = get_scenario(args.name, args.spin)
    except (KeyError, WeakMeasError) as exc:
        raise ConfigError(str(exc)) from exc
    print(scn.to_json(), file=out)
    return EXIT_OK


# -- entry point ------------------------------------------------------------------

class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise ConfigError(message)


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="flat JSON object of settings")
    p.add_argument("--scenario", help="registered scenario name (see 'scenario list')")
    p.add_argument("--spin", type=int, help="N for the spin-bisector scenario")
    p.add_argument("--pre", help="inline pre-selected amplitudes, e.g. '1,1j'")
    p.add_argument("--post", help="inline post-selected amplitudes")
    p.add_argument("--matrix", help="inline observable, rows separated by ';'")
    p.add_argument("--observable", help="observable label within the scenario")
    p.add_argument("--delta", help="pointer width, or comma-separated list for sweep")
    p.add_argument("--samples", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--output-dir", dest="output_dir")
    p.add_argument("--grid-points", dest="grid_points", type=int,
                   help="points in exported density tables")
    p.add_argument("--certainty-tol", dest="certainty_tol", type=float)
    p.add_argument("--mode", choices=("physical", "direct"))
    p.add_argument("--shards", type=int, help="independent substreams for sampling")


def make_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="weakmeas", description=__doc__.split("\n")[0])
    parser.add_argument("--version", action="version", version=f"weakmeas {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name, help_ in (("report", "ideal and weak elements of reality per observable"),
                        ("sweep", "pointer moments and distance to a shifted Gaussian vs delta"),
                        ("sample", "Monte Carlo pointer readings")):
        _common(sub.add_parser(name, help=help_))
    sc = sub.add_parser("scenario", help="list or describe registered scenarios")
    sc.add_argument("action", choices=("list", "show"))
    sc.add_argument("name", nargs="?")
    sc.add_argument("--spin", type=int)
    return parser


_COMMANDS = {"report": cmd_report, "sweep": cmd_sweep, "sample": cmd_sample}


def main(argv: Optional[Sequence[str]] = None) -> int:
    try:
        args = make_parser().parse_args(argv)
        if args.command == "scenario":
            return cmd_scenario(args)
        cfg = build_config(args)
        return _COMMANDS[args.command](cfg)
    except ConfigError as exc:
        print(f"weakmeas: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OrthogonalSelection as exc:
        print(f"weakmeas: orthogonal selections: {exc} (guard {exc.guard:.1e})", file=sys.stderr)
        return EXIT_ORTHOGONAL
    except QuadratureNotConverged as exc:
        print(f"weakmeas: quadrature failed: {exc}", file=sys.stderr)
        return EXIT_QUADRATURE
    except (TooImprobable, ZeroPostSelection) as exc:
        prob = getattr(exc, "probability", 0.0)
        print(f"weakmeas: post-selection too improbable: {exc}; "
              f"estimated probability {prob:.6e}", file=sys.stderr)
        return EXIT_IMPROBABLE


if __name__ == "__main__":
    sys.exit(main())
