"""Command-line front end.

Subcommands map onto cumulative stages of the scenario pipeline:

  geometry     element layout CSV
  pattern      + pattern CSV(s) with sidecar metadata
  metrics      + metric JSON, link JSON and (when configured) degradation
               statistics: the full artifact bundle for one design column
  linkbudget   link JSON only
  perturb      geometry + degradation statistics (requires a perturbation
               section)
  sweep        long-form CSV over one numeric config field
  compare      summary table across classical / sparse-square / elsa configs

Exit codes: 0 success, 1 I/O failure, 2 domain or analysis error.  Nonzero
exits print a machine-readable JSON object on stderr.  ``--config``
accepts a path or ``builtin:<name>`` for a shipped scenario.
"""

from __future__ import annotations

import argparse
import json
import sys
from importlib import resources

from .config import ScenarioConfig, default_config_yaml, parse_config, schema_text
from .errors import ConfigurationError, SwarmBeamError
from .runner import ArtifactWriter, compare_designs, run_scenario, sweep


def _resolve_config_path(spec: str) -> str:
    if spec.startswith("builtin:"):
        name = spec.split(":", 1)[1]
        ref = resources.files("swarmbeam").joinpath("configs", f"{name}.yaml")
        if not ref.is_file():
            available = sorted(
                p.name.removesuffix(".yaml")
                for p in resources.files("swarmbeam").joinpath("configs").iterdir()
                if p.name.endswith(".yaml")
            )
            raise ConfigurationError(
                f"no builtin config {name!r}; available: {', '.join(available)}"
            )
        return str(ref)
    return spec


def _load_config(args) -> ScenarioConfig:
    if not args.config:
        raise ConfigurationError("--config <path|builtin:name> is required")
    cfg = parse_config(_resolve_config_path(args.config))
    if args.grid is not None:
        raw = dict(cfg.raw)
        raw.setdefault("grid", {})
        raw["grid"] = {**raw["grid"], "n_u": args.grid, "n_v": args.grid}
        from .config import parse_config_dict

        cfg = parse_config_dict(raw)
    if args.seed is not None:
        raw = dict(cfg.raw)
        if "perturbation" in raw:
            raw["perturbation"] = {**raw["perturbation"], "master_seed": args.seed}
            from .config import parse_config_dict

            cfg = parse_config_dict(raw)
    return cfg


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="swarmbeam",
        description="Distributed swarm phased-array design and analysis toolkit",
    )
    parser.add_argument("--config", help="scenario YAML path or builtin:<name>")
    parser.add_argument("--out", default="out", help="output directory")
    parser.add_argument("--grid", type=int, help="override grid sample count per axis")
    parser.add_argument("--seed", type=int, help="override perturbation master seed")
    parser.add_argument("--threads", type=int, default=1, help="worker thread count")
    parser.add_argument(
        "--print-defaults", action="store_true",
        help="print the fully defaulted scenario and exit",
    )
    parser.add_argument(
        "--print-schema", action="store_true",
        help="print the config schema and exit",
    )
    sub = parser.add_subparsers(dest="command")
    for name, help_text in [
        ("geometry", "write the element layout CSV"),
        ("pattern", "write geometry and pattern artifacts"),
        ("metrics", "write the full analysis bundle"),
        ("linkbudget", "write the link-budget JSON"),
        ("perturb", "write geometry and degradation statistics"),
    ]:
        sub.add_parser(name, help=help_text)
    p_sweep = sub.add_parser("sweep", help="sweep one numeric config field")
    p_sweep.add_argument("--param", required=True, help="dotted path, e.g. geometry.n_platforms")
    p_sweep.add_argument("--values", required=True,
                         help="comma-separated numeric values")
    p_cmp = sub.add_parser("compare", help="compare design columns")
    p_cmp.add_argument("--classical", required=True, help="classical design config")
    p_cmp.add_argument("--sparse", required=True, help="sparse-square design config")
    p_cmp.add_argument("--elsa", required=True, help="elsa design config")
    return parser


_STAGES = {
    "geometry": ("geometry",),
    "pattern": ("geometry", "pattern"),
    "metrics": ("geometry", "pattern", "metrics", "link", "perturb"),
    "linkbudget": ("link",),
    "perturb": ("geometry", "perturb"),
}


def _run(args) -> int:
    if args.print_defaults:
        sys.stdout.write(default_config_yaml())
        return 0
    if args.print_schema:
        sys.stdout.write(schema_text() + "\n")
        return 0
    if not args.command:
        raise ConfigurationError(
            "a subcommand is required (geometry, pattern, metrics, linkbudget, "
            "perturb, sweep, compare)"
        )

    if args.command == "sweep":
        cfg = _load_config(args)
        try:
            values = [float(v) for v in args.values.split(",") if v.strip()]
        except ValueError as exc:
            raise ConfigurationError(f"cannot parse sweep values: {exc}") from exc
        csv_text = sweep(cfg, args.param, values, n_threads=args.threads)
        writer = ArtifactWriter(args.out)
        writer.write_text("sweep.csv", csv_text)
        writer.write_manifest(cfg.raw, cfg.applied_defaults)
        return 0

    if args.command == "compare":
        configs = {
            "classical": parse_config(_resolve_config_path(args.classical)),
            "sparse-square": parse_config(_resolve_config_path(args.sparse)),
            "elsa": parse_config(_resolve_config_path(args.elsa)),
        }
        wide, long_form, payload = compare_designs(configs, n_threads=args.threads)
        writer = ArtifactWriter(args.out)
        writer.write_text("compare.csv", wide)
        writer.write_text("compare_long.csv", long_form)
        writer.write_text("compare.json", payload)
        writer.write_manifest(
            {name: c.raw for name, c in configs.items()},
            sum((list(c.applied_defaults) for c in configs.values()), []),
        )
        return 0

    cfg = _load_config(args)
    if args.command == "perturb" and cfg.perturbation is None:
        raise ConfigurationError(
            "the perturb command needs a perturbation section in the config"
        )
    run_scenario(cfg, args.out, n_threads=args.threads, stages=_STAGES[args.command])
    return 0


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return _run(args)
    except SwarmBeamError as exc:
        sys.stderr.write(
            json.dumps(
                {"error": type(exc).__name__, "message": str(exc), "exit_code": exc.exit_code}
            )
            + "\n"
        )
        return exc.exit_code
    except OSError as exc:
        sys.stderr.write(
            json.dumps({"error": type(exc).__name__, "message": str(exc), "exit_code": 1})
            + "\n"
        )
        return 1


if __name__ == "__main__":
    sys.exit(main())
