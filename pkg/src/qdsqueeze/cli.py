"""Command-line entry point: ``qdsqueeze {rates,steady,sweep,figure,power}``."""

from __future__ import annotations

import argparse
import dataclasses
import logging
import sys

from . import __version__
from .errors import ConfigError, InvalidParameterError, NumericalFailureError, QDSqueezeError
from .sweep import (
    FIGURE_IDS,
    RATE_OUTPUTS,
    STEADY_OUTPUTS,
    Axis,
    ResultTable,
    SweepSpec,
    emit,
    figure_preset,
    load_config,
    run_sweep,
    spec_from_config,
)
from .units import PhysicalParams, params_from_config, rabi_to_power, validate_params

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL, EXIT_PARTIAL = 0, 1, 2, 3
LOGGER = logging.getLogger("qdsqueeze")


def _common(parser: argparse.ArgumentParser):
    parser.add_argument("--config", help="JSON configuration file")
    parser.add_argument("--out", help="output file (default: stdout)")
    parser.add_argument("--format", choices=("csv", "json"), default="csv")
    parser.add_argument("--truncation", type=int, metavar="N", help="initial Fock truncation")
    parser.add_argument("--threads", type=int, default=1, metavar="K", help="worker threads for grid points")
    parser.add_argument("--full-me", action="store_true", help="use the full Born generator instead of the effective one")
    parser.add_argument("--no-phonons", action="store_true", help="disable exciton-phonon coupling")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="qdsqueeze", description=__doc__)
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)
    for name, helptext in (
        ("rates", "phonon-induced incoherent rates (single point or swept)"),
        ("steady", "steady-state squeezing report at one parameter point"),
        ("sweep", "parameter sweep described by the config's 'sweep' block"),
    ):
        _common(sub.add_parser(name, help=helptext))
    fig = sub.add_parser("figure", help="run a figure preset")
    fig.add_argument("figure_id", choices=FIGURE_IDS)
    _common(fig)
    power = sub.add_parser("power", help="laser power needed for a Rabi energy")
    power.add_argument("--omega-ueV", type=float, default=200.0)
    power.add_argument("--dipole-Cm", type=float, default=9.7e-29)
    power.add_argument("--area-um2", type=float, default=100.0)
    power.add_argument("--out")
    power.add_argument("--format", choices=("csv", "json"), default="csv")
    return parser


def _overrides(args, p: PhysicalParams) -> PhysicalParams:
    changes = {}
    if args.truncation is not None:
        changes["fock_truncation"] = args.truncation
    if args.no_phonons:
        changes["phonons_enabled"] = False
    return dataclasses.replace(p, **changes) if changes else p


def _spec(args) -> SweepSpec:
    method = "full" if args.full_me else "effective"
    if args.command == "figure":
        spec = figure_preset(args.figure_id)
        return dataclasses.replace(spec, base=_overrides(args, spec.base), method=method)
    cfg = load_config(args.config) if args.config else {}
    if args.command == "sweep":
        if "sweep" not in cfg:
            raise ConfigError("the sweep command needs a config with a 'sweep' block", "sweep")
        spec = spec_from_config(cfg)
        return dataclasses.replace(spec, base=_overrides(args, spec.base), method=method)
    if args.command == "rates" and "sweep" in cfg:
        spec = spec_from_config({**cfg, "sweep": {**cfg["sweep"], "kind": "rates", "outputs": None}})
        return dataclasses.replace(spec, base=_overrides(args, spec.base))
    if "sweep" in cfg:
        raise ConfigError("the steady command evaluates one point; use 'sweep' for a grid", "sweep")
    base = _overrides(args, params_from_config(cfg))
    kind = "rates" if args.command == "rates" else "steady"
    # a single point is a one-value sweep
    outputs = RATE_OUTPUTS if kind == "rates" else STEADY_OUTPUTS
    return SweepSpec(base, Axis("delta_cl", (base.delta_cl,)), outputs=outputs, kind=kind, method=method)


def _power_table(args) -> ResultTable:
    area = args.area_um2 * 1e-12
    res = rabi_to_power(args.omega_ueV, args.dipole_Cm, area)
    cols = ["omega_R_ueV", "dipole_Cm", "area_um2", "field_V_per_m", "intensity_W_per_m2", "power_mW"]
    row = [args.omega_ueV, args.dipole_Cm, args.area_um2, res.field_V_per_m, res.intensity_W_per_m2, res.power_W * 1e3]
    return ResultTable(cols, [row], {"tool": "qdsqueeze", "version": __version__})


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.WARNING - 10 * min(args.verbose, 2), format="%(levelname)s: %(message)s", stream=sys.stderr
    )
    try:
        if args.command == "power":
            table = _power_table(args)
        else:
            if args.threads < 1:
                raise ConfigError("--threads must be >= 1", "threads")
            spec = _spec(args)
            validate_params(spec.base)
            table = run_sweep(spec, threads=args.threads)
        text = emit(table, args.format, args.out)
        if args.out is None:
            sys.stdout.write(text)
    except InvalidParameterError as exc:
        LOGGER.error("configuration error: %s", exc)
        return EXIT_CONFIG
    except NumericalFailureError as exc:
        LOGGER.error("numerical failure: %s", exc)
        return EXIT_NUMERICAL
    except QDSqueezeError as exc:
        LOGGER.error("%s", exc)
        return EXIT_CONFIG
    if table.failed_rows:
        LOGGER.error("%d of %d grid points failed", table.failed_rows, len(table.rows))
        return EXIT_PARTIAL
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
