"""Command-line entry point: ``redshiftai <subcommand> [--config FILE] [--set path=value]``.

Every subcommand writes one JSON report to standard output. Reports echo the
effective configuration and tag each number with its unit; tables are also
written as CSV when ``--out-dir`` is given. Failures print a JSON error object
and exit with a nonzero status.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

from . import __version__
from .config import ConfigError, RunConfig, apply_override, from_document
from .estimation import (
    differential_signal,
    monte_carlo_campaign,
    sensitivity_budget,
    violated_phase,
)
from .frames import residual_recoil, total_phase_falling_frame, transformed_recoil
from .kinematics import closure_defect, propagate_reference
from .model import InvalidParameterError, Species, build_redshift_geometry
from .phase import (
    OpenInterferometerError,
    direct_oracle_scaling,
    total_phase_direct,
    total_phase_perturbative,
)

COMMANDS = ("phase", "frame-check", "oracle-check", "sensitivity", "montecarlo", "sweep")

EXIT_RUNTIME = 1
EXIT_USAGE = 2


class UsageError(Exception):
    pass


def q(value: float, unit: str) -> dict:
    """A number with its unit string."""
    return {"value": float(value), "unit": unit}


def _breakdown_json(b) -> dict:
    return {
        "ref_phase": q(b.ref_phase, "rad"),
        "clock_phase": q(b.clock_phase, "rad"),
        "total_phase": q(b.total, "rad"),
        "segments": [
            {"index": s.index, "lambda": int(s.lam), "dtau": q(s.dtau, "s")} for s in b.segments
        ],
    }


def _write_csv(out_dir: str | None, name: str, header: list[str], rows: list[list]) -> str | None:
    if out_dir is None:
        return None
    path = Path(out_dir)
    path.mkdir(parents=True, exist_ok=True)
    target = path / name
    with target.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([repr(x) if isinstance(x, float) else x for x in row])
    return str(target)


# -- subcommands ---------------------------------------------------------------


def run_phase(cfg: RunConfig, args) -> dict:
    seq = cfg.sequence
    upper, lower = propagate_reference(seq, cfg.species, cfg.constants)
    dz, dv = closure_defect(upper, lower)
    b = total_phase_perturbative(seq, cfg.species, cfg.constants)
    result = {"breakdown": _breakdown_json(b), "closure_defect": {"dz": q(dz, "m"), "dv": q(dv, "m/s")}}
    if cfg.parametric is not None:
        g, k, T1, T = cfg.constants.g, cfg.parametric["k"], cfg.parametric["T1"], cfg.parametric["T"]
        c, hbar, m = cfg.constants.c, cfg.constants.hbar, cfg.species.m
        dtau2 = 2.0 * g * hbar * k * T1 * T / (m * c * c)
        result["closed_form"] = {
            "ref_phase": q(-2.0 * k * g * T1 * (T + T1), "rad"),
            "dtau_2": q(dtau2, "s"),
            "Omega_dtau_2": q(cfg.species.Omega * dtau2, "rad"),
        }
    return result


def run_frame_check(cfg: RunConfig, args) -> dict:
    seq, species, constants = cfg.sequence, cfg.species, cfg.constants
    lab = total_phase_perturbative(seq, species, constants)
    falling = total_phase_falling_frame(seq, species, constants)
    trajectories = propagate_reference(seq, species, constants)
    no_doppler = total_phase_falling_frame(
        seq.with_wavenumbers_zeroed(), species, constants, trajectories=trajectories
    )
    result = {
        "lab": _breakdown_json(lab),
        "falling_frame": _breakdown_json(falling),
        "residuals": {
            "ref_phase": q(falling.ref_phase - lab.ref_phase, "rad"),
            "clock_phase": q(falling.clock_phase - lab.clock_phase, "rad"),
            "total_phase": q(falling.total - lab.total, "rad"),
            "clock_phase_no_doppler": q(no_doppler.clock_phase - lab.clock_phase, "rad"),
        },
    }
    if cfg.parametric is not None and len(seq.pulses) > 1:
        T1 = cfg.parametric["T1"]
        result["residual_recoil"] = {
            "computed": q(transformed_recoil(seq, species, constants, 1), "kg m/s"),
            "expected": q(residual_recoil(species, T1, constants), "kg m/s"),
        }
    return result


def run_oracle_check(cfg: RunConfig, args) -> dict:
    if cfg.units_mode != "scaled":
        raise ConfigError(
            "oracle-check needs scaled units; physical rest-mass phases exceed double precision",
            "constants.units",
        )
    m = cfg.species.m
    rows, slope = direct_oracle_scaling(
        cfg.sequence, m, [f * m for f in cfg.dm_fractions], cfg.constants
    )
    no_defect = Species(m=m, Omega=0.0)
    zero = {
        "direct": total_phase_direct(cfg.sequence, no_defect, cfg.constants),
        "ref_phase": total_phase_perturbative(cfg.sequence, no_defect, cfg.constants).ref_phase,
    }
    table = [
        {
            "dm": q(r["dm"], "kg"),
            "dm_over_m": r["dm_over_m"],
            "direct": q(r["direct"], "rad"),
            "ref_phase": q(r["ref_phase"], "rad"),
            "clock_phase": q(r["clock_phase"], "rad"),
            "residual": q(r["residual"], "rad"),
        }
        for r in rows
    ]
    _write_csv(
        args.out_dir,
        "oracle.csv",
        ["dm", "direct", "ref_phase", "clock_phase", "residual"],
        [[r["dm"], r["direct"], r["ref_phase"], r["clock_phase"], r["residual"]] for r in rows],
    )
    return {
        "table": table,
        "slope": slope,
        "zero_defect": {"direct": q(zero["direct"], "rad"), "ref_phase": q(zero["ref_phase"], "rad")},
    }


def run_sensitivity(cfg: RunConfig, args) -> dict:
    plan = cfg.plan("sensitivity")
    rows = []
    for t in cfg.campaign.t_avg_grid:
        sa, sb = sensitivity_budget(cfg.noise, plan, t, cfg.species, cfg.constants)
        rows.append((t, sa, sb))
    _write_csv(args.out_dir, "sensitivity.csv", ["t_avg", "sigma_alpha", "sigma_dbeta"], [list(r) for r in rows])
    return {
        "budget": [
            {"t_avg": q(t, "s"), "sigma_alpha": q(sa, "1"), "sigma_dbeta": q(sb, "1")} for t, sa, sb in rows
        ]
    }


def run_montecarlo(cfg: RunConfig, args) -> dict:
    plan = cfg.plan("montecarlo")
    res = monte_carlo_campaign(
        cfg.noise, plan, cfg.violation, cfg.campaign.t_avg, cfg.campaign.seed, cfg.species, cfg.constants
    )
    records = res.records()
    header = ["cycle", "inverted", "T", "phase", "shot", "vibration"]
    table = [[r.index, int(r.inverted), r.T, r.phase, r.shot, r.vibration] for r in records]
    path = _write_csv(args.out_dir, "records.csv", header, table)
    result = {
        "n_cycles": res.n_cycles,
        "alpha": q(res.alpha, "1"),
        "sigma_alpha": q(res.sigma_alpha, "1"),
        "dbeta": q(res.dbeta, "1"),
        "sigma_dbeta": q(res.sigma_dbeta, "1"),
        "condition_number": res.extraction.condition_number,
        "injected": {
            "alpha": q(cfg.violation.alpha(cfg.species, cfg.constants), "1"),
            "dbeta": q(cfg.violation.dbeta, "1"),
        },
    }
    if path is not None:
        result["records_csv"] = "records.csv"
    if args.records:
        result["records"] = [dict(zip(header, row)) for row in table]
    return result


def run_sweep(cfg: RunConfig, args) -> dict:
    geo = dict(cfg.require_parametric("sweep"))
    name = cfg.sweep.parameter
    rows = []
    for value in cfg.sweep.values:
        geo[name] = value
        normal = violated_phase(
            build_redshift_geometry(geo["T1"], geo["T"], geo["k"], False, z0=geo["z0"], v0=geo["v0"]),
            cfg.species, cfg.constants, cfg.violation,
        )
        inverted = violated_phase(
            build_redshift_geometry(geo["T1"], geo["T"], geo["k"], True, z0=geo["z0"], v0=geo["v0"]),
            cfg.species, cfg.constants, cfg.violation,
        )
        rows.append([value, normal.clock_phase, normal.ref_phase, differential_signal(normal, inverted)])
    unit = {"T": "s", "T1": "s", "k": "1/m"}[name]
    header = [name, "clock_phase", "ref_phase", "differential_signal"]
    _write_csv(args.out_dir, "sweep.csv", header, rows)
    return {
        "parameter": name,
        "rows": [
            {
                name: q(r[0], unit),
                "clock_phase": q(r[1], "rad"),
                "ref_phase": q(r[2], "rad"),
                "differential_signal": q(r[3], "rad"),
            }
            for r in rows
        ],
    }


HANDLERS = {
    "phase": run_phase,
    "frame-check": run_frame_check,
    "oracle-check": run_oracle_check,
    "sensitivity": run_sensitivity,
    "montecarlo": run_montecarlo,
    "sweep": run_sweep,
}


# -- plumbing ------------------------------------------------------------------


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="redshiftai", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", metavar="command", parser_class=_Parser)
    for name in COMMANDS:
        p = sub.add_parser(name, help=HANDLERS[name].__name__.replace("run_", "").replace("_", " "))
        p.add_argument("--config", help="JSON configuration file; '-' reads standard input")
        p.add_argument(
            "--set", dest="overrides", action="append", default=[], metavar="PATH=VALUE",
            help="override one field, e.g. geometry.T=0.6 (repeatable)",
        )
        p.add_argument("--out-dir", help="directory for CSV tables")
        if name == "montecarlo":
            p.add_argument("--records", action="store_true", help="embed cycle records in the JSON report")
    return parser


def _load_document(path: str | None) -> dict:
    if path is None:
        return {}
    text = sys.stdin.read() if path == "-" else Path(path).read_text(encoding="utf-8")
    try:
        doc = json.loads(text) if text.strip() else {}
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON: {exc.msg} at line {exc.lineno}") from None
    if not isinstance(doc, dict):
        raise ConfigError("configuration must be a JSON object")
    return doc


def dumps(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=2, allow_nan=False)


def _error(kind: str, message: str, path: str | None = None) -> dict:
    err = {"type": kind, "message": message}
    if path:
        err["path"] = path
    return {"error": err}


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        if args.command is None:
            raise UsageError(f"a subcommand is required: one of {', '.join(COMMANDS)}")
        doc = _load_document(args.config)
        for assignment in args.overrides:
            doc = apply_override(doc, assignment)
        cfg = from_document(doc)
        result = HANDLERS[args.command](cfg, args)
        report = {
            "command": args.command,
            "config": cfg.to_dict(),
            "result": result,
            "units_mode": cfg.units_mode,
            "version": __version__,
        }
        out = dumps(report)
    except UsageError as exc:
        print(dumps(_error("usage_error", str(exc))))
        return EXIT_USAGE
    except ConfigError as exc:
        print(dumps(_error("config_error", exc.reason, exc.path)))
        return EXIT_USAGE
    except OpenInterferometerError as exc:
        print(dumps(_error("open_interferometer", str(exc))))
        return EXIT_RUNTIME
    except InvalidParameterError as exc:
        print(dumps(_error("range_error", str(exc))))
        return EXIT_USAGE
    except (OSError, ValueError) as exc:
        print(dumps(_error("runtime_error", str(exc))))
        return EXIT_RUNTIME
    print(out)
    return 0


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
