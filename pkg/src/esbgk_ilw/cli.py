"""Command line entry point: ``esbgk-ilw run | converge | scenarios``."""

from __future__ import annotations

import argparse
import logging
import os
import sys

from .config import RunConfig, dump_config, load_config
from .errors import ConfigError, IoError, NonNestedLadder, NotSteady, SolverError, UnknownScenario
from .io import write_field_vtk, write_moments_csv
from .scenarios import DESCRIPTIONS, build_scenario, convergence_study, knudsen_layer_diagnostics

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL = 0, 2, 3

log = logging.getLogger("esbgk_ilw")


def _prepare_output(cfg: RunConfig) -> str:
    try:
        os.makedirs(cfg.output_dir, exist_ok=True)
    except OSError as exc:
        raise ConfigError(f"output_dir {cfg.output_dir!r} is not writable: {exc}") from exc
    if not os.access(cfg.output_dir, os.W_OK):
        raise ConfigError(f"output_dir {cfg.output_dir!r} is not writable")
    return cfg.output_dir


def _write_outputs(cfg: RunConfig, f, mesh, tag: str) -> None:
    if "moments-csv" in cfg.outputs:
        write_moments_csv(f, mesh, os.path.join(cfg.output_dir, f"moments_{tag}.csv"))
    if "field-vtk" in cfg.outputs:
        write_field_vtk(f, mesh, os.path.join(cfg.output_dir, f"field_{tag}.vtk"))


def _build(cfg: RunConfig):
    try:
        return build_scenario(cfg.scenario, cfg.overrides())
    except (UnknownScenario, ValueError) as exc:
        raise ConfigError(str(exc)) from exc


def cmd_run(cfg: RunConfig) -> int:
    sc = _build(cfg)
    out = _prepare_output(cfg)
    with open(os.path.join(out, "config.toml"), "w", encoding="utf-8") as fh:
        fh.write(dump_config(cfg))
    log.info("%s: %d active nodes, %d velocities, dt=%.6g, t_end=%g",
             sc.name, sc.mesh.n_active, sc.mesh.vgrid.size, sc.cfg.timestep(sc.mesh), sc.cfg.t_end)

    def every(rec, f):
        if cfg.cadence and rec.step % cfg.cadence == 0:
            _write_outputs(cfg, f, sc.mesh, f"{rec.step:06d}")
            log.info("step %d t=%.6g mass=%.12g change=%.3e", rec.step, rec.t, rec.mass, rec.change)

    result = sc.solve(keep_records=False, state_observers=(every,))
    _write_outputs(cfg, result.f, sc.mesh, "final")
    log.info("done: %d steps, t=%.6g, steady=%s", result.steps, result.t, result.steady)
    if "knudsen_layer" in sc.diagnostics:
        try:
            for label, d in knudsen_layer_diagnostics(result, sc.mesh).items():
                log.info("%s wall: bulk p=%.8g magnitude=%.4e width=%.4e",
                         label, d["bulk_pressure"], d["magnitude"], d["width"])
        except NotSteady:
            log.warning("steady state not reached by t_end; Knudsen-layer diagnostics skipped")
    return EXIT_OK


def cmd_converge(cfg: RunConfig, ladder: list[int]) -> int:
    try:
        rep = convergence_study(cfg.scenario, ladder, cfg.overrides())
    except (ValueError, NonNestedLadder) as exc:
        raise ConfigError(str(exc)) from exc
    print(f"dt = {rep.dt:.6g}")
    print(f"{'levels':>12} {'e_2h':>12} {'order':>7} {'e_2h bnd':>12} {'order':>7}")
    for i, (e, b) in enumerate(zip(rep.errors, rep.boundary_errors)):
        lv = f"{rep.ladder[i]}/{rep.ladder[i + 1]}"
        o = f"{rep.orders[i - 1]:7.3f}" if i else " " * 7
        ob = f"{rep.boundary_orders[i - 1]:7.3f}" if i else " " * 7
        print(f"{lv:>12} {e:12.4e} {o} {b:12.4e} {ob}")
    return EXIT_OK


def cmd_scenarios() -> int:
    for name, text in DESCRIPTIONS.items():
        print(f"{name:18} {text}")
    return EXIT_OK


def _ladder(text: str) -> list[int]:
    try:
        return [int(s) for s in text.split(",") if s.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid ladder {text!r}; expected e.g. 32,64,128") from None


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="esbgk-ilw", description=__doc__)
    ap.add_argument("-q", "--quiet", action="store_true", help="only report warnings and errors")
    sub = ap.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="run a configured scenario")
    run.add_argument("config")
    run.add_argument("--output-dir", help="overrides output_dir from the config")
    run.add_argument("--cadence", type=int, help="write outputs every K steps")
    conv = sub.add_parser("converge", help="spatial convergence study on a nested ladder")
    conv.add_argument("config")
    conv.add_argument("--ladder", type=_ladder, default=[32, 64, 128])
    sub.add_parser("scenarios", help="list the built-in scenarios")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING if args.quiet else logging.INFO, format="%(message)s")
    if args.command == "scenarios":
        return cmd_scenarios()
    try:
        cfg = load_config(args.config)
        if args.command == "run":
            if args.output_dir:
                cfg.output_dir = args.output_dir
            if args.cadence is not None:
                if args.cadence < 1:
                    raise ConfigError("cadence must be >= 1")
                cfg.cadence = args.cadence
            return cmd_run(cfg)
        return cmd_converge(cfg, args.ladder)
    except OSError as exc:
        log.error("error: %s", exc)
        return EXIT_CONFIG
    except ConfigError as exc:
        log.error("config error: %s", exc)
        return EXIT_CONFIG
    except IoError as exc:
        log.error("output error: %s", exc)
        return EXIT_CONFIG
    except SolverError as exc:
        log.error("numerical abort: %s", exc)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
