"""Command-line front end: ``fkmat <command> CONFIG [overrides]``.

Exit codes: 0 success, 2 configuration error, 3 numerical error,
4 validation failure.  Result files contain no timing information, so a
repeated run reproduces them byte for byte; timings go to the log on stderr.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import time

import numpy as np

from . import config as cfgmod
from . import reference, selftest, validation
from .errors import (
    ConfigError,
    DiagnosticError,
    DomainError,
    FieldError,
    NumericError,
    SizeError,
    ValidationError,
)
from .fields import kato_diagnostic
from .semigroup import apply_semigroup, box_quadrature, kernel, trace_estimate

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_VALIDATION = 0, 2, 3, 4

log = logging.getLogger("fkmat")


def _pairs(a):
    """Complex array as nested [re, im] pairs."""
    a = np.asarray(a, dtype=complex)
    return np.stack([a.real, a.imag], axis=-1).tolist()


def _record(command, cfg, result):
    return {
        "schema_version": cfgmod.SCHEMA_VERSION,
        "command": command,
        "config": None if cfg is None else cfgmod.canonical(cfg),
        "result": result,
    }


def write_json(path, record):
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, "w") as fh:
        fh.write(json.dumps(record, sort_keys=True, indent=2, allow_nan=True) + "\n")


def _mc(cfg, workers):
    return dict(scheme=cfg.scheme, n_paths=cfg.n_paths, steps=cfg.steps, seed=cfg.seed,
                workers=workers)


# --------------------------------------------------------------------------
# commands


def cmd_semigroup(cfg, workers, out):
    block = cfgmod.require_block(cfg, "semigroup")
    gauge, pot = cfgmod.build_fields(cfg)
    f = cfgmod.build_vector_field(cfg, block.f, "semigroup.f")
    est = apply_semigroup(f, block.x, cfg.t, gauge, pot, **_mc(cfg, workers))
    result = {"x": block.x, "value": _pairs(est.value), "std_error": _pairs(est.std_error),
              "n_paths": est.n_paths, "seed": est.seed, "scheme": est.scheme}
    write_json(out, _record("semigroup", cfg, result))
    return EXIT_OK


def cmd_kernel(cfg, workers, out):
    block = cfgmod.require_block(cfg, "kernel")
    gauge, pot = cfgmod.build_fields(cfg)
    est = kernel(block.x, block.y, cfg.t, gauge, pot, pairing=block.pairing, **_mc(cfg, workers))
    result = {"x": block.x, "y": block.y, "matrix": _pairs(est.matrix),
              "prefactor": est.prefactor, "bridge_mean": _pairs(est.bridge_mean),
              "std_error": _pairs(est.std_error), "n_paths": est.n_paths, "seed": est.seed,
              "scheme": est.scheme}
    write_json(out, _record("kernel", cfg, result))
    return EXIT_OK


def cmd_heatmap(cfg, workers, out):
    block = cfgmod.require_block(cfg, "heatmap")
    gauge, pot = cfgmod.build_fields(cfg)
    xs = block.x_points if block.x_points is not None else [[v] for v in block.x_range.points()]
    ys = block.y_points if block.y_points is not None else [[v] for v in block.y_range.points()]
    n, d = cfg.space_dim, cfg.fiber_dim
    header = ([f"x{j}" for j in range(n)] + [f"y{j}" for j in range(n)]
              + [f"K{a}{b}_{part}" for a in range(d) for b in range(d) for part in ("re", "im")]
              + [f"se{a}{b}_{part}" for a in range(d) for b in range(d) for part in ("re", "im")])
    lines = [",".join(header)]
    for x in xs:
        for y in ys:
            est = kernel(x, y, cfg.t, gauge, pot, **_mc(cfg, workers))
            cols = list(map(float, x)) + list(map(float, y))
            cols += np.ravel(_pairs(est.matrix)).tolist() + np.ravel(_pairs(est.std_error)).tolist()
            lines.append(",".join(repr(float(c)) for c in cols))
    os.makedirs(os.path.dirname(os.path.abspath(out)), exist_ok=True)
    with open(out, "w") as fh:
        fh.write("\n".join(lines) + "\n")
    return EXIT_OK


def cmd_trace(cfg, workers, out):
    block = cfgmod.require_block(cfg, "trace")
    gauge, pot = cfgmod.build_fields(cfg)
    est = trace_estimate(cfg.t, block.box, block.spacing, gauge, pot, **_mc(cfg, workers))
    result = {"value": est.value, "std_error": est.std_error, "box": [list(b) for b in est.box],
              "nodes": est.nodes, "n_paths_per_node": est.n_paths, "seed": est.seed,
              "scheme": est.scheme, "note": est.note}
    write_json(out, _record("trace", cfg, result))
    return EXIT_OK


def cmd_kato(cfg, workers, out):
    block = cfgmod.require_block(cfg, "kato")
    _, pot = cfgmod.build_fields(cfg)
    if block.probes:
        probes = np.asarray(block.probes, dtype=float)
    else:
        box = block.box or [(-1.0, 1.0)] * cfg.space_dim
        spacing = min((hi - lo) for lo, hi in box) / max(block.count - 1, 1)
        probes, _ = box_quadrature(box, spacing)
    res = kato_diagnostic(pot, probes, cfg.t, cfg.n_paths, cfg.steps, cfg.seed, workers=workers)
    result = {"sup_estimate": res.sup_estimate, "probes": probes.tolist(),
              "per_probe": [list(p) for p in res.per_probe], "rejected": res.rejected,
              "t": res.t, "n_paths": res.n_paths, "steps": res.steps, "seed": res.seed}
    write_json(out, _record("kato", cfg, result))
    return EXIT_OK


def cmd_validate(cfg, workers, out):
    block = cfgmod.require_block(cfg, "validate")
    gauge, pot = cfgmod.build_fields(cfg)
    f = cfgmod.build_vector_field(cfg, block.f, "validate.f")
    try:
        op = validation.reference_operator(block.box, block.spacing, gauge, pot)
        for x in block.probes + [p for pair in block.kernel_pairs for p in pair]:
            op.node_index(x)
    except (ValidationError, SizeError) as exc:
        raise ConfigError(f"validate: {exc}") from None
    mass = max(reference.boundary_mass(op, x, cfg.t) for x in block.probes)
    log.info("reference mesh %s, spacing %s, boundary mass bound %.3g", op.mesh, op.h, mass)
    mc = _mc(cfg, workers)
    rows = validation.semigroup_rows(op, f, block.probes, cfg.t, gauge, pot,
                                     block.semigroup_tolerance, **mc)
    rows += validation.kernel_rows(op, block.kernel_pairs, cfg.t, gauge, pot,
                                   block.kernel_tolerance, **mc)
    print(validation.format_table(rows))
    result = {"boundary_mass_bound": mass, "smallest_eigenvalue": op.smallest_eigenvalue,
              "rows": [r.__dict__ | {"probe": list(r.probe)} for r in rows],
              "passed": all(r.passed for r in rows)}
    write_json(out, _record("validate", cfg, result))
    return EXIT_OK if result["passed"] else EXIT_VALIDATION


def cmd_selftest(cfg, workers, out):
    rows = selftest.run()
    for name, ok, detail in rows:
        print(f"{'PASS' if ok else 'FAIL'}  {name}: {detail}")
    result = {"checks": [{"name": n, "passed": bool(ok), "detail": det} for n, ok, det in rows]}
    write_json(out, _record("selftest", cfg, result))
    return EXIT_OK if all(ok for _, ok, _ in rows) else EXIT_VALIDATION


COMMANDS = {
    "semigroup": cmd_semigroup,
    "kernel": cmd_kernel,
    "heatmap": cmd_heatmap,
    "trace": cmd_trace,
    "kato": cmd_kato,
    "validate": cmd_validate,
    "selftest": cmd_selftest,
}


def build_parser():
    parser = argparse.ArgumentParser(prog="fkmat", description=__doc__.splitlines()[0])
    parser.add_argument("command", choices=list(COMMANDS))
    parser.add_argument("config", nargs="?", help="YAML run configuration (optional for selftest)")
    parser.add_argument("--seed", type=int)
    parser.add_argument("--n-paths", type=int, dest="n_paths")
    parser.add_argument("--output", help="result file; relative paths honour FKMAT_OUTPUT_DIR")
    parser.add_argument("--workers", type=int, help="worker processes (default: config, else all cores)")
    parser.add_argument("--log-level", default="INFO")
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=args.log_level.upper(), stream=sys.stderr,
                        format="%(asctime)s %(name)s %(levelname)s %(message)s")
    started = time.perf_counter()
    try:
        cfg = None
        if args.config is not None:
            cfg = cfgmod.load_config(args.config, {"seed": args.seed, "n_paths": args.n_paths})
        elif args.command != "selftest":
            raise ConfigError(f"<args>: the {args.command} command needs a config file")
        workers = args.workers or (cfg.workers if cfg else None) or os.cpu_count() or 1
        if workers < 1:
            raise ConfigError("<args>: --workers must be positive")
        suffix = ".csv" if args.command == "heatmap" else ".json"
        explicit = args.output
        if explicit is None and args.command == "heatmap" and cfg.heatmap and cfg.heatmap.output:
            explicit = cfg.heatmap.output
        out = cfgmod.output_path(cfg, args.command, suffix, explicit)
        log.info("%s: workers=%d output=%s", args.command, workers, out)
        code = COMMANDS[args.command](cfg, workers, out)
    except ConfigError as exc:
        log.error("configuration error: %s", exc)
        return EXIT_CONFIG
    except (ValidationError, DomainError, SizeError) as exc:
        log.error("configuration error: %s", exc)
        return EXIT_CONFIG
    except NumericError as exc:
        log.error("numerical error at step %s, path %s: %s", exc.step, exc.path, exc)
        return EXIT_NUMERIC
    except (FieldError, DiagnosticError) as exc:
        log.error("numerical error: %s", exc)
        return EXIT_NUMERIC
    log.info("%s finished in %.2f s with exit code %d", args.command,
             time.perf_counter() - started, code)
    return code


if __name__ == "__main__":
    sys.exit(main())
