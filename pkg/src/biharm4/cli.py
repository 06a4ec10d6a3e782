"""Command line front end: solve, verify, sweep, and oracle runs.

Every run writes a JSON record that is sufficient to re-run verification
without re-solving: it carries the potential and solver configs, the
solved constants, and a manifest of the emitted files.  Records are
byte-deterministic for a fixed config and seed apart from the timestamp
field.

Exit codes: 0 success, 2 configuration error, 3 infeasibility,
4 non-convergence, 5 verification failure.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field as dc_field
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from .errors import (
    Biharm4Error,
    ConfigError,
    ConvergenceError,
    DependencyError,
    InfeasibilityError,
    NotAnExtremizerError,
    ParameterError,
)
from .inequalities import (
    biharmonic_lsi,
    classical_lsi,
    constant_bound,
    interpolation,
    make_corpus,
    normalize_field,
    reconstruct_groundstate,
)
from .oracle import GaussianProfile, closed_form_report
from .potentials import potential_from_config, validate
from .radial import field_to_json, load_field_csv, save_field_csv
from .solver import SolverConfig, minimize

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_INFEASIBLE = 3
EXIT_NO_CONVERGENCE = 4
EXIT_VERIFY_FAILED = 5

SCHEMA_VERSION = 1
OUTPUT_DIR_ENV = "BIHARM4_OUTPUT_DIR"


@dataclass
class RunConfig:
    """Fully resolved configuration of one CLI run."""

    command: str
    potential: dict
    solver: dict
    output_dir: Path
    formats: tuple = ("json", "csv")
    extra: dict = dc_field(default_factory=dict)

    def semantic_dict(self) -> dict:
        return {
            "command": self.command,
            "potential": self.potential,
            "solver": self.solver,
            "formats": sorted(self.formats),
            "extra": self.extra,
        }

    def hash(self) -> str:
        blob = json.dumps(self.semantic_dict(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


@dataclass
class RunRecord:
    """Persisted summary of one run."""

    command: str
    timestamp: str
    config_hash: str
    tool_version: str
    config: dict
    results: dict
    files: dict
    status: str = "ok"
    schema_version: int = SCHEMA_VERSION

    def to_json(self) -> str:
        payload = {
            "schema_version": self.schema_version,
            "command": self.command,
            "timestamp": self.timestamp,
            "config_hash": self.config_hash,
            "tool_version": self.tool_version,
            "config": self.config,
            "results": self.results,
            "files": self.files,
            "status": self.status,
        }
        return json.dumps(payload, sort_keys=True, indent=2) + "\n"


def _now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


def _load_config_file(path: Path) -> dict:
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    text = path.read_bytes()
    if path.suffix.lower() == ".toml":
        import tomli

        return tomli.loads(text.decode("utf-8"))
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"could not parse {path}: {exc}") from exc


def _resolve_output_dir(args) -> Path:
    if getattr(args, "output_dir", None):
        base = Path(args.output_dir)
    else:
        base = Path(os.environ.get(OUTPUT_DIR_ENV, "biharm4_runs"))
    try:
        base.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise ConfigError(f"output directory {base} is not writable: {exc}") from exc
    return base


def _potential_config(args, file_cfg: dict) -> dict:
    cfg = dict(file_cfg.get("potential", {}))
    if getattr(args, "potential", None):
        cfg["kind"] = args.potential
    if getattr(args, "p", None) is not None:
        cfg["p"] = args.p
    if getattr(args, "m", None) is not None:
        cfg["m"] = args.m
    if "kind" not in cfg:
        raise ConfigError("no potential specified (use --potential or a config file)")
    return cfg


def _solver_config(args, file_cfg: dict) -> dict:
    cfg = dict(file_cfg.get("solver", {}))
    for key, attr in (
        ("n", "n"), ("R_max", "rmax"), ("gauge_l2", "gauge_l2"),
        ("multistart", "multistart"), ("rng_seed", "rng_seed"), ("m", "m"),
    ):
        val = getattr(args, attr, None)
        if val is not None:
            cfg[key] = val
    if getattr(args, "no_polish", False):
        cfg["polish"] = False
    return cfg


def _write_history_csv(path: Path, history) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["iteration", "K", "abs_V", "grad_norm"])
        for row in history:
            writer.writerow([row[0], repr(row[1]), repr(row[2]), repr(row[3])])


def run_solve(config: RunConfig) -> RunRecord:
    """validate -> minimize -> extract multiplier -> rescale -> residuals."""
    potential = potential_from_config(config.potential)
    validate(potential)
    solver_cfg = SolverConfig.from_dict(config.solver)
    outdir = config.output_dir
    outdir.mkdir(parents=True, exist_ok=True)

    status = "ok"
    try:
        result = minimize(potential, solver_cfg)
    except ConvergenceError as exc:
        if exc.best_result is None:
            raise
        result = exc.best_result
        status = "non_convergence"

    files = {}
    if "csv" in config.formats:
        save_field_csv(result.minimizer, outdir / "minimizer.csv")
        save_field_csv(result.groundstate, outdir / "groundstate.csv")
        _write_history_csv(outdir / "history.csv", result.diagnostics["history"])
        files.update(
            minimizer_csv="minimizer.csv",
            groundstate_csv="groundstate.csv",
            history_csv="history.csv",
        )
    if "json" in config.formats:
        (outdir / "groundstate.json").write_text(
            json.dumps(field_to_json(result.groundstate), sort_keys=True) + "\n"
        )
        files["groundstate_json"] = "groundstate.json"

    record = RunRecord(
        command="solve",
        timestamp=_now(),
        config_hash=config.hash(),
        tool_version=__version__,
        config=config.semantic_dict(),
        results=result.to_dict(),
        files=files,
        status=status,
    )
    (outdir / "record.json").write_text(record.to_json())
    if status != "ok":
        raise ConvergenceError("solve did not converge; record written", best_result=result)
    return record


def _verify_reports(groundstate, potential, T, corpus_size, corpus_seed):
    """All inequality evaluations for one profile; returns (reports, notes).

    The fourth-order entropy bound, the constant comparison, and the
    equality-case reconstruction are statements about the logarithmic
    potential's constant T and are only evaluated for that potential.
    """
    reports = []
    notes = {}
    unit = normalize_field(groundstate)
    reports.append(classical_lsi(unit))
    reports.append(interpolation(groundstate))
    if T is not None:
        reports.append(biharmonic_lsi(unit, T))
        reports.append(constant_bound(T))
        try:
            rec = reconstruct_groundstate(unit, potential, T)
            notes["reconstruction"] = rec.to_dict()
        except NotAnExtremizerError as exc:
            notes["reconstruction"] = {"status": "not_an_extremizer", "detail": str(exc)}
    corpus_fields = None
    if corpus_size:
        grid = groundstate.grid
        corpus_fields = make_corpus(grid, corpus_size, seed=corpus_seed)
        violations = 0
        worst_classical = np.inf
        worst_interp = np.inf
        worst_bih = np.inf
        for f in corpus_fields:
            c = classical_lsi(f)
            i = interpolation(f)
            worst_classical = min(worst_classical, c.gap)
            worst_interp = min(worst_interp, i.rhs - i.lhs)
            if not (c.satisfied and i.satisfied):
                violations += 1
            if T is not None:
                b = biharmonic_lsi(f, T)
                worst_bih = min(worst_bih, b.gap)
                if not b.satisfied:
                    violations += 1
        notes["corpus"] = {
            "size": corpus_size,
            "seed": corpus_seed,
            "violations": violations,
            "min_classical_gap": worst_classical,
            "min_interpolation_margin": worst_interp,
            "min_biharmonic_gap": None if T is None else worst_bih,
        }
    return reports, notes, corpus_fields


def run_verify(config: RunConfig) -> RunRecord:
    """Evaluate the inequality chain against a solved or supplied profile."""
    outdir = config.output_dir
    outdir.mkdir(parents=True, exist_ok=True)
    extra = config.extra

    if extra.get("record"):
        rec_path = Path(extra["record"])
        prior = json.loads(rec_path.read_text())
        potential = potential_from_config(prior["config"]["potential"])
        gs_rel = prior["files"].get("groundstate_csv")
        if gs_rel is None:
            raise DependencyError("solve record carries no ground-state profile")
        groundstate = load_field_csv(rec_path.parent / gs_rel)
        T = prior["results"].get("T_estimate")
    else:
        profile = Path(extra["profile"])
        groundstate = load_field_csv(profile)
        potential = potential_from_config(config.potential)
        T = extra.get("T")
    if T is None and extra.get("T") is not None:
        T = extra["T"]
    if potential.kind == "logarithmic":
        if T is None:
            raise DependencyError(
                "the fourth-order entropy bound needs the solved constant T; "
                "pass --T or point at a solve record"
            )
    else:
        T = None  # the T-dependent bounds belong to the logarithmic potential

    reports, notes, corpus_fields = _verify_reports(
        groundstate, potential, T,
        extra.get("corpus", 0), extra.get("corpus_seed", 20240817),
    )
    lines = [json.dumps(r.to_dict(), sort_keys=True) for r in reports]
    (outdir / "inequalities.jsonl").write_text("\n".join(lines) + "\n")
    files = {"inequalities_jsonl": "inequalities.jsonl"}
    if corpus_fields:
        # one column per corpus member so the exact fuzz set can be re-run
        data = np.column_stack(
            [groundstate.grid.nodes] + [f.values[:, 0] for f in corpus_fields]
        )
        header = "r," + ",".join(f"u_{k}" for k in range(len(corpus_fields)))
        np.savetxt(outdir / "corpus.csv", data, delimiter=",",
                   header=header, comments="", fmt="%.17g")
        files["corpus_csv"] = "corpus.csv"

    all_ok = all(r.satisfied for r in reports)
    corpus_ok = notes.get("corpus", {}).get("violations", 0) == 0
    status = "ok" if (all_ok and corpus_ok) else "verification_failed"
    record = RunRecord(
        command="verify",
        timestamp=_now(),
        config_hash=config.hash(),
        tool_version=__version__,
        config=config.semantic_dict(),
        results={
            "reports": [r.to_dict() for r in reports],
            "notes": notes,
            "T": T,
        },
        files=files,
        status=status,
    )
    (outdir / "verify_record.json").write_text(record.to_json())
    return record


def _sweep_worker(payload: dict) -> dict:
    """One sweep cell, run in a worker process."""
    cell = payload["cell"]
    t0 = time.perf_counter()
    out = {"cell": cell, "status": "ok"}
    try:
        cfg = RunConfig(
            command="solve",
            potential=payload["potential"],
            solver=payload["solver"],
            output_dir=Path(payload["outdir"]),
            formats=tuple(payload["formats"]),
        )
        record = run_solve(cfg)
        out["T_estimate"] = record.results["T_estimate"]
        out["lambda"] = record.results["lambda"]
        out["pohozaev_residual"] = record.results["pohozaev_residual"]
        out["pde_residual"] = record.results["pde_residual"]
    except InfeasibilityError as exc:
        out["status"] = "infeasible"
        out["error"] = str(exc)
    except ConvergenceError as exc:
        out["status"] = "non_convergence"
        out["error"] = str(exc)
    except Biharm4Error as exc:
        out["status"] = "error"
        out["error"] = str(exc)
    out["time_s"] = time.perf_counter() - t0
    return out


def run_sweep(config: RunConfig) -> RunRecord:
    """Cartesian sweep of solver parameters with a bounded worker pool."""
    outdir = config.output_dir
    outdir.mkdir(parents=True, exist_ok=True)
    grids = config.extra["grid"]
    keys = sorted(grids)
    cells = [{}]
    for key in keys:
        cells = [dict(c, **{key: v}) for c in cells for v in grids[key]]
    if not cells or not keys:
        raise ConfigError("sweep grid is empty")

    payloads = []
    for idx, cell in enumerate(cells):
        solver = dict(config.solver)
        potential = dict(config.potential)
        for key, val in cell.items():
            if key == "p":
                potential["p"] = val
            else:
                solver[key] = val
        payloads.append({
            "cell": dict(cell, index=idx),
            "potential": potential,
            "solver": solver,
            "outdir": str(outdir / f"cell_{idx:03d}"),
            "formats": list(config.formats),
        })

    workers = min(len(payloads), config.extra.get("workers", 2))
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            outcomes = list(pool.map(_sweep_worker, payloads))
    else:
        outcomes = [_sweep_worker(p) for p in payloads]

    summary_path = outdir / "sweep_summary.csv"
    columns = ["index"] + keys + ["status", "T_estimate", "lambda",
                                  "pohozaev_residual", "pde_residual", "time_s"]
    with open(summary_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(columns)
        for out in outcomes:
            cell = out["cell"]
            writer.writerow(
                [cell["index"]] + [cell.get(k) for k in keys]
                + [out["status"], out.get("T_estimate"), out.get("lambda"),
                   out.get("pohozaev_residual"), out.get("pde_residual"),
                   round(out["time_s"], 3)]
            )

    n_failed = sum(1 for out in outcomes if out["status"] != "ok")
    record = RunRecord(
        command="sweep",
        timestamp=_now(),
        config_hash=config.hash(),
        tool_version=__version__,
        config=config.semantic_dict(),
        results={"cells": outcomes, "n_cells": len(outcomes), "n_failed": n_failed},
        files={"summary_csv": "sweep_summary.csv"},
        status="ok" if n_failed == 0 else "partial_failure",
    )
    (outdir / "sweep_record.json").write_text(record.to_json())
    return record


def run_oracle(config: RunConfig) -> RunRecord:
    """Dump the closed-form Gaussian energy table."""
    outdir = config.output_dir
    outdir.mkdir(parents=True, exist_ok=True)
    amps = config.extra.get("amplitudes", [0.5, 1.0, 2.0])
    sigmas = config.extra.get("sigmas", [0.5, 1.0, 2.0])
    rows = []
    for a in amps:
        for s in sigmas:
            rep = closed_form_report(GaussianProfile(a, s))
            rows.append({"a": a, "sigma": s, **rep.to_dict()})
    path = outdir / "oracle_table.csv"
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=list(rows[0]))
        writer.writeheader()
        writer.writerows(rows)
    record = RunRecord(
        command="oracle",
        timestamp=_now(),
        config_hash=config.hash(),
        tool_version=__version__,
        config=config.semantic_dict(),
        results={"rows": rows},
        files={"table_csv": "oracle_table.csv"},
    )
    (outdir / "oracle_record.json").write_text(record.to_json())
    return record


def _csv_list(text, cast):
    return [cast(tok) for tok in text.split(",") if tok]


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="biharm4",
        description="Ground states of the fourth-order radial field equation "
                    "on R^4 and the associated entropy inequalities.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", type=Path, help="TOML or JSON config file")
        p.add_argument("--output-dir", help=f"output directory (default ${OUTPUT_DIR_ENV} or ./biharm4_runs)")
        p.add_argument("--formats", default="json,csv", help="comma list from {json,csv}")

    ps = sub.add_parser("solve", help="compute a ground state")
    common(ps)
    ps.add_argument("--potential", choices=["logarithmic", "defocusing_well"])
    ps.add_argument("--p", type=float, help="well exponent (> 2)")
    ps.add_argument("--m", type=int, help="component count")
    ps.add_argument("--n", type=int, help="collocation nodes")
    ps.add_argument("--rmax", type=float, help="truncation radius")
    ps.add_argument("--gauge-l2", dest="gauge_l2", type=float)
    ps.add_argument("--multistart", type=int)
    ps.add_argument("--rng-seed", dest="rng_seed", type=int)
    ps.add_argument("--no-polish", action="store_true")

    pv = sub.add_parser("verify", help="evaluate the inequality chain")
    common(pv)
    pv.add_argument("--record", type=Path, help="record.json from a prior solve")
    pv.add_argument("--profile", type=Path, help="field CSV to verify")
    pv.add_argument("--potential", choices=["logarithmic", "defocusing_well"])
    pv.add_argument("--p", type=float)
    pv.add_argument("--m", type=int)
    pv.add_argument("--T", type=float, help="solved constant (needed with --profile)")
    pv.add_argument("--corpus", type=int, default=0, help="fuzz-corpus size")
    pv.add_argument("--corpus-seed", type=int, default=20240817)

    pw = sub.add_parser("sweep", help="grid sweep of solver parameters")
    common(pw)
    pw.add_argument("--potential", choices=["logarithmic", "defocusing_well"])
    pw.add_argument("--m", type=int)
    pw.add_argument("--n", help="comma list of node counts")
    pw.add_argument("--rmax", help="comma list of radii")
    pw.add_argument("--p", help="comma list of well exponents")
    pw.add_argument("--multistart", help="comma list")
    pw.add_argument("--rng-seed", dest="rng_seed", help="comma list")
    pw.add_argument("--workers", type=int, default=2)

    po = sub.add_parser("oracle", help="closed-form Gaussian energy table")
    common(po)
    po.add_argument("--amplitudes", default="0.5,1,2")
    po.add_argument("--sigmas", default="0.5,1,2")
    return parser


def _dispatch(args) -> RunRecord:
    file_cfg = _load_config_file(args.config) if args.config else {}
    formats = tuple(tok for tok in args.formats.split(",") if tok)
    for fmt in formats:
        if fmt not in ("json", "csv"):
            raise ConfigError(f"unknown output format {fmt!r}")
    outdir = _resolve_output_dir(args)
    if "output_dir" in file_cfg and not args.output_dir:
        outdir = Path(file_cfg["output_dir"])
        outdir.mkdir(parents=True, exist_ok=True)

    if args.command == "solve":
        cfg = RunConfig(
            command="solve",
            potential=_potential_config(args, file_cfg),
            solver=_solver_config(args, file_cfg),
            output_dir=outdir,
            formats=formats,
        )
        return run_solve(cfg)

    if args.command == "verify":
        extra = {
            "corpus": args.corpus,
            "corpus_seed": args.corpus_seed,
        }
        potential_cfg = {}
        if args.record:
            extra["record"] = str(args.record)
        elif args.profile:
            extra["profile"] = str(args.profile)
            potential_cfg = _potential_config(args, file_cfg)
            if args.T is not None:
                extra["T"] = args.T
        else:
            raise ConfigError("verify needs --record or --profile")
        cfg = RunConfig(
            command="verify",
            potential=potential_cfg,
            solver={},
            output_dir=outdir,
            formats=formats,
            extra=extra,
        )
        record = run_verify(cfg)
        if record.status != "ok":
            raise _VerificationFailed(record)
        return record

    if args.command == "sweep":
        grid = {}
        if args.n:
            grid["n"] = _csv_list(args.n, int)
        if args.rmax:
            grid["R_max"] = _csv_list(args.rmax, float)
        if args.p:
            grid["p"] = _csv_list(args.p, float)
        if args.multistart:
            grid["multistart"] = _csv_list(args.multistart, int)
        if args.rng_seed:
            grid["rng_seed"] = _csv_list(args.rng_seed, int)
        grid.update({k: v for k, v in file_cfg.get("grid", {}).items()})
        cfg = RunConfig(
            command="sweep",
            potential=_potential_config(args, file_cfg),
            solver=dict(file_cfg.get("solver", {})),
            output_dir=outdir,
            formats=formats,
            extra={"grid": grid, "workers": args.workers},
        )
        if args.m is not None:
            cfg.potential["m"] = args.m
        record = run_sweep(cfg)
        if record.status != "ok":
            statuses = {c["status"] for c in record.results["cells"]}
            if "infeasible" in statuses:
                raise InfeasibilityError("one or more sweep cells were infeasible")
            raise ConvergenceError("one or more sweep cells failed")
        return record

    if args.command == "oracle":
        cfg = RunConfig(
            command="oracle",
            potential={},
            solver={},
            output_dir=outdir,
            formats=formats,
            extra={
                "amplitudes": _csv_list(args.amplitudes, float),
                "sigmas": _csv_list(args.sigmas, float),
            },
        )
        return run_oracle(cfg)

    raise ConfigError(f"unknown command {args.command!r}")


class _VerificationFailed(Exception):
    def __init__(self, record):
        super().__init__(record.status)
        self.record = record


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        record = _dispatch(args)
    except (ConfigError, ParameterError, DependencyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except InfeasibilityError as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except ConvergenceError as exc:
        print(f"non-convergence: {exc}", file=sys.stderr)
        return EXIT_NO_CONVERGENCE
    except _VerificationFailed as exc:
        print(f"verification failed: {exc.record.status}", file=sys.stderr)
        return EXIT_VERIFY_FAILED
    except Biharm4Error as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    summary = {k: record.results.get(k) for k in ("T_estimate", "lambda")
               if k in record.results}
    print(json.dumps({"status": record.status, "command": record.command, **summary}))
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
