"""``tentflow`` command line: norm, verify, solve, sweep.

Exit codes: 0 success, 1 validation error, 2 DIVERGED / UNSTABLE / FAIL.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path
from typing import Sequence

import numpy as np
from pydantic import ValidationError

from . import harness
from .config import CAMPAIGN_IDS, RunConfig
from .ensembles import Ensemble, preset_density, preset_scalar, preset_velocity, PRESETS
from .grid import ScalarField, VectorField
from .harness import InequalityReport, Verdict
from .io import read_field, write_diagnostics_csv, write_field, write_series_csv, write_trajectory
from .norms import (
    BallFamily,
    besov_heatflow_norm,
    bmo_minus1_norm,
    sobolev_norm,
    u_alpha_norm,
    v_alpha_norm,
)
from .solver import SolverConfig, SolverStatus, solve

__all__ = ["main", "build_config", "emit_plot_data", "run_verify", "run_solve"]

EXIT_OK, EXIT_INVALID, EXIT_FAILED = 0, 1, 2


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="tentflow", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)
    for name, text in (
        ("norm", "compute a norm of a field file or preset"),
        ("verify", "run an inequality campaign (or all of them)"),
        ("solve", "run the Picard solver from a preset or field files"),
        ("sweep", "grid of solver runs over (alpha, eps0, N)"),
    ):
        s = sub.add_parser(name, help=text)
        s.add_argument("--config", help="JSON RunConfig file")
        s.add_argument("--id", help="inequality id for verify ('all' or one of the campaigns)")
        s.add_argument("--preset", help=f"named test field ({', '.join(PRESETS)})")
        s.add_argument("--n", type=int, help="grid points per axis")
        s.add_argument("--alpha", type=float, help="regularity index alpha")
        s.add_argument("--seed", type=int, help="ensemble seed")
        s.add_argument("--out", help="output directory")
        s.add_argument("--field", action="append", help="input field checkpoint (repeatable)")
        s.add_argument("--norm", dest="norm_family", help="norm family for the norm command")
        s.add_argument("--rho-deviation", type=float, help="||rho0 - 1||_inf for preset densities")
    return p


def build_config(args: argparse.Namespace) -> RunConfig:
    """Merge a config file with command-line overrides, validating the result."""
    data: dict = {}
    if args.config:
        data = json.loads(Path(args.config).read_text())
    data["command"] = args.command

    def put(path: str, value):
        node = data
        keys = path.split(".")
        for k in keys[:-1]:
            node = node.setdefault(k, {})
        node[keys[-1]] = value

    if args.n is not None:
        put("grid.N", args.n)
        put("solver.N", args.n)
        put("verify.ns", [max(4, args.n // 2), args.n])
    if args.alpha is not None:
        put("solver.alpha", args.alpha)
        put("verify.alpha", args.alpha)
        put("norm.param", args.alpha)
    if args.seed is not None:
        put("ensemble.seed", args.seed)
    if args.id is not None:
        put("verify.id", args.id)
    if args.preset is not None:
        put("preset", args.preset)
    if args.out is not None:
        put("output_dir", args.out)
    if args.field:
        put("inputs", list(args.field))
    if args.norm_family is not None:
        put("norm.family", args.norm_family)
    if args.rho_deviation is not None:
        put("rho_deviation", args.rho_deviation)
    return RunConfig.model_validate(data)


def _format_validation(err: ValidationError, source: str) -> str:
    lines = [f"invalid configuration ({source}):"]
    for e in err.errors():
        loc = ".".join(str(x) for x in e["loc"]) or "<root>"
        lines.append(f"  {loc}: {e['msg']}")
    return "\n".join(lines)


# -- plot data ---------------------------------------------------------------


def emit_plot_data(report, out_dir, stem: str) -> list[Path]:
    """Two-column CSV series for a completed report."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = []
    if isinstance(report, InequalityReport):
        paths.append(write_series_csv(out / f"{stem}_cemp_vs_n.csv", ("grid_n", "C_emp"),
                                      report.refinement.items()))
    elif isinstance(report, dict) and "diagnostics" in report:
        diags = report["diagnostics"]
        paths.append(write_series_csv(out / f"{stem}_ealpha_vs_iter.csv", ("iter", "E_alpha_total"),
                                      [(d["iter"], d["E_alpha_total"]) for d in diags]))
        last = diags[-1] if diags else None
        rows = list(zip(last["t"], last["rho_dev"])) if last else []
        paths.append(write_series_csv(out / f"{stem}_rho_dev_vs_t.csv", ("t", "rho_dev"), rows))
    elif isinstance(report, dict) and "series" in report:
        x, y = report["series_header"]
        paths.append(write_series_csv(out / f"{stem}.csv", (x, y), report["series"]))
    else:
        paths.append(write_series_csv(out / f"{stem}.csv", ("x", "y"), []))
    return paths


# -- verify ------------------------------------------------------------------


def _ensembles(cfg: RunConfig) -> dict[str, Ensemble]:
    seed, size, dim = cfg.ensemble.seed, cfg.ensemble.size, cfg.grid.dim
    return {
        kind: Ensemble(seed, kind, size, dim)
        for kind in ("localized_bumps", "band_limited_random", "plane_wave_mix", "slobodeckij_rough")
    }


def _campaign_reports(cid: str, cfg: RunConfig) -> list[tuple[str, object]]:
    v = cfg.verify
    ens = _ensembles(cfg)
    bumps, band = ens["localized_bumps"], ens["band_limited_random"]
    mix, rough = ens["plane_wave_mix"], ens["slobodeckij_rough"]
    ns = tuple(v.ns)
    if cid == "timederiv":
        return [("timederiv", harness.check_lemma_timederiv(bumps, v.alpha, ns))]
    if cid == "maxreg":
        return [(f"maxreg_beta{b:g}", harness.check_maxreg_bound(bumps, b, ns)) for b in v.maxreg_betas]
    if cid == "leray":
        return [(f"leray_beta{b:g}", harness.check_leray_tent(bumps, b, ns)) for b in v.leray_betas]
    if cid == "gradient_product":
        g, p = harness.check_gradient_and_product(bumps, v.alpha, ns)
        return [("gradient", g), ("product", p)]
    if cid == "key":
        return [(r.inequality_id, r) for r in harness.check_key_inequalities(bumps, v.alpha, ns)]
    if cid == "bilinear":
        return [("bilinear", harness.check_bilinear(mix, ns))]
    if cid == "embeddings":
        a, b = harness.check_embeddings(rough, band, v.alpha, ns)
        return [("embedding_V", a), ("embedding_B", b)]
    if cid == "mollification":
        return [("mollification", harness.check_mollification(rough, v.alpha, v.mollify_k_max, ns))]
    if cid == "e_alpha_linear":
        return [("e_alpha_linear", harness.check_e_alpha_linear(band, v.alpha, ns))]
    if cid == "scaling":
        grid = cfg.grid.model_copy(update={"N": ns[-1]}).build()
        return [("scaling", harness.check_scaling(preset_scalar("bump", grid), v.alpha))]
    if cid == "offdiagonal":
        return [("offdiagonal", harness.offdiagonal_campaign(n=v.offdiag_n))]
    raise ValueError(f"unknown campaign {cid!r}")


def _verdict_of(rep) -> str:
    if isinstance(rep, InequalityReport):
        return rep.verdict
    return rep["verdict"]


def run_verify(cfg: RunConfig) -> tuple[int, dict]:
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    ids = CAMPAIGN_IDS if cfg.verify.id == "all" else (cfg.verify.id,)
    summary = {}
    for cid in ids:
        reports = _campaign_reports(cid, cfg)
        for name, rep in reports:
            if isinstance(rep, InequalityReport):
                (out / f"{name}.json").write_text(rep.to_json() + "\n")
                (out / f"{name}_ratios.csv").write_text(rep.ratio_csv())
                summary[name] = {"verdict": rep.verdict, "C_emp": rep.c_emp, "drift": rep.drift}
            else:
                (out / f"{name}.json").write_text(json.dumps(harness._plain(rep), indent=2, sort_keys=True) + "\n")
                summary[name] = {"verdict": rep["verdict"]}
            emit_plot_data(rep, out, name)
        for key, label in (("maxreg", "beta"), ("leray", "beta")):
            if cid == key:
                series = [(float(n.split("beta")[1]), r.c_emp) for n, r in reports]
                write_series_csv(out / f"{key}_cemp_vs_beta.csv", (label, "C_emp"), series)
    (out / "verify_summary.json").write_text(json.dumps(harness._plain(summary), indent=2, sort_keys=True) + "\n")
    bad = [k for k, v in summary.items() if v["verdict"] in (Verdict.UNSTABLE, Verdict.FAIL)]
    for k, v in summary.items():
        print(f"{k:20s} {v['verdict']}")
    return (EXIT_FAILED if bad else EXIT_OK), summary


# -- solve / norm / sweep ----------------------------------------------------


def _initial_data(cfg: RunConfig, scfg: SolverConfig) -> tuple[VectorField, ScalarField]:
    grid = scfg.grid()
    if cfg.inputs:
        u0 = read_field(cfg.inputs[0])
        if not isinstance(u0, VectorField):
            raise ValueError(f"{cfg.inputs[0]}: velocity file must hold a vector field")
        rho0 = read_field(cfg.inputs[1]) if len(cfg.inputs) > 1 else preset_density(u0.grid, cfg.rho_deviation)
        return u0, rho0
    if cfg.preset is None:
        raise ValueError("solve needs --preset or --field inputs")
    return preset_velocity(cfg.preset, grid), preset_density(grid, cfg.rho_deviation)


def run_solve(cfg: RunConfig, scfg: SolverConfig | None = None, out: Path | None = None,
              stem: str = "solve") -> tuple[int, dict]:
    scfg = scfg or cfg.solver
    out = Path(out or cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    u0, rho0 = _initial_data(cfg, scfg)
    state, rep = solve(u0, rho0, scfg)
    echo = json.loads(cfg.model_dump_json())
    write_trajectory(out / f"{stem}_velocity.ckpt", state.u_traj, echo)
    write_field(out / f"{stem}_density_final.ckpt", state.rho, echo)
    write_diagnostics_csv(out / f"{stem}_diagnostics.csv", state.diagnostics)
    prep = state.prepared
    incs = state.increments()
    result = {
        "status": state.status.value,
        "iterations": state.iterate_index,
        "E_alpha": rep.components(),
        "u0_U_alpha": prep.u_norm_mollified,
        "u0_raw_U_alpha": prep.u_norm_raw,
        "C_moll": prep.c_moll,
        "scale_factor": prep.scale_factor,
        "rho_dev_initial": float(np.max(np.abs(rho0.values - 1.0))),
        "rho_dev_final": float(state.rho_deviation()[-1]),
        "increments": incs,
        "contraction_ratios": [b / a for a, b in zip(incs, incs[1:]) if a > 0],
        "div_max": float(np.max(state.diagnostics[-1]["div_max"])),
        "dt_rel_error": state.dt_rel_error,
    }
    (out / f"{stem}_report.json").write_text(json.dumps(harness._plain(result), indent=2, sort_keys=True) + "\n")
    emit_plot_data({"diagnostics": state.diagnostics}, out, stem)
    print(f"{stem}: {result['status']} after {result['iterations']} iterations, "
          f"E_alpha total {rep.total:.6g}")
    return (EXIT_FAILED if state.status is SolverStatus.DIVERGED else EXIT_OK), result


def run_norm(cfg: RunConfig) -> tuple[int, dict]:
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    if cfg.inputs:
        f = read_field(cfg.inputs[0])
    elif cfg.preset is not None:
        f = preset_scalar(cfg.preset, cfg.grid.build())
    else:
        raise ValueError("norm needs --field or --preset")
    grid = f.grid
    b = cfg.balls
    balls = BallFamily.default(grid, b.centers_per_axis, b.j_min, b.j_max)
    fam, p = cfg.norm.family, cfg.norm.param
    if fam == "U":
        rep = u_alpha_norm(f, p, balls).to_dict()
    elif fam == "BMO-1":
        rep = bmo_minus1_norm(f, balls).to_dict()
    elif fam == "V":
        rep = v_alpha_norm(f, p, balls).to_dict()
    else:
        if fam == "sobolev":
            value = sobolev_norm(f, p)
        else:
            flavor = fam.removeprefix("besov_")
            s = -1.0 if flavor == "inf_inf" else -1.0 + grid.dim / 2.0
            value = besov_heatflow_norm(f, s, flavor)
        rep = {"family": fam, "param": p, "value": value, "argmax_center": [],
               "argmax_radius": 0.0, "grid_n": grid.points_per_axis, "time_nodes": 0}
    text = json.dumps(harness._plain(rep), indent=2, sort_keys=True)
    (out / "norm.json").write_text(text + "\n")
    print(text)
    return EXIT_OK, rep


def run_sweep(cfg: RunConfig) -> tuple[int, dict]:
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    sw = cfg.sweep
    jobs = [(a, e, n) for a in sw.alphas for e in sw.eps0s for n in sw.ns]
    base = cfg.model_copy(update={"preset": sw.preset, "rho_deviation": sw.rho_deviation, "inputs": ()})

    def one(job):
        a, e, n = job
        scfg = SolverConfig.model_validate(dict(cfg.solver.model_dump(), alpha=a, eps0=e, N=n))
        stem = f"run_a{a:g}_e{e:g}_n{n}"
        code, res = run_solve(base, scfg, out, stem)
        return {"alpha": a, "eps0": e, "N": n, "status": res["status"],
                "E_alpha_total": res["E_alpha"]["total"], "iterations": res["iterations"]}

    rows = harness.parallel_map(one, jobs)
    (out / "sweep.json").write_text(json.dumps(harness._plain(rows), indent=2, sort_keys=True) + "\n")
    write_series_csv(out / "sweep_ealpha_vs_eps0.csv", ("eps0", "E_alpha_total"),
                     [(r["eps0"], r["E_alpha_total"]) for r in rows])
    failed = any(r["status"] == SolverStatus.DIVERGED.value for r in rows)
    return (EXIT_FAILED if failed else EXIT_OK), {"runs": rows}


def main(argv: Sequence[str] | None = None) -> int:
    args = _parser().parse_args(argv)
    source = args.config or "command line"
    try:
        cfg = build_config(args)
    except ValidationError as exc:
        print(_format_validation(exc, source), file=sys.stderr)
        return EXIT_INVALID
    except (OSError, json.JSONDecodeError) as exc:
        print(f"cannot read configuration {source}: {exc}", file=sys.stderr)
        return EXIT_INVALID
    runners = {"verify": run_verify, "solve": run_solve, "norm": run_norm, "sweep": run_sweep}
    try:
        code, _ = runners[cfg.command](cfg)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    return code


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
