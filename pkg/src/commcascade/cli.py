"""Command-line interface.

Subcommands: meanfield | simulate | ode | evolve | sweep | contagion.
Each reads a JSON config (flags override single fields), writes its
reports into --out, and embeds the resolved config plus tool version in
every output file. Exit codes: 0 success, 2 config error, 3 numerical
invariant violation.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from concurrent.futures import ProcessPoolExecutor
from itertools import product
from pathlib import Path

import numpy as np

from . import __version__
from .cascade import initialize_simulation, run
from .config import ExperimentConfig, build_experiment, load_config
from .contagion import is_contagious, small_seed_limit
from .dist import sample_degree_sequences
from .errors import ConfigError, InvariantViolation
from .meanfield import solve_fixed_point, termination_check
from .odeflow import (CSV_COLUMNS, OdeConfig, integrate_physical,
                      integrate_trajectory)

SIM_PATH_COLUMNS = ("k_over_n", "a1", "a2", "am1", "am2", "tau1", "tau2",
                    "phi1_hat", "phi2_hat")


# --------------------------------------------------------------------------
# output helpers
# --------------------------------------------------------------------------

def _meta(cfg: ExperimentConfig) -> dict:
    return {"tool": "commcascade", "version": __version__,
            "config": cfg.raw}


def _write_json(path: Path, cfg: ExperimentConfig, payload: dict) -> None:
    doc = {"meta": _meta(cfg), **payload}
    path.write_text(json.dumps(doc, sort_keys=True, indent=2) + "\n")


def _fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    if x is None:
        return ""
    return str(x)


def _write_csv(path: Path, cfg: ExperimentConfig, header, rows) -> None:
    with path.open("w", newline="") as fh:
        fh.write(f"# commcascade {__version__}\n")
        fh.write("# config: " + json.dumps(cfg.raw, sort_keys=True) + "\n")
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(x) for x in row])


# --------------------------------------------------------------------------
# engine runners
# --------------------------------------------------------------------------

def _run_meanfield(model) -> dict:
    fp = solve_fixed_point(model)
    verdict = termination_check(model, fp.mu) if fp.converged else None
    return {
        "mu": [float(x) for x in fp.mu],
        "phi": [float(x) for x in fp.phi],
        "adoption": [float(x) for x in fp.adoption()],
        "iterations": fp.iterations,
        "converged": fp.converged,
        "termination_check": verdict,
    }


def _run_simulation_batch(cfg: ExperimentConfig, model, cell_index: int):
    finals = np.empty((cfg.replications, 2))
    paths = []
    seeds = []
    for rep in range(cfg.replications):
        rng = cfg.rng_for(cell_index, rep)
        seqs = sample_degree_sequences(model, rng)
        state = initialize_simulation(model, seqs, rng)
        result = run(state, record_every=cfg.record_every)
        finals[rep] = result.final_fraction
        seeds.append(result.seed_count)
        paths.append(result)
    return finals, seeds, paths


def _summary(finals: np.ndarray) -> dict:
    mean = finals.mean(axis=0)
    if len(finals) > 1:
        se = finals.std(axis=0, ddof=1) / np.sqrt(len(finals))
    else:
        se = np.zeros(2)
    return {"mean_adopt1": float(mean[0]), "mean_adopt2": float(mean[1]),
            "se_adopt1": float(se[0]), "se_adopt2": float(se[1])}


def _ode_cfg(cfg: ExperimentConfig, mode: str) -> OdeConfig:
    o = cfg.ode
    return OdeConfig(step=o.step, epsilon=o.epsilon, t_max=o.t_max,
                     mode=mode, sample_stride=o.sample_stride)


# --------------------------------------------------------------------------
# subcommands
# --------------------------------------------------------------------------

def cmd_meanfield(cfg: ExperimentConfig, out: Path, plot: bool) -> None:
    _write_json(out / "meanfield.json", cfg, _run_meanfield(cfg.model()))


def cmd_simulate(cfg: ExperimentConfig, out: Path, plot: bool) -> None:
    model = cfg.model()
    finals, seeds, results = _run_simulation_batch(cfg, model, 0)
    rows = [[rep, finals[rep, 0], finals[rep, 1], seeds[rep], results[rep].steps]
            for rep in range(cfg.replications)]
    _write_csv(out / "simulate_runs.csv", cfg,
               ["replication", "adopt1", "adopt2", "seed_count", "steps"], rows)
    payload = {
        "replications": cfg.replications,
        "summary": _summary(finals),
        "runs": [{"replication": rep, "adopt1": float(finals[rep, 0]),
                  "adopt2": float(finals[rep, 1]), "seed_count": seeds[rep]}
                 for rep in range(cfg.replications)],
    }
    _write_json(out / "simulate.json", cfg, payload)
    if cfg.emit_paths:
        path_rows = []
        for rep, result in enumerate(results):
            for row in result.path_scaled(unit="total"):
                path_rows.append([rep, *row])
        _write_csv(out / "simulate_paths.csv", cfg,
                   ["replication", *SIM_PATH_COLUMNS], path_rows)
    if plot:
        from .plots import render_adoption_hist
        render_adoption_hist(finals, out / "simulate.png")


def cmd_ode(cfg: ExperimentConfig, out: Path, plot: bool) -> None:
    model = cfg.model()
    mode = cfg.ode.mode
    traj = (integrate_physical(model, cfg.ode) if mode == "physical"
            else integrate_trajectory(model, cfg.ode))
    _write_csv(out / "ode.csv", cfg, list(CSV_COLUMNS), traj.rows().tolist())
    _write_json(out / "ode.json", cfg, {
        "mode": mode,
        "stop_reason": traj.stop_reason.value,
        "flags": traj.flags,
        "terminal_mu": [float(x) for x in traj.terminal_mu],
        "terminal_phi": [float(x) for x in traj.phi[-1]],
        "t_end": float(traj.t[-1]),
    })
    if plot:
        from .plots import render_trajectory
        render_trajectory(traj, out / "ode.png")


def cmd_evolve(cfg: ExperimentConfig, out: Path, plot: bool) -> None:
    model = cfg.model()
    try:
        traj = integrate_physical(model, _ode_cfg(cfg, "physical"))
    except ValueError:
        # nothing seeded: emit the flat initial state
        from .odeflow import OdeTrajectory, StopReason, reconstruct_observables
        mu = np.ones(4)
        obs = reconstruct_observables(model, mu, t=0.0)
        traj = OdeTrajectory(
            mode="physical", t=np.zeros(1), mu=mu[None, :],
            a=np.array([[obs.a1, obs.a2, obs.am1, obs.am2]]),
            tau=np.zeros((1, 2)), phi=np.array([[obs.phi1, obs.phi2]]),
            denom=np.array([obs.denom]), terminal_mu=mu,
            stop_reason=StopReason.DENOMINATOR_BELOW_EPS,
            flags=["no_initial_activity"])
    header = list(CSV_COLUMNS)
    data = traj.rows()
    sim_block = None
    if cfg.overlay_sim:
        if model.n1 != model.n2:
            raise ConfigError("evolve overlay requires n1 == n2 for unit matching")
        rng = cfg.rng_for(0, 0)
        seqs = sample_degree_sequences(model, rng)
        state = initialize_simulation(model, seqs, rng)
        result = run(state, record_every=cfg.record_every)
        sim = result.path_scaled(unit="community")
        sim_block = np.column_stack(
            [np.interp(traj.t, sim[:, 0], sim[:, i]) for i in range(1, 9)])
        header += [f"sim_{c}" for c in SIM_PATH_COLUMNS[1:]]
        data = np.column_stack([data, sim_block])
    _write_csv(out / "evolve.csv", cfg, header, data.tolist())
    if plot:
        from .plots import render_trajectory
        sim_rows = None
        if sim_block is not None:
            sim_rows = np.column_stack([traj.t, sim_block])
        render_trajectory(traj, out / "evolve.png", sim_rows=sim_rows)


def _cell_outputs(args) -> tuple[int, dict]:
    (index, doc, engines, replications, seed, record_every, tail_tol,
     ode_fields) = args
    cfg = build_experiment(doc)
    cfg = ExperimentConfig(raw=doc, engines=tuple(engines), axes=(),
                           replications=replications, seed=seed,
                           record_every=record_every, tail_tol=tail_tol,
                           ode=OdeConfig(**ode_fields), overlay_sim=False,
                           emit_paths=False, contagion_alphas=None)
    model = cfg.model()
    out: dict = {}
    if "meanfield" in engines:
        mf = _run_meanfield(model)
        out.update({"mf_phi1": mf["phi"][0], "mf_phi2": mf["phi"][1],
                    "mf_adopt1": mf["adoption"][0], "mf_adopt2": mf["adoption"][1],
                    "mf_iterations": mf["iterations"],
                    "mf_converged": mf["converged"],
                    "mf_termination": mf["termination_check"]})
    if "contagion" in engines:
        rep = is_contagious(model)
        out.update({"ct_rho": rep.rho, "ct_contagious": rep.contagious,
                    "ct_margin": rep.margin})
    if "ode" in engines:
        traj = (integrate_physical(model, cfg.ode) if cfg.ode.mode == "physical"
                else integrate_trajectory(model, cfg.ode))
        out.update({"ode_phi1": float(traj.phi[-1][0]),
                    "ode_phi2": float(traj.phi[-1][1]),
                    "ode_t_end": float(traj.t[-1]),
                    "ode_stop": traj.stop_reason.value})
    if "simulate" in engines:
        # cell_index seeds the replication streams, keeping cells independent
        finals, _, _ = _run_simulation_batch(cfg, model, index)
        s = _summary(finals)
        out.update({"sim_mean_adopt1": s["mean_adopt1"],
                    "sim_mean_adopt2": s["mean_adopt2"],
                    "sim_se_adopt1": s["se_adopt1"],
                    "sim_se_adopt2": s["se_adopt2"]})
    return index, out


def cmd_sweep(cfg: ExperimentConfig, out: Path, plot: bool, workers: int = 1) -> None:
    if not cfg.axes:
        raise ConfigError("sweep: no sweep axes declared")
    cells = cfg.cells()
    ode_fields = {"step": cfg.ode.step, "epsilon": cfg.ode.epsilon,
                  "t_max": cfg.ode.t_max, "mode": cfg.ode.mode,
                  "sample_stride": cfg.ode.sample_stride}
    tasks = [(i, doc, cfg.engines, cfg.replications, cfg.seed,
              cfg.record_every, cfg.tail_tol, ode_fields)
             for i, doc in enumerate(cells)]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = dict(pool.map(_cell_outputs, tasks))
    else:
        results = dict(map(_cell_outputs, tasks))

    axis_values = [list(combo) for combo in
                   product(*(axis.values for axis in cfg.axes))]
    columns: list[str] = []
    for i in sorted(results):
        for key in results[i]:
            if key not in columns:
                columns.append(key)
    header = ["cell", *(axis.param for axis in cfg.axes), *columns]
    rows = []
    for i in sorted(results):
        rows.append([i, *axis_values[i], *(results[i].get(c) for c in columns)])
    _write_csv(out / "sweep.csv", cfg, header, rows)
    if plot:
        from .plots import render_sweep
        render_sweep(header, [[_fmt(x) for x in row] for row in rows],
                     len(cfg.axes), out / "sweep.png")


def cmd_contagion(cfg: ExperimentConfig, out: Path, plot: bool) -> None:
    model = cfg.model()
    report = is_contagious(model)
    payload = report.to_dict()
    if cfg.contagion_alphas:
        payload["small_seed"] = small_seed_limit(model, cfg.contagion_alphas).to_dict()
    _write_json(out / "contagion.json", cfg, payload)


# --------------------------------------------------------------------------
# entry point
# --------------------------------------------------------------------------

def _parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="commcascade",
        description="Threshold cascades on two-community random graphs.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("meanfield", "simulate", "ode", "evolve", "sweep", "contagion"):
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="JSON config path")
        p.add_argument("--out", default=".", help="output directory")
        p.add_argument("--seed", type=int, default=None, help="master RNG seed")
        p.add_argument("--eps", type=float, default=None, help="ODE stopping margin")
        p.add_argument("--step", type=float, default=None, help="ODE step size")
        p.add_argument("--replications", type=int, default=None)
        p.add_argument("--no-plot", action="store_true")
        if name == "sweep":
            p.add_argument("--workers", type=int, default=1)
    return parser


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        doc = load_config(args.config)
        overrides = {"seed": args.seed, "replications": args.replications,
                     "step": args.step, "eps": args.eps}
        if args.command == "evolve":
            overrides["mode"] = "physical"
        cfg = build_experiment(doc, overrides)
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        plot = not args.no_plot
        if args.command == "meanfield":
            cmd_meanfield(cfg, out, plot)
        elif args.command == "simulate":
            cmd_simulate(cfg, out, plot)
        elif args.command == "ode":
            cmd_ode(cfg, out, plot)
        elif args.command == "evolve":
            cmd_evolve(cfg, out, plot)
        elif args.command == "sweep":
            cmd_sweep(cfg, out, plot, workers=args.workers)
        elif args.command == "contagion":
            cmd_contagion(cfg, out, plot)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except InvariantViolation as exc:
        print(f"numerical invariant violated: {exc}", file=sys.stderr)
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())
