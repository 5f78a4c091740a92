"""Command-line entry point: sample, scan, trace, and benchmark subcommands.

Every output file is reproduced byte-identically from the same config and
seed. CSV files are comma-separated with a header row; floats are printed
with 17 significant digits.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys as _sys
from dataclasses import asdict, replace
from pathlib import Path

import numpy as np

from .chain import (
    ALGORITHM_NUTS,
    ALGORITHM_XHMC,
    STATIC_UNIFORM,
    SamplerConfig,
    coarse_step_search,
    run_chain,
)
from .config import RunConfig, build_sampler_config, build_system, load_config, load_suite
from .diagnostics import summarize
from .errors import ConfigurationError
from .integrator import StepConfig
from .phase import PhasePoint
from .termination import trace_kappa

_DRAW_COLUMNS = (
    "draw", "energy", "accept_stat", "n_leapfrog", "wasted_leapfrog",
    "tree_depth", "divergent", "max_depth_hit", "termination_time",
)


def _fmt(x) -> str:
    return format(float(x), ".17g")


def _write_json(path: Path, payload: dict) -> None:
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _resolve_step_size(cfg: RunConfig, system, sampler_seed: int | None) -> float:
    step = cfg.run.get("step_size", "auto")
    if step != "auto":
        return float(step)
    probe = build_sampler_config(cfg, step_size=1.0, seed_override=sampler_seed)
    return coarse_step_search(
        system, probe, target_accept=float(cfg.run.get("target_accept", 0.8))
    )


def _sampler_config_echo(scfg: SamplerConfig) -> dict:
    echo = asdict(scfg)
    if isinstance(echo.get("init"), np.ndarray):
        echo["init"] = [float(v) for v in echo["init"]]
    echo["state_sampler"] = scfg.resolved_state_sampler()
    return echo


def _chain_csv_path(out_dir: Path, chain_index: int, n_chains: int) -> Path:
    if n_chains == 1:
        return out_dir / "draws.csv"
    return out_dir / f"draws_{chain_index:02d}.csv"


def _run_and_stream(system, scfg: SamplerConfig, out_dir: Path):
    """Run all chains, streaming each draw to its CSV as it is produced."""
    outputs = []
    dim = system.dimension
    header = list(_DRAW_COLUMNS) + [f"param_{j}" for j in range(dim)]
    for k in range(scfg.chains):
        path = _chain_csv_path(out_dir, k, scfg.chains)
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(header)

            def on_draw(i, rec, writer=writer, fh=fh):
                row = [
                    str(i), _fmt(rec.energy), _fmt(rec.accept_stat),
                    str(rec.n_leapfrog), str(rec.wasted_leapfrog),
                    str(rec.tree_depth), str(int(rec.divergent)),
                    str(int(rec.max_depth_hit)), _fmt(rec.termination_time),
                ] + [_fmt(v) for v in rec.next_q]
                writer.writerow(row)
                fh.flush()

            outputs.append(run_chain(system, scfg, chain_index=k, on_draw=on_draw))
    return outputs


def cmd_sample(config_path: str, out_dir: str | None = None, seed: int | None = None) -> int:
    """Run the configured sampler and write draws.csv, summary.json, config echo."""
    cfg = load_config(config_path)
    out = Path(out_dir if out_dir is not None else cfg.output.get("directory", "."))
    out.mkdir(parents=True, exist_ok=True)
    system = build_system(cfg)
    step = _resolve_step_size(cfg, system, seed)
    scfg = build_sampler_config(cfg, step_size=step, seed_override=seed)

    outputs = _run_and_stream(system, scfg, out)
    summaries = [summarize(o, system).to_dict() for o in outputs]
    _write_json(out / "summary.json", {
        "target": system.model.name,
        "chains": [
            {"chain": o.chain_index, **s} for o, s in zip(outputs, summaries)
        ],
    })
    _write_json(out / "config_echo.json", {
        "config_file": str(cfg.path),
        "target": cfg.target,
        "metric": {"inverse_mass": [float(v) for v in system.metric.inverse_mass]},
        "sampler": _sampler_config_echo(scfg),
        "resolved_step_size": step,
    })
    return 0


def cmd_scan(
    config_path: str,
    l_min_exp: int,
    l_max_exp: int,
    out_dir: str | None = None,
    seed: int | None = None,
) -> int:
    """Run static-uniform chains over L = 2^k and write scan.csv."""
    if l_min_exp < 0 or l_max_exp < l_min_exp:
        raise ConfigurationError("need 0 <= l_min_exp <= l_max_exp")
    cfg = load_config(config_path)
    out = Path(out_dir if out_dir is not None else cfg.output.get("directory", "."))
    out.mkdir(parents=True, exist_ok=True)
    system = build_system(cfg)
    step = _resolve_step_size(cfg, system, seed)
    base = build_sampler_config(cfg, step_size=step, seed_override=seed)

    rows = []
    failed = False
    for k in range(l_min_exp, l_max_exp + 1):
        L = 2**k
        scfg = replace(base, algorithm=STATIC_UNIFORM, L=L, state_sampler=None)
        try:
            output = run_chain(system, scfg, chain_index=0)
            summary = summarize(output, system)
            rows.append([
                str(L), _fmt(summary.ess_min), _fmt(summary.ess_median),
                _fmt(summary.ess_per_transition), _fmt(summary.ess_per_grad),
                str(summary.total_grad_evals), "",
            ])
        except Exception as exc:  # per-L failures recorded, scan continues
            failed = True
            rows.append([str(L), "", "", "", "", "", f"{type(exc).__name__}: {exc}"])

    with open(out / "scan.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow([
            "L", "ess_min", "ess_median", "ess_per_transition",
            "ess_per_grad", "total_grad_evals", "error",
        ])
        writer.writerows(rows)
    return 1 if failed else 0


def cmd_trace(
    config_path: str,
    q0: list[float],
    p0: list[float],
    n_steps: int,
    deltas: tuple[float, ...] = (0.1, 0.01),
    out_dir: str | None = None,
) -> int:
    """Trace termination statistics along one trajectory; write trace.csv and
    first_crossings.json."""
    cfg = load_config(config_path)
    out = Path(out_dir if out_dir is not None else cfg.output.get("directory", "."))
    out.mkdir(parents=True, exist_ok=True)
    system = build_system(cfg)
    step = cfg.run.get("step_size", "auto")
    if step == "auto":
        raise ConfigurationError("trace requires an explicit run.step_size")
    z0 = PhasePoint(np.asarray(q0, dtype=float), np.asarray(p0, dtype=float))
    if z0.q.shape != (system.dimension,) or z0.p.shape != (system.dimension,):
        raise ConfigurationError(
            f"trace point must have dimension {system.dimension}"
        )
    step_cfg = StepConfig(
        epsilon=float(step),
        divergence_threshold=float(cfg.run.get("divergence_threshold", 1000.0)),
        signed_divergence=bool(cfg.run.get("divergence_signed", False)),
    )
    trace = trace_kappa(system, z0, float(step), n_steps, step_cfg=step_cfg)

    with open(out / "trace.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow([
            "step", "time", "nuts_stat", "exhaustion_weighted",
            "exhaustion_per_state", "kappa_kinetic", "kappa_potential",
        ])
        for i in range(len(trace)):
            writer.writerow([
                str(i + 1), _fmt(trace.time[i]), _fmt(trace.nuts_stat[i]),
                _fmt(trace.exhaustion_weighted[i]), _fmt(trace.exhaustion_per_state[i]),
                _fmt(trace.kappa_kinetic[i]), _fmt(trace.kappa_potential[i]),
            ])
    crossings = trace.first_crossings(deltas)
    crossings["divergent"] = trace.divergent
    _write_json(out / "first_crossings.json", crossings)
    return 0


def cmd_benchmark(suite_path: str, out_dir: str | None = None, seed: int | None = None) -> int:
    """Run NUTS and XHMC (per suite delta) on every suite target; write benchmark.csv."""
    suite = load_suite(suite_path)
    out = Path(out_dir if out_dir is not None else suite.output_directory)
    out.mkdir(parents=True, exist_ok=True)

    rows = []
    failed = False
    for cell in suite.cells:
        system = build_system(cell.run_config)
        step = _resolve_step_size(cell.run_config, system, seed)
        base = build_sampler_config(cell.run_config, step_size=step, seed_override=seed)
        nuts_cost = None
        nuts_ess = None
        plans = [(ALGORITHM_NUTS, None)] + [(ALGORITHM_XHMC, d) for d in suite.deltas]
        for algo, delta in plans:
            try:
                scfg = replace(
                    base,
                    algorithm=algo,
                    delta=delta if delta is not None else base.delta,
                    state_sampler=None,
                )
                output = run_chain(system, scfg, chain_index=0)
                summary = summarize(output, system)
                cost = summary.total_cost_leapfrog
                ess_med = summary.ess_median
                if algo == ALGORITHM_NUTS:
                    nuts_cost, nuts_ess = cost, ess_med
                leap_ratio = cost / nuts_cost if nuts_cost else float("nan")
                ess_ratio = ess_med / nuts_ess if nuts_ess else float("nan")
                rows.append([
                    cell.name, algo, "" if delta is None else _fmt(delta),
                    str(cost), _fmt(ess_med), _fmt(leap_ratio), _fmt(ess_ratio), "",
                ])
            except Exception as exc:  # per-cell failures recorded, suite continues
                failed = True
                rows.append([
                    cell.name, algo, "" if delta is None else _fmt(delta),
                    "", "", "", "", f"{type(exc).__name__}: {exc}",
                ])

    with open(out / "benchmark.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow([
            "target", "algorithm", "delta", "total_leapfrog", "ess_median",
            "leapfrog_ratio_vs_nuts", "ess_ratio_vs_nuts", "error",
        ])
        writer.writerows(rows)
    return 1 if failed else 0


def _parse_floats(text: str) -> list[float]:
    try:
        return [float(tok) for tok in text.replace(";", ",").split(",") if tok.strip()]
    except ValueError:
        raise ConfigurationError(f"could not parse float list from {text!r}")


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="xhmc",
        description="Hamiltonian Monte Carlo with dynamic integration-time schemes",
    )
    sub = parser.add_subparsers(dest="cmd", required=True)

    p_sample = sub.add_parser("sample", help="run the configured sampler")
    p_sample.add_argument("--config", required=True)
    p_sample.add_argument("--out-dir", default=None)
    p_sample.add_argument("--seed", type=int, default=None, help="override config seed")

    p_scan = sub.add_parser("scan", help="static-uniform ESS scan over L = 2^k")
    p_scan.add_argument("--config", required=True)
    p_scan.add_argument("--l-min-exp", type=int, required=True)
    p_scan.add_argument("--l-max-exp", type=int, required=True)
    p_scan.add_argument("--out-dir", default=None)
    p_scan.add_argument("--seed", type=int, default=None)

    p_trace = sub.add_parser("trace", help="trace termination statistics along a trajectory")
    p_trace.add_argument("--config", required=True)
    p_trace.add_argument("--q", required=True, help="comma-separated initial position")
    p_trace.add_argument("--p", required=True, help="comma-separated initial momentum")
    p_trace.add_argument("--steps", type=int, required=True)
    p_trace.add_argument(
        "--delta", type=float, action="append", default=None,
        help="exhaustion threshold for first-crossing report (repeatable)",
    )
    p_trace.add_argument("--out-dir", default=None)

    p_bench = sub.add_parser("benchmark", help="run a benchmark suite")
    p_bench.add_argument("--config", required=True)
    p_bench.add_argument("--out-dir", default=None)
    p_bench.add_argument("--seed", type=int, default=None)

    args = parser.parse_args(argv)
    try:
        if args.cmd == "sample":
            return cmd_sample(args.config, out_dir=args.out_dir, seed=args.seed)
        if args.cmd == "scan":
            return cmd_scan(
                args.config, args.l_min_exp, args.l_max_exp,
                out_dir=args.out_dir, seed=args.seed,
            )
        if args.cmd == "trace":
            deltas = tuple(args.delta) if args.delta else (0.1, 0.01)
            return cmd_trace(
                args.config, _parse_floats(args.q), _parse_floats(args.p),
                args.steps, deltas=deltas, out_dir=args.out_dir,
            )
        return cmd_benchmark(args.config, out_dir=args.out_dir, seed=args.seed)
    except ConfigurationError as exc:
        print(f"error: {exc}", file=_sys.stderr)
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
