"""Experiment orchestration: seeded parallel path execution, artifacts, reports.

All randomness is counter-based and keyed by (seed, path, step), so results
are a pure function of the configuration regardless of worker count or
scheduling; aggregation always runs in fixed path order.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from .config import ExperimentConfig, config_text, sample_initial
from .diagnostics import energy_mc_report
from .galerkin import GalerkinState, PathRecord, SimConfig, System, run_path
from .noise import path_rng
from .oracles import run_oracle
from .snapshots import write_scalar
from .spectral import ScalarField

__all__ = ["run_experiment", "emit_plot_data", "selftest", "smoke_config"]

REPORT_SCHEMA = 1
# derived initial-state streams must never collide with stepping streams,
# which use nonnegative step counters
_INIT_STEP = 2**31


def smoke_config() -> ExperimentConfig:
    """Small deterministic experiment used by reproducibility checks."""
    return ExperimentConfig(
        sim=SimConfig(d=1, m=32, N_cutoff=2, K=4, dt=2.5e-3, T=0.05, seed=42,
                      epsilon=0.05, delta=0.01, c0=0.05),
        n_paths=4,
        output_dir="smoke_out",
    )


def _path_initial(system: System, sampler, path_index: int) -> GalerkinState:
    rng = path_rng(system.cfg.seed, path_index, _INIT_STEP)
    rho, u = sample_initial(sampler, system, rng)
    return GalerkinState(0.0, rho, u)


def _path_csv(rec: PathRecord) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["t", "energy", "dissipation", "u_norm", "rho_min", "rho_max",
                "rho_probe", "truncated"])
    for i, t in enumerate(rec.times):
        diss = rec.dissipation[i - 1] if i > 0 else 0.0
        w.writerow([
            f"{t:.12g}", f"{rec.energy[i]:.12g}", f"{diss:.12g}",
            f"{rec.u_norm[i]:.12g}", f"{rec.rho_min[i]:.12g}",
            f"{rec.rho_max[i]:.12g}", f"{rec.rho_probe[i]:.12g}",
            int(rec.truncated[i]),
        ])
    return buf.getvalue()


def _hard_assertions(rec: PathRecord) -> list[str]:
    """Identity-class invariants whose violation fails the whole experiment."""
    failures = []
    if np.abs(np.array(rec.rho_mean) - rec.rho_mean[0]).max() > 1e-10:
        failures.append(f"path {rec.path_index}: mass conservation violated")
    if not rec.aborted and not np.all(np.isfinite(rec.energy)):
        failures.append(f"path {rec.path_index}: non-finite energy series")
    return failures


def run_experiment(cfg: ExperimentConfig, workers: int = 1, root: str | None = None):
    """Run every sweep point; write artifacts; return (exit_code, manifest dict)."""
    out_root = Path(root if root is not None else cfg.output_dir)
    out_root.mkdir(parents=True, exist_ok=True)
    text = config_text(cfg)
    manifest = {
        "schema": REPORT_SCHEMA,
        "code_version": __version__,
        "config_sha256": hashlib.sha256(text.encode()).hexdigest(),
        "points": [],
    }
    (out_root / "config.txt").write_text(text)
    failures: list[str] = []

    for point_index, sim in enumerate(cfg.sweep_points()):
        label = (
            f"{cfg.sweep_axis}={cfg.sweep_values[point_index]:g}"
            if cfg.sweep_axis
            else "base"
        )
        point_dir = out_root / f"point_{point_index:02d}_{label}"
        point_dir.mkdir(parents=True, exist_ok=True)
        system = System(sim)

        def one(path_index: int) -> PathRecord:
            initial = _path_initial(system, cfg.sampler, path_index)
            return run_path(
                system, path_index, initial=initial,
                snapshot_times=cfg.snapshot_times,
            )

        if workers > 1:
            with ThreadPoolExecutor(max_workers=workers) as pool:
                records = list(pool.map(one, range(cfg.n_paths)))
        else:
            records = [one(p) for p in range(cfg.n_paths)]

        aborted = [r for r in records if r.aborted]
        for rec in records:
            (point_dir / f"path_{rec.path_index:04d}.csv").write_text(_path_csv(rec))
            failures.extend(_hard_assertions(rec))
            for ts, (rho_vals, _) in sorted(rec.snapshots.items()):
                name = f"rho_p{rec.path_index:04d}_t{ts:.6f}.scns"
                write_scalar(point_dir / name, ScalarField(system.grid, rho_vals))

        report = {
            "schema": REPORT_SCHEMA,
            "label": label,
            "sim": {k: getattr(sim, k) for k in ("d", "m", "N_cutoff", "K", "dt",
                                                 "T", "epsilon", "delta", "R",
                                                 "seed", "c0")},
            "n_paths": cfg.n_paths,
            "n_aborted": len(aborted),
            "tau_R_fraction": float(np.mean([r.tau_R < sim.T for r in records])),
            "tau_R_values": [r.tau_R for r in records],
        }
        if cfg.n_paths >= 2:
            erep = energy_mc_report(records, system)
            report["energy"] = {
                str(p): {
                    "sup_energy": erep.sup_energy_moment[p],
                    "dissipation": erep.dissipation_moment[p],
                    "ratio": erep.ratio[p],
                }
                for p in (1, 2)
            }
        if len(aborted) > cfg.max_abort_fraction * cfg.n_paths:
            failures.append(
                f"point {label}: {len(aborted)}/{cfg.n_paths} paths aborted"
            )
        (point_dir / "report.json").write_text(json.dumps(report, indent=2,
                                                          sort_keys=True) + "\n")
        manifest["points"].append({
            "label": label,
            "directory": point_dir.name,
            "tau_R_fraction": report["tau_R_fraction"],
            "n_aborted": len(aborted),
        })

    manifest["hard_failures"] = failures
    (out_root / "manifest.json").write_text(
        json.dumps(manifest, indent=2, sort_keys=True) + "\n"
    )
    return (1 if failures else 0), manifest


def emit_plot_data(reports: list[dict]) -> str:
    """Tidy long-format CSV: sweep_value, statistic, estimate, ci_low, ci_high."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["sweep_value", "statistic", "estimate", "ci_low", "ci_high"])
    for rep in reports:
        value = rep.get("label", "")
        rows = [("tau_R_fraction", rep["tau_R_fraction"], 0.0)]
        for p, stats in rep.get("energy", {}).items():
            rows.append((f"sup_energy_p{p}",) + tuple(stats["sup_energy"]))
            rows.append((f"dissipation_p{p}",) + tuple(stats["dissipation"]))
        for name, est, se in rows:
            w.writerow([value, name, f"{est:.12g}", f"{est - 1.96 * se:.12g}",
                        f"{est + 1.96 * se:.12g}"])
    return buf.getvalue()


def selftest() -> dict:
    """Quick invariant sweep across the oracle registry; returns case results."""
    results = {}
    ok = True
    for case in sorted(_known_oracles()):
        try:
            results[case] = run_oracle(case)
        except Exception as exc:  # report, don't mask, individual case failures
            results[case] = {"error": repr(exc)}
            ok = False
    return {"ok": ok, "cases": results}


def _known_oracles():
    from .oracles import ORACLE_CASES

    return ORACLE_CASES
