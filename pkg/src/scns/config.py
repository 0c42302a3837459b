"""Experiment configuration: plain-text parsing and initial-data samplers."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import PreconditionError
from .galerkin import SimConfig, System
from .mass import assemble_M, inv_M
from .spectral import ScalarField, VectorField

__all__ = [
    "InitialSampler",
    "ExperimentConfig",
    "parse_config",
    "sample_initial",
    "config_text",
]

_SIM_FIELDS = {f.name: f.type for f in dataclasses.fields(SimConfig)}
_INT_SIM = {"d", "m", "N_cutoff", "K", "fp_maxiter", "seed", "max_halvings"}
_STR_SIM = {"scheme", "noise_family"}


@dataclass(frozen=True)
class InitialSampler:
    """How each path draws its initial density and velocity coefficients.

    kinds: deterministic_smooth (fixed cosine density, zero velocity),
    random_mode_amplitudes (seeded low-mode perturbations), mollified_target
    (density clipped into [delta, delta^{-1/(2 beta)}], momentum q = h sqrt(rho)).
    """

    kind: str = "deterministic_smooth"
    rho_lower: float = 0.5
    rho_upper: float = 1.5
    rho_amp: float = 0.2
    u_amp: float = 0.1
    delta: float = 0.01

    def __post_init__(self):
        kinds = ("deterministic_smooth", "random_mode_amplitudes", "mollified_target")
        problems = []
        if self.kind not in kinds:
            problems.append(f"kind must be one of {kinds}, got {self.kind!r}")
        if not 0.0 < self.rho_lower <= self.rho_upper:
            problems.append("density bounds need 0 < rho_lower <= rho_upper")
        if not 0.0 < self.delta < 1.0:
            problems.append("delta must lie in (0, 1)")
        if problems:
            raise PreconditionError("; ".join(problems))


@dataclass(frozen=True)
class ExperimentConfig:
    sim: SimConfig = field(default_factory=SimConfig)
    n_paths: int = 4
    sweep_axis: str = ""
    sweep_values: tuple = ()
    sampler: InitialSampler = field(default_factory=InitialSampler)
    output_dir: str = "out"
    report_times: tuple = ()
    snapshot_times: tuple = ()
    max_abort_fraction: float = 0.1

    def __post_init__(self):
        problems = []
        if self.n_paths < 1:
            problems.append("ensemble size must be at least 1")
        if self.sweep_axis and not self.sweep_values:
            problems.append("sweep axis given but sweep grid is empty")
        if self.sweep_axis and self.sweep_axis not in _SIM_FIELDS:
            problems.append(f"unknown sweep axis {self.sweep_axis!r}")
        if not 0.0 <= self.max_abort_fraction <= 1.0:
            problems.append("max_abort_fraction must lie in [0, 1]")
        if problems:
            raise PreconditionError("; ".join(problems))

    def sweep_points(self) -> list[SimConfig]:
        if not self.sweep_axis:
            return [self.sim]
        caster = int if self.sweep_axis in _INT_SIM else float
        return [replace(self.sim, **{self.sweep_axis: caster(v)})
                for v in self.sweep_values]


_SECTIONS = {
    "simulation": set(_SIM_FIELDS),
    "ensemble": {"n_paths", "max_abort_fraction"},
    "sweep": {"axis", "values"},
    "initial": {"kind", "rho_lower", "rho_upper", "rho_amp", "u_amp", "delta"},
    "output": {"directory", "report_times", "snapshot_times"},
}


def _cast_sim(key: str, raw: str, where: str):
    if key in _STR_SIM:
        return raw
    try:
        return int(raw) if key in _INT_SIM else float(raw)
    except ValueError:
        raise PreconditionError(f"{where}: cannot parse {key} = {raw!r}") from None


def parse_config(text: str) -> ExperimentConfig:
    """key = value sections -> validated ExperimentConfig.

    Unknown sections or keys are rejected with their line number; parameter
    violations surface the named condition from the model assumptions.
    """
    section = None
    buckets: dict[str, dict] = {name: {} for name in _SECTIONS}
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        where = f"line {lineno}"
        if stripped.startswith("[") and stripped.endswith("]"):
            section = stripped[1:-1].strip()
            if section not in _SECTIONS:
                raise PreconditionError(f"{where}: unknown section [{section}]")
            continue
        if "=" not in stripped:
            raise PreconditionError(f"{where}: expected key = value, got {stripped!r}")
        if section is None:
            raise PreconditionError(f"{where}: key outside any [section]")
        key, raw = (part.strip() for part in stripped.split("=", 1))
        if key not in _SECTIONS[section]:
            raise PreconditionError(f"{where}: unknown key {key!r} in [{section}]")
        buckets[section][key] = (raw, where)

    sim_kwargs = {
        key: _cast_sim(key, raw, where)
        for key, (raw, where) in buckets["simulation"].items()
    }
    sim = SimConfig(**sim_kwargs)

    ens = buckets["ensemble"]
    sw = buckets["sweep"]
    init = buckets["initial"]
    out = buckets["output"]

    def floats(raw):
        return tuple(float(v) for v in raw.replace(",", " ").split())

    sampler_kwargs = {}
    for key, (raw, where) in init.items():
        sampler_kwargs[key] = raw if key == "kind" else float(raw)
    return ExperimentConfig(
        sim=sim,
        n_paths=int(ens["n_paths"][0]) if "n_paths" in ens else 4,
        max_abort_fraction=float(ens["max_abort_fraction"][0])
        if "max_abort_fraction" in ens
        else 0.1,
        sweep_axis=sw["axis"][0] if "axis" in sw else "",
        sweep_values=floats(sw["values"][0]) if "values" in sw else (),
        sampler=InitialSampler(**sampler_kwargs),
        output_dir=out["directory"][0] if "directory" in out else "out",
        report_times=floats(out["report_times"][0]) if "report_times" in out else (),
        snapshot_times=floats(out["snapshot_times"][0])
        if "snapshot_times" in out
        else (),
    )


def config_text(cfg: ExperimentConfig) -> str:
    """Canonical round-trippable text form (used for hashing and manifests)."""
    lines = ["[simulation]"]
    for f_ in dataclasses.fields(SimConfig):
        lines.append(f"{f_.name} = {getattr(cfg.sim, f_.name)}")
    lines += [
        "",
        "[ensemble]",
        f"n_paths = {cfg.n_paths}",
        f"max_abort_fraction = {cfg.max_abort_fraction}",
    ]
    if cfg.sweep_axis:
        lines += [
            "",
            "[sweep]",
            f"axis = {cfg.sweep_axis}",
            "values = " + " ".join(repr(v) for v in cfg.sweep_values),
        ]
    lines += ["", "[initial]"]
    for f_ in dataclasses.fields(InitialSampler):
        lines.append(f"{f_.name} = {getattr(cfg.sampler, f_.name)}")
    lines += ["", "[output]", f"directory = {cfg.output_dir}"]
    if cfg.report_times:
        lines.append("report_times = " + " ".join(repr(v) for v in cfg.report_times))
    if cfg.snapshot_times:
        lines.append(
            "snapshot_times = " + " ".join(repr(v) for v in cfg.snapshot_times)
        )
    return "\n".join(lines) + "\n"


def _smooth_positive(grid, rng, lower, upper, amp):
    """Random low-mode density kept inside [lower, upper]."""
    vals = np.ones(grid.shape)
    for _ in range(3):
        k = rng.integers(1, 4, size=grid.d)
        phase = rng.uniform(0.0, 2.0 * np.pi)
        wave = 2.0 * np.pi * sum(k[j] * grid.coords[j] for j in range(grid.d))
        vals = vals + amp * rng.uniform(0.2, 1.0) * np.cos(wave + phase)
    lo, hi = float(vals.min()), float(vals.max())
    # affine rescale into the admissible band, keeping the mean near center
    vals = lower + (vals - lo) * (upper - lower) / max(hi - lo, 1e-12)
    return vals


def sample_initial(sampler: InitialSampler, system: System, rng: np.random.Generator):
    """Draw (density field, velocity coefficients) for one path."""
    grid = system.grid
    basis = system.basis
    if sampler.kind == "deterministic_smooth":
        rho = ScalarField(
            grid, 1.0 + sampler.rho_amp * np.cos(2.0 * np.pi * grid.coords[0])
        )
        return rho, np.zeros(basis.N)

    if sampler.kind == "random_mode_amplitudes":
        rho = ScalarField(
            grid,
            _smooth_positive(grid, rng, sampler.rho_lower, sampler.rho_upper,
                             sampler.rho_amp),
        )
        u = sampler.u_amp * rng.standard_normal(basis.N)
        return rho, u

    # mollified_target: clip into [delta, delta^(-1/(2 beta))], q = h sqrt(rho)
    beta = system.cfg.beta
    lo = sampler.delta
    hi = sampler.delta ** (-1.0 / (2.0 * beta))
    vals = _smooth_positive(grid, rng, max(lo, 0.5), min(hi, 1.5), sampler.rho_amp)
    vals = np.clip(vals, lo, hi)
    rho = ScalarField(grid, vals)
    h = VectorField(
        grid,
        [
            sampler.u_amp
            * np.sin(2.0 * np.pi * grid.coords[(j + 1) % grid.d])
            for j in range(grid.d)
        ],
    )
    q = VectorField(grid, [c * np.sqrt(vals) for c in h.components])
    M = assemble_M(rho, basis)
    u = inv_M(M) @ basis.project(q)
    return rho, u
