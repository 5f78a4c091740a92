"""Run configuration files: strict TOML parsing and resolution.

Unknown sections or keys are errors (no silent typo tolerance); error
messages carry the config path and, when the key can be located, the line
number.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import tomli

from .chain import ALGORITHMS, SamplerConfig, STATIC_METROPOLIS, STATIC_UNIFORM
from .errors import ConfigurationError
from .phase import EuclideanMetric, HamiltonianSystem
from .targets import GaussianModel, IrtModel, generate_irt_data, read_responses_csv
from .termination import EXHAUSTION, NUTS, PER_STATE, STATIC_ONLY, WEIGHTED_MEAN

_SCHEMA: dict[str, set[str]] = {
    "target": {
        "kind", "dimension", "covariance", "rho",
        "n_students", "prior_sd", "data_seed", "true_theta", "ability_sd",
        "responses_csv",
    },
    "metric": {"inverse_mass"},
    "algorithm": {"name", "L", "max_depth", "state_sampler"},
    "termination": {"kind", "delta", "exhaustion_norm"},
    "run": {
        "num_draws", "num_warmup", "seed", "chains", "step_size",
        "target_accept", "divergence_threshold", "divergence_signed",
        "init", "init_radius",
    },
    "output": {"directory", "formats"},
}

_ALGO_TO_CRITERION = {
    "nuts": NUTS,
    "xhmc": EXHAUSTION,
    STATIC_METROPOLIS: STATIC_ONLY,
    STATIC_UNIFORM: STATIC_ONLY,
}


@dataclass
class RunConfig:
    """A parsed and validated configuration file."""

    path: Path
    target: dict
    metric: dict
    algorithm: dict
    termination: dict
    run: dict
    output: dict
    raw: dict = field(repr=False, default_factory=dict)


def _key_line(text: str, key: str) -> int | None:
    pattern = re.compile(rf"^\s*\"?{re.escape(key)}\"?\s*=")
    for lineno, line in enumerate(text.splitlines(), start=1):
        if pattern.match(line):
            return lineno
    return None


def _anchored(path: Path, text: str, key: str, message: str) -> ConfigurationError:
    lineno = _key_line(text, key)
    where = f"{path}:{lineno}" if lineno is not None else str(path)
    return ConfigurationError(f"{where}: {message}")


def load_config(path: str | Path) -> RunConfig:
    """Parse a TOML run configuration, rejecting unknown sections and keys."""
    path = Path(path)
    text = path.read_text()
    try:
        data = tomli.loads(text)
    except tomli.TOMLDecodeError as exc:
        raise ConfigurationError(f"{path}: invalid config syntax: {exc}")

    for section, content in data.items():
        if section not in _SCHEMA:
            raise _anchored(path, text, section, f"unknown section [{section}]")
        if not isinstance(content, dict):
            raise _anchored(path, text, section, f"{section} must be a section")
        for key in content:
            if key not in _SCHEMA[section]:
                raise _anchored(
                    path, text, key, f"unknown key {key!r} in [{section}]"
                )

    cfg = RunConfig(
        path=path,
        target=data.get("target", {}),
        metric=data.get("metric", {}),
        algorithm=data.get("algorithm", {}),
        termination=data.get("termination", {}),
        run=data.get("run", {}),
        output=data.get("output", {}),
        raw=data,
    )
    _validate(cfg)
    return cfg


def _require(section: dict, key: str, where: str):
    if key not in section:
        raise ConfigurationError(f"missing required key {key!r} in [{where}]")
    return section[key]


def _validate(cfg: RunConfig) -> None:
    kind = _require(cfg.target, "kind", "target")
    if kind == "gaussian":
        cov = _require(cfg.target, "covariance", "target")
        if cov not in ("identity", "two_dim_corr", "banded"):
            raise ConfigurationError(f"unknown covariance kind {cov!r}")
        if cov in ("identity", "banded"):
            _require(cfg.target, "dimension", "target")
        if cov in ("two_dim_corr", "banded"):
            _require(cfg.target, "rho", "target")
    elif kind == "irt":
        if "responses_csv" not in cfg.target:
            _require(cfg.target, "n_students", "target")
            _require(cfg.target, "data_seed", "target")
    else:
        raise ConfigurationError(f"unknown target kind {kind!r}")

    name = _require(cfg.algorithm, "name", "algorithm")
    if name not in ALGORITHMS:
        raise ConfigurationError(f"unknown algorithm {name!r}")
    if name in (STATIC_METROPOLIS, STATIC_UNIFORM):
        _require(cfg.algorithm, "L", "algorithm")

    term_kind = cfg.termination.get("kind")
    if term_kind is not None:
        if term_kind not in (NUTS, EXHAUSTION, STATIC_ONLY):
            raise ConfigurationError(f"unknown termination kind {term_kind!r}")
        if term_kind != _ALGO_TO_CRITERION[name]:
            raise ConfigurationError(
                f"termination kind {term_kind!r} is inconsistent with algorithm {name!r}"
            )
    norm = cfg.termination.get("exhaustion_norm", WEIGHTED_MEAN)
    if norm not in (WEIGHTED_MEAN, PER_STATE):
        raise ConfigurationError(f"unknown exhaustion_norm {norm!r}")

    _require(cfg.run, "num_draws", "run")
    _require(cfg.run, "seed", "run")
    step = cfg.run.get("step_size", "auto")
    if not (step == "auto" or (isinstance(step, (int, float)) and step > 0)):
        raise ConfigurationError("run.step_size must be a positive number or 'auto'")


def build_model(cfg: RunConfig):
    target = cfg.target
    if target["kind"] == "gaussian":
        cov = target["covariance"]
        if cov == "identity":
            return GaussianModel.iid(int(target["dimension"]))
        if cov == "two_dim_corr":
            return GaussianModel.two_dim_corr(float(target["rho"]))
        return GaussianModel.banded(int(target["dimension"]), float(target["rho"]))
    if "responses_csv" in target:
        responses = read_responses_csv(target["responses_csv"])
        return IrtModel(responses, prior_sd=float(target.get("prior_sd", 10.0)))
    return generate_irt_data(
        n_students=int(target["n_students"]),
        true_theta=float(target.get("true_theta", 0.75)),
        ability_sd=float(target.get("ability_sd", 1.0)),
        seed=int(target["data_seed"]),
        prior_sd=float(target.get("prior_sd", 10.0)),
    )


def build_system(cfg: RunConfig) -> HamiltonianSystem:
    model = build_model(cfg)
    if "inverse_mass" in cfg.metric:
        metric = EuclideanMetric(np.asarray(cfg.metric["inverse_mass"], dtype=float))
    else:
        metric = EuclideanMetric.identity(model.dimension)
    return HamiltonianSystem(model=model, metric=metric)


_SUITE_SCHEMA: dict[str, set[str]] = {
    "suite": {"deltas", "max_depth"},
    "run": _SCHEMA["run"],
    "metric": _SCHEMA["metric"],
    "output": _SCHEMA["output"],
}
_CELL_KEYS = {"name", "target", "run", "metric"}


@dataclass
class SuiteCell:
    """One benchmark target, expressed as a complete RunConfig."""

    name: str
    run_config: RunConfig


@dataclass
class SuiteConfig:
    deltas: list[float]
    cells: list[SuiteCell]
    output_directory: str


def load_suite(path: str | Path) -> SuiteConfig:
    """Parse a benchmark suite: shared run settings plus [[cells]] targets.

    Each cell needs a name and a [cells.target] table and may override run
    keys in [cells.run]; NUTS and XHMC (one run per suite delta) are
    executed for every cell.
    """
    path = Path(path)
    text = path.read_text()
    try:
        data = tomli.loads(text)
    except tomli.TOMLDecodeError as exc:
        raise ConfigurationError(f"{path}: invalid suite syntax: {exc}")

    for section, content in data.items():
        if section == "cells":
            continue
        if section not in _SUITE_SCHEMA:
            raise _anchored(path, text, section, f"unknown section [{section}]")
        for key in content:
            if key not in _SUITE_SCHEMA[section]:
                raise _anchored(path, text, key, f"unknown key {key!r} in [{section}]")

    cells_raw = data.get("cells", [])
    if not cells_raw:
        raise ConfigurationError(f"{path}: suite lists no [[cells]]")
    suite_section = data.get("suite", {})
    deltas = [float(d) for d in suite_section.get("deltas", [0.1, 0.01])]
    max_depth = int(suite_section.get("max_depth", 10))

    cells = []
    for cell in cells_raw:
        for key in cell:
            if key not in _CELL_KEYS:
                raise _anchored(path, text, key, f"unknown key {key!r} in [[cells]]")
        if "name" not in cell or "target" not in cell:
            raise ConfigurationError(f"{path}: every cell needs 'name' and 'target'")
        for key in cell["target"]:
            if key not in _SCHEMA["target"]:
                raise _anchored(path, text, key, f"unknown key {key!r} in cell target")
        run = {**data.get("run", {}), **cell.get("run", {})}
        for key in run:
            if key not in _SCHEMA["run"]:
                raise _anchored(path, text, key, f"unknown key {key!r} in cell run")
        metric = {**data.get("metric", {}), **cell.get("metric", {})}
        for key in metric:
            if key not in _SCHEMA["metric"]:
                raise _anchored(path, text, key, f"unknown key {key!r} in cell metric")
        cfg = RunConfig(
            path=path,
            target=cell["target"],
            metric=metric,
            algorithm={"name": "nuts", "max_depth": max_depth},
            termination={},
            run=run,
            output=data.get("output", {}),
        )
        _validate(cfg)
        cells.append(SuiteCell(name=str(cell["name"]), run_config=cfg))

    return SuiteConfig(
        deltas=deltas,
        cells=cells,
        output_directory=data.get("output", {}).get("directory", "."),
    )


def build_sampler_config(
    cfg: RunConfig,
    step_size: float | None = None,
    seed_override: int | None = None,
) -> SamplerConfig:
    """Assemble a SamplerConfig; ``step_size`` supplies the resolved value
    when the file says 'auto'."""
    run = cfg.run
    algo = cfg.algorithm
    step = run.get("step_size", "auto")
    if step == "auto":
        if step_size is None:
            raise ConfigurationError("step_size is 'auto' but no resolved value given")
        step = step_size
    init = run.get("init")
    if isinstance(init, list):
        init = np.asarray(init, dtype=float)
    return SamplerConfig(
        algorithm=algo["name"],
        step_size=float(step),
        num_draws=int(run["num_draws"]),
        num_warmup=int(run.get("num_warmup", 0)),
        seed=int(seed_override if seed_override is not None else run["seed"]),
        chains=int(run.get("chains", 1)),
        L=int(algo["L"]) if "L" in algo else None,
        max_depth=int(algo.get("max_depth", 10)),
        delta=float(cfg.termination.get("delta", 0.1)),
        exhaustion_norm=cfg.termination.get("exhaustion_norm", WEIGHTED_MEAN),
        state_sampler=algo.get("state_sampler"),
        divergence_threshold=float(run.get("divergence_threshold", 1000.0)),
        signed_divergence=bool(run.get("divergence_signed", False)),
        init=init,
        init_radius=float(run.get("init_radius", 1.0)),
    )
