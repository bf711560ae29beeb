# lapinfer/simulate/study.py
"""
Monte-Carlo studies of the network tests.

``run_power_study`` estimates the power of the two-sample test along a
ladder of rewiring effects. For every rung the population networks are
fixed; each replicate draws fresh series for both groups, turns them into
subject Laplacians and runs the test. Replicates are independent and can be
spread over worker processes without changing any result.

``run_local_global_study`` compares the global two-sample test with
Bonferroni-corrected edgewise tests on a small sample with a diffuse
difference, and ``write_synthetic_cohort`` writes a manifest of synthetic
subjects for the command-line analyses.
"""

import logging
import math
from dataclasses import dataclass, field
from multiprocessing import Pool
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional, Tuple

import numpy as np
import pandas as pd
import yaml

from lapinfer.errors import ConfigError, ValidationError, ensure
from lapinfer.graph_core import EdgeVector, devectorize, dim_from_edges, edge_count, frobenius_metric
from lapinfer.inference import EstimatorOptions, NetworkGroup, mass_univariate, test_two_sample
from lapinfer.parser import ManifestParser, MatrixParser
from lapinfer.report import PathLike, atomic_write, digest_header
from lapinfer.simulate.association import ASSOCIATION_KINDS, DEFAULT_BINS, association_covariance, subject_laplacians
from lapinfer.simulate.noise import NoiseSpec, sample_gaussian_series
from lapinfer.simulate.rng import Stage, stream
from lapinfer.simulate.topology import (
    MixtureParams,
    TopologySpec,
    build_sigma_from_topology,
    default_effect_ladder,
    population_laplacian,
    rewire,
)

logger = logging.getLogger(__name__)

POWER_COLUMNS = [
    "topology", "d", "n", "T", "noise", "association",
    "effect_size", "rejections", "reps", "power", "std_error",
]


@dataclass(frozen=True)
class PowerStudyConfig:
    """Everything that determines a power curve."""

    topology: TopologySpec = field(default_factory=TopologySpec)
    n: int = 100
    noise: NoiseSpec = field(default_factory=NoiseSpec)
    association: str = "covariance"
    bins: int = DEFAULT_BINS
    effect_ladder: Optional[Tuple[int, ...]] = None
    reps: int = 100
    alpha: float = 0.05
    delta: float = 2.0
    mixture: MixtureParams = field(default_factory=MixtureParams)
    seed: int = 0

    def __post_init__(self):
        checks = [
            ("n", self.n >= 2, f"must be >= 2, got {self.n}"),
            ("association", self.association in ASSOCIATION_KINDS,
             f"must be one of {ASSOCIATION_KINDS}, got {self.association!r}"),
            ("bins", self.bins >= 2, f"must be >= 2, got {self.bins}"),
            ("reps", self.reps >= 1, f"must be >= 1, got {self.reps}"),
            ("alpha", 0.0 < self.alpha < 1.0, f"must lie in (0, 1), got {self.alpha}"),
            ("delta", self.delta >= 0, f"must be non-negative, got {self.delta}"),
            ("seed", self.seed >= 0, f"must be a non-negative integer, got {self.seed}"),
        ]
        for name, ok, message in checks:
            if not ok:
                raise ConfigError(name, message)
        if self.effect_ladder is not None:
            ladder = tuple(int(r) for r in self.effect_ladder)
            if not ladder or ladder[0] != 0:
                raise ConfigError("effect_ladder", f"must start at 0, got {list(ladder)}")
            if any(r < 0 for r in ladder):
                raise ConfigError("effect_ladder", "rewire counts must be non-negative")
            object.__setattr__(self, "effect_ladder", ladder)

    @property
    def d(self) -> int:
        return self.topology.d

    @property
    def T(self) -> int:
        return self.noise.T

    def estimator_options(self) -> EstimatorOptions:
        return EstimatorOptions(delta=self.delta)

    def to_dict(self) -> Dict[str, Any]:
        alpha = self.noise.alpha
        return {
            "seed": self.seed,
            "topology": {
                "kind": self.topology.kind,
                "d": self.topology.d,
                "rewire_beta": self.topology.rewire_beta,
                "ring_degree": self.topology.ring_degree,
            },
            "n": self.n,
            "T": self.noise.T,
            "noise": {
                "kind": self.noise.kind,
                "phi": self.noise.phi,
                "alpha": list(np.asarray(alpha, dtype=float).reshape(-1)) if np.ndim(alpha) else float(alpha),
            },
            "association": self.association,
            "bins": self.bins,
            "effect_ladder": None if self.effect_ladder is None else list(self.effect_ladder),
            "reps": self.reps,
            "alpha": self.alpha,
            "delta": self.delta,
            "mixture": {
                "lambda_exp": self.mixture.lambda_exp,
                "mu1": self.mixture.mu1,
                "mu2": self.mixture.mu2,
                "sigma2": self.mixture.sigma2,
                "diagonal": self.mixture.diagonal,
            },
        }


_TOP_LEVEL = {"seed", "topology", "n", "T", "noise", "association", "bins",
              "effect_ladder", "reps", "alpha", "delta", "mixture"}
_SECTIONS = {
    "topology": {"kind", "d", "rewire_beta", "ring_degree"},
    "noise": {"kind", "phi", "alpha"},
    "mixture": {"lambda_exp", "mu1", "mu2", "sigma2", "diagonal"},
}
_INTEGER_FIELDS = {"seed", "n", "T", "bins", "reps", "topology.d", "topology.ring_degree"}
_NUMBER_FIELDS = {"alpha", "delta", "topology.rewire_beta", "noise.phi",
                  "mixture.lambda_exp", "mixture.mu1", "mixture.mu2", "mixture.sigma2"}


def _typed(name: str, value: Any) -> Any:
    if name in _INTEGER_FIELDS:
        if value is None and name == "topology.ring_degree":
            return None
        if isinstance(value, bool) or not isinstance(value, (int, np.integer)):
            raise ConfigError(name, f"must be an integer, got {value!r}")
        return int(value)
    if name in _NUMBER_FIELDS:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(name, f"must be a number, got {value!r}")
        return float(value)
    return value


def _section(raw: Mapping[str, Any], name: str) -> Dict[str, Any]:
    value = raw.get(name, {})
    if not isinstance(value, Mapping):
        raise ConfigError(name, f"must be a mapping, got {type(value).__name__}")
    unknown = sorted(set(value) - _SECTIONS[name])
    if unknown:
        raise ConfigError(f"{name}.{unknown[0]}", "unknown key")
    return {key: _typed(f"{name}.{key}", v) for key, v in value.items()}


def config_from_dict(raw: Mapping[str, Any]) -> PowerStudyConfig:
    """
    Build a PowerStudyConfig from a parsed document.

    Raises:
        ConfigError: a key is unknown or a value is invalid; the message names the field.
    """
    if not isinstance(raw, Mapping):
        raise ConfigError("<root>", "config must be a mapping")
    unknown = sorted(set(raw) - _TOP_LEVEL)
    if unknown:
        raise ConfigError(unknown[0], "unknown key")
    top = {key: _typed(key, value) for key, value in raw.items() if key not in _SECTIONS}
    topology = _section(raw, "topology")
    noise = _section(raw, "noise")
    mixture = _section(raw, "mixture")
    if "alpha" in noise:
        drift = noise["alpha"]
        values = drift if isinstance(drift, list) else [drift]
        if not all(isinstance(x, (int, float)) and not isinstance(x, bool) for x in values):
            raise ConfigError("noise.alpha", f"must be a number or a list of numbers, got {drift!r}")
        noise["alpha"] = tuple(float(x) for x in drift) if isinstance(drift, list) else float(drift)
    if "T" in top:
        noise["T"] = top.pop("T")
    if "effect_ladder" in top:
        ladder = top["effect_ladder"]
        if ladder is not None and (not isinstance(ladder, list) or not all(isinstance(r, int) for r in ladder)):
            raise ConfigError("effect_ladder", f"must be a list of integers, got {ladder!r}")
        top["effect_ladder"] = None if ladder is None else tuple(ladder)
    parts = {}
    for name, cls, values in (("topology", TopologySpec, topology), ("noise", NoiseSpec, noise),
                              ("mixture", MixtureParams, mixture)):
        try:
            parts[name] = cls(**values)
        except ValidationError as exc:
            raise ConfigError(name, str(exc)) from exc
    try:
        return PowerStudyConfig(**top, **parts)
    except ConfigError:
        raise
    except ValidationError as exc:
        raise ConfigError("<root>", str(exc)) from exc


def load_config(path: PathLike, overrides: Optional[Mapping[str, Any]] = None) -> PowerStudyConfig:
    """Read a YAML study config; ``overrides`` replace top-level or dotted keys."""
    path = Path(path)
    ensure(f"config file not found: {path}", path.is_file())
    try:
        raw = yaml.safe_load(path.read_text(encoding="utf-8")) or {}
    except yaml.YAMLError as exc:
        raise ConfigError("<file>", f"{path}: not valid YAML ({exc})") from exc
    return config_from_dict(apply_overrides(raw, overrides or {}))


def apply_overrides(raw: Mapping[str, Any], overrides: Mapping[str, Any]) -> Dict[str, Any]:
    """
    Merge command-line values into a parsed config.

    Args:
        raw: Parsed YAML document.
        overrides: Top-level or dotted keys such as ``topology.d``; None values are skipped.

    Returns:
        A new mapping; raw is left untouched.
    """
    merged: Dict[str, Any] = {k: (dict(v) if isinstance(v, Mapping) else v) for k, v in raw.items()}
    for key, value in overrides.items():
        if value is None:
            continue
        if "." in key:
            section, name = key.split(".", 1)
            merged.setdefault(section, {})
            merged[section][name] = value
        else:
            merged[key] = value
    return merged


@dataclass(frozen=True)
class PowerRow:
    topology: str
    d: int
    n: int
    T: int
    noise: str
    association: str
    effect_size: float
    rejections: int
    reps: int
    power: float
    std_error: float
    rewired: int = 0


@dataclass
class PowerCurve:
    """Rejection rates along the effect ladder."""

    rows: List[PowerRow]

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame([{c: getattr(row, c) for c in POWER_COLUMNS} for row in self.rows],
                            columns=POWER_COLUMNS)

    @property
    def power(self) -> List[float]:
        return [row.power for row in self.rows]


@dataclass(frozen=True)
class _Scenario:
    rung: int
    rewired: int
    sigma1: np.ndarray
    sigma2: np.ndarray
    effect_size: float


def _scenarios(config: PowerStudyConfig) -> List[_Scenario]:
    A1 = config.topology.generate(stream(config.seed, stage=Stage.TOPOLOGY))
    sigma1 = build_sigma_from_topology(A1, config.mixture, stream(config.seed, stage=Stage.SIGMA))
    lap1 = population_laplacian(sigma1)
    ladder = list(config.effect_ladder) if config.effect_ladder is not None else default_effect_ladder(A1)
    scenarios = []
    for rung, r in enumerate(ladder):
        try:
            A2 = rewire(A1, r, stream(config.seed, rung, 0, Stage.REWIRE))
        except ValidationError as exc:
            raise ConfigError("effect_ladder", str(exc)) from exc
        # same SIGMA stream for both groups: off-diagonals differ only at rewired pairs,
        # variances only at their endpoints
        sigma2 = sigma1 if r == 0 else build_sigma_from_topology(
            A2, config.mixture, stream(config.seed, stage=Stage.SIGMA))
        effect = frobenius_metric(lap1, population_laplacian(sigma2))
        scenarios.append(_Scenario(rung, r, sigma1, sigma2, effect))
    return scenarios


def _group(label: str, config: PowerStudyConfig, sigma: np.ndarray, rung: int, replicate: int,
           stage: Stage) -> NetworkGroup:
    series = config.noise.sample(sigma, config.n, stream(config.seed, rung, replicate, stage))
    return NetworkGroup(label, tuple(subject_laplacians(series, config.association, config.bins)))


def _run_replicate(task: Tuple[PowerStudyConfig, _Scenario, int]) -> Tuple[int, int, bool, float]:
    config, scenario, replicate = task
    g1 = _group("g1", config, scenario.sigma1, scenario.rung, replicate, Stage.SERIES_1)
    g2 = _group("g2", config, scenario.sigma2, scenario.rung, replicate, Stage.SERIES_2)
    report = test_two_sample(g1, g2, config.estimator_options())
    logger.debug("rung %d replicate %d: T2=%.6g p=%.4g", scenario.rung, replicate, report.statistic, report.p_value)
    return scenario.rung, replicate, report.reject(config.alpha), report.statistic


def run_power_study(config: PowerStudyConfig, workers: int = 1) -> PowerCurve:
    """
    Estimate the power of the two-sample test along the effect ladder.

    Args:
        config: Study configuration.
        workers: Number of processes; results do not depend on it.

    Returns:
        PowerCurve with one row per ladder entry.
    """
    ensure(f"workers must be >= 1, got {workers}", workers >= 1)
    scenarios = _scenarios(config)
    tasks = [(config, scenario, rep) for scenario in scenarios for rep in range(config.reps)]
    if workers == 1:
        results = [_run_replicate(task) for task in tasks]
    else:
        with Pool(processes=workers) as pool:
            results = pool.map(_run_replicate, tasks, chunksize=max(1, len(tasks) // (4 * workers)))
    rejections = {scenario.rung: 0 for scenario in scenarios}
    for rung, _, rejected, _ in sorted(results, key=lambda r: (r[0], r[1])):
        rejections[rung] += int(rejected)
    rows = []
    for scenario in scenarios:
        power = rejections[scenario.rung] / config.reps
        rows.append(PowerRow(
            topology=config.topology.kind,
            d=config.d,
            n=config.n,
            T=config.T,
            noise=config.noise.kind,
            association=config.association,
            effect_size=scenario.effect_size,
            rejections=rejections[scenario.rung],
            reps=config.reps,
            power=power,
            std_error=math.sqrt(power * (1.0 - power) / config.reps),
            rewired=scenario.rewired,
        ))
        logger.info("rung %d (r=%d, effect %.4g): power %.3f", scenario.rung, scenario.rewired,
                    scenario.effect_size, power)
    return PowerCurve(rows)


def write_power_curve(curve: PowerCurve, path: PathLike, run_digest: str) -> Path:
    """CSV with a leading ``# run_digest=`` line."""
    body = curve.to_frame().to_csv(index=False, lineterminator="\n", float_format="%.12g")
    return atomic_write(path, digest_header(run_digest) + body)


@dataclass(frozen=True)
class LocalGlobalResult:
    """How often each approach detects a diffuse group difference."""

    d: int
    n: int
    shift: float
    reps: int
    global_rejection_rate: float
    mass_empty_rate: float
    mean_flagged_edges: float

    def to_dict(self) -> Dict[str, Any]:
        return dict(self.__dict__)


def _edge_group(label: str, base: np.ndarray, n: int, rng: np.random.Generator) -> NetworkGroup:
    d = dim_from_edges(base.size)
    draws = base + rng.standard_normal((n, base.size))
    return NetworkGroup(label, tuple(devectorize(EdgeVector(d, v)) for v in draws))


def run_local_global_study(
    d: int = 10,
    n: int = 10,
    shift: float = 0.3,
    reps: int = 50,
    alpha: float = 0.05,
    seed: int = 0,
    options: EstimatorOptions = EstimatorOptions(),
) -> LocalGlobalResult:
    """
    Global test against Bonferroni edgewise tests under a diffuse effect.

    Edge weights are independent N(-2, 1) in the first group; in the second
    every edge mean moves by ``shift`` standard deviations. No single edge
    carries much signal, but the sum over all edges does.
    """
    ensure(f"d must be >= 3, got {d}", d >= 3)
    ensure(f"reps must be >= 1, got {reps}", reps >= 1)
    base = np.full(edge_count(d), -2.0)
    rejected = empty = flagged = 0
    for rep in range(reps):
        rng = stream(seed, 0, rep, Stage.EDGES)
        g1 = _edge_group("control", base, n, rng)
        g2 = _edge_group("shifted", base + shift, n, rng)
        rejected += int(test_two_sample(g1, g2, options).reject(alpha))
        edges = len(mass_univariate(g1, g2, alpha=alpha, correction="bonferroni").flagged_edges())
        empty += int(edges == 0)
        flagged += edges
    result = LocalGlobalResult(
        d=d, n=n, shift=shift, reps=reps,
        global_rejection_rate=rejected / reps,
        mass_empty_rate=empty / reps,
        mean_flagged_edges=flagged / reps,
    )
    logger.info("local/global study: global rejects %.2f, edgewise empty %.2f",
                result.global_rejection_rate, result.mass_empty_rate)
    return result


def write_synthetic_cohort(
    sizes: Mapping[str, int],
    d: int,
    out_dir: PathLike,
    seed: int = 0,
    T: int = 50,
    topology: str = "block_diagonal",
    mixture: MixtureParams = MixtureParams(),
) -> Path:
    """
    Write association matrices for synthetic subjects and a manifest listing them.

    All groups share one population covariance built from a seeded topology.
    Files are named ``<group>/<subject_id>.csv`` under ``out_dir`` and the
    manifest is ``out_dir/manifest.csv`` with relative paths.

    Returns:
        Path of the manifest.
    """
    ensure("cohort needs at least one group", len(sizes) > 0)
    for label, size in sizes.items():
        ensure(f"group '{label}' needs a positive size, got {size}", size >= 1)
    out_dir = Path(out_dir)
    spec = TopologySpec(kind=topology, d=d)
    A = spec.generate(stream(seed, stage=Stage.TOPOLOGY))
    sigma = build_sigma_from_topology(A, mixture, stream(seed, stage=Stage.SIGMA))
    writer = MatrixParser()
    rows = []
    for g, (label, size) in enumerate(sizes.items()):
        series = sample_gaussian_series(sigma, T, size, stream(seed, g, 0, Stage.COHORT))
        for i, subject in enumerate(series):
            subject_id = f"{label}-{i + 1:04d}"
            relative = Path(label) / f"{subject_id}.csv"
            writer.write(out_dir / relative, association_covariance(subject).entries)
            rows.append((subject_id, label, relative.as_posix()))
    manifest = ManifestParser().write(out_dir / "manifest.csv", rows)
    logger.info("wrote synthetic cohort of %d subjects to %s", len(rows), out_dir)
    return manifest
