"""Run configuration: one declarative file plus flag overrides.

The file is YAML (JSON is valid YAML, so either works). Relative paths
are resolved against the config file's directory. The effective config,
after overrides, is echoed into the output directory for provenance.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import yaml

from .errors import ConfigError
from .kernels import KERNEL_KINDS

DEFAULT_EXPOSURES = [1, 5, 10, 25]
OUTPUT_FORMATS = ("csv", "markdown", "svg")


@dataclass
class ProtocolRun:
    """One estimation run inside a compare config."""

    label: str
    model_corpora: list[Path]
    seed: int
    temperature: float | None = None


@dataclass
class RunConfig:
    human_corpus: Path | None = None
    model_corpora: list[Path] = field(default_factory=list)
    human_source: str = "human"
    embeddings_path: Path | None = None
    remote_endpoint: str | None = None
    remote_batch: int = 100
    kernel: str = "semantic"
    stopword_list: str = "english-v1"
    replicates: int = 1000
    ci_level: float = 0.95
    seed: int = 0
    kappa_h_ceiling: float = 1e-9
    max_flagged_share: float = 0.01
    rarefaction_grid: list[int] | None = None
    rarefaction_repeats: int = 200
    gamma: float = 1.0
    exposures: list[int] = field(default_factory=lambda: list(DEFAULT_EXPOSURES))
    population: list[int] = field(default_factory=lambda: [10, 100])
    adoption_prob: list[float] = field(default_factory=lambda: [0.1, 0.5, 0.9])
    scenarios: list[dict] = field(default_factory=list)
    compare_baseline: ProtocolRun | None = None
    compare_variant: ProtocolRun | None = None
    compare_grid: list[ProtocolRun] = field(default_factory=list)
    out_dir: Path = Path("out")
    formats: tuple[str, ...] = ("csv", "markdown", "svg")
    workers: int = 1

    def effective_dict(self) -> dict:
        def enc(value):
            if isinstance(value, Path):
                return str(value)
            if isinstance(value, ProtocolRun):
                return {
                    "label": value.label,
                    "model_corpora": [str(p) for p in value.model_corpora],
                    "seed": value.seed,
                    "temperature": value.temperature,
                }
            if isinstance(value, (list, tuple)):
                return [enc(v) for v in value]
            return value

        return {key: enc(value) for key, value in vars(self).items()}


def _as_path_list(value, base: Path, what: str) -> list[Path]:
    if value is None:
        return []
    if isinstance(value, (str, Path)):
        value = [value]
    if not isinstance(value, list):
        raise ConfigError(f"{what} must be a path or list of paths")
    return [(base / str(p)).resolve() if not Path(str(p)).is_absolute() else Path(str(p)) for p in value]


def _protocol_run(raw: dict, base: Path, default_label: str, default_seed: int) -> ProtocolRun:
    if not isinstance(raw, dict):
        raise ConfigError("each compare run must be a mapping")
    corpora = _as_path_list(raw.get("model_corpora") or raw.get("corpora"), base, "model_corpora")
    if not corpora:
        raise ConfigError(f"compare run {raw.get('label', default_label)!r} needs model corpora")
    return ProtocolRun(
        label=str(raw.get("label", default_label)),
        model_corpora=corpora,
        seed=int(raw.get("seed", default_seed)),
        temperature=None if raw.get("temperature") is None else float(raw["temperature"]),
    )


def load_config(
    path: str | Path,
    seed: int | None = None,
    kernel: str | None = None,
    out_dir: str | Path | None = None,
    workers: int | None = None,
) -> RunConfig:
    """Parse a config file and apply flag overrides."""
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file {path} does not exist")
    with path.open(encoding="utf-8") as fh:
        try:
            raw = yaml.safe_load(fh) or {}
        except yaml.YAMLError as exc:
            raise ConfigError(f"could not parse {path}: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigError(f"config root must be a mapping, got {type(raw).__name__}")
    base = path.parent
    cfg = RunConfig()

    if raw.get("human_corpus"):
        cfg.human_corpus = _as_path_list(raw["human_corpus"], base, "human_corpus")[0]
    cfg.model_corpora = _as_path_list(raw.get("model_corpora"), base, "model_corpora")
    cfg.human_source = str(raw.get("human_source", cfg.human_source))

    emb = raw.get("embeddings")
    if isinstance(emb, dict):
        cfg.remote_endpoint = emb.get("endpoint")
        cfg.remote_batch = int(emb.get("batch", cfg.remote_batch))
        if emb.get("path"):
            cfg.embeddings_path = _as_path_list(emb["path"], base, "embeddings")[0]
    elif emb:
        cfg.embeddings_path = _as_path_list(emb, base, "embeddings")[0]

    kern = raw.get("kernel", cfg.kernel)
    if isinstance(kern, dict):
        cfg.kernel = str(kern.get("kind", cfg.kernel))
        cfg.stopword_list = str(kern.get("stopwords", cfg.stopword_list))
    else:
        cfg.kernel = str(kern)
    cfg.stopword_list = str(raw.get("stopword_list", cfg.stopword_list))

    est = raw.get("estimator", {}) or {}
    cfg.replicates = int(est.get("replicates", cfg.replicates))
    cfg.ci_level = float(est.get("ci_level", cfg.ci_level))
    cfg.seed = int(est.get("seed", cfg.seed))
    cfg.kappa_h_ceiling = float(est.get("kappa_h_ceiling", cfg.kappa_h_ceiling))
    cfg.max_flagged_share = float(est.get("max_flagged_share", cfg.max_flagged_share))

    rare = raw.get("rarefaction", {}) or {}
    if rare.get("grid"):
        cfg.rarefaction_grid = [int(n) for n in rare["grid"]]
    cfg.rarefaction_repeats = int(rare.get("repeats", cfg.rarefaction_repeats))

    adoption = raw.get("adoption", {}) or {}
    cfg.gamma = float(adoption.get("gamma", cfg.gamma))
    if adoption.get("exposures"):
        cfg.exposures = [int(x) for x in adoption["exposures"]]
    if adoption.get("population"):
        cfg.population = [int(n) for n in adoption["population"]]
    if adoption.get("adoption_prob"):
        cfg.adoption_prob = [float(p) for p in adoption["adoption_prob"]]
    scenarios = adoption.get("scenarios", [])
    if not isinstance(scenarios, list):
        raise ConfigError("adoption.scenarios must be a list")
    cfg.scenarios = scenarios

    compare = raw.get("compare", {}) or {}
    if compare:
        if "baseline" not in compare or "variant" not in compare:
            raise ConfigError("compare needs 'baseline' and 'variant' runs")
        cfg.compare_baseline = _protocol_run(compare["baseline"], base, "baseline", cfg.seed + 1)
        cfg.compare_variant = _protocol_run(compare["variant"], base, "variant", cfg.seed + 2)
        cfg.compare_grid = [
            _protocol_run(run, base, f"grid-{i}", cfg.seed + 100 + i)
            for i, run in enumerate(compare.get("grid", []))
        ]

    output = raw.get("output", {}) or {}
    if output.get("dir"):
        cfg.out_dir = Path(output["dir"])
        if not cfg.out_dir.is_absolute():
            cfg.out_dir = base / cfg.out_dir
    formats = output.get("formats")
    if formats:
        bad = [f for f in formats if f not in OUTPUT_FORMATS]
        if bad:
            raise ConfigError(f"unknown output formats {bad}; choose from {OUTPUT_FORMATS}")
        cfg.formats = tuple(formats)
    cfg.workers = int(raw.get("workers", cfg.workers))

    if seed is not None:
        cfg.seed = int(seed)
    if kernel is not None:
        cfg.kernel = kernel
    if out_dir is not None:
        cfg.out_dir = Path(out_dir)
    if workers is not None:
        cfg.workers = int(workers)

    if cfg.kernel not in KERNEL_KINDS:
        raise ConfigError(f"unknown kernel {cfg.kernel!r}; expected one of {KERNEL_KINDS}")
    return cfg
