"""Command-line surface.

    crowdbench validate|estimate|rarefy|adoption|compare --config <path>
               [--seed N] [--kernel K] [--out DIR] [--workers N]

Exit codes: 0 success, 2 validation failure, 3 estimation error. Every
command echoes the effective config into the output directory and writes
CSV tables with markdown mirrors; SVG plots are generated when requested
by the output formats.
"""

from __future__ import annotations

import sys
from pathlib import Path

import click

from . import report
from .adoption import critical_benefit, delta_from_rho, expected_cost
from .config import ProtocolRun, RunConfig, load_config
from .corpus import Corpus, build_corpus, load_corpus, partition_units, validate_corpus
from .embeddings import EmbeddingTable, coverage_check, fetch_embeddings_remote, load_embeddings
from .errors import ConfigError, CorpusError, CrowdBenchError, EmbeddingError, EstimationError
from .estimators import CrowdingEstimator, compare_protocols, spearman_rank
from .kernels import KernelSpec
from .rarefaction import default_grid, drift_pair, rarefaction_curve, relative_drift

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_ESTIMATION = 3


def common_options(f):
    f = click.option("--workers", type=int, default=None, help="Parallel workers for resampling.")(f)
    f = click.option("--out", "out_dir", type=click.Path(), default=None, help="Output directory.")(f)
    f = click.option("--kernel", type=str, default=None, help="Kernel kind override.")(f)
    f = click.option("--seed", type=int, default=None, help="Seed override.")(f)
    f = click.option("--config", "config_path", type=click.Path(), required=True)(f)
    return f


class CliFailure(click.ClickException):
    def __init__(self, message: str, code: int):
        super().__init__(message)
        self.exit_code = code


def _fail(message: str, code: int):
    raise CliFailure(message, code)


def _load_cfg(config_path, seed, kernel, out_dir, workers) -> RunConfig:
    try:
        return load_config(config_path, seed=seed, kernel=kernel, out_dir=out_dir, workers=workers)
    except ConfigError as exc:
        _fail(str(exc), EXIT_VALIDATION)


def _merged_corpus(cfg: RunConfig, model_corpora: list[Path] | None = None) -> Corpus:
    if cfg.human_corpus is None:
        _fail("config names no human corpus", EXIT_VALIDATION)
    paths = [cfg.human_corpus] + list(model_corpora if model_corpora is not None else cfg.model_corpora)
    if len(paths) < 2:
        _fail("config names no model corpora", EXIT_VALIDATION)
    responses = []
    try:
        for path in paths:
            responses.extend(load_corpus(path).responses)
        return build_corpus(responses)
    except (CorpusError, OSError) as exc:
        _fail(f"corpus load failed: {exc}", EXIT_VALIDATION)


def _spec(cfg: RunConfig) -> KernelSpec:
    return KernelSpec(kind=cfg.kernel, stopword_list_id=cfg.stopword_list)


def _resolve_table(cfg: RunConfig, corpus: Corpus) -> EmbeddingTable | None:
    spec = _spec(cfg)
    if not spec.needs_embeddings:
        return None
    try:
        if cfg.embeddings_path is not None:
            return load_embeddings(cfg.embeddings_path)
        if cfg.remote_endpoint is not None:
            texts = [(r.id, r.text) for r in corpus.responses]
            if spec.kind == "plot_synopsis":
                texts = [
                    (f"{r.id}#synopsis", r.synopsis)
                    for r in corpus.responses
                    if r.synopsis is not None
                ]
            return fetch_embeddings_remote(cfg.remote_endpoint, texts, cfg.remote_batch)
    except (EmbeddingError, OSError) as exc:
        _fail(f"embedding load failed: {exc}", EXIT_VALIDATION)
    _fail(f"kernel {spec.kind!r} needs embeddings but none are configured", EXIT_VALIDATION)


def _fit_estimator(cfg: RunConfig, corpus: Corpus, table, seed: int | None = None) -> CrowdingEstimator:
    est = CrowdingEstimator(
        kernel=cfg.kernel,
        stopword_list_id=cfg.stopword_list,
        replicates=cfg.replicates,
        ci_level=cfg.ci_level,
        seed=cfg.seed if seed is None else seed,
        kappa_h_ceiling=cfg.kappa_h_ceiling,
        max_flagged_share=cfg.max_flagged_share,
        human_source=cfg.human_source,
        n_jobs=cfg.workers,
    )
    try:
        return est.fit(corpus, table)
    except EstimationError as exc:
        _fail(str(exc), EXIT_ESTIMATION)


def _echo_config(cfg: RunConfig):
    cfg.out_dir.mkdir(parents=True, exist_ok=True)
    report.write_effective_config(cfg.out_dir, cfg.effective_dict())


@click.group()
@click.version_option(package_name="crowdbench")
def main():
    """Human-relative idea-space crowding analytics."""


@main.command()
@common_options
def validate(config_path, seed, kernel, out_dir, workers):
    """Check corpora and kernel resources; exit 2 on blocking issues."""
    cfg = _load_cfg(config_path, seed, kernel, out_dir, workers)
    corpus = _merged_corpus(cfg)
    _echo_config(cfg)
    result = validate_corpus(corpus)
    report.write_table(
        cfg.out_dir, "validation_report", report.VALIDATION_HEADER,
        report.validation_rows(result), cfg.formats,
    )
    problems = result.blocking_issues()

    spec = _spec(cfg)
    if spec.needs_embeddings:
        table = _resolve_table(cfg, corpus)
        coverage = coverage_check(corpus, table, spec)
        if not coverage.ok:
            shown = ", ".join(coverage.missing[:10])
            problems.append(
                f"{len(coverage.missing)} of {coverage.required} embeddings missing: {shown}"
            )
    elif spec.kind == "bucket":
        missing = [r.id for r in corpus.responses if r.bucket_id is None]
        if missing:
            problems.append(f"{len(missing)} responses lack bucket ids: {', '.join(missing[:10])}")

    for line in problems:
        click.echo(f"BLOCKING: {line}", err=True)
    if problems:
        _fail(f"{len(problems)} blocking issue(s); see validation_report", EXIT_VALIDATION)
    click.echo(f"validation passed: {len(result.groups)} groups, all estimable")


@main.command()
@common_options
def estimate(config_path, seed, kernel, out_dir, workers):
    """Estimate crowding statistics per condition and task family."""
    cfg = _load_cfg(config_path, seed, kernel, out_dir, workers)
    corpus = _merged_corpus(cfg)
    table = _resolve_table(cfg, corpus)
    _echo_config(cfg)
    fitted = _fit_estimator(cfg, corpus, table)

    by_source: dict[str, list] = {}
    for fam in fitted.family_estimates_:
        by_source.setdefault(fam.model_source, []).append(fam)
    for source, families in by_source.items():
        tag = report.slug(source)
        report.write_table(
            cfg.out_dir, f"estimates_{tag}", report.ESTIMATE_HEADER,
            report.estimate_rows(families), cfg.formats,
        )
        report.write_table(
            cfg.out_dir, f"estimate_variants_{tag}", report.VARIANTS_HEADER,
            report.variants_rows(families), cfg.formats,
        )
    if "svg" in cfg.formats:
        all_families = fitted.family_estimates_
        report.plot_rho_parity(all_families, cfg.out_dir / "rho_parity.svg")
        report.plot_kappa_diagonal(all_families, cfg.out_dir / "kappa_diagonal.svg")
    click.echo(
        f"estimated {len(fitted.condition_estimates_)} conditions across "
        f"{len(fitted.family_estimates_)} family/source pairs -> {cfg.out_dir}"
    )


@main.command()
@common_options
def rarefy(config_path, seed, kernel, out_dir, workers):
    """Rarefaction curves per source plus a relative-drift table."""
    cfg = _load_cfg(config_path, seed, kernel, out_dir, workers)
    corpus = _merged_corpus(cfg)
    table = _resolve_table(cfg, corpus)
    _echo_config(cfg)
    spec = _spec(cfg)

    curve_rows = []
    family_curves: dict[tuple[str, str], dict[int, list]] = {}
    try:
        for source in corpus.sources():
            for condition_id in corpus.condition_ids(source):
                units = partition_units(corpus, source, condition_id)
                grid = cfg.rarefaction_grid or default_grid(len(units))
                grid = [n for n in grid if n >= 2]
                if not grid:
                    continue
                curve = rarefaction_curve(
                    units, spec, grid, repeats=cfg.rarefaction_repeats,
                    seed=cfg.seed, table=table,
                )
                family = corpus.conditions[condition_id]["task_family"]
                for n, mean, (lo, hi) in zip(curve.grid, curve.means, curve.bands):
                    curve_rows.append(
                        [source, condition_id, n, mean, lo, hi, curve.repeats, curve.seed]
                    )
                    family_curves.setdefault((source, family), {}).setdefault(n, []).append(
                        (mean, lo, hi)
                    )
    except (CorpusError, EstimationError) as exc:
        _fail(str(exc), EXIT_VALIDATION)

    drift_rows = []
    for (source, family), per_n in sorted(family_curves.items()):
        grid = sorted(per_n)
        means = {n: sum(v[0] for v in per_n[n]) / len(per_n[n]) for n in grid}
        for n in grid:
            lo = sum(v[1] for v in per_n[n]) / len(per_n[n])
            hi = sum(v[2] for v in per_n[n]) / len(per_n[n])
            curve_rows.append(
                [source, f"family:{family}", n, means[n], lo, hi, cfg.rarefaction_repeats, cfg.seed]
            )
        if len(grid) < 2:
            continue
        n_low, n_high = drift_pair(grid)
        if means[n_high] == 0.0:
            continue
        drift = abs(means[n_high] - means[n_low]) / abs(means[n_high]) * 100.0
        drift_rows.append(
            [source, f"family:{family}", n_low, n_high, means[n_low], means[n_high], drift]
        )

    report.write_table(cfg.out_dir, "rarefaction_curves", report.CURVE_HEADER, curve_rows, cfg.formats)
    report.write_table(cfg.out_dir, "rarefaction_drift", report.DRIFT_HEADER, drift_rows, cfg.formats)
    if "svg" in cfg.formats:
        report.plot_curves(curve_rows, cfg.out_dir / "rarefaction.svg")
    click.echo(f"rarefaction written for {len(family_curves)} source/family pairs -> {cfg.out_dir}")


def _adoption_scenarios(cfg: RunConfig, delta, rho, kappa_h, label) -> list[dict]:
    scenarios = []
    for raw in cfg.scenarios:
        if not isinstance(raw, dict):
            raise ConfigError("each adoption scenario must be a mapping")
        try:
            if raw.get("delta") is not None:
                d = float(raw["delta"])
                if d < 0:
                    raise ConfigError(f"scenario delta must be >= 0, got {d}")
            else:
                d = delta_from_rho(float(raw["rho"]), float(raw["kappa_h"]))
        except KeyError as exc:
            raise ConfigError(f"scenario needs delta, or rho and kappa_h: missing {exc}") from exc
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        scenarios.append(
            {
                "model": str(raw.get("model", "-")),
                "task": str(raw.get("task", "-")),
                "delta": d,
                "gamma": float(raw.get("gamma", cfg.gamma)),
            }
        )
    if delta is not None or rho is not None:
        if delta is not None:
            d = float(delta)
        else:
            if kappa_h is None:
                raise ConfigError("--rho needs --kappa-h")
            d = delta_from_rho(float(rho), float(kappa_h))
        scenarios.append({"model": label, "task": "-", "delta": d, "gamma": cfg.gamma})
    return scenarios


@main.command()
@click.option("--config", "config_path", type=click.Path(), required=False)
@click.option("--seed", type=int, default=None)
@click.option("--kernel", type=str, default=None)
@click.option("--out", "out_dir", type=click.Path(), default=None)
@click.option("--workers", type=int, default=None)
@click.option("--delta", type=float, default=None, help="Explicit excess-crowding value.")
@click.option("--rho", type=float, default=None, help="Diversity ratio (with --kappa-h).")
@click.option("--kappa-h", "kappa_h", type=float, default=None)
@click.option("--label", type=str, default="cli", help="Label for explicit inputs.")
def adoption(config_path, seed, kernel, out_dir, workers, delta, rho, kappa_h, label):
    """Critical-benefit thresholds and expected adoption costs."""
    if config_path is not None:
        cfg = _load_cfg(config_path, seed, kernel, out_dir, workers)
    else:
        cfg = RunConfig()
        if out_dir is not None:
            cfg.out_dir = Path(out_dir)
    try:
        scenarios = _adoption_scenarios(cfg, delta, rho, kappa_h, label)
    except ConfigError as exc:
        _fail(str(exc), EXIT_VALIDATION)
    if not scenarios:
        _fail("no adoption scenarios: configure adoption.scenarios or pass --delta/--rho", EXIT_VALIDATION)
    _echo_config(cfg)

    threshold_header = ["model", "task", "delta"] + [f"bcrit_x{x}" for x in cfg.exposures]
    threshold_rows = [
        [sc["model"], sc["task"], sc["delta"]]
        + [critical_benefit(sc["delta"], x) for x in cfg.exposures]
        for sc in scenarios
    ]
    report.write_table(cfg.out_dir, "adoption_thresholds", threshold_header, threshold_rows, cfg.formats)

    cost_header = ["model", "task", "delta", "gamma", "population", "adoption_prob", "expected_cost"]
    cost_rows = [
        [
            sc["model"], sc["task"], sc["delta"], sc["gamma"], n, p,
            expected_cost(sc["gamma"], sc["delta"], n, p),
        ]
        for sc in scenarios
        for n in cfg.population
        for p in cfg.adoption_prob
    ]
    report.write_table(cfg.out_dir, "adoption_expected_cost", cost_header, cost_rows, cfg.formats)

    if "svg" in cfg.formats:
        curves = [
            {"label": f"{sc['model']}/{sc['task']}", "delta": sc["delta"]} for sc in scenarios
        ]
        report.plot_bcrit_curves(curves, cfg.exposures, cfg.out_dir / "bcrit_curves.svg")
    click.echo(f"adoption tables for {len(scenarios)} scenario(s) -> {cfg.out_dir}")


@main.command()
@common_options
def compare(config_path, seed, kernel, out_dir, workers):
    """Compare two generation protocols (plus an optional temperature grid)."""
    cfg = _load_cfg(config_path, seed, kernel, out_dir, workers)
    if cfg.compare_baseline is None or cfg.compare_variant is None:
        _fail("config has no compare.baseline / compare.variant runs", EXIT_VALIDATION)
    _echo_config(cfg)

    def run(protocol: ProtocolRun):
        corpus = _merged_corpus(cfg, protocol.model_corpora)
        table = _resolve_table(cfg, corpus)
        fitted = _fit_estimator(cfg, corpus, table, seed=protocol.seed)
        return {
            (fam.model_source, fam.task_family): fam for fam in fitted.family_estimates_
        }

    base = run(cfg.compare_baseline)
    variant = run(cfg.compare_variant)
    label_a = cfg.compare_baseline.label
    label_b = cfg.compare_variant.label

    shared = [key for key in base if key in variant]
    if not shared:
        _fail("the two runs share no (model, task family) pairs", EXIT_VALIDATION)
    rho_header = [
        "model", "task", "label_a", "rho_a", "label_b", "rho_b",
        "d_rho", "d_rho_lo", "d_rho_hi",
    ]
    rho_rows = []
    threshold_rows = []
    curve_specs = []
    try:
        for source, family in shared:
            cmp = compare_protocols(base[(source, family)], variant[(source, family)], label_a, label_b)
            rho_rows.append(
                [source, family, label_a, cmp.rho_a, label_b, cmp.rho_b,
                 cmp.d_rho.value, cmp.d_rho.lo, cmp.d_rho.hi]
            )
            delta_a = base[(source, family)].delta_of_aggregates
            delta_b = variant[(source, family)].delta_of_aggregates
            for x in cfg.exposures:
                threshold_rows.append(
                    [source, family, x,
                     critical_benefit(delta_a, x), critical_benefit(delta_b, x)]
                )
            curve_specs.append({"label": f"{source}/{family} {label_a}", "delta": delta_a, "style": "-"})
            curve_specs.append({"label": f"{source}/{family} {label_b}", "delta": delta_b, "style": "--"})
    except EstimationError as exc:
        _fail(str(exc), EXIT_ESTIMATION)

    report.write_table(cfg.out_dir, "compare_rho", rho_header, rho_rows, cfg.formats)
    report.write_table(
        cfg.out_dir, "compare_thresholds",
        ["model", "task", "exposure", f"bcrit_{report.slug(label_a)}", f"bcrit_{report.slug(label_b)}"],
        threshold_rows, cfg.formats,
    )

    if cfg.compare_grid:
        grid_results = []
        for protocol in cfg.compare_grid:
            if protocol.temperature is None:
                _fail(f"grid run {protocol.label!r} needs a temperature", EXIT_VALIDATION)
            grid_results.append((protocol.temperature, run(protocol)))
        keys = set(grid_results[0][1])
        for _, fams in grid_results[1:]:
            keys &= set(fams)
        mono_rows = []
        for source, family in sorted(keys):
            temps = [t for t, _ in grid_results]
            rhos = [fams[(source, family)].rho.value for _, fams in grid_results]
            deltas = [fams[(source, family)].delta.value for _, fams in grid_results]
            order = sorted(range(len(temps)), key=lambda i: temps[i])
            mono_rows.append(
                [source, family,
                 rhos[order[-1]] - rhos[order[0]], spearman_rank(temps, rhos),
                 deltas[order[-1]] - deltas[order[0]], spearman_rank(temps, deltas)]
            )
        report.write_table(
            cfg.out_dir, "temperature_monotonicity",
            ["model", "task", "d_rho", "spearman_t_rho", "d_delta", "spearman_t_delta"],
            mono_rows, cfg.formats,
        )

    if "svg" in cfg.formats:
        report.plot_bcrit_curves(curve_specs, cfg.exposures, cfg.out_dir / "bcrit_compare.svg")
    click.echo(f"compared {len(shared)} model/family pairs -> {cfg.out_dir}")


if __name__ == "__main__":
    sys.exit(main())
