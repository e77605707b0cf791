"""Matched-sample bootstrap estimation of crowding statistics.

For one task condition the estimator resamples b = min(human units, model
generations) items per side, with replacement, participant-aware on the
human side (units first, then one response per drawn unit), and computes
the mean off-diagonal pairwise kernel value per side. Per replicate:

    kappa_h, kappa_a   mean pairwise crowding of the two resamples
    delta              max(0, kappa_a - kappa_h)
    rho                (1 - kappa_a) / (1 - kappa_h)

Point estimates are replicate means; intervals are percentile intervals.
Replicates where kappa_h reaches the 1 - epsilon ceiling leave rho
undefined and are excluded from rho statistics; too many such replicates
abort the estimate.

Each side of each replicate draws from its own derived stream keyed by
(seed, condition, side tag, replicate index), so results are byte-stable
under any worker count and the two sides stay independent even when they
share a unit pool.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np
from joblib import Parallel, delayed
from scipy.stats import rankdata
from sklearn.base import BaseEstimator
from sklearn.exceptions import NotFittedError

from .corpus import Corpus, Response, SamplingUnit, partition_units
from .errors import EstimationError
from .kernels import KernelSpec, char_trigrams, feature_kernel, resolve_feature, resolve_stopwords, tokens
from .rng import derive_rng


@dataclass(frozen=True)
class EstimatorConfig:
    """Bootstrap settings. The matched size rule is fixed to
    b = min(human units, model generations)."""

    replicates: int = 1000
    ci_level: float = 0.95
    seed: int = 0
    kappa_h_ceiling: float = 1e-9
    max_flagged_share: float = 0.01

    def __post_init__(self):
        if self.replicates < 100:
            raise ValueError("replicates must be >= 100 for interval output")
        if not 0.5 < self.ci_level < 1.0:
            raise ValueError("ci_level must lie in (0.5, 1)")
        if self.kappa_h_ceiling <= 0:
            raise ValueError("kappa_h_ceiling must be positive")


@dataclass(frozen=True)
class PointCI:
    value: float
    lo: float
    hi: float

    def contains(self, x: float) -> bool:
        return self.lo <= x <= self.hi


@dataclass
class ConditionEstimate:
    """Crowding statistics for one (model source, condition) comparison."""

    model_source: str
    condition_id: str
    task_family: str
    b: int
    kappa_h: PointCI
    kappa_a: PointCI
    delta: PointCI
    rho: PointCI
    delta_unclamped: float
    flagged: int
    kernel: KernelSpec
    config: EstimatorConfig
    replicate_values: dict[str, np.ndarray] = field(repr=False, default_factory=dict)


@dataclass
class FamilyEstimate:
    """Equal-weight aggregate of condition estimates within a task family.

    ``delta`` and ``rho`` are means of the per-condition point values
    (intervals from index-paired per-replicate means); the ``*_of_aggregates``
    variants are plug-ins computed from the aggregated kappa values. The two
    need not agree and both are reported.
    """

    task_family: str
    model_source: str
    conditions: tuple[ConditionEstimate, ...]
    kappa_h: PointCI
    kappa_a: PointCI
    delta: PointCI
    rho: PointCI
    delta_of_aggregates: float
    rho_of_aggregates: float
    kernel: KernelSpec
    config: EstimatorConfig
    replicate_values: dict[str, np.ndarray] = field(repr=False, default_factory=dict)


@dataclass(frozen=True)
class ProtocolComparison:
    """Difference of human-relative diversity between two estimate runs."""

    task_family: str
    label_a: str
    label_b: str
    rho_a: float
    rho_b: float
    d_rho: PointCI


def _offdiag_mean(rows: list[list[float]]) -> float:
    # Plain double loop; summation order is part of the contract so the
    # result is reproducible bit for bit against an independent oracle.
    n = len(rows)
    total = 0.0
    for i in range(n):
        row = rows[i]
        for j in range(n):
            if j != i:
                total += row[j]
    return total / (n * (n - 1))


def _features_for_items(items, spec: KernelSpec, table):
    feats = []
    for item in items:
        if isinstance(item, Response):
            feats.append(resolve_feature(spec, item, table))
        elif spec.kind in ("semantic", "plot_synopsis"):
            feats.append(np.asarray(item, dtype=float))
        elif spec.kind == "word_jaccard":
            feats.append(
                item if isinstance(item, frozenset) else tokens(item, resolve_stopwords(spec.stopword_list_id))
            )
        elif spec.kind == "char_trigram_jaccard":
            feats.append(item if isinstance(item, frozenset) else char_trigrams(item))
        else:
            feats.append(item if isinstance(item, tuple) else ("", int(item)))
    return feats


def _kernel_matrix(feats, spec: KernelSpec) -> np.ndarray:
    n = len(feats)
    m = np.empty((n, n), dtype=float)
    for i in range(n):
        for j in range(n):
            m[i, j] = feature_kernel(spec, feats[i], feats[j])
    return m


def pairwise_mean_crowding(items, spec: KernelSpec, table=None) -> float:
    """Mean off-diagonal pairwise kernel value over a list of items.

    Items may be Response objects or raw kernel inputs (unit vectors,
    strings, bucket ids). Equals (1/(n(n-1))) * sum_{i != j} K(x_i, x_j).
    """
    if len(items) < 2:
        raise EstimationError("pairwise crowding needs at least 2 items")
    feats = _features_for_items(items, spec, table)
    return _offdiag_mean(_kernel_matrix(feats, spec).tolist())


def _replicate_chunk(
    matrix_h: np.ndarray,
    unit_offsets: np.ndarray,
    unit_sizes: np.ndarray,
    matrix_a: np.ndarray,
    b: int,
    seed: int,
    condition_id: str,
    tags: tuple[str, str],
    r_start: int,
    r_stop: int,
) -> tuple[np.ndarray, np.ndarray]:
    n_units = len(unit_sizes)
    n_models = matrix_a.shape[0]
    kh = np.empty(r_stop - r_start)
    ka = np.empty(r_stop - r_start)
    for r in range(r_start, r_stop):
        rng_h = derive_rng(seed, "bootstrap", condition_id, tags[0], r)
        unit_idx = rng_h.integers(0, n_units, size=b)
        offsets = rng_h.integers(0, unit_sizes[unit_idx])
        resp_idx = unit_offsets[unit_idx] + offsets
        rng_a = derive_rng(seed, "bootstrap", condition_id, tags[1], r)
        model_idx = rng_a.integers(0, n_models, size=b)
        kh[r - r_start] = _offdiag_mean(matrix_h[np.ix_(resp_idx, resp_idx)].tolist())
        ka[r - r_start] = _offdiag_mean(matrix_a[np.ix_(model_idx, model_idx)].tolist())
    return kh, ka


def _percentile_ci(values: np.ndarray, ci_level: float) -> tuple[float, float]:
    alpha = 1.0 - ci_level
    lo, hi = np.quantile(values, [alpha / 2.0, 1.0 - alpha / 2.0])
    return float(lo), float(hi)


def _point_ci(values: np.ndarray, ci_level: float) -> PointCI:
    lo, hi = _percentile_ci(values, ci_level)
    return PointCI(value=float(np.mean(values)), lo=lo, hi=hi)


def _check_parity_consistency(replicates: dict[str, np.ndarray], kappa_h: float, kappa_a: float, context: str) -> None:
    # No-excess-crowding equivalence, checked per replicate and on the
    # plug-in point pair. The bootstrap means themselves are not subject to
    # the equivalence (clamping makes mean delta positive at parity).
    d, r, kh = replicates["delta"], replicates["rho"], replicates["kappa_h"]
    ok = np.isnan(r) | ((d == 0.0) == (r >= 1.0)) | (kh >= 1.0)
    if not bool(np.all(ok)):
        raise AssertionError(f"parity equivalence violated in a replicate ({context})")
    if kappa_h < 1.0:
        plug_delta = max(0.0, kappa_a - kappa_h)
        plug_rho = (1.0 - kappa_a) / (1.0 - kappa_h)
        if (plug_delta == 0.0) != (plug_rho >= 1.0):
            raise AssertionError(f"parity equivalence violated at point level ({context})")


def bootstrap_condition(
    humans: list[SamplingUnit],
    models: list[Response],
    spec: KernelSpec,
    cfg: EstimatorConfig,
    table=None,
    n_jobs: int = 1,
    stream_tags: tuple[str, str] = ("H", "A"),
) -> ConditionEstimate:
    """Matched-sample bootstrap estimate for one condition.

    ``stream_tags`` name the two sides' random streams; the defaults keep
    the sides independent even when estimating a pool against itself.
    """
    if len(humans) < 2:
        raise EstimationError("need at least 2 human sampling units")
    if len(models) < 2:
        raise EstimationError("need at least 2 model generations")
    units = sorted(humans, key=lambda u: u.unit_id)
    condition_id = units[0].responses[0].condition_id
    task_family = units[0].responses[0].task_family
    if any(r.condition_id != condition_id for u in units for r in u.responses):
        raise EstimationError("human units span multiple conditions")
    # A model-condition is a source plus its generation protocol; responses
    # from different protocols are different source distributions.
    model_source = models[0].source
    protocol = models[0].protocol
    models = sorted(models, key=lambda r: r.id)
    if any(m.condition_id != condition_id for m in models):
        raise EstimationError("model responses do not match the human condition")
    if any(m.source != model_source or m.protocol != protocol for m in models):
        raise EstimationError("model responses span multiple sources or protocols")
    source_label = model_source if protocol is None else f"{model_source}/{protocol}"

    flat: list[Response] = []
    unit_offsets = np.empty(len(units), dtype=np.int64)
    unit_sizes = np.empty(len(units), dtype=np.int64)
    for k, unit in enumerate(units):
        unit_offsets[k] = len(flat)
        unit_sizes[k] = len(unit.responses)
        flat.extend(unit.responses)

    matrix_h = _kernel_matrix(_features_for_items(flat, spec, table), spec)
    matrix_a = _kernel_matrix(_features_for_items(models, spec, table), spec)
    b = min(len(units), len(models))
    B = cfg.replicates

    if n_jobs == 1:
        kappa_h_reps, kappa_a_reps = _replicate_chunk(
            matrix_h, unit_offsets, unit_sizes, matrix_a, b,
            cfg.seed, condition_id, stream_tags, 0, B,
        )
    else:
        bounds = np.linspace(0, B, abs(n_jobs) * 4 + 1, dtype=int)
        chunks = Parallel(n_jobs=n_jobs)(
            delayed(_replicate_chunk)(
                matrix_h, unit_offsets, unit_sizes, matrix_a, b,
                cfg.seed, condition_id, stream_tags, int(lo), int(hi),
            )
            for lo, hi in zip(bounds[:-1], bounds[1:])
        )
        kappa_h_reps = np.concatenate([c[0] for c in chunks])
        kappa_a_reps = np.concatenate([c[1] for c in chunks])

    delta_reps = np.maximum(0.0, kappa_a_reps - kappa_h_reps)
    flagged = kappa_h_reps >= 1.0 - cfg.kappa_h_ceiling
    n_flagged = int(np.count_nonzero(flagged))
    if n_flagged > cfg.max_flagged_share * B:
        raise EstimationError(
            f"condition {condition_id!r}: kappa_h reached the {1.0 - cfg.kappa_h_ceiling} "
            f"ceiling in {n_flagged}/{B} replicates; rho is not identified"
        )
    ok = ~flagged
    if not np.any(ok):
        raise EstimationError(
            f"condition {condition_id!r}: rho undefined in every replicate"
        )
    rho_reps = np.full(B, np.nan)
    rho_reps[ok] = (1.0 - kappa_a_reps[ok]) / (1.0 - kappa_h_reps[ok])

    replicate_values = {
        "kappa_h": kappa_h_reps,
        "kappa_a": kappa_a_reps,
        "delta": delta_reps,
        "rho": rho_reps,
    }
    kappa_h = _point_ci(kappa_h_reps, cfg.ci_level)
    kappa_a = _point_ci(kappa_a_reps, cfg.ci_level)
    estimate = ConditionEstimate(
        model_source=source_label,
        condition_id=condition_id,
        task_family=task_family,
        b=b,
        kappa_h=kappa_h,
        kappa_a=kappa_a,
        delta=_point_ci(delta_reps, cfg.ci_level),
        rho=_point_ci(rho_reps[ok], cfg.ci_level),
        delta_unclamped=kappa_a.value - kappa_h.value,
        flagged=n_flagged,
        kernel=spec,
        config=cfg,
        replicate_values=replicate_values,
    )
    _check_parity_consistency(replicate_values, kappa_h.value, kappa_a.value, condition_id)
    return estimate


def aggregate_family(conditions: list[ConditionEstimate]) -> FamilyEstimate:
    """Equal-weight aggregation of condition estimates within one family.

    Point values are unweighted means of the condition points; intervals
    come from the per-replicate equal-weight means, replicates paired by
    index across conditions.
    """
    if not conditions:
        raise EstimationError("no condition estimates to aggregate")
    first = conditions[0]
    for c in conditions[1:]:
        if c.task_family != first.task_family:
            raise EstimationError("conditions span multiple task families")
        if c.model_source != first.model_source:
            raise EstimationError("conditions span multiple model sources")
        if c.config.replicates != first.config.replicates:
            raise EstimationError("conditions have mismatched replicate counts")

    agg_reps = {}
    for stat in ("kappa_h", "kappa_a", "delta", "rho"):
        stacked = np.vstack([c.replicate_values[stat] for c in conditions])
        # NaN rho in any condition leaves that replicate's aggregate undefined.
        agg_reps[stat] = stacked.mean(axis=0)

    def agg_point(stat: str) -> PointCI:
        point = float(np.mean([getattr(c, stat).value for c in conditions]))
        values = agg_reps[stat]
        values = values[~np.isnan(values)]
        lo, hi = _percentile_ci(values, first.config.ci_level)
        return PointCI(value=point, lo=lo, hi=hi)

    kappa_h = agg_point("kappa_h")
    kappa_a = agg_point("kappa_a")
    rho_of_aggregates = (1.0 - kappa_a.value) / (1.0 - kappa_h.value) if kappa_h.value < 1.0 else float("nan")
    return FamilyEstimate(
        task_family=first.task_family,
        model_source=first.model_source,
        conditions=tuple(conditions),
        kappa_h=kappa_h,
        kappa_a=kappa_a,
        delta=agg_point("delta"),
        rho=agg_point("rho"),
        delta_of_aggregates=max(0.0, kappa_a.value - kappa_h.value),
        rho_of_aggregates=rho_of_aggregates,
        kernel=first.kernel,
        config=first.config,
        replicate_values=agg_reps,
    )


def compare_protocols(a: FamilyEstimate, b: FamilyEstimate, label_a: str = "a", label_b: str = "b") -> ProtocolComparison:
    """Bootstrap difference of rho between two runs: rho_b - rho_a.

    The interval is the percentile interval of index-paired per-replicate
    differences; the runs should use independent seeds.
    """
    if a.task_family != b.task_family:
        raise EstimationError("protocol comparison requires the same task family")
    if a.kernel != b.kernel:
        raise EstimationError("protocol comparison requires the same kernel")
    if a.config.replicates != b.config.replicates:
        raise EstimationError(
            f"mismatched replicate counts: {a.config.replicates} vs {b.config.replicates}"
        )
    diffs = b.replicate_values["rho"] - a.replicate_values["rho"]
    diffs = diffs[~np.isnan(diffs)]
    if diffs.size == 0:
        raise EstimationError("no jointly defined rho replicates to compare")
    lo, hi = _percentile_ci(diffs, a.config.ci_level)
    return ProtocolComparison(
        task_family=a.task_family,
        label_a=label_a,
        label_b=label_b,
        rho_a=a.rho.value,
        rho_b=b.rho.value,
        d_rho=PointCI(value=b.rho.value - a.rho.value, lo=lo, hi=hi),
    )


def spearman_rank(xs, ys) -> float | None:
    """Spearman rank correlation with average ranks for ties.

    Returns None when either input has no rank variance (the correlation
    is undefined there, not zero).
    """
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    if xs.shape != ys.shape:
        raise ValueError(f"length mismatch: {xs.shape[0]} vs {ys.shape[0]}")
    if xs.size < 2:
        raise ValueError("need at least 2 pairs")
    rx = rankdata(xs)
    ry = rankdata(ys)
    if np.ptp(rx) == 0 or np.ptp(ry) == 0:
        return None
    rx = rx - rx.mean()
    ry = ry - ry.mean()
    return float(np.dot(rx, ry) / np.sqrt(np.dot(rx, rx) * np.dot(ry, ry)))


class CrowdingEstimator(BaseEstimator):
    """Corpus-level crowding estimator with a scikit-learn style surface.

    Fit on a corpus containing a human baseline plus one or more model
    sources; every non-human source is estimated against the human
    baseline, per condition, then aggregated per task family.

    Attributes set by fit: ``condition_estimates_`` and ``family_estimates_``.
    """

    def __init__(
        self,
        kernel: str | KernelSpec = "semantic",
        stopword_list_id: str = "english-v1",
        replicates: int = 1000,
        ci_level: float = 0.95,
        seed: int = 0,
        kappa_h_ceiling: float = 1e-9,
        max_flagged_share: float = 0.01,
        human_source: str = "human",
        n_jobs: int = 1,
    ):
        self.kernel = kernel
        self.stopword_list_id = stopword_list_id
        self.replicates = replicates
        self.ci_level = ci_level
        self.seed = seed
        self.kappa_h_ceiling = kappa_h_ceiling
        self.max_flagged_share = max_flagged_share
        self.human_source = human_source
        self.n_jobs = n_jobs

    def _spec(self) -> KernelSpec:
        if isinstance(self.kernel, KernelSpec):
            return replace(self.kernel, stopword_list_id=self.stopword_list_id)
        return KernelSpec(kind=self.kernel, stopword_list_id=self.stopword_list_id)

    def _config(self) -> EstimatorConfig:
        return EstimatorConfig(
            replicates=self.replicates,
            ci_level=self.ci_level,
            seed=self.seed,
            kappa_h_ceiling=self.kappa_h_ceiling,
            max_flagged_share=self.max_flagged_share,
        )

    def fit(self, corpus: Corpus, embeddings=None):
        """Estimate every model source in the corpus against the human baseline."""
        spec = self._spec()
        cfg = self._config()
        if self.human_source not in corpus.sources():
            raise EstimationError(f"corpus has no source {self.human_source!r}")
        # Each (source, protocol) pair is its own model-condition pool.
        model_pools = list(
            dict.fromkeys(
                (r.source, r.protocol)
                for r in corpus.responses
                if r.source != self.human_source
            )
        )
        if not model_pools:
            raise EstimationError("corpus has no model sources to estimate")

        condition_estimates = []
        family_estimates = []
        human_conditions = corpus.condition_ids(self.human_source)
        for source, protocol in model_pools:
            pool = [
                r for r in corpus.responses
                if r.source == source and r.protocol == protocol
            ]
            shared = [
                c for c in human_conditions
                if any(r.condition_id == c for r in pool)
            ]
            if not shared:
                raise EstimationError(
                    f"source {source!r} shares no conditions with {self.human_source!r}"
                )
            per_family: dict[str, list[ConditionEstimate]] = {}
            for condition_id in shared:
                humans = partition_units(corpus, self.human_source, condition_id)
                models = [r for r in pool if r.condition_id == condition_id]
                est = bootstrap_condition(
                    humans, models, spec, cfg, table=embeddings, n_jobs=self.n_jobs
                )
                condition_estimates.append(est)
                per_family.setdefault(est.task_family, []).append(est)
            for family_conditions in per_family.values():
                family_estimates.append(aggregate_family(family_conditions))

        self.condition_estimates_ = condition_estimates
        self.family_estimates_ = family_estimates
        return self

    def family(self, model_source: str, task_family: str) -> FamilyEstimate:
        if not hasattr(self, "family_estimates_"):
            raise NotFittedError("call fit before querying estimates")
        for fam in self.family_estimates_:
            if fam.model_source == model_source and fam.task_family == task_family:
                return fam
        raise KeyError(f"no family estimate for ({model_source!r}, {task_family!r})")
