"""Table and plot emission.

Tables are the contract: every number a command produces lands in a CSV
(with a markdown mirror); plots are a convenience rendered from the same
rows. Writes are atomic (temp file then rename) and byte-deterministic
for a given config and seed.
"""

from __future__ import annotations

import csv
import io
import json
import os
import tempfile
from pathlib import Path

ESTIMATE_HEADER = [
    "condition", "b",
    "kappa_h", "kappa_h_lo", "kappa_h_hi",
    "kappa_a", "kappa_a_lo", "kappa_a_hi",
    "delta", "delta_lo", "delta_hi",
    "rho", "rho_lo", "rho_hi",
    "B", "seed", "kernel", "stopword_list_id",
]

VARIANTS_HEADER = [
    "scope", "task_family",
    "delta_meanofconds", "delta_of_aggregates", "delta_unclamped",
    "rho_meanofconds", "rho_of_aggregates",
]

CURVE_HEADER = ["source", "scope", "n", "kappa_mean", "lo", "hi", "R", "seed"]

DRIFT_HEADER = [
    "source", "scope", "n_low", "n_high", "kappa_low", "kappa_high", "relative_drift_pct",
]

VALIDATION_HEADER = [
    "source", "condition", "task_family", "units", "responses",
    "unique_texts", "estimable", "issues",
]


def fmt(value) -> str:
    """Render one cell. Floats use shortest-ish fixed significant digits so
    reruns are byte-identical."""
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        if value != value:  # NaN
            return ""
        return format(value, ".10g")
    return str(value)


def atomic_write_text(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_csv(path: Path, header: list[str], rows: list[list]) -> None:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([fmt(cell) for cell in row])
    atomic_write_text(path, buf.getvalue())


def write_markdown(path: Path, header: list[str], rows: list[list]) -> None:
    lines = ["| " + " | ".join(header) + " |", "| " + " | ".join("---" for _ in header) + " |"]
    for row in rows:
        lines.append("| " + " | ".join(fmt(cell) for cell in row) + " |")
    atomic_write_text(path, "\n".join(lines) + "\n")


def write_table(out_dir: Path, name: str, header: list[str], rows: list[list], formats) -> list[Path]:
    written = []
    if "csv" in formats:
        path = out_dir / f"{name}.csv"
        write_csv(path, header, rows)
        written.append(path)
    if "markdown" in formats:
        path = out_dir / f"{name}.md"
        write_markdown(path, header, rows)
        written.append(path)
    return written


def write_effective_config(out_dir: Path, config: dict) -> Path:
    path = out_dir / "config_effective.json"
    atomic_write_text(path, json.dumps(config, indent=2, sort_keys=True) + "\n")
    return path


def slug(label: str) -> str:
    return "".join(ch if ch.isalnum() or ch in "-_" else "-" for ch in label)


def estimate_rows(families) -> list[list]:
    """Rows in the pinned estimate schema: one per condition, then one
    aggregate row per task family."""
    rows = []
    for fam in families:
        cfg = fam.config
        for est in fam.conditions:
            rows.append([
                est.condition_id, est.b,
                est.kappa_h.value, est.kappa_h.lo, est.kappa_h.hi,
                est.kappa_a.value, est.kappa_a.lo, est.kappa_a.hi,
                est.delta.value, est.delta.lo, est.delta.hi,
                est.rho.value, est.rho.lo, est.rho.hi,
                cfg.replicates, cfg.seed, est.kernel.kind, est.kernel.stopword_list_id,
            ])
        rows.append([
            f"aggregate:{fam.task_family}", None,
            fam.kappa_h.value, fam.kappa_h.lo, fam.kappa_h.hi,
            fam.kappa_a.value, fam.kappa_a.lo, fam.kappa_a.hi,
            fam.delta.value, fam.delta.lo, fam.delta.hi,
            fam.rho.value, fam.rho.lo, fam.rho.hi,
            cfg.replicates, cfg.seed, fam.kernel.kind, fam.kernel.stopword_list_id,
        ])
    return rows


def variants_rows(families) -> list[list]:
    """Aggregation-variant rows: the plug-in on aggregated kappas next to
    the equal-weight mean of per-condition statistics."""
    rows = []
    for fam in families:
        for est in fam.conditions:
            rows.append([
                est.condition_id, fam.task_family,
                est.delta.value, None, est.delta_unclamped,
                est.rho.value, None,
            ])
        rows.append([
            f"aggregate:{fam.task_family}", fam.task_family,
            fam.delta.value, fam.delta_of_aggregates,
            fam.kappa_a.value - fam.kappa_h.value,
            fam.rho.value, fam.rho_of_aggregates,
        ])
    return rows


def validation_rows(report) -> list[list]:
    return [
        [
            g.source, g.condition_id, g.task_family, g.unit_count,
            g.response_count, g.unique_text_count, g.estimable,
            "; ".join(g.issues),
        ]
        for g in report.groups
    ]


# -- plots -------------------------------------------------------------

def _matplotlib():
    import matplotlib

    matplotlib.use("Agg")
    matplotlib.rcParams["svg.hashsalt"] = "crowdbench"
    import matplotlib.pyplot as plt

    return plt


def _save(fig, path: Path) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, format="svg", metadata={"Date": None})


def plot_rho_parity(families, path: Path) -> None:
    """Family-level diversity ratios with interval bars and the parity line."""
    plt = _matplotlib()
    fig, ax = plt.subplots(figsize=(7, 4))
    labels = [f"{f.model_source}\n{f.task_family}" for f in families]
    xs = range(len(families))
    values = [f.rho.value for f in families]
    err_lo = [f.rho.value - f.rho.lo for f in families]
    err_hi = [f.rho.hi - f.rho.value for f in families]
    ax.errorbar(xs, values, yerr=[err_lo, err_hi], fmt="o", capsize=4)
    ax.axhline(1.0, linestyle="--", color="gray", label="parity (rho = 1)")
    ax.set_xticks(list(xs))
    ax.set_xticklabels(labels, fontsize=8)
    ax.set_ylabel("human-relative diversity ratio")
    ax.legend(loc="best")
    fig.tight_layout()
    _save(fig, path)
    plt.close(fig)


def plot_kappa_diagonal(families, path: Path) -> None:
    """Human vs model crowding; points above the diagonal have excess."""
    plt = _matplotlib()
    fig, ax = plt.subplots(figsize=(5, 5))
    for fam in families:
        ax.scatter(fam.kappa_h.value, fam.kappa_a.value, label=f"{fam.model_source}/{fam.task_family}")
    lim_lo = 0.0
    lim_hi = 1.0
    ax.plot([lim_lo, lim_hi], [lim_lo, lim_hi], linestyle="--", color="gray")
    ax.set_xlabel("human crowding")
    ax.set_ylabel("model crowding")
    ax.set_xlim(lim_lo, lim_hi)
    ax.set_ylim(lim_lo, lim_hi)
    ax.legend(fontsize=7, loc="lower right")
    fig.tight_layout()
    _save(fig, path)
    plt.close(fig)


def plot_curves(curve_rows: list[list], path: Path) -> None:
    """Rarefaction curves grouped by (source, scope)."""
    plt = _matplotlib()
    fig, ax = plt.subplots(figsize=(7, 4))
    series: dict[tuple, list] = {}
    for source, scope, n, mean, lo, hi, _r, _seed in curve_rows:
        series.setdefault((source, scope), []).append((n, mean, lo, hi))
    for (source, scope), points in series.items():
        points.sort()
        ns = [p[0] for p in points]
        means = [p[1] for p in points]
        ax.plot(ns, means, marker="o", label=f"{source}/{scope}")
        ax.fill_between(ns, [p[2] for p in points], [p[3] for p in points], alpha=0.15)
    ax.set_xlabel("subsampled units n")
    ax.set_ylabel("mean pairwise crowding")
    ax.legend(fontsize=7)
    fig.tight_layout()
    _save(fig, path)
    plt.close(fig)


def plot_bcrit_curves(scenarios: list[dict], exposures: list[int], path: Path) -> None:
    """Critical-benefit curves, one per scenario; dashed for variants."""
    from .adoption import critical_benefit

    plt = _matplotlib()
    fig, ax = plt.subplots(figsize=(7, 4))
    grid = list(range(0, max(exposures) + 1))
    for sc in scenarios:
        ys = [critical_benefit(sc["delta"], x) for x in grid]
        ax.plot(grid, ys, linestyle=sc.get("style", "-"), label=sc["label"])
    ax.set_xlabel("exposure X (other adopters)")
    ax.set_ylabel("critical benefit / distinctiveness value")
    ax.set_ylim(0.0, 1.02)
    ax.legend(fontsize=7)
    fig.tight_layout()
    _save(fig, path)
    plt.close(fig)
