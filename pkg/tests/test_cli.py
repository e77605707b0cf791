import json
from pathlib import Path

import pytest
import yaml
from click.testing import CliRunner

from crowdbench import build_corpus, save_corpus, save_embeddings
from crowdbench.cli import main
from crowdbench.embeddings import EmbeddingTable
from crowdbench.report import ESTIMATE_HEADER
from conftest import uniform_mixture


def write_fixture(
    root: Path,
    model_points: int = 2,
    human_points: int = 4,
    n: int = 24,
    replicates: int = 150,
    kernel: str = "semantic",
    seed: int = 7,
    extra_models: dict | None = None,
):
    """Human corpus uniform over `human_points` ideas, one model corpus per
    entry of extra_models (plus a default 'model'), shared embedding file,
    and a config. Returns the config path."""
    root.mkdir(parents=True, exist_ok=True)
    humans, hvec = uniform_mixture(seed, n, human_points, "human")
    save_corpus(build_corpus(humans), root / "human.jsonl")
    vectors = dict(hvec)
    corpora = {"model": model_points}
    corpora.update(extra_models or {})
    model_paths = []
    for i, (source, points) in enumerate(corpora.items()):
        models, mvec = uniform_mixture(seed + 17 + i, n, points, source)
        save_corpus(build_corpus(models), root / f"{source}.jsonl")
        model_paths.append(f"{source}.jsonl")
        vectors.update(mvec)
    table = EmbeddingTable(dimension=8, model="synthetic")
    for key, vec in vectors.items():
        table.add(key, vec)
    save_embeddings(table, root / "embeddings.jsonl")
    config = {
        "human_corpus": "human.jsonl",
        "model_corpora": model_paths,
        "embeddings": "embeddings.jsonl",
        "kernel": kernel,
        "estimator": {"replicates": replicates, "seed": seed},
        "output": {"dir": "out", "formats": ["csv", "markdown"]},
    }
    config_path = root / "run.yaml"
    config_path.write_text(yaml.safe_dump(config), encoding="utf-8")
    return config_path


def read_csv(path: Path) -> list[list[str]]:
    return [line.split(",") for line in path.read_text().splitlines()]


def run_cli(args):
    return CliRunner().invoke(main, args, catch_exceptions=False)


class TestValidate:
    def test_complete_inputs_pass(self, tmp_path):
        config = write_fixture(tmp_path)
        result = run_cli(["validate", "--config", str(config)])
        assert result.exit_code == 0
        assert (tmp_path / "out" / "validation_report.csv").exists()

    def test_missing_embeddings_listed(self, tmp_path):
        config = write_fixture(tmp_path)
        emb = tmp_path / "embeddings.jsonl"
        lines = emb.read_text().splitlines()
        emb.write_text("\n".join(line for line in lines if '"human-0"' not in line) + "\n")
        result = run_cli(["validate", "--config", str(config)])
        assert result.exit_code == 2
        assert "human-0" in result.stderr

    def test_single_unit_condition_blocks(self, tmp_path):
        config = write_fixture(tmp_path)
        humans, hvec = uniform_mixture(1, 1, 1, "human", condition="lonely", id_prefix="lone")
        corpus_path = tmp_path / "human.jsonl"
        existing = corpus_path.read_text()
        save_corpus(build_corpus(humans), tmp_path / "extra.jsonl")
        corpus_path.write_text(existing + (tmp_path / "extra.jsonl").read_text())
        table_lines = (tmp_path / "embeddings.jsonl").read_text()
        with (tmp_path / "embeddings.jsonl").open("a") as fh:
            for key, vec in hvec.items():
                fh.write(json.dumps({"id": key, "vector": list(vec)}) + "\n")
        assert table_lines  # appended, not rewritten
        result = run_cli(["validate", "--config", str(config)])
        assert result.exit_code == 2
        assert "lonely" in result.stderr

    def test_bad_config_exits_2(self, tmp_path):
        config = tmp_path / "bad.yaml"
        config.write_text("kernel: nope\n")
        result = run_cli(["validate", "--config", str(config)])
        assert result.exit_code == 2


class TestEstimate:
    def test_below_parity_fixture(self, tmp_path):
        config = write_fixture(tmp_path, model_points=2, human_points=4)
        result = run_cli(["estimate", "--config", str(config)])
        assert result.exit_code == 0
        rows = read_csv(tmp_path / "out" / "estimates_model.csv")
        assert rows[0] == ESTIMATE_HEADER
        aggregate = [r for r in rows[1:] if r[0].startswith("aggregate:")]
        assert len(aggregate) == 1
        rho, rho_hi = float(aggregate[0][11]), float(aggregate[0][13])
        assert rho < 1.0
        assert rho_hi < 1.0

    def test_parity_fixture_covers_one(self, tmp_path):
        config = write_fixture(tmp_path, model_points=4, human_points=4)
        result = run_cli(["estimate", "--config", str(config)])
        assert result.exit_code == 0
        rows = read_csv(tmp_path / "out" / "estimates_model.csv")
        aggregate = [r for r in rows[1:] if r[0].startswith("aggregate:")][0]
        rho_lo, rho_hi = float(aggregate[12]), float(aggregate[13])
        assert rho_lo <= 1.0 <= rho_hi

    def test_header_is_pinned_byte_for_byte(self, tmp_path):
        config = write_fixture(tmp_path)
        run_cli(["estimate", "--config", str(config)])
        first_line = (tmp_path / "out" / "estimates_model.csv").read_text().splitlines()[0]
        assert first_line == (
            "condition,b,kappa_h,kappa_h_lo,kappa_h_hi,kappa_a,kappa_a_lo,kappa_a_hi,"
            "delta,delta_lo,delta_hi,rho,rho_lo,rho_hi,B,seed,kernel,stopword_list_id"
        )

    def test_variants_table_written(self, tmp_path):
        config = write_fixture(tmp_path)
        run_cli(["estimate", "--config", str(config)])
        rows = read_csv(tmp_path / "out" / "estimate_variants_model.csv")
        assert rows[0][:4] == ["scope", "task_family", "delta_meanofconds", "delta_of_aggregates"]
        assert any(r[0].startswith("aggregate:") for r in rows[1:])

    def test_markdown_mirrors_csv(self, tmp_path):
        config = write_fixture(tmp_path)
        run_cli(["estimate", "--config", str(config)])
        md = (tmp_path / "out" / "estimates_model.md").read_text()
        csv_rows = read_csv(tmp_path / "out" / "estimates_model.csv")
        for cell in csv_rows[1]:
            assert cell in md

    def test_byte_identical_reruns_and_worker_counts(self, tmp_path):
        config = write_fixture(tmp_path, n=16, replicates=120)
        run_cli(["estimate", "--config", str(config), "--out", str(tmp_path / "a")])
        run_cli(["estimate", "--config", str(config), "--out", str(tmp_path / "b")])
        run_cli(["estimate", "--config", str(config), "--out", str(tmp_path / "c"), "--workers", "2"])
        ref = (tmp_path / "a" / "estimates_model.csv").read_bytes()
        assert (tmp_path / "b" / "estimates_model.csv").read_bytes() == ref
        assert (tmp_path / "c" / "estimates_model.csv").read_bytes() == ref

    def test_effective_config_echoed(self, tmp_path):
        config = write_fixture(tmp_path)
        run_cli(["estimate", "--config", str(config), "--seed", "99"])
        echoed = json.loads((tmp_path / "out" / "config_effective.json").read_text())
        assert echoed["seed"] == 99
        assert echoed["kernel"] == "semantic"

    def test_svg_plots_emitted_when_requested(self, tmp_path):
        config = write_fixture(tmp_path)
        raw = yaml.safe_load(config.read_text())
        raw["output"]["formats"] = ["csv", "svg"]
        config.write_text(yaml.safe_dump(raw))
        result = run_cli(["estimate", "--config", str(config)])
        assert result.exit_code == 0
        for name in ("rho_parity.svg", "kappa_diagonal.svg"):
            body = (tmp_path / "out" / name).read_text()
            assert body.lstrip().startswith("<?xml")

    def test_bucket_kernel_needs_no_embeddings(self, tmp_path):
        config = write_fixture(tmp_path, kernel="bucket")
        (tmp_path / "embeddings.jsonl").unlink()
        raw = yaml.safe_load(config.read_text())
        del raw["embeddings"]
        config.write_text(yaml.safe_dump(raw))
        result = run_cli(["estimate", "--config", str(config)])
        assert result.exit_code == 0


class TestRarefy:
    def test_constant_fixture_zero_drift(self, tmp_path):
        config = write_fixture(tmp_path, model_points=1, human_points=1, n=20)
        result = run_cli(["rarefy", "--config", str(config)])
        assert result.exit_code == 0
        rows = read_csv(tmp_path / "out" / "rarefaction_drift.csv")
        assert len(rows) > 1
        for row in rows[1:]:
            assert float(row[6]) == 0.0

    def test_grid_exceeding_units_exits_2(self, tmp_path):
        config = write_fixture(tmp_path, n=12)
        raw = yaml.safe_load(config.read_text())
        raw["rarefaction"] = {"grid": [5, 30], "repeats": 10}
        config.write_text(yaml.safe_dump(raw))
        result = run_cli(["rarefy", "--config", str(config)])
        assert result.exit_code == 2

    def test_curves_table_schema(self, tmp_path):
        config = write_fixture(tmp_path, n=20)
        raw = yaml.safe_load(config.read_text())
        raw["rarefaction"] = {"grid": [5, 10, 15, 20], "repeats": 25}
        config.write_text(yaml.safe_dump(raw))
        run_cli(["rarefy", "--config", str(config)])
        rows = read_csv(tmp_path / "out" / "rarefaction_curves.csv")
        assert rows[0] == ["source", "scope", "n", "kappa_mean", "lo", "hi", "R", "seed"]
        scopes = {r[1] for r in rows[1:]}
        assert "c1" in scopes
        assert "family:fam" in scopes


class TestAdoption:
    def test_explicit_delta_zero(self, tmp_path):
        result = run_cli(["adoption", "--delta", "0", "--out", str(tmp_path / "o")])
        assert result.exit_code == 0
        rows = read_csv(tmp_path / "o" / "adoption_thresholds.csv")
        assert rows[0] == ["model", "task", "delta", "bcrit_x1", "bcrit_x5", "bcrit_x10", "bcrit_x25"]
        assert [float(v) for v in rows[1][3:]] == [0.0, 0.0, 0.0, 0.0]

    def test_rho_above_parity_clamps(self, tmp_path):
        result = run_cli(
            ["adoption", "--rho", "1.4", "--kappa-h", "0.5", "--out", str(tmp_path / "o")]
        )
        assert result.exit_code == 0
        rows = read_csv(tmp_path / "o" / "adoption_thresholds.csv")
        assert [float(v) for v in rows[1][3:]] == [0.0, 0.0, 0.0, 0.0]

    def test_scenarios_from_config(self, tmp_path):
        config = tmp_path / "adopt.yaml"
        config.write_text(
            yaml.safe_dump(
                {
                    "adoption": {
                        "scenarios": [
                            {"model": "m1", "task": "stories", "delta": 0.186},
                            {"model": "m2", "task": "slogans", "rho": 0.179, "kappa_h": 0.597},
                        ],
                        "population": [6],
                        "adoption_prob": [1.0],
                    },
                    "output": {"dir": "o", "formats": ["csv"]},
                }
            )
        )
        result = run_cli(["adoption", "--config", str(config)])
        assert result.exit_code == 0
        rows = read_csv(tmp_path / "o" / "adoption_thresholds.csv")
        assert len(rows) == 3
        assert float(rows[1][4]) == pytest.approx(0.605, abs=5e-4)
        cost_rows = read_csv(tmp_path / "o" / "adoption_expected_cost.csv")
        assert float(cost_rows[1][6]) == pytest.approx(0.605, abs=5e-4)

    def test_no_inputs_exits_2(self, tmp_path):
        config = tmp_path / "empty.yaml"
        config.write_text("{}\n")
        result = run_cli(["adoption", "--config", str(config)])
        assert result.exit_code == 2

    def test_rho_without_kappa_h_exits_2(self, tmp_path):
        result = run_cli(["adoption", "--rho", "0.5", "--out", str(tmp_path / "o")])
        assert result.exit_code == 2


def write_compare_fixture(root: Path, grid_points=None, variant_points=4, n=24, replicates=120):
    humans, hvec = uniform_mixture(3, n, 4, "human")
    save_corpus(build_corpus(humans), root / "human.jsonl")
    vectors = dict(hvec)
    models_a, avec = uniform_mixture(21, n, 2, "model", id_prefix="base")
    save_corpus(build_corpus(models_a), root / "baseline.jsonl")
    vectors.update(avec)
    models_b, bvec = uniform_mixture(22, n, variant_points, "model", id_prefix="var")
    save_corpus(build_corpus(models_b), root / "variant.jsonl")
    vectors.update(bvec)
    grid_runs = []
    for i, (temp, points) in enumerate(grid_points or []):
        models_g, gvec = uniform_mixture(40 + i, n, points, "model", id_prefix=f"g{i}")
        save_corpus(build_corpus(models_g), root / f"grid{i}.jsonl")
        vectors.update(gvec)
        grid_runs.append(
            {"label": f"T{temp}", "temperature": temp, "model_corpora": [f"grid{i}.jsonl"], "seed": 600 + i}
        )
    table = EmbeddingTable(dimension=8)
    for key, vec in vectors.items():
        table.add(key, vec)
    save_embeddings(table, root / "embeddings.jsonl")
    config = {
        "human_corpus": "human.jsonl",
        "embeddings": "embeddings.jsonl",
        "kernel": "semantic",
        "estimator": {"replicates": replicates, "seed": 5},
        "compare": {
            "baseline": {"label": "main", "model_corpora": ["baseline.jsonl"], "seed": 101},
            "variant": {"label": "persona", "model_corpora": ["variant.jsonl"], "seed": 202},
            **({"grid": grid_runs} if grid_runs else {}),
        },
        "output": {"dir": "out", "formats": ["csv"]},
    }
    path = root / "compare.yaml"
    path.write_text(yaml.safe_dump(config), encoding="utf-8")
    return path


class TestCompare:
    def test_identical_runs_zero_gap(self, tmp_path):
        config = write_compare_fixture(tmp_path, variant_points=2)
        raw = yaml.safe_load(config.read_text())
        raw["compare"]["variant"]["model_corpora"] = ["baseline.jsonl"]
        raw["compare"]["variant"]["seed"] = 101
        config.write_text(yaml.safe_dump(raw))
        result = run_cli(["compare", "--config", str(config)])
        assert result.exit_code == 0
        rows = read_csv(tmp_path / "out" / "compare_rho.csv")
        assert float(rows[1][6]) == 0.0

    def test_engineered_gap_recovered(self, tmp_path):
        # Baseline draws from 2 idea points, variant from 4 (the human
        # pool's support), so the true rho gap is 1.0 - 2/3 = 1/3.
        config = write_compare_fixture(tmp_path)
        result = run_cli(["compare", "--config", str(config)])
        assert result.exit_code == 0
        rows = read_csv(tmp_path / "out" / "compare_rho.csv")
        d_rho = float(rows[1][6])
        lo, hi = float(rows[1][7]), float(rows[1][8])
        assert d_rho == pytest.approx(1 / 3, abs=0.08)
        assert lo <= d_rho <= hi
        thresholds = read_csv(tmp_path / "out" / "compare_thresholds.csv")
        assert thresholds[0][:3] == ["model", "task", "exposure"]

    def test_temperature_grid_monotonicity(self, tmp_path):
        config = write_compare_fixture(
            tmp_path, grid_points=[(0.7, 2), (1.0, 3), (1.3, 4)]
        )
        result = run_cli(["compare", "--config", str(config)])
        assert result.exit_code == 0
        rows = read_csv(tmp_path / "out" / "temperature_monotonicity.csv")
        assert rows[0] == ["model", "task", "d_rho", "spearman_t_rho", "d_delta", "spearman_t_delta"]
        assert float(rows[1][3]) == 1.0
        assert float(rows[1][5]) == -1.0
        assert float(rows[1][2]) > 0

    def test_inverted_grid_spearman_half(self, tmp_path):
        config = write_compare_fixture(
            tmp_path, grid_points=[(0.7, 3), (1.0, 2), (1.3, 4)]
        )
        run_cli(["compare", "--config", str(config)])
        rows = read_csv(tmp_path / "out" / "temperature_monotonicity.csv")
        assert float(rows[1][3]) == 0.5

    def test_missing_compare_block_exits_2(self, tmp_path):
        config = write_fixture(tmp_path)
        result = run_cli(["compare", "--config", str(config)])
        assert result.exit_code == 2
