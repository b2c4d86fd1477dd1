"""End-to-end pipeline wiring, config parsing, and exit codes."""

import numpy as np
import pytest

from dppseq.cli import ExperimentConfig, load_config, main
from dppseq.data import write_interactions
from dppseq.synthetic import make_synthetic_log


@pytest.fixture(scope="module")
def small_dataset(tmp_path_factory):
    path = tmp_path_factory.mktemp("data") / "interactions.csv"
    log = make_synthetic_log(n_users=30, n_items=50, n_categories=5, seq_len=14, seed=0)
    write_interactions(path, log)
    return path


def config_file(tmp_path, dataset, out, **extra):
    lines = {
        "dataset": str(dataset),
        "out": str(out),
        "T": 2,
        "k_core": 2,
        "kernel_dim": 8,
        "kernel_epochs": 10,
        "kernel_lr": 0.01,
        "scorer_dim": 8,
        "max_epochs": 3,
        "losses": "ce,cdsl",
        "seed": 7,
    }
    lines.update(extra)
    path = tmp_path / "config.txt"
    path.write_text("\n".join(f"{k}={v}" for k, v in lines.items()) + "\n")
    return path


class TestLoadConfig:
    def test_defaults_resolve_lengths(self, tmp_path):
        path = tmp_path / "c.txt"
        path.write_text("losses=ce,bpr,cdsl\n")
        config = load_config(str(path), {})
        assert (config.L, config.Z) == (5, 2)

    def test_default_losses_need_multiple_targets(self):
        # the full loss roster includes one that needs T > 1
        with pytest.raises(ValueError):
            load_config(None, {})

    def test_t3_defaults(self, tmp_path):
        path = tmp_path / "c.txt"
        path.write_text("T=3\n")
        config = load_config(str(path), {})
        assert (config.L, config.Z) == (6, 3)

    def test_overrides_win(self, tmp_path):
        path = tmp_path / "c.txt"
        path.write_text("seed=1\nT=3\n")
        config = load_config(str(path), {"seed": 9})
        assert config.seed == 9
        assert config.T == 3

    def test_unknown_key_rejected(self, tmp_path):
        path = tmp_path / "c.txt"
        path.write_text("bogus=1\n")
        with pytest.raises(ValueError):
            load_config(str(path), {})

    def test_dsl_with_t1_rejected(self, tmp_path):
        path = tmp_path / "c.txt"
        path.write_text("T=1\nlosses=dsl\n")
        with pytest.raises(ValueError):
            load_config(str(path), {})

    def test_hash_stable_and_sensitive(self):
        a = ExperimentConfig(T=2, seed=1).resolve()
        b = ExperimentConfig(T=2, seed=1).resolve()
        c = ExperimentConfig(T=2, seed=2).resolve()
        assert a.config_hash() == b.config_hash()
        assert a.config_hash() != c.config_hash()


class TestExitCodes:
    def test_missing_dataset_is_config_error(self, tmp_path):
        config = config_file(tmp_path, tmp_path / "nope.csv", tmp_path / "out")
        assert main(["--config", str(config), "prepare"]) == 2

    def test_bad_config_key(self, tmp_path):
        path = tmp_path / "c.txt"
        path.write_text("nope=1\n")
        assert main(["--config", str(path), "prepare"]) == 2

    def test_unprepared_stage_is_data_error(self, tmp_path, small_dataset):
        config = config_file(tmp_path, small_dataset, tmp_path / "out")
        assert main(["--config", str(config), "gen-sets"]) == 3
        assert main(["--config", str(config), "train", "--loss", "ce"]) == 3
        assert main(["--config", str(config), "report"]) == 3

    def test_malformed_csv_is_data_error(self, tmp_path):
        bad = tmp_path / "bad.csv"
        bad.write_text("user_id,item_id,timestamp,categories\nu1,i1,notatime,c1\n")
        config = config_file(tmp_path, bad, tmp_path / "out")
        assert main(["--config", str(config), "prepare"]) == 3


class TestPipeline:
    def run_all(self, tmp_path, small_dataset, out_name, seed=7):
        out = tmp_path / out_name
        config = config_file(tmp_path, small_dataset, out, seed=seed)
        base = ["--config", str(config)]
        assert main(base + ["prepare"]) == 0
        assert main(base + ["gen-sets"]) == 0
        assert main(base + ["train-kernel"]) == 0
        for loss in ("ce", "cdsl"):
            assert main(base + ["train", "--loss", loss]) == 0
            assert main(base + ["evaluate", "--loss", loss]) == 0
        assert main(base + ["report"]) == 0
        return out

    def test_end_to_end_artifacts(self, tmp_path, small_dataset):
        out = self.run_all(tmp_path, small_dataset, "out")
        for name in (
            "filtered.csv",
            "split_manifest.tsv",
            "instances.tsv",
            "diverse_sets.tsv",
            "kernel.txt",
            "kernel_objective.csv",
            "scorer_ce.txt",
            "scorer_cdsl.txt",
            "metrics_ce.csv",
            "metrics_cdsl.csv",
            "report.csv",
            "efficiency.csv",
            "validation_curves.csv",
        ):
            assert (out / name).exists(), name

        report = (out / "report.csv").read_text().splitlines()
        assert report[0].startswith("# config_hash=")
        assert report[1] == "loss,T,N,recall,ndcg,cc,f"
        data_rows = [r for r in report[2:] if r]
        assert len(data_rows) == 6  # 2 losses x 3 cutoffs
        for row in data_rows:
            values = row.split(",")[3:]
            assert all(0.0 <= float(v) <= 1.0 for v in values)

    def test_byte_identical_across_runs(self, tmp_path, small_dataset):
        # same out directory so the config stamp matches too
        out = self.run_all(tmp_path, small_dataset, "run")
        names = ("metrics_ce.csv", "metrics_cdsl.csv", "report.csv")
        first = {name: (out / name).read_bytes() for name in names}
        self.run_all(tmp_path, small_dataset, "run")
        for name in names:
            assert (out / name).read_bytes() == first[name]

    def test_seed_changes_metrics(self, tmp_path, small_dataset):
        out_a = self.run_all(tmp_path, small_dataset, "seed_a", seed=7)
        out_b = self.run_all(tmp_path, small_dataset, "seed_b", seed=8)
        a = (out_a / "instances.tsv").read_text().splitlines()[2:]
        b = (out_b / "instances.tsv").read_text().splitlines()[2:]
        assert a != b
