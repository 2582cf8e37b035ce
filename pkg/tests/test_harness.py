import json

import numpy as np
import pytest

from exdag import harness
from exdag.cli import main
from exdag.graphs import Dag
from exdag.harness import (
    CsvFormatError,
    ExperimentConfig,
    derive_seed,
    discover_file,
    ingest_csv,
    preset_graph,
    write_dataset_csv,
)
from exdag.sampling import bivariate_xor_model, sample_dataset


class TestPresets:
    def test_known_graphs(self):
        assert preset_graph("fork3") == Dag(3, frozenset({(0, 1), (0, 2)}))
        assert preset_graph("collider3") == Dag(3, frozenset({(1, 0), (2, 0)}))
        assert preset_graph("chain4").d == 4

    def test_unknown_graph(self):
        with pytest.raises(ValueError, match="unknown preset"):
            preset_graph("pentagon")

    def test_default_prior_covers_graph(self):
        g = preset_graph("chain4")
        prior = harness.default_binary_prior(g)
        assert prior.d == 4
        assert prior.cardinalities == (2, 2, 2, 2)


class TestDeriveSeed:
    def test_deterministic_and_distinct(self):
        assert derive_seed(1, 2, 3) == derive_seed(1, 2, 3)
        seeds = {derive_seed(0, i) for i in range(100)}
        assert len(seeds) == 100


class TestCsvRoundTrip:
    def test_lossless(self, tmp_path):
        g, prior = bivariate_xor_model()
        ds = sample_dataset(g, prior, 25, 3, 11)
        path = tmp_path / "data.csv"
        write_dataset_csv(ds, path)
        back = ingest_csv(path)
        assert back.d == ds.d
        assert back.cardinalities == ds.cardinalities
        assert back.true_graph == ds.true_graph
        assert back.seed == ds.seed
        assert all(np.array_equal(a, b) for a, b in zip(back.envs, ds.envs))

    def test_without_sidecar_infers_cardinalities(self, tmp_path):
        path = tmp_path / "plain.csv"
        path.write_text("env,sample,X1,X2\n0,0,0,2\n0,1,1,0\n1,0,0,1\n1,1,1,1\n")
        ds = ingest_csv(path)
        assert ds.cardinalities == (2, 3)
        assert ds.true_graph is None

    def test_empty_file(self, tmp_path):
        path = tmp_path / "empty.csv"
        path.write_text("")
        with pytest.raises(CsvFormatError, match="empty"):
            ingest_csv(path)

    def test_bad_header(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("foo,bar,X1\n0,0,1\n")
        with pytest.raises(CsvFormatError, match="header"):
            ingest_csv(path)

    def test_wrong_column_count_is_line_numbered(self, tmp_path):
        path = tmp_path / "short.csv"
        path.write_text("env,sample,X1,X2\n0,0,1,0\n0,1,1\n")
        with pytest.raises(CsvFormatError, match=":3:"):
            ingest_csv(path)

    def test_non_integer_value(self, tmp_path):
        path = tmp_path / "alpha.csv"
        path.write_text("env,sample,X1\n0,0,one\n")
        with pytest.raises(CsvFormatError, match="non-integer"):
            ingest_csv(path)

    def test_non_contiguous_samples(self, tmp_path):
        path = tmp_path / "gap.csv"
        path.write_text("env,sample,X1\n0,0,1\n0,2,0\n")
        with pytest.raises(CsvFormatError, match="non-contiguous"):
            ingest_csv(path)


class TestDiscoverFile:
    def test_round_trip_discovery(self, tmp_path):
        g, prior = bivariate_xor_model()
        ds = sample_dataset(g, prior, 4000, 2, 0)
        path = tmp_path / "biv.csv"
        write_dataset_csv(ds, path)
        result = discover_file(path)
        assert result.graph == g

    def test_single_sample_refused(self, tmp_path):
        g, prior = bivariate_xor_model()
        ds = sample_dataset(g, prior, 50, 1, 0)
        path = tmp_path / "one.csv"
        write_dataset_csv(ds, path)
        with pytest.raises(ValueError, match="2 samples"):
            discover_file(path)


class TestExperimentConfig:
    def test_validation(self):
        with pytest.raises(ValueError, match="repeats"):
            ExperimentConfig(kind="bivariate-sweep", repeats=0)
        with pytest.raises(ValueError, match="alpha"):
            ExperimentConfig(kind="bivariate-sweep", alpha=1.5)


class TestBivariateSweep:
    def test_deterministic_and_written(self, tmp_path):
        cfg = ExperimentConfig(
            kind="bivariate-sweep", env_grid=(200,), repeats=3, seed=0,
            out_dir=str(tmp_path),
        )
        rows1 = harness.run_bivariate_sweep(cfg)
        rows2 = harness.run_bivariate_sweep(cfg)
        assert rows1 == rows2
        assert (tmp_path / "bivariate_sweep.csv").exists()
        manifest = json.loads((tmp_path / "bivariate_sweep_manifest.json").read_text())
        assert manifest["config"]["seed"] == 0


class TestMultivariate:
    def test_small_run_structure(self, tmp_path):
        cfg = ExperimentConfig(
            kind="multivariate", env_grid=(400,), graphs=("fork3",), repeats=2,
            seed=0, out_dir=str(tmp_path),
        )
        rows = harness.run_multivariate(cfg)
        assert len(rows) == 1
        row = rows[0]
        assert row["graph"] == "fork3"
        assert set(row["edge_recovery"]) == {"0->1", "0->2"}
        assert 0.0 <= row["graph_recovery"] <= 1.0
        assert (tmp_path / "multivariate.csv").exists()

    def test_default_env_counts(self):
        assert harness.default_env_count("fork3", paper_scale=False) == 10_000
        assert harness.default_env_count("chain4", paper_scale=False) == 20_000
        assert harness.default_env_count("chain4", paper_scale=True) == 100_000


class TestOracleSweep:
    def test_d2_exhaustive(self):
        result = harness.run_oracle_sweep(d=2, models_per_graph=3, seed=0)
        assert result["n_dags"] == 3
        assert result["all_markov_ok"]
        assert result["icm_ci_sets_distinct"]

    def test_identifiability_d2(self):
        result = harness.run_identifiability(d=2)
        assert result["n_dags"] == 3
        assert result["icm_class_sizes"] == [1, 1, 1]
        # classically X->Y and X<-Y are indistinguishable
        assert result["iid_class_count"] == 2
        assert result["iid_class_sizes"] == [1, 2]


class TestCli:
    def test_simulate_then_discover(self, tmp_path, capsys):
        csv_path = tmp_path / "sim.csv"
        assert main([
            "simulate", "--graph", "fork3", "--envs", "400",
            "--seed", "3", "--out", str(csv_path),
        ]) == 0
        assert csv_path.exists()
        out_json = tmp_path / "res.json"
        assert main([
            "discover", "--in", str(csv_path), "--force", "--out", str(out_json),
        ]) == 0
        result = json.loads(out_json.read_text())
        assert Dag.from_dict(result["graph"]).d == 3

    def test_bivariate_command(self, tmp_path, capsys):
        csv_path = tmp_path / "biv.csv"
        main(["simulate", "--graph", '{"d": 2, "edges": [[0, 1]]}', "--prior", "xor",
              "--envs", "3000", "--seed", "0", "--out", str(csv_path)])
        capsys.readouterr()
        assert main(["bivariate", "--in", str(csv_path)]) == 0
        assert capsys.readouterr().out.strip() == "X->Y"

    def test_identifiability_command(self, capsys):
        assert main(["identifiability", "--d", "2"]) == 0
        out = capsys.readouterr().out
        assert "singletons=True" in out

    def test_config_file_with_flag_override(self, tmp_path, capsys):
        cfg = tmp_path / "run.cfg"
        cfg.write_text("graph=fork3\nenvs=200\nseed=1\nout=%s\n" % (tmp_path / "a.csv"))
        assert main(["--config", str(cfg), "simulate", "--envs", "150"]) == 0
        out = capsys.readouterr().out
        assert "150 environments" in out

    def test_sweep_bivariate_command(self, capsys):
        assert main([
            "sweep-bivariate", "--envs", "300", "--repeats", "2", "--seed", "0",
        ]) == 0
        assert "envs=" in capsys.readouterr().out
