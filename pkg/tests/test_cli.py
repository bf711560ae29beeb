import json

import numpy as np
import pytest

from lapinfer import __version__
from lapinfer.cli import create_argparser, main
from lapinfer.parser import ManifestParser, MatrixParser
from lapinfer.simulate.study import POWER_COLUMNS


@pytest.fixture
def cohort_manifest(tmp_path):
    out = tmp_path / "cohort"
    code = main(["simulate", "cohort", "--sizes", "a=6", "b=6", "--d", "4", "--T", "30", "--seed", "3",
                 "--out", str(out)])
    assert code == 0
    return out / "manifest.csv"


@pytest.fixture
def twin_manifest(tmp_path, rng):
    """Two groups listing the same four files under different subject ids."""
    files = []
    for i in range(4):
        w = np.triu(rng.uniform(0.1, 1.0, size=(4, 4)), k=1)
        files.append(MatrixParser().write(tmp_path / f"s{i}.csv", w + w.T))
    rows = [(f"{label}-{i}", label, path.name) for label in ("a", "b") for i, path in enumerate(files)]
    return ManifestParser().write(tmp_path / "manifest.csv", rows)


def read_json(path):
    return json.loads(path.read_text(encoding="utf-8"))


class TestArgparser:
    def test_version(self, capsys):
        with pytest.raises(SystemExit) as info:
            create_argparser().parse_args(["--version"])
        assert info.value.code == 0
        assert __version__ in capsys.readouterr().out

    def test_one_sample_needs_reference(self, cohort_manifest, tmp_path):
        with pytest.raises(SystemExit) as info:
            main(["test", "one", str(cohort_manifest), "--out", str(tmp_path / "r.json")])
        assert info.value.code == 2

    def test_no_command_prints_help(self, capsys):
        assert main([]) == 2
        assert "usage" in capsys.readouterr().out


class TestCohortCommands:
    def test_cohort_writes_manifest_and_record(self, cohort_manifest):
        frame = ManifestParser().read(cohort_manifest)
        assert list(frame["group"].value_counts().sort_index()) == [6, 6]
        record = read_json(cohort_manifest.parent / "manifest.csv.run.json")
        assert record["config"]["sizes"] == {"a": 6, "b": 6}
        assert len(record["run_digest"]) == 64

    def test_bad_sizes(self, tmp_path, capsys):
        assert main(["simulate", "cohort", "--sizes", "a:6", "--out", str(tmp_path)]) == 3
        assert "LABEL=N" in capsys.readouterr().err

    def test_ingest_check(self, cohort_manifest, capsys):
        assert main(["ingest-check", str(cohort_manifest)]) == 0
        out = capsys.readouterr().out
        assert "d = 4" in out
        assert "a: n = 6" in out

    def test_header_flag_skips_one_line(self, tmp_path, rng, capsys):
        rows = []
        for i in range(3):
            w = np.triu(rng.uniform(0.1, 1.0, size=(4, 4)), k=1)
            body = MatrixParser().format(w + w.T)
            (tmp_path / f"s{i}.csv").write_text("v1,v2,v3,v4\n" + body, encoding="utf-8")
            rows.append((f"s{i}", "a", f"s{i}.csv"))
        manifest = str(ManifestParser().write(tmp_path / "manifest.csv", rows))
        assert main(["ingest-check", manifest, "--header"]) == 0
        assert "a: n = 3" in capsys.readouterr().out
        assert main(["ingest-check", manifest]) == 3

    def test_declared_dimension_mismatch(self, cohort_manifest, capsys):
        assert main(["ingest-check", str(cohort_manifest), "--dim", "5"]) == 3
        assert "row 1" in capsys.readouterr().err

    def test_missing_manifest(self, tmp_path, capsys):
        assert main(["ingest-check", str(tmp_path / "nowhere.csv")]) == 3
        assert "manifest not found" in capsys.readouterr().err

    def test_mean(self, cohort_manifest, tmp_path):
        out = tmp_path / "means"
        assert main(["mean", str(cohort_manifest), "--out", str(out)]) == 0
        mean = MatrixParser().read(out / "a_mean.csv", dim=4)
        assert np.max(np.abs(mean.sum(axis=1))) <= 1e-10
        first = (out / "b_mean.csv").read_text(encoding="utf-8").splitlines()[0]
        summary = read_json(out / "summary.json")
        assert first == f"# run_digest={summary['run_digest']}"
        assert summary["groups"] == {"a": 6, "b": 6}
        assert (out / "summary.json.run.json").is_file()

    def test_binarize(self, cohort_manifest, tmp_path):
        out = tmp_path / "masks"
        assert main(["binarize", str(cohort_manifest), "--q", "50", "--out", str(out)]) == 0
        mask = MatrixParser().read(out / "b" / "0006.csv", dim=4)
        assert set(np.unique(mask)) <= {0.0, 1.0}
        assert len(read_json(out / "summary.json")["edges_above"]["a"]) == 6


class TestTestCommand:
    def test_identical_groups(self, twin_manifest, tmp_path):
        report_path = tmp_path / "two.json"
        assert main(["test", "two", str(twin_manifest), "--groups", "a", "b", "--out", str(report_path)]) == 0
        report = read_json(report_path)
        assert report["statistic"] == 0.0
        assert report["p_value"] == 1.0
        assert report["reject"] is False
        assert report["version"] == __version__
        sidecar = read_json(tmp_path / "two.json.run.json")
        assert sidecar["run_digest"] == report["run_digest"]

    def test_report_is_reproducible(self, cohort_manifest, tmp_path):
        args = ["test", "k", str(cohort_manifest), "--seed", "9"]
        assert main(args + ["--out", str(tmp_path / "first.json")]) == 0
        assert main(args + ["--out", str(tmp_path / "second.json")]) == 0
        first, second = read_json(tmp_path / "first.json"), read_json(tmp_path / "second.json")
        assert first == second
        assert first["dof"] == 6
        assert first["group_labels"] == ["a", "b"]

    def test_one_sample_against_group_mean(self, cohort_manifest, tmp_path):
        means = tmp_path / "means"
        assert main(["mean", str(cohort_manifest), "--out", str(means)]) == 0
        report_path = tmp_path / "one.json"
        code = main(["test", "one", str(cohort_manifest), "--group", "a",
                     "--lambda0", str(means / "a_mean.csv"), "--out", str(report_path)])
        assert code == 0
        assert read_json(report_path)["p_value"] > 0.99

    def test_unknown_group(self, cohort_manifest, tmp_path, capsys):
        code = main(["test", "two", str(cohort_manifest), "--groups", "a", "z", "--out", str(tmp_path / "r.json")])
        assert code == 3
        assert "unknown group 'z'" in capsys.readouterr().err

    def test_singular_covariance_without_regularisation(self, tmp_path, rng):
        # constant within each group, different between groups: the pooled covariance is zero
        rows = []
        for label in ("a", "b"):
            w = np.triu(rng.integers(1, 8, size=(3, 3)) / 4.0, k=1)
            path = MatrixParser().write(tmp_path / f"{label}.csv", w + w.T)
            rows += [(f"{label}-{i}", label, path.name) for i in range(3)]
        manifest = ManifestParser().write(tmp_path / "manifest.csv", rows)
        code = main(["test", "two", str(manifest), "--no-threshold", "--no-pd", "--out", str(tmp_path / "r.json")])
        assert code == 4
        assert not (tmp_path / "r.json").exists()


class TestMassUnivariateCommand:
    def test_outputs(self, cohort_manifest, tmp_path):
        out = tmp_path / "edges"
        assert main(["massuni", str(cohort_manifest), "--correction", "none", "--out", str(out)]) == 0
        p = MatrixParser().read(out / "pvalues.csv", dim=4)
        np.testing.assert_array_equal(p, p.T)
        assert np.all((p >= 0) & (p <= 1))
        for name in ("mask.csv", "mask_uncorrected.csv", "summary.json", "summary.json.run.json"):
            assert (out / name).is_file()
        summary = read_json(out / "summary.json")
        assert summary["n_tests"] == 6
        assert summary["correction"] == "none"

    def test_takes_no_estimator_flags(self, cohort_manifest, tmp_path):
        for flag in (["--delta", "1.0"], ["--no-threshold"], ["--no-pd"]):
            with pytest.raises(SystemExit) as info:
                main(["massuni", str(cohort_manifest), "--out", str(tmp_path / "edges")] + flag)
            assert info.value.code == 2
        args = create_argparser().parse_args(["massuni", "m.csv", "--alpha", "0.01", "--seed", "3", "--out", "o"])
        assert (args.alpha, args.seed) == (0.01, 3)


class TestSimulateCommands:
    POWER = ["simulate", "power", "--topology", "small_world", "--d", "6", "--n", "6", "--T", "20",
             "--ladder", "0", "2", "--reps", "2", "--seed", "4"]

    def test_power_csv(self, tmp_path):
        out = tmp_path / "curve.csv"
        assert main(self.POWER + ["--out", str(out)]) == 0
        lines = out.read_text(encoding="utf-8").splitlines()
        record = read_json(tmp_path / "curve.csv.run.json")
        assert lines[0] == f"# run_digest={record['run_digest']}"
        assert lines[1] == ",".join(POWER_COLUMNS)
        assert len(lines) == 4
        assert record["config"]["study"]["reps"] == 2

    def test_power_workers_agree(self, tmp_path):
        serial, parallel = tmp_path / "serial.csv", tmp_path / "parallel.csv"
        assert main(self.POWER + ["--workers", "1", "--out", str(serial)]) == 0
        assert main(self.POWER + ["--workers", "2", "--out", str(parallel)]) == 0
        assert serial.read_bytes() == parallel.read_bytes()

    def test_power_from_yaml(self, tmp_path):
        config = tmp_path / "study.yaml"
        config.write_text(
            "topology:\n  kind: small_world\n  d: 6\nn: 6\nT: 20\neffect_ladder: [0]\nreps: 5\nseed: 1\n",
            encoding="utf-8",
        )
        out = tmp_path / "curve.csv"
        assert main(["simulate", "power", "--config", str(config), "--reps", "1", "--out", str(out)]) == 0
        assert read_json(tmp_path / "curve.csv.run.json")["config"]["study"]["reps"] == 1

    def test_invalid_config_names_field(self, tmp_path, capsys):
        assert main(self.POWER + ["--reps", "0", "--out", str(tmp_path / "c.csv")]) == 3
        assert "'reps'" in capsys.readouterr().err
        assert not (tmp_path / "c.csv").exists()

    def test_clt(self, tmp_path):
        out = tmp_path / "clt.json"
        assert main(["simulate", "clt", "--d", "4", "--n", "5", "--reps", "10", "--T", "20", "--out", str(out)]) == 0
        report = read_json(out)
        assert report["reps"] == 10
        assert report["rel_frobenius_error"] >= 0.0
        assert len(report["run_digest"]) == 64
