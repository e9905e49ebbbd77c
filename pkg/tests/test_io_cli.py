import csv
import json
import subprocess
import sys

import jsonschema
import numpy as np
import pytest

from hclda.cli import main
from hclda.errors import ParseError
from hclda.experiments import ExperimentConfig, cmd_bench_timing, cmd_compare, cmd_cv_curve, standard_error
from hclda.hierarchy import MetaclassPartition, two_stage_fit, two_stage_predict
from hclda.io import load_csv, load_model, model_to_dict, save_csv, save_model
from hclda.rng import make_rng, normals, replicate_seeds, uniforms
from hclda.schemas import load_schema
from hclda.simulate import generate_model1, generate_model2, model1_means, model2_centers

DELTA = 1e-5


def write(path, text):
    path.write_text(text)
    return path


@pytest.fixture(scope="module")
def fitted(model2_pair):
    data, gen = model2_pair
    return two_stage_fit(data, MetaclassPartition.from_blocks(gen.partition), 2, DELTA)


@pytest.fixture(scope="module")
def model_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("fit")
    assert main(["fit", "--model", "model1", "--dim", "1", "--out", str(out)]) == 0
    return out


class TestCsv:
    def test_fixture(self, tmp_path):
        f = write(tmp_path / "d.csv", "label,a,b\n1,0.5,1.0\n2,1.5,-2\n1,0,0\n")
        data = load_csv(f)
        assert (data.n, data.p, data.J) == (3, 2, 2)
        np.testing.assert_array_equal(data.y, [1, 2, 1])

    def test_string_labels_sorted(self, tmp_path):
        f = write(tmp_path / "d.csv", "label,a\nwt,1\nko,2\nwt,3\n")
        data = load_csv(f)
        assert data.class_names == ("ko", "wt")
        np.testing.assert_array_equal(data.y, [2, 1, 2])

    def test_missing_label(self, tmp_path):
        f = write(tmp_path / "d.csv", "a,b\n1,2\n")
        with pytest.raises(ParseError, match="'label'"):
            load_csv(f)

    def test_ragged(self, tmp_path):
        f = write(tmp_path / "d.csv", "label,a,b\n1,0,0\n2,1\n")
        with pytest.raises(ParseError, match="row 3"):
            load_csv(f)

    def test_non_numeric(self, tmp_path):
        f = write(tmp_path / "d.csv", "label,a\n1,0\n2,abc\n")
        with pytest.raises(ParseError, match="'a' is not numeric"):
            load_csv(f)

    def test_single_class(self, tmp_path):
        f = write(tmp_path / "d.csv", "label,a\n1,0\n1,2\n")
        with pytest.raises(ParseError, match="one class"):
            load_csv(f)

    def test_save_load_roundtrip(self, tmp_path):
        data = generate_model1(50, seed=1)
        save_csv(data, tmp_path / "d.csv")
        back = load_csv(tmp_path / "d.csv")
        np.testing.assert_array_equal(back.X, data.X)
        np.testing.assert_array_equal(back.y, data.y)


class TestModelFile:
    def test_roundtrip_predictions(self, fitted, tmp_path):
        save_model(fitted, tmp_path / "m.json")
        back, names = load_model(tmp_path / "m.json")
        assert names is None
        x = np.random.default_rng(3).normal(scale=10.0, size=(100, 20))
        np.testing.assert_array_equal(two_stage_predict(back, x), two_stage_predict(fitted, x))

    @pytest.mark.parametrize("blocks", [[[k] for k in range(1, 10)], [list(range(1, 10))]])
    def test_endpoint_models_roundtrip(self, blocks, tmp_path):
        data = generate_model1(200, seed=0)
        m = two_stage_fit(data, MetaclassPartition.from_blocks(blocks), 2, DELTA)
        save_model(m, tmp_path / "m.json")
        back, _ = load_model(tmp_path / "m.json")
        np.testing.assert_array_equal(two_stage_predict(back, data.X), two_stage_predict(m, data.X))

    def test_schema(self, fitted):
        jsonschema.validate(model_to_dict(fitted), load_schema("model"))

    def test_bad_version(self, fitted, tmp_path):
        d = model_to_dict(fitted)
        d["version"] = 99
        write(tmp_path / "m.json", json.dumps(d))
        with pytest.raises(ParseError, match="version"):
            load_model(tmp_path / "m.json")


class TestGenerators:
    def test_model1_means(self):
        mu = model1_means()
        np.testing.assert_array_equal(mu[0], [-5, -5])
        np.testing.assert_array_equal(mu[4], [0, 0])
        np.testing.assert_array_equal(mu[8], [5, 5])

    def test_model2_centers(self):
        c = model2_centers(30, 20)
        np.testing.assert_array_equal(c[4], np.ones(20))
        np.testing.assert_array_equal(c[14], 10 * np.ones(20))
        np.testing.assert_array_equal(c[24], -10 * np.ones(20))

    def test_class_frequencies(self):
        data, _ = generate_model2(6000, 5, 30, seed=2)
        # binomial s.d. is about 14, so 5 s.d. is a generous bound
        assert np.all(np.abs(data.counts - 200) < 70)

    def test_model2_truth_blocks(self):
        _, gen = generate_model2(600, 20, 30, seed=0)
        assert gen.partition == [list(range(1, 11)), list(range(11, 21)), list(range(21, 31))]

    def test_fixed_seed(self):
        a, _ = generate_model2(100, 4, 6, seed=5)
        b, _ = generate_model2(100, 4, 6, seed=5)
        np.testing.assert_array_equal(a.X, b.X)
        np.testing.assert_array_equal(a.y, b.y)


class TestRng:
    def test_frozen_normals(self):
        # regression constant for the documented PCG64 + Box-Muller stream
        np.testing.assert_allclose(
            normals(make_rng(0), 4), [1.37663501, 0.78872059, 0.36244979, 0.08220133], rtol=1e-7
        )

    def test_normal_moments(self):
        z = normals(make_rng(1), 200_001)
        assert abs(z.mean()) < 0.01 and abs(z.var() - 1) < 0.01

    def test_uniform_range(self):
        u = uniforms(make_rng(2), 10_000)
        assert u.min() >= 0 and u.max() < 1

    def test_replicate_seeds_independent_of_count(self):
        a = [make_rng(s).random() for s in replicate_seeds(0, 3)]
        b = [make_rng(s).random() for s in replicate_seeds(0, 5)][:3]
        assert a == b


def test_standard_error_fixture():
    # values 1..5: sample variance 2.5, so s.e. = sqrt(2.5 / 5)
    assert standard_error([1, 2, 3, 4, 5]) == pytest.approx(np.sqrt(0.5), rel=1e-15)
    assert standard_error([0.3]) is None


class TestReports:
    def test_cv_curve_schema_and_csv(self, tmp_path):
        cfg = ExperimentConfig("model1", replicates=2, D=1)
        report = cmd_cv_curve(cfg)
        jpath, cpath = report.write(tmp_path)
        doc = json.loads(jpath.read_text())
        jsonschema.validate(doc, load_schema("report"))
        with open(cpath, newline="") as fh:
            rows = list(csv.reader(fh))
        assert rows[0] == ["replicate", "t", "merged", "cv"]
        assert len(rows) == 1 + 2 * 9

    def test_cv_curve_model1_d2_minimum_at_zero(self):
        report = cmd_cv_curve(ExperimentConfig("model1", replicates=1, D=2))
        assert report.summary["selected_t"] == [0]

    def test_deterministic_report(self, tmp_path):
        cfg = ExperimentConfig("model1", replicates=1)
        cmd_compare(cfg, dims=(1, 2)).write(tmp_path / "a")
        cmd_compare(cfg, dims=(1, 2)).write(tmp_path / "b")
        for name in ("compare.json", "compare.csv"):
            assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()

    def test_timing_schema_and_skip(self, tmp_path):
        cfg = ExperimentConfig("model2", n=120, p=5, J=6, replicates=1)
        report = cmd_bench_timing(cfg, [5], [120, 20000], runs=1)
        cells = report.per_replicate
        assert not cells[0]["skipped"] and cells[1]["skipped"]
        assert set(cells[0]["fast_stats"]) == {"min", "median", "max"}
        jpath, _ = report.write(tmp_path)
        jsonschema.validate(json.loads(jpath.read_text()), load_schema("report"))

    @pytest.mark.parametrize("kw", [dict(delta=-1.0), dict(n=10), dict(model="model3")])
    def test_config_validation(self, kw):
        with pytest.raises(ValueError):
            ExperimentConfig(**kw)

    @pytest.mark.slow
    def test_cv_curve_model2_first_seed_drops(self):
        report = cmd_cv_curve(ExperimentConfig("model2", replicates=1, D=2))
        cv = report.summary["mean_cv"]
        assert min(cv[1:]) < cv[0]

    @pytest.mark.slow
    def test_compare_model2_d4(self):
        report = cmd_compare(ExperimentConfig("model2", replicates=3), dims=(4,))
        assert report.summary["hlda"][0]["mean"] <= report.summary["lda"][0]["mean"]


class TestCli:
    def test_fit_outputs(self, model_dir):
        doc = json.loads((model_dir / "model.json").read_text())
        jsonschema.validate(doc, load_schema("model"))
        trace = json.loads((model_dir / "trace.json").read_text())
        assert len(trace["steps"]) == 9

    def test_predict_three_rows(self, model_dir, tmp_path, capsys):
        f = write(tmp_path / "x.csv", "x1,x2\n-5,-5\n0,0\n5,5\n")
        assert main(["predict", str(model_dir / "model.json"), str(f)]) == 0
        out = capsys.readouterr().out.split()
        assert out[0] == "label" and len(out) == 4

    def test_predict_ignores_label_column(self, model_dir, tmp_path, capsys):
        f = write(tmp_path / "x.csv", "label,x1,x2\n1,-5,-5\n")
        assert main(["predict", str(model_dir / "model.json"), str(f)]) == 0
        assert len(capsys.readouterr().out.split()) == 2

    def test_predict_empty(self, model_dir, tmp_path, capsys):
        f = write(tmp_path / "x.csv", "")
        assert main(["predict", str(model_dir / "model.json"), str(f)]) == 0
        assert capsys.readouterr().out == ""

    def test_predict_wrong_p(self, model_dir, tmp_path, capsys):
        f = write(tmp_path / "x.csv", "a,b,c\n1,2,3\n")
        assert main(["predict", str(model_dir / "model.json"), str(f)]) == 2
        assert "p=2" in capsys.readouterr().err

    def test_predict_to_file(self, model_dir, tmp_path):
        f = write(tmp_path / "x.csv", "x1,x2\n5,5\n")
        dest = tmp_path / "pred.csv"
        assert main(["predict", str(model_dir / "model.json"), str(f), "-o", str(dest)]) == 0
        assert dest.read_text().split() == ["label", "9"]

    def test_simulate_then_fit_csv(self, tmp_path, capsys):
        data = tmp_path / "sim.csv"
        assert main(["simulate", "--model", "model1", "--n", "90", "--out", str(data)]) == 0
        assert load_csv(data).n == 90
        assert main(["fit", "--csv", str(data), "--dim", "1", "--out", str(tmp_path / "m")]) == 0
        m, names = load_model(tmp_path / "m" / "model.json")
        assert m.p == 2 and len(names) == 9

    def test_cv_curve_command(self, tmp_path):
        out = tmp_path / "cv"
        assert main(["cv-curve", "--model", "model1", "--replicates", "1", "--out", str(out)]) == 0
        assert (out / "cv_curve.json").exists() and (out / "cv_curve.csv").exists()

    def test_bad_input_exit_code(self, tmp_path, capsys):
        assert main(["fit", "--csv", str(tmp_path / "missing.csv"), "--out", str(tmp_path)]) == 2
        assert main(["cv-curve", "--model", "model2", "--n", "10"]) == 2

    def test_numerical_exit_code(self, tmp_path):
        f = write(tmp_path / "d.csv", "label,a,b,c\n1,0,1,2\n1,1,0,3\n2,5,1,9\n2,4,4,1\n")
        assert main(["fit", "--csv", str(f), "--dim", "1", "--delta", "0", "--out", str(tmp_path)]) == 3

    def test_module_entry_point(self):
        res = subprocess.run([sys.executable, "-m", "hclda", "--help"], capture_output=True, text=True)
        assert res.returncode == 0 and "cv-curve" in res.stdout
