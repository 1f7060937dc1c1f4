import csv
import json
import logging

import numpy as np
import pytest

import bzsl
from utils.constants import TRUTH_FILE
from zsl.funcs.bundle import load_bundle, save_bundle
from zsl.funcs.modelio import load_model
from zsl.models.dataset import Dataset, SplitSpec


@pytest.fixture()
def restore_logging():
    """bzsl.main installs its own root handler; put the test runner's back afterwards."""
    root = logging.getLogger()
    handlers, level = root.handlers[:], root.level
    yield
    root.handlers = handlers
    root.setLevel(level)


def run(*argv):
    return bzsl.main(list(argv) + ["--log-level", "WARNING", "--threads", "2"])


@pytest.mark.usefixtures("restore_logging")
class TestCommandLine:
    def test_synth(self, tmp_path):
        out = tmp_path / "synth"
        code = run("synth", "--out", str(out), "--n-meta", "3", "--classes-per-meta", "4",
                   "--samples-per-class", "30", "--dim", "3", "--val-per-meta", "1", "--seed", "4")
        assert code == bzsl.EXIT_OK
        dataset, splits = load_bundle(str(out))
        assert dataset.n == 3 * 4 * 30
        assert splits.val_unseen is not None
        assert "class_means" in json.loads((out / TRUTH_FILE).read_text())

    def test_eval(self, tmp_path, small_bundle, capsys):
        out = tmp_path / "eval"
        assert run("eval", "--bundle", small_bundle, "--out", str(out), "--topk", "1,2") == bzsl.EXIT_OK
        assert "unconstrained" in capsys.readouterr().out
        report = json.loads((out / "report.json").read_text())
        assert 0 <= report['H'] <= 1
        assert set(report['topk']) == {"1", "2"}
        with open(out / "predictions.csv", newline='') as f:
            rows = list(csv.reader(f))
        assert rows[0] == ["row_index", "predicted_class", "true_class", "log_score"]
        dataset, splits = load_bundle(small_bundle)
        assert len(rows) - 1 == len(splits.test_rows(dataset.labels))

    def test_eval_validation_protocol(self, small_bundle):
        assert run("eval", "--bundle", small_bundle, "--protocol", "validation") == bzsl.EXIT_OK
        assert run("eval", "--bundle", small_bundle, "--variant", "constrained") == bzsl.EXIT_OK

    def test_metaclass_dump(self, tmp_path, small_bundle):
        out = tmp_path / "meta.json"
        assert run("metaclass", "dump", "--bundle", small_bundle, "--K", "3", "--out", str(out)) == bzsl.EXIT_OK
        data = json.loads(out.read_text())
        assert len(data) == 12
        assert all(len(entry['support']) == 3 for entry in data.values())

    def test_model_dump_then_eval(self, tmp_path, small_bundle):
        model_path = tmp_path / "model.bin"
        assert run("model", "dump", "--bundle", small_bundle, "--out", str(model_path)) == bzsl.EXIT_OK
        model = load_model(model_path)
        assert model.variant == 'unconstrained'

        out = tmp_path / "eval"
        assert run("eval", "--bundle", small_bundle, "--model", str(model_path), "--out", str(out)) == bzsl.EXIT_OK
        fitted = tmp_path / "fitted"
        assert run("eval", "--bundle", small_bundle, "--out", str(fitted)) == bzsl.EXIT_OK
        assert (out / "report.json").read_text() == (fitted / "report.json").read_text()

    def test_tune(self, tmp_path, small_bundle):
        out = tmp_path / "tune"
        code = run("tune", "--bundle", small_bundle, "--out", str(out), "--grid=-kappa0 0.1,1 -kappa1 10 -K 2")
        assert code == bzsl.EXIT_OK
        with open(out / "leaderboard.csv", newline='') as f:
            rows = list(csv.DictReader(f))
        assert len(rows) == 2
        assert {float(r['kappa0']) for r in rows} == {0.1, 1.}
        assert float(rows[0]['H']) >= float(rows[1]['H'])
        best = json.loads((out / "best.json").read_text())
        assert best['hyperparams']['K'] == 2

    def test_sweep(self, tmp_path, small_bundle):
        out = tmp_path / "sweep"
        code = run("sweep", "--bundle", small_bundle, "--out", str(out), "--param", "kappa1", "--values", "1,10,100")
        assert code == bzsl.EXIT_OK
        with open(out / "sweep_kappa1.csv", newline='') as f:
            rows = list(csv.reader(f))
        assert rows[0] == ["kappa1", "ts", "tr", "H"]
        assert [float(r[0]) for r in rows[1:]] == [1., 10., 100.]

    def test_tune_winner_reproduces(self, tmp_path, small_bundle):
        out = tmp_path / "tune"
        assert run("tune", "--bundle", small_bundle, "--out", str(out),
                   "--grid=-kappa0 0.1,1 -kappa1 1,10") == bzsl.EXIT_OK
        best = json.loads((out / "best.json").read_text())

        flags = []
        for name, value in best['hyperparams'].items():
            if value is not None:
                flags += [f"--{name}", str(value)]
        rerun = tmp_path / "rerun"
        assert run("eval", "--bundle", small_bundle, "--protocol", "validation", "--out", str(rerun),
                   *flags) == bzsl.EXIT_OK
        report = json.loads((rerun / "report.json").read_text())
        assert report['H'] == pytest.approx(best['report']['H'], rel=1e-12, abs=1e-12)
        assert report['ts'] == pytest.approx(best['report']['ts'], rel=1e-12, abs=1e-12)

    def test_single_value_sweep_matches_eval(self, tmp_path, small_bundle):
        sweep = tmp_path / "sweep"
        assert run("sweep", "--bundle", small_bundle, "--out", str(sweep), "--param", "kappa1",
                   "--values", "5") == bzsl.EXIT_OK
        with open(sweep / "sweep_kappa1.csv", newline='') as f:
            (row,) = list(csv.DictReader(f))
        single = tmp_path / "eval"
        assert run("eval", "--bundle", small_bundle, "--out", str(single), "--kappa1", "5") == bzsl.EXIT_OK
        report = json.loads((single / "report.json").read_text())
        for key in ("ts", "tr", "H"):
            assert float(row[key]) == pytest.approx(report[key], rel=1e-12, abs=1e-12)

    def test_tune_recovers_kappa1(self, tmp_path):
        bundle = tmp_path / "synth"
        assert run("synth", "--out", str(bundle), "--n-meta", "4", "--classes-per-meta", "4",
                   "--samples-per-class", "60", "--dim", "4", "--kappa0", "0.1", "--kappa1", "20",
                   "--val-per-meta", "1", "--seed", "5") == bzsl.EXIT_OK
        out = tmp_path / "tune"
        assert run("tune", "--bundle", str(bundle), "--out", str(out),
                   "--grid=-kappa1 0.01,1,100,10000 -K 2") == bzsl.EXIT_OK
        best = json.loads((out / "best.json").read_text())
        # the generating kappa1 = 20 sits between the grid points 1 and 100
        assert best['hyperparams']['kappa1'] in (1., 100.)

    def test_ablate(self, tmp_path, small_bundle):
        out = tmp_path / "ablate"
        assert run("ablate", "--bundle", small_bundle, "--out", str(out), "--with-flat") == bzsl.EXIT_OK
        data = json.loads((out / "ablation.json").read_text())
        assert set(data) == {"unconstrained", "ablation_v1", "ablation_v2", "ablation_flat"}

    # ---------- failures ----------
    def test_validation_failures(self, tmp_path, small_bundle):
        assert run("eval") == bzsl.EXIT_VALIDATION
        assert run("eval", "--bundle", str(tmp_path / "nowhere")) == bzsl.EXIT_VALIDATION
        assert run("sweep", "--bundle", small_bundle, "--values", "1,10") == bzsl.EXIT_VALIDATION
        assert run("model", "dump", "--bundle", small_bundle) == bzsl.EXIT_VALIDATION
        assert run("eval", "--bundle", small_bundle, "--K", "20") == bzsl.EXIT_VALIDATION

    def test_bad_flags(self, small_bundle):
        assert run("eval", "--bundle", small_bundle, "--K", "two") == bzsl.EXIT_VALIDATION
        assert run("eval", "--bundle", small_bundle, "--variant", "nonsense") == bzsl.EXIT_VALIDATION
        assert run("eval", "--bundle", small_bundle, "--no-such-flag") == bzsl.EXIT_VALIDATION
        assert run("frobnicate") == bzsl.EXIT_VALIDATION

    def test_numerical_failure(self, tmp_path):
        rng = np.random.default_rng(0)
        labels = np.array([0, 1, 1, 1, 1, 1, 2, 2, 2, 2, 2, 3, 3, 3])
        attributes = np.array([[1., 0.], [0., 1.], [1., 1.], [2., 2.]])
        path = tmp_path / "singleton"
        save_bundle(Dataset(rng.normal(size=(labels.size, 2)), labels, attributes), SplitSpec([0, 1, 2], [3]),
                    str(path))
        # class 0 has a single row, so its sample covariance is zero
        assert run("eval", "--bundle", str(path), "--variant", "ablation_v1") == bzsl.EXIT_NUMERICAL
        assert run("eval", "--bundle", str(path)) == bzsl.EXIT_OK
