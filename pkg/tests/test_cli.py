import json
import math

import numpy as np
import pytest

from entalign.cli import REPORT_HEADER, main
from entalign.data import load_embeddings


def run(argv):
    return main([str(a) for a in argv])


@pytest.fixture(scope="module")
def small_run(tmp_path_factory):
    """One small synth + train, shared by the read-only CLI tests."""
    root = tmp_path_factory.mktemp("cli")
    data = root / "data.haln"
    model = root / "model.txt"
    history = root / "history.csv"
    manifest = root / "manifest.json"
    assert run(["synth", "--n", 200, "--dim", 8, "--noise", "0.05", "--seed", 1,
                "--out", data]) == 0
    assert run(["train", "--data", data, "--model", model, "--history", history,
                "--manifest", manifest, "--epochs", 4, "--patience", 4, "--seed", 1]) == 0
    return {"root": root, "data": data, "model": model, "history": history,
            "manifest": manifest}


class TestSynth:
    def test_output_loads(self, tmp_path):
        out = tmp_path / "s.haln"
        assert run(["synth", "--n", 50, "--dim", 8, "--seed", 3, "--out", out]) == 0
        ds = load_embeddings(out)
        assert len(ds) == 50 and ds.dim == 8

    def test_same_seed_same_bytes(self, tmp_path):
        a, b = tmp_path / "a.haln", tmp_path / "b.haln"
        run(["synth", "--n", 40, "--dim", 8, "--seed", 9, "--out", a])
        run(["synth", "--n", 40, "--dim", 8, "--seed", 9, "--out", b])
        assert a.read_bytes() == b.read_bytes()

    def test_zero_samples_is_usage_error(self, tmp_path):
        with pytest.raises(SystemExit) as err:
            run(["synth", "--n", 0, "--out", tmp_path / "x.haln"])
        assert err.value.code == 2


class TestTrain:
    def test_outputs_exist_and_parse(self, small_run):
        assert small_run["model"].exists()
        lines = small_run["history"].read_text().splitlines()
        assert lines[0] == "epoch,lr,loss_total,loss_reg,loss_entail,val_srcc,val_plcc"
        assert len(lines) >= 2
        manifest = json.loads(small_run["manifest"].read_text())
        assert manifest["seeds"] == [1]
        assert len(manifest["results"]) == 1

    def test_entail_column_reported_with_zero_weight(self, tmp_path, small_run):
        history = tmp_path / "h.csv"
        assert run(["train", "--data", small_run["data"], "--model", tmp_path / "m.txt",
                    "--history", history, "--manifest", tmp_path / "mf.json",
                    "--lambda", 0, "--epochs", 2, "--patience", 2, "--seed", 0]) == 0
        rows = history.read_text().splitlines()[1:]
        entail_vals = [float(r.split(",")[4]) for r in rows]
        assert all(v >= 0.0 for v in entail_vals)
        assert any(v > 0.0 for v in entail_vals)

    def test_multi_seed_manifest_aggregates(self, tmp_path, small_run):
        manifest_path = tmp_path / "mf.json"
        assert run(["train", "--data", small_run["data"], "--model", tmp_path / "m.txt",
                    "--history", tmp_path / "h.csv", "--manifest", manifest_path,
                    "--epochs", 2, "--patience", 2, "--seeds", "1..3"]) == 0
        manifest = json.loads(manifest_path.read_text())
        assert [r["seed"] for r in manifest["results"]] == [1, 2, 3]
        srccs = [r["test_srcc"] for r in manifest["results"]]
        assert manifest["aggregate"]["srcc_mean"] == pytest.approx(np.mean(srccs), abs=1e-12)
        assert manifest["aggregate"]["srcc_std"] == pytest.approx(np.std(srccs), abs=1e-12)
        assert (tmp_path / "m.seed2.txt").exists()

    def test_missing_data_file_is_runtime_error(self, tmp_path):
        assert run(["train", "--data", tmp_path / "nope.haln",
                    "--model", tmp_path / "m.txt", "--history", tmp_path / "h.csv",
                    "--manifest", tmp_path / "mf.json"]) == 1


class TestEval:
    def test_prints_four_decimals(self, small_run, capsys):
        assert run(["eval", "--model", small_run["model"], "--data", small_run["data"]]) == 0
        out = capsys.readouterr().out
        lines = [ln for ln in out.splitlines() if ln.startswith(("SRCC", "PLCC"))]
        assert len(lines) == 2
        for ln in lines:
            tag, val = ln.split()
            assert len(val.split(".")[1]) == 4

    def test_repeated_invocation_identical(self, small_run, capsys):
        run(["eval", "--model", small_run["model"], "--data", small_run["data"]])
        first = capsys.readouterr().out
        run(["eval", "--model", small_run["model"], "--data", small_run["data"]])
        second = capsys.readouterr().out
        assert first == second

    def test_optional_csv(self, small_run, tmp_path):
        out = tmp_path / "preds.csv"
        assert run(["eval", "--model", small_run["model"], "--data", small_run["data"],
                    "--out", out]) == 0
        lines = out.read_text().splitlines()
        assert lines[0] == "index,score,prediction"
        assert len(lines) == 201

    def test_dimension_mismatch_exits_one(self, small_run, tmp_path, capsys):
        other = tmp_path / "d16.haln"
        run(["synth", "--n", 40, "--dim", 16, "--seed", 0, "--out", other])
        assert run(["eval", "--model", small_run["model"], "--data", other]) == 1
        assert "dimension" in capsys.readouterr().err


class TestScore:
    def test_csv_format(self, small_run, tmp_path):
        out = tmp_path / "scores.csv"
        assert run(["score", "--model", small_run["model"], "--data", small_run["data"],
                    "--out", out]) == 0
        lines = out.read_text().splitlines()
        assert lines[0] == "group_id,prediction"
        assert len(lines) == 201
        gid, pred = lines[1].split(",")
        int(gid)
        float(pred)

    def test_scoreless_data_supported(self, small_run, tmp_path):
        # rewrite the data with sentinel ratings outside the declared scale
        ds = load_embeddings(small_run["data"])
        for s in ds.samples:
            s.mos_raw = 0.0
        from entalign.data import save_embeddings

        sentinel = tmp_path / "sentinel.haln"
        save_embeddings(ds, sentinel)
        out = tmp_path / "scores.csv"
        assert run(["score", "--model", small_run["model"], "--data", sentinel,
                    "--out", out]) == 0
        assert len(out.read_text().splitlines()) == 201


class TestReport:
    def test_untrained_model_still_produces_wellformed_file(self, small_run, tmp_path):
        import numpy as np

        from entalign.model_io import ModelMeta, save_model
        from entalign.training import TrainConfig, init_params

        cfg = TrainConfig(seed=0)
        params = init_params(8, cfg, np.random.default_rng(0))
        meta = ModelMeta(dim=8, hidden=params.modnet.hidden,
                         bottleneck=params.image_adapter.bottleneck)
        model = tmp_path / "untrained.txt"
        save_model(model, params, meta)
        out = tmp_path / "geo.csv"
        assert run(["report", "--model", model, "--data", small_run["data"],
                    "--out", out]) == 0
        lines = out.read_text().splitlines()
        assert lines[0] == REPORT_HEADER
        assert len(lines) == 201

    def test_header_and_shape(self, small_run, tmp_path):
        out = tmp_path / "geo.csv"
        assert run(["report", "--model", small_run["model"], "--data", small_run["data"],
                    "--out", out]) == 0
        lines = out.read_text().splitlines()
        assert lines[0] == REPORT_HEADER
        assert len(lines) == 201
        row = lines[1].split(",")
        assert len(row) == 8
        assert all(math.isfinite(float(v)) for v in row[1:])


def test_unknown_command_is_usage_error():
    with pytest.raises(SystemExit) as err:
        run(["frobnicate"])
    assert err.value.code == 2
