import numpy as np
import pytest
from PIL import Image

from embed_extractor.cli import main
from embed_extractor.encoders import HashedEncoder
from embed_extractor.extract import extract
from embed_extractor.manifest import ManifestError, read_manifest

# interoperability check only: the engine's loader validates the output file
from entalign.data import load_embeddings


def make_images(root, names=("red", "green", "grad")):
    paths = []
    for name in names:
        path = root / f"{name}.png"
        if name == "grad":
            arr = np.linspace(0, 255, 24 * 24 * 3, dtype=np.uint8).reshape(24, 24, 3)
            img = Image.fromarray(arr)
        else:
            color = (255, 0, 0) if name == "red" else (0, 180, 0)
            img = Image.new("RGB", (24, 24), color)
        img.save(path)
        paths.append(path)
    return paths


@pytest.fixture
def fixture_manifest(tmp_path):
    paths = make_images(tmp_path)
    manifest = tmp_path / "manifest.csv"
    manifest.write_text(
        "image_path,prompt,mos\n"
        f"{paths[0]},a red square,4.5\n"
        f"{paths[1]},a green square,2.0\n"
        f"{paths[2]},a red square,3.5\n"
    )
    return manifest


class TestManifest:
    def test_duplicate_prompts_share_group(self, fixture_manifest):
        rows = read_manifest(fixture_manifest)
        assert [r.group_id for r in rows] == [0, 1, 0]

    def test_unparseable_mos_reports_line(self, tmp_path):
        manifest = tmp_path / "bad.csv"
        manifest.write_text("image_path,prompt,mos\na.png,ok,3\nb.png,bad,not-a-number\n")
        with pytest.raises(ManifestError) as err:
            read_manifest(manifest)
        assert err.value.line == 3
        assert "line 3" in str(err.value)

    def test_missing_column_rejected(self, tmp_path):
        manifest = tmp_path / "cols.csv"
        manifest.write_text("image_path,text,mos\na.png,x,3\n")
        with pytest.raises(ManifestError):
            read_manifest(manifest)


class TestExtract:
    def test_output_passes_engine_load_validation(self, fixture_manifest, tmp_path):
        out = tmp_path / "emb.haln"
        report = extract(fixture_manifest, out, 1.0, 5.0, HashedEncoder(dim=512))
        assert report.written == 3 and report.skipped == 0

        ds = load_embeddings(out)
        assert ds.dim == 512
        assert len(ds) == 3
        assert [s.group_id for s in ds.samples] == [0, 1, 0]
        assert [s.mos_raw for s in ds.samples] == [4.5, 2.0, 3.5]
        for s in ds.samples:
            assert abs(np.linalg.norm(s.image_emb) - 1.0) <= 1e-4
            assert abs(np.linalg.norm(s.text_emb) - 1.0) <= 1e-4
        # identical prompts encode identically; the engine normalizes scores
        assert np.array_equal(ds.samples[0].text_emb, ds.samples[2].text_emb)
        assert ds.samples[1].score == pytest.approx(0.25, abs=1e-7)

    def test_repeated_runs_byte_identical(self, fixture_manifest, tmp_path):
        a, b = tmp_path / "a.haln", tmp_path / "b.haln"
        extract(fixture_manifest, a, 1.0, 5.0, HashedEncoder(dim=512))
        extract(fixture_manifest, b, 1.0, 5.0, HashedEncoder(dim=512))
        assert a.read_bytes() == b.read_bytes()

    def test_batching_preserves_manifest_order(self, fixture_manifest, tmp_path):
        a, b = tmp_path / "a.haln", tmp_path / "b.haln"
        extract(fixture_manifest, a, 1.0, 5.0, HashedEncoder(dim=64), batch_size=1)
        extract(fixture_manifest, b, 1.0, 5.0, HashedEncoder(dim=64), batch_size=16)
        assert a.read_bytes() == b.read_bytes()

    def test_missing_image_skipped_with_warning(self, tmp_path):
        paths = make_images(tmp_path, names=("red",))
        manifest = tmp_path / "m.csv"
        manifest.write_text(
            "image_path,prompt,mos\n"
            f"{paths[0]},a red square,4.0\n"
            f"{tmp_path / 'missing.png'},gone,2.0\n"
        )
        warnings = []
        out = tmp_path / "emb.haln"
        report = extract(manifest, out, 1.0, 5.0, HashedEncoder(dim=32),
                         warn=warnings.append)
        assert report.written == 1
        assert report.skipped == 1
        assert any("missing.png" in w for w in warnings)
        assert any("skipped 1 of 2" in w for w in warnings)
        assert len(load_embeddings(out)) == 1

    def test_out_of_scale_mos_is_hard_error_with_line(self, tmp_path):
        paths = make_images(tmp_path, names=("red",))
        manifest = tmp_path / "m.csv"
        manifest.write_text(f"image_path,prompt,mos\n{paths[0]},ok,7.5\n")
        with pytest.raises(ManifestError) as err:
            extract(manifest, tmp_path / "emb.haln", 1.0, 5.0, HashedEncoder(dim=32))
        assert err.value.line == 2


class TestCli:
    def test_smoke_with_hashed_encoder(self, fixture_manifest, tmp_path, capsys):
        out = tmp_path / "emb.haln"
        code = main(["--manifest", str(fixture_manifest), "--out", str(out),
                     "--scale", "1:5", "--encoder", "hashed"])
        assert code == 0
        assert "wrote 3 records" in capsys.readouterr().out
        assert load_embeddings(out).dim == 512

    def test_bad_scale_is_usage_error(self, fixture_manifest, tmp_path):
        with pytest.raises(SystemExit) as err:
            main(["--manifest", str(fixture_manifest), "--out", str(tmp_path / "x"),
                  "--scale", "five"])
        assert err.value.code == 2

    def test_missing_manifest_is_runtime_error(self, tmp_path):
        assert main(["--manifest", str(tmp_path / "none.csv"),
                     "--out", str(tmp_path / "x"), "--encoder", "hashed"]) == 1


class TestClipEncoder:
    def test_clip_round_trip_if_weights_available(self, fixture_manifest, tmp_path):
        pytest.importorskip("transformers")
        from embed_extractor.encoders import ClipEncoder

        try:
            encoder = ClipEncoder()
        except Exception:
            pytest.skip("pretrained CLIP weights not available in this environment")
        out = tmp_path / "emb.haln"
        report = extract(fixture_manifest, out, 1.0, 5.0, encoder)
        assert report.written == 3
        ds = load_embeddings(out)
        assert ds.dim == 512
        for s in ds.samples:
            assert abs(np.linalg.norm(s.image_emb) - 1.0) <= 1e-4
