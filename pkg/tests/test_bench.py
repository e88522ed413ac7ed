"""RD benchmark harness and the ablation grid."""

import csv
import hashlib
import math

import numpy as np
import pytest

from lhic.bench import (
    ABLATION_COLUMNS,
    AVERAGE,
    CSV_COLUMNS,
    BenchConfig,
    ablation_model_path,
    parse_codec_spec,
    read_csv,
    run_ablation,
    run_bench,
    write_dat,
)
from lhic.models import Autoencoder, ModelConfig, save_model
from lhic.ranges import ScalingMethod


def digest(directory):
    return {p.name: hashlib.sha256(p.read_bytes()).hexdigest() for p in sorted(directory.iterdir())}


def test_counting_contract(tmp_path, corpus, tiny_model):
    for p in sorted(corpus.iterdir())[2:]:
        p.unlink()
    out = tmp_path / "rd.csv"
    rows = run_bench(BenchConfig(corpus, ["lhic:clip", "builtin-dct"], {"lhic:clip": [2, 8, 32], "builtin-dct": [2, 8, 32]}, out), tiny_model)
    points = [r for r in rows if r.image != AVERAGE]
    avgs = [r for r in rows if r.image == AVERAGE]
    assert len(points) == 12 and len(avgs) == 6
    with open(out) as fh:
        reader = csv.DictReader(fh)
        assert tuple(reader.fieldnames) == CSV_COLUMNS
        assert len(list(reader)) == 18


def test_averages_are_arithmetic_means(tmp_path, corpus, tiny_model):
    rows = run_bench(BenchConfig(corpus, ["lhic:minmax", "builtin-dct"], {}, tmp_path / "rd.csv"), tiny_model)
    for avg in (r for r in rows if r.image == AVERAGE):
        pts = [r for r in rows if r.image != AVERAGE and r.codec == avg.codec and r.quality == avg.quality]
        assert len(pts) == 5
        for field in ("bpp", "psnr_db", "ms_ssim"):
            assert abs(getattr(avg, field) - np.mean([getattr(p, field) for p in pts])) <= 1e-9


def test_builtin_grid_monotone(corpus):
    rows = run_bench(BenchConfig(corpus, ["builtin-dct"]))
    avg = sorted((r for r in rows if r.image == AVERAGE), key=lambda r: r.quality)
    assert [r.quality for r in avg] == [2, 4, 8, 16, 32]
    assert all(a.bpp > b.bpp and a.psnr_db > b.psnr_db for a, b in zip(avg, avg[1:]))


def test_corrupt_image_becomes_error_row(tmp_path, corpus, tiny_model):
    (corpus / "zz_broken.png").write_bytes(b"not really a png")
    rows = run_bench(BenchConfig(corpus, ["builtin-dct"], {"builtin-dct": [4]}, tmp_path / "rd.csv"), tiny_model)
    bad = [r for r in rows if r.image == "zz_broken.png"]
    assert len(bad) == 1 and bad[0].status.startswith("error") and math.isnan(bad[0].psnr_db)
    avg = [r for r in rows if r.image == AVERAGE][0]
    assert avg.status == "ok" and not math.isnan(avg.psnr_db)


def test_layered_without_model_is_error_row(corpus):
    rows = run_bench(BenchConfig(corpus, ["lhic:clip"], {"lhic:clip": [4]}))
    assert all(r.status.startswith("error") for r in rows)


def test_deterministic_and_corpus_untouched(tmp_path, corpus, tiny_model):
    before = digest(corpus)
    cfg = lambda out, workers: BenchConfig(corpus, ["lhic:clip", "builtin-dct"], {"lhic:clip": [4], "builtin-dct": [4]}, out, workers)
    run_bench(cfg(tmp_path / "a.csv", 1), tiny_model)
    run_bench(cfg(tmp_path / "b.csv", 3), tiny_model)
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()
    assert digest(corpus) == before


def test_csv_round_trip_and_dat(tmp_path, corpus):
    rows = run_bench(BenchConfig(corpus, ["builtin-dct"], {"builtin-dct": [4, 16]}, tmp_path / "rd.csv"))
    back = read_csv(tmp_path / "rd.csv")
    assert [(r.image, r.codec, r.quality, r.bpp, r.psnr_db) for r in back] == [(r.image, r.codec, r.quality, r.bpp, r.psnr_db) for r in rows]
    overlay = [r for r in back if r.image == AVERAGE]
    for r in overlay:
        r.codec = "reference"
    write_dat(rows, tmp_path / "rd.dat", overlay)
    text = (tmp_path / "rd.dat").read_text()
    assert "# builtin-dct" in text and "# reference" in text
    blocks = [b for b in text.strip().split("\n\n\n") if b]
    assert len(blocks) == 2 and all(len(b.strip().splitlines()) == 4 for b in blocks)


def test_codec_specs():
    s = parse_codec_spec("lhic:shift:builtin-lossless")
    assert s.scaling is ScalingMethod.SHIFT and s.lossy == "builtin-lossless"
    assert parse_codec_spec("lhic:clip").lossy == "builtin-dct"
    assert parse_codec_spec("bpg").scaling is None
    with pytest.raises(ValueError):
        parse_codec_spec("builtin-lossless")
    with pytest.raises(ValueError):
        parse_codec_spec("lhic")


class TestAblation:
    def _models(self, directory, skip=()):
        directory.mkdir()
        for s in (8, 16, 32):
            for act in ("prelu", "relu"):
                if (s, act) not in skip:
                    save_model(Autoencoder(ModelConfig(compact_scale=s, activation=act, base_filters=4, max_filters=8)), ablation_model_path(directory, s, act))
        return directory

    def test_full_grid(self, tmp_path, corpus):
        models = self._models(tmp_path / "models")
        rows = run_ablation(models, corpus, qualities=(4,), output=tmp_path / "abl.csv")
        assert [r["config"] for r in rows] == ["S8+PReLU", "S8+ReLU", "S16+PReLU", "S16+ReLU", "S32+PReLU", "S32+ReLU"]
        assert all(r["status"] == "ok" and r["bpp"] > 0 for r in rows)
        with open(tmp_path / "abl.csv") as fh:
            reader = csv.DictReader(fh)
            assert tuple(reader.fieldnames) == ABLATION_COLUMNS
            assert len(list(reader)) == 6

    def test_missing_model_is_noted(self, tmp_path, corpus):
        models = self._models(tmp_path / "models", skip={(32, "relu")})
        rows = run_ablation(models, corpus)
        missing = [r for r in rows if r["status"] != "ok"]
        assert len(rows) == 6 and [r["config"] for r in missing] == ["S32+ReLU"]
        assert missing[0]["status"] == "missing model"
