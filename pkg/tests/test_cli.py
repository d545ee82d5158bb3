"""Command-line verbs driven through ``main``."""

import json

import pytest

from pointtrack.cli import main


@pytest.fixture(scope="module")
def synth_dir(tmp_path_factory):
    d = tmp_path_factory.mktemp("cli")
    assert main(["synth", "--out", str(d), "--frames", "6", "--height", "64", "--width", "64",
                 "--speed", "1", "--n-queries", "2", "--png"]) == 0
    return d


class TestVerbs:
    def test_synth_outputs(self, synth_dir):
        assert (synth_dir / "video.ltw").is_file() and (synth_dir / "gt.json").is_file()
        assert len(list((synth_dir / "frames").glob("*.png"))) == 6

    def test_track_then_eval(self, synth_dir, tmp_path, capsys):
        out = tmp_path / "tracks.json"
        rc = main(["track", "--video", str(synth_dir / "frames"), "--queries", str(synth_dir / "queries.json"),
                   "--variant", "S", "--iterations", "1", "--out", str(out),
                   "--render-overlays", str(tmp_path / "ov")])
        assert rc == 0 and out.is_file()
        assert len(list((tmp_path / "ov").glob("overlay_*.png"))) == 6
        capsys.readouterr()
        rc = main(["eval", "--pred", str(out), "--gt", str(synth_dir / "gt.json"),
                   "--report", str(tmp_path / "r.json"), "--figure", str(tmp_path / "r.png")])
        assert rc == 0
        lines = capsys.readouterr().out.splitlines()
        assert lines[0] == "metric\tvalue" and lines[1].startswith("aj\t")
        report = json.loads((tmp_path / "r.json").read_text())
        assert report["mode"] == "strided" and 0 <= report["aj"] <= 1
        assert (tmp_path / "r.png").stat().st_size > 0

    def test_config_supplies_required_flags(self, synth_dir, tmp_path):
        cfg = tmp_path / "c.json"
        cfg.write_text(json.dumps({"video": str(synth_dir / "video.ltw"), "queries": str(synth_dir / "queries.json"),
                                   "out": str(tmp_path / "t.json"), "variant": "S", "iterations": 0}))
        assert main(["track", "--config", str(cfg), "--refiner", "argmax"]) == 0
        doc = json.loads((tmp_path / "t.json").read_text())
        assert (doc["variant"], doc["iterations"], doc["refiner"]) == ("S", 0, "argmax")

    def test_bench_figure(self, tmp_path, capsys):
        rc = main(["bench", "--variant", "S", "--frames", "2", "--points", "1,2", "--size", "32",
                   "--iterations", "1", "--report", str(tmp_path / "b.json"), "--figure", str(tmp_path / "b.png")])
        assert rc == 0 and (tmp_path / "b.png").is_file()
        assert "local_corr_macs.counted" in capsys.readouterr().out

    def test_selftest(self, capsys):
        assert main(["selftest"]) == 0
        assert all(line.startswith("PASS") for line in capsys.readouterr().out.splitlines())


class TestErrors:
    def test_missing_file_is_io_error(self, tmp_path):
        assert main(["eval", "--pred", str(tmp_path / "x.json"), "--gt", str(tmp_path / "y.json")]) == 3

    def test_bad_schema_is_format_error(self, synth_dir, tmp_path):
        assert main(["eval", "--pred", str(synth_dir / "gt.json"), "--gt", str(synth_dir / "gt.json")]) == 20

    def test_bad_points_is_value_error(self):
        assert main(["bench", "--points", "a,b"]) == 4

    def test_unknown_config_key(self, tmp_path):
        cfg = tmp_path / "c.json"
        cfg.write_text(json.dumps({"colour": "red"}))
        assert main(["selftest", "--config", str(cfg)]) == 20

    def test_usage_error(self):
        with pytest.raises(SystemExit) as e:
            main(["track"])
        assert e.value.code == 2
