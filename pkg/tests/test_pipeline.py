"""End-to-end tracking and evaluation drivers."""

import numpy as np
import pytest

from pointtrack import io
from pointtrack.pipeline import (
    TrackOptions,
    build_pyramid,
    default_workers,
    prob_to_logit,
    run_eval,
    run_track,
    synth_queries,
    track_points,
)
from pointtrack.correlation import global_correlation
from pointtrack.synth import SynthSpec, synth_generate
from pointtrack.track_init import init_track


@pytest.fixture(scope="module")
def clip(tmp_path_factory):
    d = tmp_path_factory.mktemp("clip")
    video, gts = synth_generate(SynthSpec(seed=0, T=6, H=64, W=64, speed=1.0, n_queries=3))
    io.save_video(video, d / "video.ltw")
    io.save_ground_truth(gts, video.size, d / "gt.json")
    ids, qs = synth_queries(gts)
    io.save_queries(qs, d / "queries.json", ids)
    return d, video, gts


class TestOptions:
    def test_rejects(self):
        with pytest.raises(ValueError):
            TrackOptions(refiner="oracle")
        with pytest.raises(ValueError):
            TrackOptions(iterations=-1)

    def test_workers_env(self, monkeypatch):
        monkeypatch.setenv("POINTTRACK_WORKERS", "3")
        assert default_workers() == 3
        monkeypatch.setenv("POINTTRACK_WORKERS", "x")
        with pytest.raises(ValueError):
            default_workers()


class TestTrack:
    def test_byte_identical_reruns(self, clip, tmp_path):
        d, _, _ = clip
        for name in ("a.json", "b.json"):
            run_track(d / "video.ltw", d / "queries.json", variant="S", K=1, out_path=tmp_path / name)
        assert (tmp_path / "a.json").read_bytes() == (tmp_path / "b.json").read_bytes()

    def test_workers_do_not_change_output(self, clip, tmp_path, weights_s):
        _, video, gts = clip
        ids, qs = synth_queries(gts)
        qs = qs * 4  # more than one chunk
        pyr = build_pyramid(video, weights_s)
        one = track_points(pyr, qs, weights_s, TrackOptions("S", iterations=1, workers=1))
        many = track_points(pyr, qs, weights_s, TrackOptions("S", iterations=1, workers=3))
        for (a, oa, _), (b, ob, _) in zip(one, many):
            np.testing.assert_array_equal(a, b)
            np.testing.assert_array_equal(oa, ob)

    def test_zero_iterations_is_stage_one(self, clip, weights_s):
        _, video, gts = clip
        _, qs = synth_queries(gts)
        pyr = build_pyramid(video, weights_s)
        ((track, occl, history),) = track_points(pyr, qs[:1], weights_s, TrackOptions("S", iterations=0))
        t0, o0 = init_track(global_correlation(pyr, qs[0]), weights_s)
        np.testing.assert_array_equal(track, t0)
        np.testing.assert_array_equal(occl, o0)
        assert len(history) == 1

    def test_history_length(self, clip, tmp_path):
        d, _, _ = clip
        doc = run_track(d / "video.ltw", d / "queries.json", variant="S", K=2)
        assert all(len(e["history"]) == 3 for e in doc["tracks"])
        doc = run_track(d / "video.ltw", d / "queries.json", variant="S", K=2, keep_history=False)
        assert all("history" not in e for e in doc["tracks"])

    def test_query_frame_out_of_range(self, clip, tmp_path):
        d, _, _ = clip
        io.save_queries([io.QueryPoint(1.0, 1.0, 99)], tmp_path / "q.json")
        with pytest.raises(io.FormatError, match="outside"):
            run_track(d / "video.ltw", tmp_path / "q.json", variant="S", K=0)


class TestEval:
    def _gt_as_prediction(self, gts, path):
        ids, qs = synth_queries(gts)
        rows = []
        for tid, q in zip(ids, qs):
            gt = gts[tid]
            prob = np.where(gt.visible, 0.0, 1.0).astype(np.float32)
            rows.append((tid, q, gt.positions, prob, None))
        io.save_tracks(io.tracks_document(rows, (64, 64), {}), path)

    def test_perfect_prediction(self, clip, tmp_path):
        d, _, gts = clip
        self._gt_as_prediction(gts, tmp_path / "p.json")
        r = run_eval(tmp_path / "p.json", d / "gt.json")
        assert (r.aj, r.pck_avg, r.oa) == (1.0, 1.0, 1.0)

    def test_mode_changes_query_count(self, clip, tmp_path):
        d, _, gts = clip
        self._gt_as_prediction(gts, tmp_path / "p.json")
        strided = run_eval(tmp_path / "p.json", d / "gt.json", "strided").n_points
        first = run_eval(tmp_path / "p.json", d / "gt.json", "first").n_points
        assert (strided, first) == (6, 3)  # frames 0 and 5 for each of 3 tracks

    def test_missing_prediction(self, clip, tmp_path):
        d, _, gts = clip
        io.save_tracks(io.tracks_document([], (64, 64), {}), tmp_path / "p.json")
        with pytest.raises(io.FormatError, match="no prediction"):
            run_eval(tmp_path / "p.json", d / "gt.json")

    def test_prob_to_logit_inverts_sigmoid(self):
        p = np.array([0.0, 0.25, 0.5, 1.0])
        np.testing.assert_allclose(prob_to_logit(p), [-np.inf, np.log(1 / 3), 0.0, np.inf])
