from itertools import permutations

import numpy as np
import pytest

from contacttrack.contact import ContactEpisode
from contacttrack.evaluation import (
    EmptyGroundTruth,
    GroundTruth,
    contact_metrics,
    evaluate,
    floor_center,
    match_tracks,
    mot_metrics,
    threshold_sweep,
)
from contacttrack.schema import JOINT_COUNT, JointSchema

SCHEMA = JointSchema()


def body(x, y):
    """A minimal person entry: torso joints at (x, y), varied heights."""
    joints = np.zeros((JOINT_COUNT, 3))
    avail = np.zeros(JOINT_COUNT, dtype=bool)
    for k, z in zip(SCHEMA.torso_indices, (1.45, 1.45, 1.0, 1.0)):
        joints[k] = (x, y, z)
        avail[k] = True
    return joints, avail


def episode(person, side, label, t0, t1, d=0.05):
    return ContactEpisode(
        person_id=person, side=side, surface_label=label,
        t_start=t0, t_stop=t1, contact_point=np.zeros(3), min_distance=d,
    )


class TestFloorCenter:
    def test_mean_of_torso(self):
        joints, avail = body(1.0, 2.0)
        assert np.allclose(floor_center(joints, avail), (1.0, 2.0))

    def test_no_torso_returns_none(self):
        joints = np.zeros((JOINT_COUNT, 3))
        avail = np.zeros(JOINT_COUNT, dtype=bool)
        avail[0] = True
        assert floor_center(joints, avail) is None


class TestMatchTracks:
    def test_identical_streams(self):
        frames = {f: {1: body(0, 0), 2: body(2, 2)} for f in range(5)}
        corr = match_tracks(frames, frames, 0.2)
        assert all(corr[f] == {1: 1, 2: 2} for f in range(5))

    def test_beyond_radius_unmatched(self):
        gt = {0: {1: body(0, 0)}}
        pred = {0: {7: body(0.25, 0)}}
        assert match_tracks(pred, gt, 0.2) == {0: {}}

    def test_three_way_matches_permutation_oracle(self):
        rng = np.random.default_rng(5)
        gt_pos = [(0.0, 0.0), (0.5, 0.2), (1.0, -0.3)]
        pred_pos = [(x + rng.normal(0, 0.05), y + rng.normal(0, 0.05)) for x, y in gt_pos]
        gt = {0: {i: body(*p) for i, p in enumerate(gt_pos)}}
        pred = {0: {10 + j: body(*p) for j, p in enumerate(pred_pos)}}
        corr = match_tracks(pred, gt, 0.2)[0]
        dist = np.array(
            [[np.hypot(g[0] - p[0], g[1] - p[1]) for p in pred_pos] for g in gt_pos]
        )
        best = min(permutations(range(3)), key=lambda m: sum(dist[i, m[i]] for i in range(3)))
        assert corr == {i: 10 + best[i] for i in range(3)}


class TestMotMetrics:
    def test_perfect(self):
        frames = {f: {1: body(0, 0), 2: body(2, 2)} for f in range(20)}
        corr = match_tracks(frames, frames, 0.2)
        idf1, sw, id_map = mot_metrics(corr, frames, frames)
        assert idf1 == 1.0
        assert sw == 0
        assert id_map == {1: 1, 2: 2}

    def test_half_coverage_closed_form(self):
        gt = {f: {1: body(0, 0)} for f in range(10)}
        pred = {f: {100 if f < 5 else 200: body(0, 0)} for f in range(10)}
        corr = match_tracks(pred, gt, 0.2)
        idf1, sw, _ = mot_metrics(corr, pred, gt)
        assert idf1 == pytest.approx(0.5)
        assert sw == 1

    def test_switch_only_on_consecutive_frames(self):
        gt = {f: {1: body(0, 0)} for f in (0, 1, 5, 6)}
        pred = {0: {9: body(0, 0)}, 1: {9: body(0, 0)},
                5: {8: body(0, 0)}, 6: {8: body(0, 0)}}
        corr = match_tracks(pred, gt, 0.2)
        _, sw, _ = mot_metrics(corr, pred, gt)
        assert sw == 0  # id change across the 1..5 gap is not a switch

    def test_matches_bijection_enumeration(self):
        rng = np.random.default_rng(17)
        for _ in range(20):
            n_g, n_p, T = 3, 4, 15
            gt = {}
            pred = {}
            corr = {}
            for f in range(T):
                corr[f] = {}
                gt[f] = {}
                pred[f] = {}
                for g in range(n_g):
                    if rng.random() < 0.8:
                        gt[f][g] = body(g, 0)
                for p in range(n_p):
                    if rng.random() < 0.8:
                        pred[f][p] = body(p, 0)
                # Random plausible correspondence among present ids.
                ps = list(pred[f])
                rng.shuffle(ps)
                for g, p in zip(sorted(gt[f]), ps):
                    corr[f][g] = p
            idf1, _, _ = mot_metrics(corr, pred, gt)

            overlap = {}
            for f in corr:
                for g, p in corr[f].items():
                    overlap[(g, p)] = overlap.get((g, p), 0) + 1
            gt_total = sum(len(v) for v in gt.values())
            pred_total = sum(len(v) for v in pred.values())
            best = 0
            for m in permutations(range(n_p), n_g):
                best = max(best, sum(overlap.get((g, m[g]), 0) for g in range(n_g)))
            want = 2 * best / (2 * best + (pred_total - best) + (gt_total - best))
            assert idf1 == pytest.approx(want)


class TestContactMetrics:
    def gt(self, episodes, frames=40):
        tracks = {f: {1: body(0, 0), 2: body(2, 2)} for f in range(frames)}
        return GroundTruth(tracks=tracks, episodes=episodes)

    def test_identical_is_perfect(self):
        eps = [episode(1, "right", 3, 10, 20), episode(2, "left", 4, 5, 12)]
        gt = self.gt(eps)
        m = contact_metrics(list(eps), gt)
        assert m["episode_recall"] == 1.0
        assert m["binary_f1"] == 1.0
        assert m["binary_iou"] == 1.0
        assert m["semantic_f1"] == 1.0
        assert m["identity_accuracy"] == 1.0

    def test_one_frame_overlap_detected(self):
        gt = self.gt([episode(1, "right", 3, 10, 20)])
        m = contact_metrics([episode(1, "right", 3, 20, 30)], gt)
        assert m["episode_recall"] == 1.0

    def test_wrong_label_not_detected(self):
        gt = self.gt([episode(1, "right", 3, 10, 20)])
        m = contact_metrics([episode(1, "right", 4, 10, 20)], gt)
        assert m["episode_recall"] == 0.0

    def test_wrong_side_not_detected(self):
        gt = self.gt([episode(1, "right", 3, 10, 20)])
        m = contact_metrics([episode(1, "left", 3, 10, 20)], gt)
        assert m["episode_recall"] == 0.0

    def test_half_overlap_set_arithmetic(self):
        gt = self.gt([episode(1, "right", 3, 10, 19)])
        m = contact_metrics([episode(1, "right", 3, 15, 24)], gt)
        assert m["binary_iou"] == pytest.approx(5 / 15)
        assert m["binary_f1"] == pytest.approx(0.5)

    def test_identity_accuracy_uses_id_map(self):
        gt = self.gt([episode(1, "right", 3, 10, 20)])
        pred = [episode(42, "right", 3, 10, 20)]
        m = contact_metrics(pred, gt, id_map={42: 1})
        assert m["identity_accuracy"] == 1.0
        m = contact_metrics(pred, gt, id_map={42: 2})
        assert m["identity_accuracy"] == 0.0

    def test_invisible_frames_excluded(self):
        eps = [episode(1, "right", 3, 10, 19)]
        gt = self.gt(eps)
        gt.visibility = {(f, 1, "right"): False for f in range(15, 20)}
        # Prediction misses exactly the invisible tail; still perfect.
        m = contact_metrics([episode(1, "right", 3, 10, 14)], gt)
        assert m["binary_f1"] == 1.0

    def test_empty_gt_raises(self):
        with pytest.raises(EmptyGroundTruth):
            contact_metrics([], GroundTruth(tracks={}, episodes=[]))

    def test_relabeling_invariance(self):
        eps = [episode(1, "right", 3, 10, 20), episode(2, "left", 4, 5, 12)]
        gt = self.gt(eps)
        m1 = contact_metrics(list(eps), gt)
        swap = {1: 2, 2: 1}
        eps_s = [episode(swap[e.person_id], e.side, e.surface_label, e.t_start, e.t_stop) for e in eps]
        gt_s = GroundTruth(tracks=gt.tracks, episodes=eps_s)
        m2 = contact_metrics(list(eps_s), gt_s)
        assert m1 == m2


class TestEvaluate:
    def test_perfect_end_to_end(self):
        frames = {f: {1: body(0, 0), 2: body(2, 2)} for f in range(30)}
        eps = [episode(1, "right", 3, 5, 25)]
        gt = GroundTruth(tracks=frames, episodes=eps)
        rep = evaluate(frames, list(eps), gt)
        assert rep.idf1 == 1.0
        assert rep.id_switches == 0
        assert rep.episode_recall == 1.0
        assert rep.binary_f1 == 1.0
        assert rep.identity_accuracy == 1.0


class TestSweep:
    def traces(self):
        # Hand 1 approaches label 3, dwells at 3 cm during frames 10-20,
        # then retracts. Values chosen to avoid landing exactly on 0.15.
        out = []
        for f in range(30):
            if f < 10:
                d = 0.3 - 0.025 * f
            elif f <= 20:
                d = 0.03
            else:
                d = 0.03 + 0.05 * (f - 20)
            out.append((f, 1, "right", 1, 3, d))
        return out

    def test_row_count(self):
        gt = GroundTruth(
            tracks={f: {1: body(0, 0)} for f in range(30)},
            episodes=[episode(1, "right", 3, 10, 20)],
        )
        grid = [round(0.02 * k, 2) for k in range(1, 21)]
        rows = threshold_sweep(self.traces(), gt, grid)
        assert len(rows) == 20
        assert [r[0] for r in rows] == grid

    def test_peak_at_moderate_threshold(self):
        gt = GroundTruth(
            tracks={f: {1: body(0, 0)} for f in range(30)},
            episodes=[episode(1, "right", 3, 10, 20)],
        )
        rows = {r[0]: r[1] for r in threshold_sweep(self.traces(), gt, [0.02, 0.12, 0.40])}
        assert rows[0.12] >= rows[0.02]
        assert rows[0.12] >= rows[0.40]

    def test_degenerate_grid_matches_contact_metrics(self):
        gt = GroundTruth(
            tracks={f: {1: body(0, 0)} for f in range(30)},
            episodes=[episode(1, "right", 3, 10, 20)],
        )
        rows = threshold_sweep(self.traces(), gt, [0.12])
        # Hysteresis comes on at the first d < 0.12 (frame 8) and releases
        # above 0.15 (frame 23); compare against the direct episode metric.
        pred = [episode(1, "right", 3, 8, 22)]
        m = contact_metrics(pred, gt)
        assert rows[0][1] == pytest.approx(m["binary_f1"])
        assert rows[0][2] == pytest.approx(m["binary_iou"])
