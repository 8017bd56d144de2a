"""End-to-end orchestration: detections in, tracks and episodes out.

Each frame flows through semantic map assembly, person tracking, hand
fusion, and contact detection. Outputs stream to disk during the pass;
when identity stitching is enabled a second pass rewrites fragment
person ids in place. Memory stays bounded by per-frame state plus the
vote and coexistence tables.
"""

from __future__ import annotations

import json
import os

import numpy as np

from .config import PipelineConfig
from .contact import ContactTracker
from .errors import InputFormatError
from .evaluation import GroundTruth
from .hand_fusion import HandFusion, HandInstance
from .io import (
    GridDepthProvider,
    read_calibration,
    read_detections,
    read_episodes,
    read_tracks,
    read_traces,
    read_visibility,
    write_episodes,
    write_hand_track_line,
    write_track_line,
    write_traces,
)
from .person_tracker import Tracker
from .schema import HandSchema, JointSchema
from .semantic_map import (
    backproject_labeled,
    fuse_clouds,
    read_label_grid,
    read_label_table,
)
from .simulator import SceneDepthProvider, Simulator


def _scene_source(in_dir, cfg: PipelineConfig):
    """Depth/label source for an input directory.

    A scene.json reconstructs the analytic provider; otherwise a grids/
    directory supplies DEP1 depth and LBL1 label files. Returns
    (depth_provider, grid_fn, label_table) where grid_fn(frame, cam_id)
    yields (label_grid, depth_grid) or None when no grids exist.
    """
    table_path = os.path.join(in_dir, "label_table.txt")
    label_table = read_label_table(table_path) if os.path.exists(table_path) else {}

    scene_path = os.path.join(in_dir, "scene.json")
    if os.path.exists(scene_path):
        try:
            with open(scene_path) as f:
                data = json.load(f)
            sim = Simulator(data["scene"], seed=int(data.get("seed", cfg.seed)))
        except (json.JSONDecodeError, KeyError, TypeError) as e:
            raise InputFormatError(f"bad scene file: {e}", path=scene_path)
        provider = SceneDepthProvider(sim)

        def grid_fn(frame, cam_id):
            return provider.grids(frame, cam_id, stride=cfg.stride)

        return provider, grid_fn, label_table

    grids_dir = os.path.join(in_dir, "grids")
    if os.path.isdir(grids_dir):
        provider = GridDepthProvider(grids_dir)

        def grid_fn(frame, cam_id):
            base = os.path.join(grids_dir, f"frame_{frame:06d}_{cam_id}")
            if not os.path.exists(base + ".lbl"):
                return None
            labels = read_label_grid(base + ".lbl")
            from .io import read_depth_grid

            depth = read_depth_grid(base + ".dep")
            return labels, depth

        return provider, grid_fn, label_table

    return None, None, label_table


def _load_hand_schema(in_dir):
    path = os.path.join(in_dir, "hand_schema.json")
    return HandSchema.from_file(path) if os.path.exists(path) else HandSchema()


def _group_frames(det_path):
    """Yield (frame, {camera_id: persons}, hands list) in frame order.

    Records must be frame-ordered; gaps are tolerated and reported by the
    caller as missing frames.
    """
    current = None
    dets = {}
    hands = []
    for frame, cam_id, persons, hand_dicts in read_detections(det_path):
        if current is not None and frame < current:
            raise InputFormatError(
                f"detections not frame-ordered ({frame} after {current})", path=det_path
            )
        if frame != current:
            if current is not None:
                yield current, dets, hands
            current, dets, hands = frame, {}, []
        if persons:
            dets[cam_id] = persons
        for h in hand_dicts:
            hands.append(
                HandInstance(
                    camera_id=cam_id, side=h["side"],
                    vertices=h["vertices"], sigma_fit=h["sigma_fit"],
                )
            )
    if current is not None:
        yield current, dets, hands


def _build_cloud(grid_fn, cals, frame, cfg, label_table):
    clouds = []
    for cam_id in sorted(cals):
        grids = grid_fn(frame, cam_id)
        if grids is None:
            continue
        labels, depth = grids
        clouds.append(backproject_labeled(labels, depth, cals[cam_id], cfg.stride))
    return fuse_clouds(clouds, cfg.voxel_size, label_table, frame)


def _rewrite_ids(out_dir, mapping):
    """Second pass: translate fragment person ids in the emitted files."""

    def m(pid):
        return mapping.get(pid, pid)

    tracks_path = os.path.join(out_dir, "tracks.jsonl")
    rows = [
        (frame, m(tid), e, joints, avail)
        for frame, tid, e, joints, avail in read_tracks(tracks_path)
    ]
    with open(tracks_path, "w") as f:
        for row in rows:
            write_track_line(f, *row)

    hands_path = os.path.join(out_dir, "hand_tracks.jsonl")
    from .io import read_hand_tracks

    hand_rows = list(read_hand_tracks(hands_path))
    with open(hands_path, "w") as f:
        for frame, hid, side, pid, palm, anchors in hand_rows:
            rec = {
                "frame": frame, "hand_track_id": hid, "side": side,
                "person_id": None if pid is None else m(pid),
                "palm_center": [round(float(v), 6) for v in palm],
                "anchors": [[round(float(v), 6) for v in a] for a in anchors],
            }
            f.write(json.dumps(rec, separators=(",", ":")) + "\n")

    eps_path = os.path.join(out_dir, "episodes.csv")
    episodes = read_episodes(eps_path)
    for ep in episodes:
        if ep.person_id is not None:
            ep.person_id = m(ep.person_id)
    write_episodes(eps_path, episodes)

    traces_path = os.path.join(out_dir, "distance_traces.jsonl")
    trace_rows = [
        (frame, hid, side, None if pid is None else m(pid), label, d)
        for frame, hid, side, pid, label, d in read_traces(traces_path)
    ]
    write_traces(traces_path, trace_rows)


def run_pipeline(calib_path, in_dir, out_dir, cfg: PipelineConfig | None = None,
                 stitch=True):
    """Process one recording directory end to end.

    Returns a summary dict (frame counts, warnings, stitch mapping).
    """
    cfg = (cfg or PipelineConfig()).validate()
    cals = read_calibration(calib_path)
    det_path = os.path.join(in_dir, "detections.jsonl")
    if not os.path.exists(det_path):
        raise InputFormatError("missing detections.jsonl", path=det_path)
    depth_provider, grid_fn, label_table = _scene_source(in_dir, cfg)
    hand_schema = _load_hand_schema(in_dir)
    joint_schema = JointSchema()

    tracker = Tracker(cals, cfg.tracker, joint_schema)
    fusion = HandFusion(cfg.fusion, hand_schema, joint_schema)
    contact = ContactTracker(cfg.contact, keep_traces=True)

    os.makedirs(out_dir, exist_ok=True)
    tracks_f = open(os.path.join(out_dir, "tracks.jsonl"), "w")
    hands_f = open(os.path.join(out_dir, "hand_tracks.jsonl"), "w")

    cloud = None
    coexist = {}
    last_e = {}
    frames_seen = 0
    missing_frames = 0
    last_frame = None
    try:
        for frame, dets_by_cam, hands in _group_frames(det_path):
            if last_frame is not None and frame > last_frame + 1:
                missing_frames += frame - last_frame - 1
            last_frame = frame
            frames_seen += 1

            if grid_fn is not None and (cloud is None or not cfg.static_map):
                cloud = _build_cloud(grid_fn, cals, frame, cfg, label_table)

            snapshots = tracker.step(frame, dets_by_cam, depth_provider)
            fused = fusion.step(frame, hands, cals, snapshots)

            # Two ids genuinely coexist only on frames where both received
            # detections (existence not decaying); a dying track coasting
            # beside its replacement must not block stitching them.
            active = []
            for s in snapshots:
                if s.existence >= last_e.get(s.id, 0.0):
                    active.append(s.id)
                last_e[s.id] = s.existence
            active.sort()
            for i, a in enumerate(active):
                for b in active[i + 1:]:
                    coexist[(a, b)] = coexist.get((a, b), 0) + 1

            for snap in snapshots:
                write_track_line(
                    tracks_f, frame, snap.id, snap.existence, snap.joints, snap.available
                )
            for fh in fused:
                write_hand_track_line(hands_f, fh)
                if cloud is not None and len(cloud):
                    contact.update(frame, fh, cloud)
    finally:
        tracks_f.close()
        hands_f.close()

    episodes = contact.finalize()
    write_episodes(os.path.join(out_dir, "episodes.csv"), episodes)
    write_traces(os.path.join(out_dir, "distance_traces.jsonl"), contact.traces)

    mapping = {}
    if stitch:
        strong = [p for p, n in coexist.items() if n >= 3]
        forbidden = {(a, b) for a, b in strong} | {(b, a) for a, b in strong}
        mapping = fusion.stitch_mapping(forbidden)
        if mapping:
            _rewrite_ids(out_dir, mapping)

    summary = {
        "frames": frames_seen,
        "missing_frames": missing_frames,
        "episodes": len(episodes),
        "stitch_mapping": {str(k): v for k, v in sorted(mapping.items())},
        "seed": cfg.seed,
        "config": cfg.to_json(),
    }
    with open(os.path.join(out_dir, "run_meta.json"), "w") as f:
        json.dump(summary, f, indent=1, sort_keys=True)
        f.write("\n")
    return summary


# -- evaluation-side loaders ------------------------------------------------

def load_track_stream(path):
    """tracks.jsonl -> {frame: {id: (joints, available)}}."""
    out = {}
    if not os.path.exists(path):
        return out
    for frame, tid, _e, joints, available in read_tracks(path):
        out.setdefault(frame, {})[tid] = (joints, available)
    return out


def load_ground_truth(gt_dir):
    """Ground-truth bundle from a dataset directory (or its gt/ subdir)."""
    sub = os.path.join(gt_dir, "gt")
    if os.path.isdir(sub):
        gt_dir = sub
    tracks_path = os.path.join(gt_dir, "tracks.jsonl")
    eps_path = os.path.join(gt_dir, "episodes.csv")
    if not os.path.exists(eps_path):
        raise InputFormatError("missing ground-truth episodes.csv", path=eps_path)
    visibility = {}
    vis_path = os.path.join(gt_dir, "visibility.jsonl")
    if os.path.exists(vis_path):
        for frame, pid, side, visible in read_visibility(vis_path):
            if not visible:
                visibility[(frame, pid, side)] = False
    return GroundTruth(
        tracks=load_track_stream(tracks_path),
        episodes=read_episodes(eps_path),
        visibility=visibility,
    )
