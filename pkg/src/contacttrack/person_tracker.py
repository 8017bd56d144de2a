"""Multi-person 3D skeleton tracking across synchronized cameras.

Per-camera association against projected track joints, epipolar-gated
weighted triangulation, single-view depth lifting with a bone-length
plausibility gate, multi-camera births with ID reuse, and an
existence-score lifecycle. All state mutation happens in a single
sequential commit per frame; per-camera association is read-only on
track state and may fan out to workers.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .config import TrackerConfig
from .geometry import (
    CameraCalibration,
    backproject,
    epipolar_distance,
    fundamental_matrix,
    hungarian_assign,
    project_many,
    triangulate_weighted,
    InsufficientViews,
    IllConditioned,
)
from .schema import JOINT_COUNT, JointSchema


@dataclass
class PersonTrack:
    """One tracked person: 26 joints, availability flags, existence score."""

    id: int
    joints: np.ndarray  # (26, 3)
    available: np.ndarray  # (26,) bool
    existence: float
    last_update_frame: int
    confirmed: bool = False
    idle_frames: int = 0

    def centroid(self):
        if not self.available.any():
            return None
        return self.joints[self.available].mean(axis=0)


@dataclass
class TrackSnapshot:
    frame: int
    id: int
    existence: float
    joints: np.ndarray
    available: np.ndarray


def associate_camera(tracks, dets, cal: CameraCalibration, cfg: TrackerConfig):
    """Match tracks to one camera's detections by mean pixel error over
    confident, available joints. Returns (matches, unmatched detection idxs);
    matches are (track_index, detection_index) pairs.
    """
    n_t, n_d = len(tracks), len(dets)
    if n_t == 0 or n_d == 0:
        return [], list(range(n_d))
    cost = np.full((n_t, n_d), np.inf)
    for ti, track in enumerate(tracks):
        if not track.available.any():
            continue
        uv, in_front = project_many(track.joints, cal)
        proj_ok = track.available & in_front
        if not proj_ok.any():
            continue
        for di in range(n_d):
            conf_ok = dets[di][:, 2] >= cfg.tau_joint
            k = proj_ok & conf_ok
            if not k.any():
                continue
            err = np.linalg.norm(uv[k] - dets[di][k, :2], axis=1)
            cost[ti, di] = err.mean()
    matches = hungarian_assign(cost, cfg.tau_mpjpe)
    matched_d = {d for _, d in matches}
    return matches, [d for d in range(n_d) if d not in matched_d]


def _consistent_view_set(pixels, cams, fmat, tau_epi):
    """Greedy pairwise-consistent camera subset for one joint.

    Seeds with the lowest-distance pair under tau_epi and adds views
    consistent with every member.
    """
    n = len(cams)
    if n < 2:
        return []
    dist = np.full((n, n), np.inf)
    for a in range(n):
        for b in range(a + 1, n):
            F = fmat(cams[a], cams[b])
            d = epipolar_distance(pixels[a], pixels[b], F)
            dist[a, b] = dist[b, a] = d
    seed = np.unravel_index(np.argmin(dist), dist.shape)
    if dist[seed] >= tau_epi:
        return []
    members = [min(seed), max(seed)]
    for c in range(n):
        if c in members:
            continue
        if all(dist[c, m] < tau_epi for m in members):
            members.append(c)
    return sorted(members)


def update_triangulated(track, obs_by_cam, cals, fmat, cfg: TrackerConfig):
    """Triangulate joints seen consistently in >= v_min cameras.

    obs_by_cam: {camera_id: (26, 3) joint array} of this track's matched
    detections. Accepted joints overwrite the track with c=1 and are
    returned as a set of joint indices.
    """
    updated = set()
    cam_ids = sorted(obs_by_cam)
    for k in range(JOINT_COUNT):
        views = [c for c in cam_ids if obs_by_cam[c][k, 2] >= cfg.tau_joint]
        if len(views) < cfg.v_min:
            continue
        pixels = [obs_by_cam[c][k, :2] for c in views]
        keep = _consistent_view_set(pixels, views, fmat, cfg.tau_epi)
        if len(keep) < cfg.v_min:
            continue
        obs = [(cals[views[i]], pixels[i], obs_by_cam[views[i]][k, 2]) for i in keep]
        hint = track.joints[k] if track.available[k] else None
        try:
            X, err = triangulate_weighted(obs, init_hint=hint)
        except (InsufficientViews, IllConditioned):
            continue
        if err < cfg.eps_tri:
            track.joints[k] = X
            track.available[k] = True
            updated.add(k)
    return updated


def depth_lift(track, unresolved, obs_by_cam, depth_provider, frame, cals,
               schema: JointSchema, cfg: TrackerConfig, fixed_joints=()):
    """Recover unresolved joints from single-view depth patches.

    Candidates pass the patch-variance and confidence gates, are
    back-projected, and survive only inside the largest bone-consistent
    connected component. Joints in fixed_joints (triangulated this frame)
    participate as immutable graph nodes. Returns the set of lifted joints.
    """
    candidates = {}
    for k in unresolved:
        best = None
        for cam_id in sorted(obs_by_cam):
            u, v, s = obs_by_cam[cam_id][k]
            if s < cfg.tau_joint:
                continue
            patch = depth_provider.patch(frame, cam_id, int(round(u)), int(round(v)), cfg.patch_w)
            valid = patch[patch > 0]
            if valid.size < 3:
                continue
            var = float(valid.var())
            if var > cfg.sigma_max_sq:
                continue
            key = (-s, cam_id, var)
            if best is None or key < best[0]:
                X = backproject(u, v, float(valid.mean()), cals[cam_id])
                best = (key, X, s)
        if best is not None:
            candidates[k] = (best[1], best[2])
    if not candidates:
        return set()

    # Bone-consistency graph over candidates plus fixed (triangulated) nodes.
    nodes = dict(candidates)
    for k in fixed_joints:
        nodes[k] = (track.joints[k], 1.0)
    parent = {k: k for k in nodes}

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for a, b, L in schema.edges:
        if a in nodes and b in nodes:
            d = np.linalg.norm(nodes[a][0] - nodes[b][0])
            if cfg.bone_alpha * L <= d <= cfg.bone_beta * L:
                parent[find(a)] = find(b)

    comps = {}
    for k in nodes:
        comps.setdefault(find(k), []).append(k)
    # Largest component; ties break to the one holding the most confident joint.
    best_comp = max(
        comps.values(),
        key=lambda members: (len(members), max(nodes[m][1] for m in members), -min(members)),
    )
    lifted = set()
    for k in best_comp:
        if k in candidates:
            track.joints[k] = candidates[k][0]
            track.available[k] = True
            lifted.add(k)
    return lifted


def _group_unmatched(unmatched, cals, fmat, cfg: TrackerConfig):
    """Greedy epipolar grouping of unmatched detections into person hypotheses.

    unmatched: list of (camera_id, joints (26,3)). Returns groups as lists of
    indices into `unmatched`, each covering distinct cameras.
    """
    n = len(unmatched)
    pairs = []
    for a in range(n):
        for b in range(a + 1, n):
            cam_a, ja = unmatched[a]
            cam_b, jb = unmatched[b]
            if cam_a == cam_b:
                continue
            shared = (ja[:, 2] >= cfg.tau_joint) & (jb[:, 2] >= cfg.tau_joint)
            if not shared.any():
                continue
            F = fmat(cam_a, cam_b)
            dists = [
                epipolar_distance(ja[k, :2], jb[k, :2], F) for k in np.flatnonzero(shared)
            ]
            aff = float(np.mean(dists))
            if aff < cfg.tau_epi:
                pairs.append((aff, a, b))
    pairs.sort()

    group_of = {}
    groups = []
    for _, a, b in pairs:
        ga = group_of.get(a)
        gb = group_of.get(b)
        if ga is None and gb is None:
            groups.append([a, b])
            group_of[a] = group_of[b] = len(groups) - 1
        elif ga is not None and gb is None:
            cams = {unmatched[i][0] for i in groups[ga]}
            if unmatched[b][0] not in cams:
                groups[ga].append(b)
                group_of[b] = ga
        elif ga is None and gb is not None:
            cams = {unmatched[i][0] for i in groups[gb]}
            if unmatched[a][0] not in cams:
                groups[gb].append(a)
                group_of[a] = gb
        elif ga != gb:
            cams_a = {unmatched[i][0] for i in groups[ga]}
            cams_b = {unmatched[i][0] for i in groups[gb]}
            if not cams_a & cams_b:
                for i in groups[gb]:
                    group_of[i] = ga
                groups[ga].extend(groups[gb])
                groups[gb] = []
    return [g for g in groups if len({unmatched[i][0] for i in g}) >= 2]


class Tracker:
    """Owns track state; step() commits one frame in the spec's stage order."""

    def __init__(self, cals, cfg: TrackerConfig | None = None, schema: JointSchema | None = None):
        self.cals = dict(cals)
        self.cfg = cfg or TrackerConfig()
        self.schema = schema or JointSchema()
        self.tracks: list[PersonTrack] = []
        self.next_id = 1
        self._fcache = {}

    def _fmat(self, cam_a, cam_b):
        key = (cam_a, cam_b)
        if key not in self._fcache:
            self._fcache[key] = fundamental_matrix(self.cals[cam_a], self.cals[cam_b])
        return self._fcache[key]

    def step(self, frame, dets_by_cam, depth_provider=None):
        """Process one frame of per-camera detections.

        dets_by_cam: {camera_id: (P, 26, 3) array of (u, v, confidence)}.
        Returns snapshots of confirmed tracks.
        """
        cfg = self.cfg
        matched_obs = {i: {} for i in range(len(self.tracks))}  # track idx -> cam -> joints
        unmatched = []
        for cam_id in sorted(dets_by_cam):
            dets = [np.asarray(d, dtype=float) for d in dets_by_cam[cam_id]]
            matches, um = associate_camera(self.tracks, dets, self.cals[cam_id], cfg)
            for ti, di in matches:
                matched_obs[ti][cam_id] = dets[di]
            for di in um:
                unmatched.append((cam_id, dets[di]))

        updated_tracks = set()
        for ti, obs in matched_obs.items():
            if not obs:
                continue
            track = self.tracks[ti]
            tri = update_triangulated(track, obs, self.cals, self._fmat, cfg)
            lifted = set()
            if depth_provider is not None:
                unresolved = [k for k in range(JOINT_COUNT) if k not in tri]
                lifted = depth_lift(
                    track, unresolved, obs, depth_provider, frame, self.cals,
                    self.schema, cfg, fixed_joints=tri,
                )
            if tri or lifted:
                updated_tracks.add(ti)
                track.last_update_frame = frame

        born = self._spawn(unmatched, frame, updated_tracks)
        return self._lifecycle(frame, updated_tracks, born)

    # -- births ---------------------------------------------------------

    def _spawn(self, unmatched, frame, updated_tracks):
        cfg = self.cfg
        born = set()
        for group in _group_unmatched(unmatched, self.cals, self._fmat, cfg):
            joints = np.zeros((JOINT_COUNT, 3))
            avail = np.zeros(JOINT_COUNT, dtype=bool)
            for k in range(JOINT_COUNT):
                obs = [
                    (self.cals[unmatched[i][0]], unmatched[i][1][k, :2], unmatched[i][1][k, 2])
                    for i in group
                    if unmatched[i][1][k, 2] >= cfg.tau_joint
                ]
                if len(obs) < 2:
                    continue
                try:
                    X, err = triangulate_weighted(obs)
                except (InsufficientViews, IllConditioned):
                    continue
                if err < cfg.eps_init:
                    joints[k] = X
                    avail[k] = True
            if avail.sum() < cfg.min_birth_joints:
                continue
            centroid = joints[avail].mean(axis=0)

            # ID reuse: adopt into the nearest stale track within r_reuse.
            best = None
            for ti, track in enumerate(self.tracks):
                if ti in updated_tracks:
                    continue
                tc = track.centroid()
                if tc is None:
                    continue
                d = np.linalg.norm(tc - centroid)
                if d < cfg.r_reuse and (best is None or d < best[0]):
                    best = (d, ti)
            if best is not None:
                track = self.tracks[best[1]]
                track.joints[avail] = joints[avail]
                track.available |= avail
                track.last_update_frame = frame
                updated_tracks.add(best[1])
            else:
                self.tracks.append(
                    PersonTrack(
                        id=self.next_id,
                        joints=joints,
                        available=avail,
                        existence=cfg.e_init,
                        last_update_frame=frame,
                    )
                )
                self.next_id += 1
                born.add(len(self.tracks) - 1)
        return born

    # -- lifecycle ------------------------------------------------------

    def _lifecycle(self, frame, updated_tracks, born=()):
        cfg = self.cfg
        survivors = []
        out = []
        for ti, track in enumerate(self.tracks):
            if ti in born:
                pass  # fresh tracks keep e_init this frame
            elif ti in updated_tracks:
                track.existence = min(1.0, track.existence + cfg.e_up)
                track.idle_frames = 0
            else:
                track.existence *= cfg.decay_lambda
                track.idle_frames += 1
            if track.existence >= cfg.e_on:
                track.confirmed = True
            if track.existence <= cfg.e_off or track.idle_frames > cfg.max_inactive_frames:
                continue
            survivors.append(track)
            if track.confirmed:
                out.append(
                    TrackSnapshot(
                        frame=frame,
                        id=track.id,
                        existence=track.existence,
                        joints=track.joints.copy(),
                        available=track.available.copy(),
                    )
                )
        self.tracks = survivors
        return out

    def confirmed_tracks(self):
        return [t for t in self.tracks if t.confirmed]
