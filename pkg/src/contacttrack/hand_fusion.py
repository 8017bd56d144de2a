"""World-frame hand fusion, hand-to-person association, and ID stitching.

Per-camera metric hand reconstructions are lifted to the world frame,
clustered per side on their palm centers, reduced to one representative
per cluster, and attached to tracked persons' side slots with temporal
persistence. Re-association votes accumulated across the sequence drive
an end-of-run merge of fragmented person IDs.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .config import FusionConfig
from .errors import ContactTrackError
from .schema import HandSchema, JointSchema

SIDES = ("left", "right")


class EmptyCluster(ContactTrackError):
    pass


@dataclass
class HandInstance:
    """One camera's metric hand reconstruction in that camera's frame."""

    camera_id: str
    side: str
    vertices: np.ndarray  # (N, 3) meters, camera frame
    sigma_fit: float

    def __post_init__(self):
        self.vertices = np.asarray(self.vertices, dtype=float)
        if self.side not in SIDES:
            raise ValueError(f"side must be left or right, got {self.side!r}")
        if self.sigma_fit < 0:
            raise ValueError("sigma_fit must be non-negative")


@dataclass
class FusedHand:
    """World-frame hand instance after cross-camera fusion."""

    frame: int
    side: str
    vertices_world: np.ndarray
    palm_center: np.ndarray
    anchors: np.ndarray  # (6, 3): palm centroid then five fingertips
    sigma_fit: float
    source_cameras: list
    hand_track_id: int = -1
    person_id: int | None = None


def to_world(hand: HandInstance, cal) -> np.ndarray:
    """Vertices mapped from the camera frame into the world frame."""
    return cal.camera_to_world(hand.vertices)


def dbscan(points, eps, min_pts):
    """Plain DBSCAN over 3D points with deterministic index-order expansion.

    Returns an integer label per point. Noise points are kept as singleton
    clusters so a hand seen by a single camera survives fusion.
    """
    points = np.asarray(points, dtype=float).reshape(-1, 3)
    n = len(points)
    labels = np.full(n, -1, dtype=int)
    if n == 0:
        return labels
    dist = np.linalg.norm(points[:, None, :] - points[None, :, :], axis=2)
    neighbors = [np.flatnonzero(dist[i] <= eps) for i in range(n)]
    core = np.array([len(nb) >= min_pts for nb in neighbors])
    cluster = 0
    for i in range(n):
        if labels[i] != -1 or not core[i]:
            continue
        labels[i] = cluster
        queue = list(neighbors[i])
        qi = 0
        while qi < len(queue):
            j = queue[qi]
            qi += 1
            if labels[j] != -1:
                continue
            labels[j] = cluster
            if core[j]:
                queue.extend(neighbors[j])
        cluster += 1
    for i in range(n):
        if labels[i] == -1:
            labels[i] = cluster
            cluster += 1
    return labels


def cluster_hands(palm_centers, sides, eps, min_pts):
    """Per-side DBSCAN partition of same-frame hand instances.

    palm_centers: (H, 3); sides: length-H side labels. Returns a list of
    index lists, ordered by (side, cluster id) with left before right.
    """
    palm_centers = np.asarray(palm_centers, dtype=float).reshape(-1, 3)
    clusters = []
    for side in SIDES:
        idx = [i for i, s in enumerate(sides) if s == side]
        if not idx:
            continue
        labels = dbscan(palm_centers[idx], eps, min_pts)
        for lab in range(labels.max() + 1):
            clusters.append([idx[j] for j in np.flatnonzero(labels == lab)])
    return clusters


def select_representative(cluster, sigma_fits, camera_ids):
    """Index of the cluster member with minimum sigma_fit, ties to the
    lexicographically lowest camera_id."""
    if not cluster:
        raise EmptyCluster("cannot pick a representative from an empty cluster")
    return min(cluster, key=lambda i: (sigma_fits[i], camera_ids[i]))


def stitch_ids(votes, min_votes=3, forbidden=frozenset()):
    """Greedy one-to-one merge of fragment IDs into persistent IDs.

    votes: {(fragment_id, persistent_id): count}. Pairs are taken by
    descending count (deterministic tie-break on the id pair), pairs below
    min_votes or listed in forbidden are skipped, and each id is used at
    most once per role. Chains resolve transitively so the returned mapping
    sends every fragment directly to its final id.
    """
    order = sorted(votes.items(), key=lambda kv: (-kv[1], kv[0][0], kv[0][1]))
    mapping = {}
    used_targets = set()
    for (frag, pers), count in order:
        if count < min_votes or frag == pers:
            continue
        if (frag, pers) in forbidden:
            continue
        if frag in mapping or pers in used_targets:
            continue
        mapping[frag] = pers
        used_targets.add(pers)
    for frag in list(mapping):
        target = mapping[frag]
        seen = {frag}
        while target in mapping and target not in seen:
            seen.add(target)
            target = mapping[target]
        if target == frag:
            del mapping[frag]  # degenerate cycle, keep both ids
        else:
            mapping[frag] = target
    return mapping


@dataclass
class _HandTrack:
    id: int
    side: str
    center: np.ndarray
    last_frame: int
    person: int | None = None
    prev_person: int | None = None


@dataclass
class AssociationState:
    """Mutable cross-frame state: hand tracks, side slots, vote matrix."""

    tracks: dict = field(default_factory=dict)  # hand_track_id -> _HandTrack
    votes: dict = field(default_factory=dict)   # (new_id, prev_id) -> count
    next_id: int = 1


class HandFusion:
    """Per-frame hand fusion and association against confirmed person tracks."""

    def __init__(self, cfg: FusionConfig | None = None,
                 hand_schema: HandSchema | None = None,
                 joint_schema: JointSchema | None = None):
        self.cfg = cfg or FusionConfig()
        self.hand_schema = hand_schema or HandSchema()
        self.joint_schema = joint_schema or JointSchema()
        self.state = AssociationState()

    # -- fusion -----------------------------------------------------------

    def fuse(self, frame, hands, cals):
        """Cluster per-camera hand instances and pick one per cluster.

        hands: list of HandInstance, pre-sorted by (camera_id, index).
        Returns FusedHand records without track or person assignment.
        """
        if not hands:
            return []
        worlds = [to_world(h, cals[h.camera_id]) for h in hands]
        anchors = [self.hand_schema.anchors(w) for w in worlds]
        centers = np.array([a[0] for a in anchors])
        sides = [h.side for h in hands]
        sigma = [h.sigma_fit for h in hands]
        cam_ids = [h.camera_id for h in hands]
        fused = []
        for members in cluster_hands(centers, sides, self.cfg.dbscan_eps, self.cfg.dbscan_min_pts):
            rep = select_representative(members, sigma, cam_ids)
            fused.append(
                FusedHand(
                    frame=frame,
                    side=hands[rep].side,
                    vertices_world=worlds[rep],
                    palm_center=anchors[rep][0],
                    anchors=anchors[rep],
                    sigma_fit=hands[rep].sigma_fit,
                    source_cameras=sorted({cam_ids[m] for m in members}),
                )
            )
        return fused

    # -- hand track continuity ---------------------------------------------

    def _match_hand_tracks(self, frame, fused):
        """Attach fused hands to surviving hand tracks by palm distance.

        The motion gate scales with the elapsed gap so a hand track can
        survive short occlusions. Unmatched hands open new tracks.
        """
        cfg = self.cfg
        alive = {
            tid: tr for tid, tr in self.state.tracks.items()
            if frame - tr.last_frame <= cfg.hand_gap_frames
        }
        self.state.tracks = dict(alive)
        pairs = []
        for fi, fh in enumerate(fused):
            for tid, tr in alive.items():
                if tr.side != fh.side:
                    continue
                gap = frame - tr.last_frame
                gate = cfg.v_max * gap / cfg.fps + cfg.slack_delta
                d = float(np.linalg.norm(fh.palm_center - tr.center))
                if d < gate:
                    pairs.append((d, fi, tid))
        pairs.sort()
        taken_f, taken_t = set(), set()
        for d, fi, tid in pairs:
            if fi in taken_f or tid in taken_t:
                continue
            taken_f.add(fi)
            taken_t.add(tid)
            # Track center and last_frame update at commit time so the
            # persistence gate still sees the previous frame's center.
            fused[fi].hand_track_id = tid
        for fi, fh in enumerate(fused):
            if fi in taken_f:
                continue
            tid = self.state.next_id
            self.state.next_id += 1
            self.state.tracks[tid] = _HandTrack(
                id=tid, side=fh.side, center=fh.palm_center, last_frame=frame
            )
            fh.hand_track_id = tid

    # -- person association -------------------------------------------------

    def _person_distance(self, fh, snapshot):
        """(priority tier, distance) to the side-matching arm joint.

        Tier 0 is the wrist, 1 the elbow, 2 the shoulder; the highest
        priority joint available on the person track is used.
        """
        joints = self.joint_schema.side_joints[fh.side]
        for tier, name in enumerate(("wrist", "elbow", "shoulder")):
            k = joints[name]
            if snapshot.available[k]:
                return tier, float(np.linalg.norm(fh.palm_center - snapshot.joints[k]))
        return None

    def associate(self, frame, fused, persons):
        """Assign fused hands to person side slots; record stitch votes.

        persons: confirmed TrackSnapshot list for this frame. Mutates the
        fused records in place and returns them.
        """
        cfg = self.cfg
        by_id = {p.id: p for p in persons}
        slots = {}  # (person_id, side) -> fused index
        assigned = {}  # fused index -> person_id

        # Persistence pass: a hand track whose palm moved less than the
        # gap-scaled gate keeps its previous person if that person is still
        # confirmed and the hand remains within the association radius of
        # it. Without the radius check a hand swapped onto the wrong person
        # while two people pass each other would stay locked to that person
        # arbitrarily far away.
        pool = []
        for fi, fh in enumerate(fused):
            tr = self.state.tracks[fh.hand_track_id]
            gap = max(frame - tr.last_frame, 1)
            gate = cfg.v_max * gap / cfg.fps + cfg.slack_delta
            td = (
                self._person_distance(fh, by_id[tr.person])
                if tr.person is not None and tr.person in by_id
                else None
            )
            if (
                td is not None
                and td[1] < cfg.tau_assoc
                and np.linalg.norm(fh.palm_center - tr.center) < gate
                and (tr.person, fh.side) not in slots
            ):
                slots[(tr.person, fh.side)] = fi
                assigned[fi] = tr.person
            else:
                pool.append(fi)

        # Greedy pass over (tier, distance)-ranked candidates with slot
        # eviction; an evicted hand re-enters the pool in the same frame.
        candidates = {}
        for fi in list(pool) + list(assigned):
            opts = []
            for p in persons:
                td = self._person_distance(fused[fi], p)
                if td is not None and td[1] < cfg.tau_assoc:
                    opts.append((td[0], td[1], p.id))
            opts.sort()
            candidates[fi] = opts
        rank_of = {}
        for fi, pid in assigned.items():
            # A persisted hand defends its slot with its true (tier,
            # distance) to the kept person, so a closer hand can evict it.
            td = self._person_distance(fused[fi], by_id[pid])
            rank_of[fi] = td if td is not None else (2, float("inf"))

        cursor = {fi: 0 for fi in pool}
        while pool:
            best = None
            for fi in pool:
                opts = candidates[fi]
                if cursor[fi] >= len(opts):
                    continue
                key = opts[cursor[fi]]
                if best is None or key < best[0]:
                    best = (key, fi)
            if best is None:
                break
            (tier, d, pid), fi = best
            slot = (pid, fused[fi].side)
            holder = slots.get(slot)
            if holder is None:
                slots[slot] = fi
                assigned[fi] = pid
                rank_of[fi] = (tier, d)
                pool.remove(fi)
            elif (tier, d) < rank_of[holder]:
                slots[slot] = fi
                assigned[fi] = pid
                rank_of[fi] = (tier, d)
                pool.remove(fi)
                del assigned[holder]
                pool.append(holder)
                cursor[holder] = 0
                candidates[holder] = [
                    c for c in candidates[holder] if c[2] != pid
                ]
            else:
                cursor[fi] += 1

        # Commit: update hand tracks, cast per-frame re-association votes.
        for fi, fh in enumerate(fused):
            tr = self.state.tracks[fh.hand_track_id]
            tr.center = fh.palm_center
            tr.last_frame = frame
            pid = assigned.get(fi)
            fh.person_id = pid
            if pid is not None:
                if pid != tr.person:
                    tr.prev_person = tr.person
                    tr.person = pid
                if tr.prev_person is not None and pid != tr.prev_person:
                    key = (pid, tr.prev_person)
                    self.state.votes[key] = self.state.votes.get(key, 0) + 1
        return fused

    def step(self, frame, hands, cals, persons):
        """Fuse one frame of hand instances and associate them to persons."""
        fused = self.fuse(frame, hands, cals)
        self._match_hand_tracks(frame, fused)
        return self.associate(frame, fused, persons)

    def stitch_mapping(self, forbidden=frozenset()):
        """Fragment-to-persistent id mapping from the accumulated votes."""
        return stitch_ids(self.state.votes, self.cfg.stitch_min_votes, forbidden)
