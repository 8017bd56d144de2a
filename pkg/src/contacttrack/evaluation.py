"""Tracking and contact metrics over predicted vs. ground-truth streams.

Per-frame Hungarian matching of floor-projected person centers feeds
IDF1/IDSW; episode and framewise contact metrics compare predicted
episodes against ground truth under a visibility mask; a threshold sweep
re-runs the contact stage on cached distance traces.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linear_sum_assignment

from .config import ContactConfig
from .contact import merge_episodes, run_hysteresis
from .errors import ContactTrackError
from .geometry import hungarian_assign
from .schema import JointSchema

SIDES = ("left", "right")


class EmptyGroundTruth(ContactTrackError):
    pass


@dataclass
class GroundTruth:
    """Per-frame true tracks, episodes, and hand visibility flags."""

    tracks: dict  # frame -> {person_id: (joints (26,3), available (26,))}
    episodes: list  # ContactEpisode records (person_id always set)
    visibility: dict = field(default_factory=dict)  # (frame, person, side) -> bool

    def visible(self, frame, person, side):
        return self.visibility.get((frame, person, side), True)


@dataclass
class EvalReport:
    idf1: float
    id_switches: int
    episode_recall: float
    binary_f1: float
    binary_iou: float
    semantic_f1: float
    semantic_iou: float
    identity_accuracy: float
    detected_episodes: int
    gt_episodes: int

    def to_dict(self):
        return {
            "idf1": self.idf1,
            "id_switches": self.id_switches,
            "episode_recall": self.episode_recall,
            "binary_f1": self.binary_f1,
            "binary_iou": self.binary_iou,
            "semantic_f1": self.semantic_f1,
            "semantic_iou": self.semantic_iou,
            "identity_accuracy": self.identity_accuracy,
            "detected_episodes": self.detected_episodes,
            "gt_episodes": self.gt_episodes,
        }


def floor_center(joints, available, schema: JointSchema | None = None):
    """Planar (x, y) center: mean of available torso joints, gravity axis
    dropped. None when no torso joint is available."""
    torso = (schema or _SCHEMA).torso_indices
    idx = [k for k in torso if available[k]]
    if not idx:
        return None
    return np.asarray(joints, dtype=float)[idx, :2].mean(axis=0)


_SCHEMA = JointSchema()


def match_tracks(pred_by_frame, gt_by_frame, radius=0.2, schema=None):
    """Per-frame gated Hungarian matching of floor-projected centers.

    pred_by_frame / gt_by_frame: frame -> {id: (joints, available)}.
    Returns {frame: {gt_id: pred_id}} over the union of frames.
    """
    out = {}
    for frame in sorted(set(pred_by_frame) | set(gt_by_frame)):
        gts = gt_by_frame.get(frame, {})
        preds = pred_by_frame.get(frame, {})
        gt_ids = sorted(gts)
        pred_ids = sorted(preds)
        centers_g = [floor_center(*gts[g], schema) for g in gt_ids]
        centers_p = [floor_center(*preds[p], schema) for p in pred_ids]
        cost = np.full((len(gt_ids), len(pred_ids)), np.inf)
        for i, cg in enumerate(centers_g):
            if cg is None:
                continue
            for j, cp in enumerate(centers_p):
                if cp is None:
                    continue
                cost[i, j] = np.linalg.norm(cg - cp)
        pairs = hungarian_assign(cost, radius)
        out[frame] = {gt_ids[i]: pred_ids[j] for i, j in pairs}
    return out


def mot_metrics(correspondence, pred_by_frame, gt_by_frame):
    """IDF1 and identity switches from a per-frame correspondence.

    IDF1 uses the optimal global one-to-one mapping between gt and
    predicted identities that maximizes identity true positives; IDSW
    counts strictly consecutive matched frames where a gt id's predicted
    id changes.
    """
    overlap = {}
    for frame, pairs in correspondence.items():
        for g, p in pairs.items():
            overlap[(g, p)] = overlap.get((g, p), 0) + 1
    gt_total = sum(len(v) for v in gt_by_frame.values())
    pred_total = sum(len(v) for v in pred_by_frame.values())

    gt_ids = sorted({g for g, _ in overlap})
    pred_ids = sorted({p for _, p in overlap})
    idtp = 0
    id_map = {}
    if overlap:
        w = np.zeros((len(gt_ids), len(pred_ids)))
        for (g, p), n in overlap.items():
            w[gt_ids.index(g), pred_ids.index(p)] = n
        rows, cols = linear_sum_assignment(-w)
        for r, c in zip(rows, cols):
            if w[r, c] > 0:
                idtp += int(w[r, c])
                id_map[pred_ids[c]] = gt_ids[r]
    denom = 2 * idtp + (pred_total - idtp) + (gt_total - idtp)
    idf1 = (2 * idtp / denom) if denom else 1.0

    switches = 0
    frames = sorted(correspondence)
    for g in {g for pairs in correspondence.values() for g in pairs}:
        prev_frame = prev_pred = None
        for frame in frames:
            p = correspondence[frame].get(g)
            if p is None:
                continue
            if prev_pred is not None and frame == prev_frame + 1 and p != prev_pred:
                switches += 1
            prev_frame, prev_pred = frame, p
    return idf1, switches, id_map


def _episode_frames(ep):
    return range(ep.t_start, ep.t_stop + 1)


def _framewise_sets(pred_episodes, gt, id_map, semantic):
    """Micro TP/FP/FN counts over framewise contact indicators.

    Prediction person ids are mapped into gt id space through id_map;
    predictions without a mapped person still count as positives (false
    unless they land on a gt-active frame, which they cannot). Frames
    where the gt hand is flagged invisible are excluded on both sides.
    """
    def key(person, side, label):
        return (person, side, label) if semantic else (person, side)

    gt_set = set()
    for ep in gt.episodes:
        for f in _episode_frames(ep):
            if gt.visible(f, ep.person_id, ep.side):
                gt_set.add((f,) + key(ep.person_id, ep.side, ep.surface_label))
    pred_set = set()
    for ep in pred_episodes:
        person = id_map.get(ep.person_id, ep.person_id)
        for f in _episode_frames(ep):
            if person is not None and not gt.visible(f, person, ep.side):
                continue
            pred_set.add((f,) + key(person, ep.side, ep.surface_label))
    tp = len(pred_set & gt_set)
    fp = len(pred_set - gt_set)
    fn = len(gt_set - pred_set)
    f1 = 2 * tp / (2 * tp + fp + fn) if (tp + fp + fn) else 1.0
    iou = tp / (tp + fp + fn) if (tp + fp + fn) else 1.0
    return f1, iou


def contact_metrics(pred_episodes, gt: GroundTruth, id_map=None):
    """Episode recall, framewise binary/semantic F1 and IoU, identity accuracy.

    id_map translates predicted person ids into gt id space (from
    mot_metrics); identity accuracy scores matched predicted episodes
    against the gt episode identity.
    """
    if not gt.episodes:
        raise EmptyGroundTruth("ground truth contains no episodes")
    id_map = id_map or {}

    detected = 0
    for gep in gt.episodes:
        for pep in pred_episodes:
            if (
                pep.side == gep.side
                and pep.surface_label == gep.surface_label
                and pep.t_start <= gep.t_stop
                and pep.t_stop >= gep.t_start
            ):
                detected += 1
                break
    recall = detected / len(gt.episodes)

    binary_f1, binary_iou = _framewise_sets(pred_episodes, gt, id_map, semantic=False)
    semantic_f1, semantic_iou = _framewise_sets(pred_episodes, gt, id_map, semantic=True)

    matched = correct = 0
    for pep in pred_episodes:
        best = None
        for gep in gt.episodes:
            if pep.side != gep.side or pep.surface_label != gep.surface_label:
                continue
            lo = max(pep.t_start, gep.t_start)
            hi = min(pep.t_stop, gep.t_stop)
            if hi - lo + 1 >= 1 and (best is None or hi - lo > best[0]):
                best = (hi - lo, gep)
        if best is None:
            continue
        matched += 1
        mapped = id_map.get(pep.person_id, pep.person_id)
        if mapped == best[1].person_id:
            correct += 1
    identity_accuracy = correct / matched if matched else 0.0

    return {
        "episode_recall": recall,
        "detected_episodes": detected,
        "gt_episodes": len(gt.episodes),
        "binary_f1": binary_f1,
        "binary_iou": binary_iou,
        "semantic_f1": semantic_f1,
        "semantic_iou": semantic_iou,
        "identity_accuracy": identity_accuracy,
    }


def evaluate(pred_by_frame, pred_episodes, gt: GroundTruth, radius=0.2, schema=None):
    """Full evaluation of one recording; returns an EvalReport."""
    corr = match_tracks(pred_by_frame, gt.tracks, radius, schema)
    idf1, switches, id_map = mot_metrics(corr, pred_by_frame, gt.tracks)
    cm = contact_metrics(pred_episodes, gt, id_map)
    return EvalReport(
        idf1=idf1,
        id_switches=switches,
        episode_recall=cm["episode_recall"],
        binary_f1=cm["binary_f1"],
        binary_iou=cm["binary_iou"],
        semantic_f1=cm["semantic_f1"],
        semantic_iou=cm["semantic_iou"],
        identity_accuracy=cm["identity_accuracy"],
        detected_episodes=cm["detected_episodes"],
        gt_episodes=cm["gt_episodes"],
    )


def threshold_sweep(traces, gt: GroundTruth, grid, base_cfg: ContactConfig | None = None,
                    id_map=None, hysteresis_margin=0.03):
    """Re-run the contact stage per threshold on cached distance traces.

    traces: iterable of (frame, hand_id, side, person_id, label, distance).
    Returns rows (tau_on, binary_f1, binary_iou); tau_off is kept at
    tau_on + hysteresis_margin.
    """
    base = base_cfg or ContactConfig()
    series = {}
    for frame, hand_id, side, person, label, d in traces:
        series.setdefault((hand_id, label), []).append((frame, d, person, side))
    for seq in series.values():
        seq.sort(key=lambda r: r[0])

    rows = []
    for tau_on in grid:
        cfg = ContactConfig(
            tau_on=tau_on, tau_off=tau_on + hysteresis_margin,
            ema_alpha=base.ema_alpha,
            min_episode_frames=base.min_episode_frames,
            max_gap_frames=base.max_gap_frames,
        )
        episodes = []
        for (hand_id, label), seq in sorted(series.items()):
            dists = [d for _, d, _, _ in seq]
            active = run_hysteresis(dists, cfg.tau_on, cfg.tau_off)
            records = [
                (f, d, np.zeros(3), person, side)
                for (f, d, person, side), a in zip(seq, active)
                if a
            ]
            episodes.extend(merge_episodes(records, cfg, label))
        f1, iou = _framewise_sets(episodes, gt, id_map or {}, semantic=False)
        rows.append((float(tau_on), f1, iou))
    return rows
