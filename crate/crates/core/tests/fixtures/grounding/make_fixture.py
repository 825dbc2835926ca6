"""Writes the 20-sample grounding fixture and its hand tally.

Every predicted box and proposal is the ground-truth box shifted along world x
or scaled about its center, so each IoU has a closed form:
  equal boxes shifted by s along an edge of length L: (L - s) / (L + s)
  concentric box scaled by k >= 1: 1 / k^3
Boxes moved 10 m along y never overlap anything.
"""

import json
import random
from pathlib import Path

import numpy as np

OUT = Path(__file__).parent
W, H, FX, FY, CX, CY = 640, 480, 500.0, 500.0, 320.0, 240.0


def pose(yaw_deg, eye):
    # camera x -> world x, camera y (down) -> world -z, camera z -> world y
    base = np.array([[1.0, 0.0, 0.0], [0.0, 0.0, 1.0], [0.0, -1.0, 0.0]])
    a = np.radians(yaw_deg)
    rz = np.array([[np.cos(a), -np.sin(a), 0.0], [np.sin(a), np.cos(a), 0.0], [0.0, 0.0, 1.0]])
    m = np.eye(4)
    m[:3, :3] = rz @ base
    m[:3, 3] = eye
    return m


def shifted(c, s):
    return c + np.array([s, 0.0, 0.0])


def iou_shift(L, s):
    return max(L - abs(s), 0.0) / (L + abs(s))


def main():
    rng = random.Random(20)
    gts, preds, tally = [], [], []
    kinds = ["shift"] * 8 + ["scale"] * 4 + ["decoy"] * 4 + ["miss"] * 3 + ["garbled"]
    for i, kind in enumerate(kinds):
        sid = f"g{i:02d}"
        m = pose(rng.uniform(-40, 40), [rng.uniform(0, 4), rng.uniform(0, 4), 1.5])
        size = np.array([rng.uniform(0.5, 1.2), rng.uniform(0.5, 1.2), rng.uniform(0.4, 1.0)])
        L = size[0]
        cam_c = np.array([rng.uniform(-0.4, 0.4), rng.uniform(-0.2, 0.3), rng.uniform(3.0, 6.0)])
        gt_c = m[:3, :3] @ cam_c + m[:3, 3]
        far = lambda c, k: c + np.array([0.0, 10.0 * k, 0.0])
        pred_size = size
        props = [(gt_c, size), (far(gt_c, 1), size), (far(gt_c, -1), size * 1.3)]
        if kind == "shift":
            s = L * rng.uniform(0.05, 0.7)
            pred_c, raw = shifted(gt_c, s), iou_shift(L, s)
            refined = 1.0
        elif kind == "scale":
            k = rng.uniform(1.05, 1.5)
            pred_c, pred_size, raw = gt_c, size * k, 1.0 / k**3
            refined = 1.0
        elif kind == "decoy":
            # a proposal close to the prediction beats the ground truth
            s = L * rng.uniform(0.4, 0.7)
            pred_c, raw = shifted(gt_c, s), iou_shift(L, s)
            d = s * 0.9
            props.append((shifted(gt_c, d), size))
            assert iou_shift(L, s - d) > raw
            refined = iou_shift(L, d)
        elif kind == "miss":
            # no overlap at all: the nearest proposal center is the ground truth
            s = L * rng.uniform(1.1, 1.5)
            pred_c, raw = shifted(gt_c, s), 0.0
            refined = 1.0
        else:
            pred_c, raw, refined = gt_c, 0.0, 0.0
        rng.shuffle(props)

        p_cam = m[:3, :3].T @ (pred_c - m[:3, 3])
        u = (FX * p_cam[0] / p_cam[2] + CX) / W * 1000.0
        v = (FY * p_cam[1] / p_cam[2] + CY) / H * 1000.0
        assert 0 <= u <= 1000 and 0 <= v <= 1000
        frame_index = 10 + i
        sz = ",".join(f"{x:.12f}" for x in pred_size)
        text = f"frame:{frame_index}; uv:({u:.12f},{v:.12f}); depth:{p_cam[2]:.12f}; size:({sz})"
        if kind == "garbled":
            text = f"frame:{frame_index}; uv:({u:.3f},{v:.3f}); size:({sz})"
        box = lambda c, s: {"center": list(map(float, c)), "size": list(map(float, s))}
        gts.append({
            "id": sid,
            "box": box(gt_c, size),
            "proposals": [box(c, s) for c, s in props],
            "frames": [{
                "frame_index": frame_index,
                "image_path": f"frames/{frame_index:06d}.png",
                "pose": m.tolist(),
                "camera": {"fx": FX, "fy": FY, "cx": CX, "cy": CY, "width": W, "height": H},
            }],
        })
        preds.append({"id": sid, "text": text})
        tally.append({"id": sid, "kind": kind, "raw_iou": raw, "refined_iou": refined})

    def acc(key, t):
        return 100.0 * sum(r[key] >= t for r in tally) / len(tally)

    summary = {
        "samples": tally,
        "acc_raw": {"acc@0.25": acc("raw_iou", 0.25), "acc@0.5": acc("raw_iou", 0.5)},
        "acc_refined": {"acc@0.25": acc("refined_iou", 0.25), "acc@0.5": acc("refined_iou", 0.5)},
    }
    (OUT / "gt.jsonl").write_text("".join(json.dumps(g) + "\n" for g in gts))
    (OUT / "pred.jsonl").write_text("".join(json.dumps(p) + "\n" for p in preds))
    (OUT / "tally.json").write_text(json.dumps(summary, indent=2) + "\n")


if __name__ == "__main__":
    main()
