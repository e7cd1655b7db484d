#!/usr/bin/env python3
"""Generate the shared conformance fixture suite under fixtures/conformance/.

The inputs are deterministic (seeded) and the expected outputs are produced by
the batch CLI, so any consumer (the bindings package in particular) can verify
bit-identical behavior against the committed files.  Re-running this script
must be a no-op on a clean tree.
"""

from __future__ import annotations

import math
import sys
from pathlib import Path

import numpy as np
from click.testing import CliRunner

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

from affgr import fileio  # noqa: E402
from affgr.cli import main as cli_main  # noqa: E402

ROOT = Path(__file__).resolve().parent.parent
OUT_DIR = ROOT / "fixtures" / "conformance"

AFF_METHODS = ["grasp", "pull", "hold", "lift"]
AFF_PARTS = ["handle", "whole", "rim", "lid"]
SENTENCES = [
    "The object sits on the table",
    "Its handle points left",
    "The graspable region is narrow",
    "I verify the box against the image",
    "The part affords a firm hold",
]


def fmt(v: float) -> str:
    return repr(round(float(v), 3))


def make_think(rng) -> str:
    n = int(rng.integers(1, 6))
    picks = [SENTENCES[int(rng.integers(0, len(SENTENCES)))] for _ in range(n)]
    if rng.random() < 0.3 and n > 1:
        picks[-1] = picks[0]  # force a repeat
    return ". ".join(picks) + "."


def make_answer(rng, width, height, gt_boxes) -> str:
    if rng.random() < 0.65 and gt_boxes:
        # start from a ground-truth box, jitter it
        x1, y1, x2, y2 = gt_boxes[int(rng.integers(0, len(gt_boxes)))]
        jitter = rng.uniform(-8, 8, size=4)
        x1 = min(max(0.0, x1 + jitter[0]), width - 2)
        y1 = min(max(0.0, y1 + jitter[1]), height - 2)
        x2 = max(min(float(width), x2 + jitter[2]), x1 + 1)
        y2 = max(min(float(height), y2 + jitter[3]), y1 + 1)
    else:
        x1 = rng.uniform(0, width - 10)
        y1 = rng.uniform(0, height - 10)
        x2 = x1 + rng.uniform(5, width - x1)
        y2 = y1 + rng.uniform(5, height - y1)
    px = rng.uniform(x1, x2)
    py = rng.uniform(y1, y2)
    parts = [
        f"bbox:[{fmt(x1)},{fmt(y1)},{fmt(x2)},{fmt(y2)}]",
        f"point:[{fmt(px)},{fmt(py)}]",
    ]
    if rng.random() < 0.25:
        aux = ",".join(
            f"[{fmt(rng.uniform(0, width))},{fmt(rng.uniform(0, height))}]"
            for _ in range(int(rng.integers(1, 3)))
        )
        parts.append(f"aux_points:[{aux}]")
    if rng.random() < 0.2:
        bx1 = rng.uniform(0, width - 12)
        by1 = rng.uniform(0, height - 12)
        parts.append(
            f"bboxes:[[{fmt(bx1)},{fmt(by1)},{fmt(bx1 + 10)},{fmt(by1 + 10)}]]"
        )
    parts.append(f"aff_methods: {AFF_METHODS[int(rng.integers(0, 4))]}")
    parts.append(f"aff_parts: {AFF_PARTS[int(rng.integers(0, 4))]}")
    return "{" + ", ".join(parts) + "}"


def make_rollout_text(rng, width, height, gt_boxes) -> str:
    roll = rng.random()
    think = make_think(rng)
    answer = make_answer(rng, width, height, gt_boxes)
    if roll < 0.60:
        return f"<think>{think}</think><answer>{answer}</answer>"
    if roll < 0.70:  # malformed tags
        variants = [
            f"<think>{think}<answer>{answer}</answer>",
            f"<answer>{answer}</answer><think>{think}</think>",
            f"<think>{think}</think>",
            f"<think>{think}</think><answer>{answer}</answer> trailing",
        ]
        return variants[int(rng.integers(0, len(variants)))]
    if roll < 0.80:  # malformed answer schema
        variants = [
            f"<think>{think}</think><answer>{{bbox:[1,2,3], point:[1,1], aff_methods: g, aff_parts: p}}</answer>",
            f"<think>{think}</think><answer>{{bbox:[1,2,3,x], point:[1,1], aff_methods: g, aff_parts: p}}</answer>",
            f"<think>{think}</think><answer>{{colour: red, {answer[1:-1]}}}</answer>",
            f"<think>{think}</think><answer>not a schema</answer>",
        ]
        return variants[int(rng.integers(0, len(variants)))]
    if roll < 0.90:  # out of bounds
        return (
            f"<think>{think}</think><answer>{{bbox:[0,0,{width + 50},{height}],"
            f" point:[10,10], aff_methods: g, aff_parts: p}}</answer>"
        )
    return f"<think>{think}</think><answer>{answer}</answer>"


def gen_reward_fixtures(rng, n_records=1200):
    gts = []
    for i in range(40):
        width, height = 640, 480
        n_boxes = int(rng.integers(1, 4))
        boxes = []
        keypoints = []
        for _ in range(n_boxes):
            x1 = rng.uniform(0, width - 60)
            y1 = rng.uniform(0, height - 60)
            x2 = x1 + rng.uniform(20, 60)
            y2 = y1 + rng.uniform(20, 60)
            boxes.append([round(v, 3) for v in (x1, y1, x2, y2)])
            keypoints.append([
                [round(float(rng.uniform(x1, x2)), 3), round(float(rng.uniform(y1, y2)), 3)]
                for _ in range(int(rng.integers(1, 3)))
            ])
        gts.append({
            "id": f"t{i}", "image_width": width, "image_height": height,
            "boxes": boxes, "keypoints": keypoints,
            "aff_method": AFF_METHODS[int(rng.integers(0, 4))],
            "aff_part": AFF_PARTS[int(rng.integers(0, 4))],
        })
    rollouts = []
    for i in range(n_records):
        gt = gts[int(rng.integers(0, len(gts)))]
        rollouts.append({
            "id": f"r{i:04d}",
            "group_id": f"g{i // 8}",
            "gt_id": gt["id"],
            "text": make_rollout_text(rng, gt["image_width"], gt["image_height"], gt["boxes"]),
            "image_width": gt["image_width"],
            "image_height": gt["image_height"],
        })
    return rollouts, gts


def gen_grpo_fixtures(rng, n_groups=120):
    records = []
    for g in range(n_groups):
        size = 8
        for i in range(size):
            lp_old = float(-rng.uniform(0.5, 4.0))
            records.append({
                "id": f"g{g:03d}/{i}",
                "group_id": f"g{g:03d}",
                "reward": round(float(rng.uniform(0, 5)), 6),
                "logprob_current": round(lp_old + float(rng.normal(0, 0.1)), 9),
                "logprob_old": round(lp_old, 9),
                "logprob_ref": round(lp_old + float(rng.normal(0, 0.2)), 9),
            })
    return records


def gen_sft_fixtures(rng, n_records=200):
    records = []
    for i in range(n_records):
        records.append({
            "id": f"s{i:03d}",
            "reasoning_logprobs": [
                round(float(-rng.exponential(0.8)), 9)
                for _ in range(int(rng.integers(1, 12)))
            ],
            "answer_logprobs": [
                round(float(-rng.exponential(0.5)), 9)
                for _ in range(int(rng.integers(1, 6)))
            ],
        })
    records.append({"id": "uniform", "reasoning_logprobs": [math.log(0.5)] * 4,
                    "answer_logprobs": []})
    return records


def run_cli(args):
    result = CliRunner().invoke(cli_main, args, catch_exceptions=False)
    if result.exit_code != 0:
        raise SystemExit(f"fixture CLI call failed: {args}\n{result.output}")


def main() -> None:
    OUT_DIR.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(20240817)

    rollouts, gts = gen_reward_fixtures(rng)
    fileio.write_jsonl(rollouts, OUT_DIR / "reward_rollouts.jsonl")
    fileio.write_jsonl(gts, OUT_DIR / "reward_groundtruth.jsonl")
    run_cli([
        "score", str(OUT_DIR / "reward_rollouts.jsonl"),
        str(OUT_DIR / "reward_groundtruth.jsonl"),
        "--out", str(OUT_DIR / "expected_rewards.jsonl"),
    ])

    grpo_records = gen_grpo_fixtures(rng)
    fileio.write_jsonl(grpo_records, OUT_DIR / "grpo_groups.jsonl")
    run_cli([
        "advantages", str(OUT_DIR / "grpo_groups.jsonl"),
        "--out", str(OUT_DIR / "expected_grpo.jsonl"), "--group-size", "8",
    ])

    sft_records = gen_sft_fixtures(rng)
    fileio.write_jsonl(sft_records, OUT_DIR / "sft_records.jsonl")
    run_cli([
        "sft-nll", str(OUT_DIR / "sft_records.jsonl"),
        "--out", str(OUT_DIR / "expected_sft.jsonl"),
    ])
    print(f"wrote fixtures to {OUT_DIR}")


if __name__ == "__main__":
    main()
