"""Batch command-line front end.

Every command is a pure function of its input files and configuration:
repeated runs produce byte-identical outputs, and --jobs only changes how the
work is scheduled, never the result.  Fatal errors print one JSON object to
stderr ({"error": code, "detail": ...}) and exit with a documented code:
2 for malformed input, 3 for segmenter-oracle failure, 4 when no feasible
grasp remains.
"""

from __future__ import annotations

import json
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Any, Callable

import click
from scipy.ndimage import binary_erosion

from . import dataprep, fileio, grpo, metrics, rewards
from .config import ConfigError, RunConfig, load_config
from .graspgeom import (
    GraspSelectConfig,
    NoFeasibleGrasp,
    back_project,
    extract_subcloud,
    select_grasps,
)
from .masks import AffordanceMask
from .schema import Box2D, Point2D, RawRollout

MASK_SUFFIXES = (".pgm", ".agm")


class SchemaViolation(ValueError):
    pass


def _fail(code: int, error: str, detail: str, **extra: Any) -> None:
    payload = {"error": error, "detail": detail, **extra}
    click.echo(json.dumps(payload), err=True)
    sys.exit(code)


def _load_run_config(config: str | None, sets: tuple[str, ...], jobs: int | None,
                     seed: int | None) -> RunConfig:
    overrides: dict[str, Any] = {}
    for item in sets:
        key, sep, value = item.partition("=")
        if not sep:
            raise ConfigError(f"--set expects key=value, got {item!r}")
        overrides[key] = value
    if jobs is not None:
        overrides["jobs"] = jobs
    if seed is not None:
        overrides["seed"] = seed
    return load_config(config, overrides)


def common_options(fn: Callable) -> Callable:
    fn = click.option("--config", type=click.Path(), default=None,
                      help="JSON config file; AFFGR_* env vars override it.")(fn)
    fn = click.option("--set", "sets", multiple=True, metavar="KEY=VALUE",
                      help="Override a single config key.")(fn)
    fn = click.option("--jobs", type=int, default=None, help="Worker threads.")(fn)
    fn = click.option("--seed", type=int, default=None,
                      help="Reserved; the deterministic core ignores it.")(fn)
    return fn


@click.group()
def main() -> None:
    """Deterministic batch tools for reward scoring, group objectives,
    dataset prep, segmentation metrics, and grasp selection."""


# ---------------------------------------------------------------- helpers

def _require(record: dict[str, Any], key: str, where: str) -> Any:
    if key not in record:
        raise SchemaViolation(f"{where}: missing field {key!r}")
    return record[key]


def _ground_truth_from_record(record: dict[str, Any], where: str) -> rewards.GroundTruthTarget:
    try:
        boxes = tuple(
            Box2D(*map(float, b)) for b in _require(record, "boxes", where)
        )
        keypoint_sets = tuple(
            tuple(Point2D(float(p[0]), float(p[1])) for p in kps)
            for kps in _require(record, "keypoints", where)
        )
        return rewards.GroundTruthTarget(
            boxes=boxes,
            keypoint_sets=keypoint_sets,
            aff_method=str(record.get("aff_method", "")),
            aff_part=str(record.get("aff_part", "")),
            image_width=float(_require(record, "image_width", where)),
            image_height=float(_require(record, "image_height", where)),
        )
    except (TypeError, ValueError) as exc:
        raise SchemaViolation(f"{where}: invalid ground truth: {exc}") from exc


def _rollout_from_record(record: dict[str, Any], where: str) -> RawRollout:
    try:
        return RawRollout(
            text=str(_require(record, "text", where)),
            image_width=float(_require(record, "image_width", where)),
            image_height=float(_require(record, "image_height", where)),
        )
    except (TypeError, ValueError) as exc:
        raise SchemaViolation(f"{where}: invalid rollout: {exc}") from exc


def _reward_config(cfg: RunConfig) -> rewards.RewardConfig:
    return rewards.RewardConfig(
        iou_threshold=cfg.iou_threshold,
        box_l1_threshold_px=cfg.box_l1_threshold_px,
        keypoint_l1_threshold_px=cfg.keypoint_l1_threshold_px,
        w_fmt=cfg.w_fmt,
        w_rep=cfg.w_rep,
        w_acc=cfg.w_acc,
        matching_strategy=cfg.matching_strategy,
        nonrepeat_ngram_size=cfg.nonrepeat_ngram_size,
    )


def _list_masks(directory: Path) -> list[Path]:
    return sorted(p for p in directory.iterdir() if p.suffix.lower() in MASK_SUFFIXES)


def _build_oracle(spec: str, masks: dict[str, AffordanceMask]) -> dataprep.SegmenterOracle:
    if spec == "identity":
        def oracle(image_ref: str, prompt: dataprep.PromptPair) -> AffordanceMask:
            return masks[image_ref]
        return oracle
    if spec == "empty":
        def oracle(image_ref: str, prompt: dataprep.PromptPair) -> AffordanceMask:
            source = masks[image_ref]
            return AffordanceMask.zeros(source.width, source.height)
        return oracle
    if spec.startswith("erode:"):
        iterations = int(spec.split(":", 1)[1])

        def oracle(image_ref: str, prompt: dataprep.PromptPair) -> AffordanceMask:
            source = masks[image_ref]
            eroded = binary_erosion(source.pixels, iterations=iterations)
            return AffordanceMask(eroded)
        return oracle
    if spec.startswith("dir:"):
        directory = Path(spec.split(":", 1)[1])

        def oracle(image_ref: str, prompt: dataprep.PromptPair) -> AffordanceMask:
            for suffix in MASK_SUFFIXES:
                candidate = directory / (Path(image_ref).stem + suffix)
                if candidate.exists():
                    return fileio.read_mask(candidate)
            raise FileNotFoundError(f"no predicted mask for {image_ref!r} in {directory}")
        return oracle
    raise ConfigError(f"unknown oracle spec {spec!r} (want identity|empty|erode:N|dir:PATH)")


# ---------------------------------------------------------------- prep

@main.command()
@click.argument("masks_dir", type=click.Path(exists=True, file_okay=False))
@click.option("--oracle", "oracle_spec", default="identity", show_default=True,
              help="identity | empty | erode:N | dir:PATH")
@click.option("--records", type=click.Path(exists=True), default=None,
              help="Optional JSONL restricting/annotating masks ({'mask': name, ...}).")
@click.option("--out", type=click.Path(), required=True)
@common_options
def prep(masks_dir: str, oracle_spec: str, records: str | None, out: str,
         config: str | None, sets: tuple[str, ...], jobs: int | None, seed: int | None) -> None:
    """Derive box-point prompts from masks and apply the self-consistency gate."""
    try:
        cfg = _load_run_config(config, sets, jobs, seed)
    except ConfigError as exc:
        _fail(2, "ConfigError", str(exc))
    mask_dir = Path(masks_dir)
    try:
        names = [p.name for p in _list_masks(mask_dir)]
        masks = {name: fileio.read_mask(mask_dir / name) for name in names}
    except fileio.FormatError as exc:
        _fail(2, "FormatError", str(exc))
    extra_fields: dict[str, dict[str, Any]] = {}
    if records is not None:
        try:
            listed = fileio.read_jsonl(records)
        except fileio.FormatError as exc:
            _fail(2, "FormatError", str(exc))
        try:
            names = [str(_require(r, "mask", f"{records}:{i + 1}")) for i, r in enumerate(listed)]
        except SchemaViolation as exc:
            _fail(2, "SchemaError", str(exc))
        for r, name in zip(listed, names):
            if name not in masks:
                _fail(2, "SchemaError", f"{records}: mask {name!r} not found in {masks_dir}")
            extra_fields[name] = {k: v for k, v in r.items() if k != "mask"}
    try:
        oracle = _build_oracle(oracle_spec, masks)
    except ConfigError as exc:
        _fail(2, "ConfigError", str(exc))

    out_records = []
    kept = 0
    for name in names:
        mask = masks[name]
        try:
            prompt = dataprep.make_prompt_pair(mask, source_mask=name)
        except dataprep.EmptyMask as exc:
            _fail(2, "FormatError", f"{name}: {exc}")
        try:
            decision = dataprep.self_consistency_gate(
                mask, prompt, oracle, threshold=cfg.gate_threshold
            )
        except dataprep.OracleFailure as exc:
            _fail(3, "OracleFailure", str(exc), record=exc.record_id)
        kept += decision.kept
        out_records.append({
            "mask": name,
            **extra_fields.get(name, {}),
            "bbox": list(prompt.bbox.corners()),
            "point": [prompt.point.x, prompt.point.y],
            "gate_iou": decision.gate_iou,
            "keep": decision.kept,
        })
    fileio.write_jsonl(out_records, out)
    click.echo(f"kept {kept} / {len(out_records)}")


# ---------------------------------------------------------------- score

@main.command()
@click.argument("rollouts_file", type=click.Path(exists=True, dir_okay=False))
@click.argument("groundtruth_file", type=click.Path(exists=True, dir_okay=False))
@click.option("--out", type=click.Path(), required=True)
@common_options
def score(rollouts_file: str, groundtruth_file: str, out: str,
          config: str | None, sets: tuple[str, ...], jobs: int | None, seed: int | None) -> None:
    """Score rollouts against ground truth, one reward breakdown per line."""
    try:
        cfg = _load_run_config(config, sets, jobs, seed)
    except ConfigError as exc:
        _fail(2, "ConfigError", str(exc))
    try:
        rollout_records = fileio.read_jsonl(rollouts_file)
        gt_records = fileio.read_jsonl(groundtruth_file)
        gts = {}
        for i, r in enumerate(gt_records):
            gt_id = str(_require(r, "id", f"{groundtruth_file}:{i + 1}"))
            gts[gt_id] = _ground_truth_from_record(r, f"{groundtruth_file}:{i + 1}")
        parsed = []
        for i, r in enumerate(rollout_records):
            where = f"{rollouts_file}:{i + 1}"
            rid = str(_require(r, "id", where))
            parsed.append((rid, str(r.get("group_id", "")),
                           str(r.get("gt_id", rid)), _rollout_from_record(r, where)))
    except (fileio.FormatError, SchemaViolation) as exc:
        _fail(2, "SchemaError", str(exc))

    reward_cfg = _reward_config(cfg)

    def score_one(item: tuple[str, str, str, RawRollout]) -> dict[str, Any]:
        rid, group_id, gt_id, rollout = item
        base = {"id": rid, "group_id": group_id, "gt_id": gt_id}
        if gt_id not in gts:
            return {**base, "error": f"missing ground truth id {gt_id!r}"}
        b = rewards.score_rollout(rollout, gts[gt_id], reward_cfg)
        return {
            **base,
            "think_format": b.think_format,
            "answer_format": b.answer_format,
            "non_repeat": b.non_repeat,
            "acc_iou": b.acc_iou,
            "acc_box_l1": b.acc_box_l1,
            "acc_keypoint": b.acc_keypoint,
            "total": b.total,
            "matching": [list(pair) for pair in b.matching],
        }

    if cfg.jobs > 1:
        with ThreadPoolExecutor(max_workers=cfg.jobs) as pool:
            results = list(pool.map(score_one, parsed))
    else:
        results = [score_one(item) for item in parsed]
    fileio.write_jsonl(results, out)


# ---------------------------------------------------------------- advantages

@main.command()
@click.argument("records_file", type=click.Path(exists=True, dir_okay=False))
@click.option("--out", type=click.Path(), required=True)
@click.option("--group-size", type=int, default=None,
              help="Expected rollouts per group (defaults to config group_size).")
@common_options
def advantages(records_file: str, out: str, group_size: int | None,
               config: str | None, sets: tuple[str, ...], jobs: int | None,
               seed: int | None) -> None:
    """Per-group clipped objective with KL penalty and per-rollout diagnostics."""
    try:
        cfg = _load_run_config(config, sets, jobs, seed)
    except ConfigError as exc:
        _fail(2, "ConfigError", str(exc))
    try:
        raw = fileio.read_jsonl(records_file)
    except fileio.FormatError as exc:
        _fail(2, "SchemaError", str(exc))
    expected_size = group_size if group_size is not None else cfg.group_size
    groups: dict[str, list[tuple[str, grpo.RolloutRecord]]] = {}
    order: list[str] = []
    try:
        for i, r in enumerate(raw):
            where = f"{records_file}:{i + 1}"
            gid = str(_require(r, "group_id", where))
            rec = grpo.RolloutRecord(
                group_id=gid,
                reward=float(_require(r, "reward", where)),
                logprob_current=float(_require(r, "logprob_current", where)),
                logprob_old=float(_require(r, "logprob_old", where)),
                logprob_ref=float(_require(r, "logprob_ref", where)),
            )
            if gid not in groups:
                order.append(gid)
                groups[gid] = []
            groups[gid].append((str(r.get("id", f"{gid}/{len(groups[gid])}")), rec))
    except (SchemaViolation, TypeError, ValueError) as exc:
        _fail(2, "SchemaError", str(exc))
    for gid in order:
        if len(groups[gid]) != expected_size:
            _fail(2, "IncompleteGroup",
                  f"group {gid!r} has {len(groups[gid])} rollouts, expected {expected_size}")

    grpo_cfg = grpo.GrpoConfig(
        epsilon=cfg.epsilon, beta=cfg.beta, std_floor=cfg.std_floor,
        group_size=expected_size,
    )
    out_records = []
    for gid in order:
        ids = [rid for rid, _ in groups[gid]]
        records = [rec for _, rec in groups[gid]]
        objective, diags = grpo.grpo_objective(records, grpo_cfg)
        out_records.append({
            "group_id": gid,
            "objective": objective,
            "rollouts": [
                {"id": rid, "advantage": d.advantage, "s1": d.s1, "s2": d.s2,
                 "kl": d.kl, "clipped_term": d.clipped_term}
                for rid, d in zip(ids, diags)
            ],
        })
    fileio.write_jsonl(out_records, out)


# ---------------------------------------------------------------- sft-nll

@main.command("sft-nll")
@click.argument("records_file", type=click.Path(exists=True, dir_okay=False))
@click.option("--out", type=click.Path(), required=True)
@common_options
def sft_nll_cmd(records_file: str, out: str, config: str | None, sets: tuple[str, ...],
                jobs: int | None, seed: int | None) -> None:
    """Negative log-likelihood per record of reasoning+answer token sequences."""
    try:
        _load_run_config(config, sets, jobs, seed)
    except ConfigError as exc:
        _fail(2, "ConfigError", str(exc))
    try:
        raw = fileio.read_jsonl(records_file)
        out_records = []
        for i, r in enumerate(raw):
            where = f"{records_file}:{i + 1}"
            lik = grpo.TokenSequenceLikelihood(
                reasoning_logprobs=tuple(float(v) for v in _require(r, "reasoning_logprobs", where)),
                answer_logprobs=tuple(float(v) for v in _require(r, "answer_logprobs", where)),
            )
            out_records.append({"id": str(r.get("id", str(i))), "nll": grpo.sft_nll(lik)})
    except (fileio.FormatError, SchemaViolation, TypeError, ValueError) as exc:
        code = "PositiveLogProb" if isinstance(exc, grpo.PositiveLogProb) else "SchemaError"
        _fail(2, code, str(exc))
    fileio.write_jsonl(out_records, out)


# ---------------------------------------------------------------- eval

@main.command("eval")
@click.argument("pred_dir", type=click.Path(exists=True, file_okay=False))
@click.argument("gt_dir", type=click.Path(exists=True, file_okay=False))
@click.option("--subsets", type=click.Path(exists=True), default=None,
              help='JSON file mapping filename to subset tag.')
@click.option("--out", type=click.Path(), required=True, help="JSON report path.")
@click.option("--text", "text_out", type=click.Path(), default=None,
              help="Also write an aligned-column text table.")
@common_options
def eval_cmd(pred_dir: str, gt_dir: str, subsets: str | None, out: str,
             text_out: str | None, config: str | None, sets: tuple[str, ...],
             jobs: int | None, seed: int | None) -> None:
    """Per-subset mean IoU and cumulative IoU over filename-paired mask dirs."""
    try:
        _load_run_config(config, sets, jobs, seed)
    except ConfigError as exc:
        _fail(2, "ConfigError", str(exc))
    pred_files = {p.name: p for p in _list_masks(Path(pred_dir))}
    gt_files = {p.name: p for p in _list_masks(Path(gt_dir))}
    unpaired = sorted(set(pred_files) ^ set(gt_files))
    if unpaired:
        _fail(2, "SchemaError", f"unpaired mask files: {', '.join(unpaired)}")
    subset_map: dict[str, str] = {}
    if subsets is not None:
        try:
            subset_map = {str(k): str(v) for k, v in json.loads(Path(subsets).read_text()).items()}
        except (json.JSONDecodeError, AttributeError) as exc:
            _fail(2, "SchemaError", f"{subsets}: bad subsets JSON: {exc}")
    pairs = []
    try:
        for name in sorted(gt_files):
            pairs.append(metrics.EvalPair(
                gt=fileio.read_mask(gt_files[name]),
                pred=fileio.read_mask(pred_files[name]),
                subset=subset_map.get(name, "all"),
            ))
    except (fileio.FormatError, ValueError) as exc:
        _fail(2, "FormatError", str(exc))
    if not pairs:
        _fail(2, "SchemaError", "no mask pairs found")
    rows = metrics.subset_report(pairs)
    report = {
        "subsets": [
            {"subset": r.subset, "g_iou": r.g_iou, "c_iou": r.c_iou, "n": r.n} for r in rows
        ]
    }
    Path(out).write_text(json.dumps(report, indent=2) + "\n")
    table = _format_table(rows)
    if text_out is not None:
        Path(text_out).write_text(table)
    click.echo(table, nl=False)


def _format_table(rows: list[metrics.SubsetRow]) -> str:
    # percent with one decimal, matching the usual benchmark table style
    header = f"{'subset':<16} {'gIoU':>7} {'cIoU':>7} {'N':>6}\n"
    lines = [header]
    for r in rows:
        lines.append(f"{r.subset:<16} {100 * r.g_iou:>7.1f} {100 * r.c_iou:>7.1f} {r.n:>6d}\n")
    return "".join(lines)


# ---------------------------------------------------------------- grasp-select

@main.command("grasp-select")
@click.option("--depth", "depth_file", type=click.Path(exists=True), required=True)
@click.option("--camera", "camera_file", type=click.Path(exists=True), required=True)
@click.option("--mask", "mask_file", type=click.Path(exists=True), required=True)
@click.option("--candidates", "candidates_file", type=click.Path(exists=True), required=True)
@click.option("--out", type=click.Path(), required=True)
@click.option("--report", "report_file", type=click.Path(), default=None,
              help="Optional per-candidate stage diagnostics (JSON).")
@common_options
def grasp_select(depth_file: str, camera_file: str, mask_file: str, candidates_file: str,
                 out: str, report_file: str | None, config: str | None,
                 sets: tuple[str, ...], jobs: int | None, seed: int | None) -> None:
    """Rank executable grasps for a depth frame, camera, affordance mask, and
    candidate set."""
    try:
        cfg = _load_run_config(config, sets, jobs, seed)
    except ConfigError as exc:
        _fail(2, "ConfigError", str(exc))
    try:
        depth = fileio.read_depth(depth_file)
        camera = fileio.read_camera(camera_file)
        mask = fileio.read_mask(mask_file)
        raw_candidates = fileio.read_jsonl(candidates_file)
        candidates = [
            fileio.parse_candidate(r, f"{candidates_file}:{i + 1}")
            for i, r in enumerate(raw_candidates)
        ]
    except (fileio.FormatError, ValueError) as exc:
        _fail(2, "FormatError", str(exc))
    scene = back_project(depth, camera)
    try:
        target = extract_subcloud(scene, mask)
    except ValueError as exc:
        _fail(2, "FormatError", str(exc))
    select_cfg = GraspSelectConfig(
        voxel=cfg.voxel,
        clearance=cfg.clearance,
        top_k=cfg.top_k,
        iou_min=cfg.iou_min,
        nms_trans=cfg.nms_trans,
        nms_rot=cfg.nms_rot,
        max_open_width=cfg.max_open_width,
        finger_thickness=cfg.finger_thickness,
    )
    try:
        result = select_grasps(candidates, scene, target, select_cfg)
    except NoFeasibleGrasp as exc:
        _fail(4, "NoFeasibleGrasp", str(exc), reason=exc.reason)
    out_records = []
    index_of = {id(c): i for i, c in enumerate(candidates)}
    for rank, (candidate, iou) in enumerate(result.selected):
        out_records.append({
            "rank": rank,
            "index": index_of[id(candidate)],
            "iou": iou,
            **fileio.candidate_to_record(candidate),
        })
    fileio.write_jsonl(out_records, out)
    if report_file is not None:
        report = [
            {"index": o.index, "stage": o.stage, "iou": o.iou, "rank": o.rank}
            for o in result.outcomes
        ]
        Path(report_file).write_text(json.dumps(report, indent=2) + "\n")
    click.echo(f"selected {len(out_records)} / {len(candidates)}")


# ---------------------------------------------------------------- check

_CHECKERS: dict[str, Callable[[dict[str, Any], str], None]] = {}


def _checker(kind: str) -> Callable:
    def register(fn: Callable[[dict[str, Any], str], None]) -> Callable:
        _CHECKERS[kind] = fn
        return fn
    return register


def _need(record: dict[str, Any], where: str, **fields: type | tuple[type, ...]) -> None:
    for name, types in fields.items():
        if name not in record:
            raise SchemaViolation(f"{where}: missing field {name!r}")
        if not isinstance(record[name], types):
            raise SchemaViolation(f"{where}: field {name!r} has wrong type")


_NUM = (int, float)


@_checker("rollouts")
def _check_rollout(r: dict[str, Any], where: str) -> None:
    _need(r, where, id=str, text=str, image_width=_NUM, image_height=_NUM)


@_checker("groundtruth")
def _check_gt(r: dict[str, Any], where: str) -> None:
    _need(r, where, id=str, image_width=_NUM, image_height=_NUM, boxes=list, keypoints=list)
    _ground_truth_from_record(r, where)


@_checker("rewards")
def _check_reward(r: dict[str, Any], where: str) -> None:
    _need(r, where, id=str)
    if "error" in r:
        return
    _need(r, where, think_format=_NUM, answer_format=_NUM, non_repeat=_NUM,
          acc_iou=_NUM, acc_box_l1=_NUM, acc_keypoint=_NUM, total=_NUM, matching=list)


@_checker("advantage-inputs")
def _check_adv_in(r: dict[str, Any], where: str) -> None:
    _need(r, where, group_id=str, reward=_NUM, logprob_current=_NUM,
          logprob_old=_NUM, logprob_ref=_NUM)


@_checker("advantages")
def _check_adv_out(r: dict[str, Any], where: str) -> None:
    _need(r, where, group_id=str, objective=_NUM, rollouts=list)
    for entry in r["rollouts"]:
        if not isinstance(entry, dict):
            raise SchemaViolation(f"{where}: rollout diagnostics must be objects")
        _need(entry, where, advantage=_NUM, s1=_NUM, s2=_NUM, kl=_NUM, clipped_term=_NUM)


@_checker("prompts")
def _check_prompt(r: dict[str, Any], where: str) -> None:
    _need(r, where, mask=str, bbox=list, point=list, gate_iou=_NUM, keep=bool)
    if len(r["bbox"]) != 4 or len(r["point"]) != 2:
        raise SchemaViolation(f"{where}: bbox/point arity wrong")


@_checker("candidates")
def _check_candidate(r: dict[str, Any], where: str) -> None:
    fileio.parse_candidate(r, where)


@_checker("grasps")
def _check_grasp(r: dict[str, Any], where: str) -> None:
    _need(r, where, rank=int, index=int, iou=_NUM, width=_NUM, score=_NUM,
          center=list, rotation=list)


@_checker("sft")
def _check_sft(r: dict[str, Any], where: str) -> None:
    _need(r, where, reasoning_logprobs=list, answer_logprobs=list)


@_checker("cot")
def _check_cot(r: dict[str, Any], where: str) -> None:
    record = fileio.cot_record_from_json(r, where)
    report = dataprep.validate_cot_record(record)
    if not report.passed:
        reasons = "; ".join(f"{code}: {msg}" for code, msg in report.failures)
        raise SchemaViolation(f"{where}: {reasons}")


@main.command()
@click.argument("file", type=click.Path(exists=True, dir_okay=False))
@click.option("--kind", type=click.Choice(sorted(_CHECKERS)), required=True)
def check(file: str, kind: str) -> None:
    """Validate each JSONL line of FILE against the documented record schema."""
    try:
        records = fileio.read_jsonl(file)
        for i, r in enumerate(records):
            _CHECKERS[kind](r, f"{file}:{i + 1}")
    except (fileio.FormatError, SchemaViolation) as exc:
        _fail(2, "SchemaError", str(exc))
    click.echo(f"ok: {len(records)} records")


if __name__ == "__main__":
    main()
