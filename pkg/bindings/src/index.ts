/**
 * Thin bindings over the `affgr` batch CLI for use inside JS/TS training loops.
 *
 * These bindings contain no numeric logic: every request is marshaled to the
 * CLI's JSONL wire format, executed as a subprocess, and the CLI's output is
 * parsed back verbatim. Results are therefore bit-identical to the batch tool
 * by construction, which the conformance test suite verifies against the
 * shared fixture directory.
 *
 * The CLI is resolved from `options.cliCommand`, the `AFFGR_CLI` environment
 * variable (split on spaces), or `affgr` on PATH.
 */

import { spawnSync } from "node:child_process";
import { mkdtempSync, readFileSync, rmSync, writeFileSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";

// ------------------------------------------------------------------ records
// Field names mirror the CLI's JSONL schemas exactly.

export interface GroundTruthRecord {
  id?: string;
  image_width: number;
  image_height: number;
  /** [x1, y1, x2, y2] per ground-truth box */
  boxes: number[][];
  /** per-box keypoint lists, [[x, y], ...] each */
  keypoints: number[][][];
  aff_method?: string;
  aff_part?: string;
}

export interface BoundRewardRequest {
  id?: string;
  group_id?: string;
  text: string;
  image_width: number;
  image_height: number;
  ground_truth: GroundTruthRecord;
}

export interface RewardBreakdown {
  id: string;
  group_id: string;
  gt_id: string;
  think_format: number;
  answer_format: number;
  non_repeat: number;
  acc_iou: number;
  acc_box_l1: number;
  acc_keypoint: number;
  total: number;
  /** matched (prediction index, ground-truth index) pairs */
  matching: number[][];
}

export interface GrpoRolloutRecord {
  id?: string;
  group_id: string;
  reward: number;
  logprob_current: number;
  logprob_old: number;
  logprob_ref: number;
}

export interface GrpoRolloutDiagnostics {
  id: string;
  advantage: number;
  s1: number;
  s2: number;
  kl: number;
  clipped_term: number;
}

export interface GrpoGroupResult {
  group_id: string;
  objective: number;
  rollouts: GrpoRolloutDiagnostics[];
}

export interface SftRequest {
  id?: string;
  reasoning_logprobs: number[];
  answer_logprobs: number[];
}

export interface SftResult {
  id: string;
  nll: number;
}

export interface RewardConfigOverrides {
  iou_threshold?: number;
  box_l1_threshold_px?: number;
  keypoint_l1_threshold_px?: number;
  w_fmt?: number;
  w_rep?: number;
  w_acc?: number;
  matching_strategy?: "optimal" | "greedy";
  nonrepeat_ngram_size?: number;
}

export interface GrpoConfigOverrides {
  epsilon?: number;
  beta?: number;
  std_floor?: number;
  /** expected rollouts per group; defaults to the size of the first group */
  group_size?: number;
}

export interface RunnerOptions {
  /** argv prefix to launch the CLI, e.g. ["python3", "-m", "affgr.cli"] */
  cliCommand?: string[];
}

// ------------------------------------------------------------------ errors

/** Base error carrying the primary tool's error code. */
export class PrimaryError extends Error {
  constructor(
    public readonly code: string,
    public readonly detail: string,
    public readonly exitCode: number,
  ) {
    super(`${code}: ${detail}`);
    this.name = "PrimaryError";
  }
}

export class SchemaError extends PrimaryError {
  constructor(detail: string, exitCode: number) {
    super("SchemaError", detail, exitCode);
    this.name = "SchemaError";
  }
}

export class FormatError extends PrimaryError {
  constructor(detail: string, exitCode: number) {
    super("FormatError", detail, exitCode);
    this.name = "FormatError";
  }
}

export class ConfigError extends PrimaryError {
  constructor(detail: string, exitCode: number) {
    super("ConfigError", detail, exitCode);
    this.name = "ConfigError";
  }
}

export class IncompleteGroupError extends PrimaryError {
  constructor(detail: string, exitCode: number) {
    super("IncompleteGroup", detail, exitCode);
    this.name = "IncompleteGroupError";
  }
}

export class PositiveLogProbError extends PrimaryError {
  constructor(detail: string, exitCode: number) {
    super("PositiveLogProb", detail, exitCode);
    this.name = "PositiveLogProbError";
  }
}

const ERROR_CLASSES: Record<string, new (detail: string, exitCode: number) => PrimaryError> = {
  SchemaError,
  FormatError,
  ConfigError,
  IncompleteGroup: IncompleteGroupError,
  PositiveLogProb: PositiveLogProbError,
};

// ------------------------------------------------------------------ runner

function cliCommand(options?: RunnerOptions): string[] {
  if (options?.cliCommand && options.cliCommand.length > 0) return options.cliCommand;
  const env = process.env.AFFGR_CLI;
  if (env && env.trim()) return env.trim().split(/\s+/);
  return ["affgr"];
}

function toJsonl(records: object[]): string {
  return records.map((r) => JSON.stringify(r)).join("\n") + (records.length ? "\n" : "");
}

function parseJsonl<T>(text: string): T[] {
  return text
    .split("\n")
    .filter((line) => line.trim().length > 0)
    .map((line) => JSON.parse(line) as T);
}

function raiseFromCli(exitCode: number, stderr: string): never {
  const line = stderr
    .split("\n")
    .map((l) => l.trim())
    .filter((l) => l.startsWith("{"))
    .pop();
  if (line) {
    try {
      const payload = JSON.parse(line) as { error?: string; detail?: string };
      if (payload.error) {
        const cls = ERROR_CLASSES[payload.error];
        if (cls) throw new cls(payload.detail ?? "", exitCode);
        throw new PrimaryError(payload.error, payload.detail ?? "", exitCode);
      }
    } catch (err) {
      if (err instanceof PrimaryError) throw err;
    }
  }
  throw new PrimaryError("CliFailure", stderr.trim() || `exit code ${exitCode}`, exitCode);
}

function runCli(args: string[], options?: RunnerOptions): void {
  const [command, ...prefix] = cliCommand(options);
  const result = spawnSync(command, [...prefix, ...args], { encoding: "utf8" });
  if (result.error) {
    throw new PrimaryError("CliNotFound", String(result.error.message), -1);
  }
  if (result.status !== 0) {
    raiseFromCli(result.status ?? -1, result.stderr ?? "");
  }
}

function withTempDir<T>(fn: (dir: string) => T): T {
  const dir = mkdtempSync(join(tmpdir(), "affgr-bindings-"));
  try {
    return fn(dir);
  } finally {
    rmSync(dir, { recursive: true, force: true });
  }
}

function configArgs(config?: object): string[] {
  const args: string[] = [];
  for (const [key, value] of Object.entries(config ?? {})) {
    if (value !== undefined) args.push("--set", `${key}=${value}`);
  }
  return args;
}

// ------------------------------------------------------------------ API

/** Score a batch of rollouts; result order matches input order. */
export function scoreRollouts(
  requests: BoundRewardRequest[],
  config?: RewardConfigOverrides,
  options?: RunnerOptions,
): RewardBreakdown[] {
  return withTempDir((dir) => {
    const rollouts: object[] = [];
    const groundTruths: object[] = [];
    requests.forEach((request, i) => {
      const gtId = request.ground_truth.id ?? `gt${i}`;
      groundTruths.push({ ...request.ground_truth, id: gtId });
      rollouts.push({
        id: request.id ?? `r${i}`,
        group_id: request.group_id ?? "",
        gt_id: gtId,
        text: request.text,
        image_width: request.image_width,
        image_height: request.image_height,
      });
    });
    const rolloutsPath = join(dir, "rollouts.jsonl");
    const gtPath = join(dir, "groundtruth.jsonl");
    const outPath = join(dir, "rewards.jsonl");
    writeFileSync(rolloutsPath, toJsonl(rollouts));
    writeFileSync(gtPath, toJsonl(dedupeById(groundTruths as { id: string }[])));
    runCli(["score", rolloutsPath, gtPath, "--out", outPath, ...configArgs(config)], options);
    return parseJsonl<RewardBreakdown>(readFileSync(outPath, "utf8"));
  });
}

/** Score one rollout against its ground truth. */
export function scoreRollout(
  request: BoundRewardRequest,
  config?: RewardConfigOverrides,
  options?: RunnerOptions,
): RewardBreakdown {
  return scoreRollouts([request], config, options)[0]!;
}

function dedupeById(records: { id: string }[]): { id: string }[] {
  const seen = new Map<string, { id: string }>();
  for (const record of records) {
    if (!seen.has(record.id)) seen.set(record.id, record);
  }
  return [...seen.values()];
}

/**
 * Evaluate the clipped group objective with KL penalty.  Records may arrive
 * in any order; groups are keyed by group_id and returned in first-appearance
 * order with per-rollout advantage/ratio/KL diagnostics.
 */
export function grpoObjective(
  records: GrpoRolloutRecord[],
  config?: GrpoConfigOverrides,
  options?: RunnerOptions,
): GrpoGroupResult[] {
  return withTempDir((dir) => {
    const inPath = join(dir, "groups.jsonl");
    const outPath = join(dir, "advantages.jsonl");
    writeFileSync(inPath, toJsonl(records));
    let groupSize = config?.group_size;
    if (groupSize === undefined) {
      const first = records[0]?.group_id;
      groupSize = records.filter((r) => r.group_id === first).length;
    }
    const { group_size: _ignored, ...rest } = config ?? {};
    runCli(
      ["advantages", inPath, "--out", outPath, "--group-size", String(groupSize),
       ...configArgs(rest)],
      options,
    );
    return parseJsonl<GrpoGroupResult>(readFileSync(outPath, "utf8"));
  });
}

/** Negative log-likelihood of reasoning+answer token sequences, per record. */
export function sftNll(requests: SftRequest[], options?: RunnerOptions): SftResult[] {
  return withTempDir((dir) => {
    const inPath = join(dir, "sft.jsonl");
    const outPath = join(dir, "nll.jsonl");
    writeFileSync(inPath, toJsonl(requests));
    runCli(["sft-nll", inPath, "--out", outPath], options);
    return parseJsonl<SftResult>(readFileSync(outPath, "utf8"));
  });
}
