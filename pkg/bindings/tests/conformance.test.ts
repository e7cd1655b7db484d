/**
 * Conformance against the shared fixture suite: the bindings must reproduce
 * the primary tool's committed outputs bit-for-bit (numbers compared with
 * Object.is, never approximately).
 */

import assert from "node:assert/strict";
import { readFileSync } from "node:fs";
import { join, dirname } from "node:path";
import { fileURLToPath } from "node:url";
import { test } from "node:test";

import {
  BoundRewardRequest,
  GroundTruthRecord,
  GrpoRolloutRecord,
  RewardBreakdown,
  SftRequest,
  grpoObjective,
  scoreRollouts,
  sftNll,
} from "../src/index.js";

const HERE = dirname(fileURLToPath(import.meta.url));
const FIXTURES = join(HERE, "..", "..", "..", "fixtures", "conformance");

function readJsonl<T>(name: string): T[] {
  return readFileSync(join(FIXTURES, name), "utf8")
    .split("\n")
    .filter((line) => line.trim().length > 0)
    .map((line) => JSON.parse(line) as T);
}

function assertBitIdentical(actual: unknown, expected: unknown, path = "$"): void {
  if (typeof expected === "number") {
    assert.ok(
      typeof actual === "number" && Object.is(actual, expected),
      `${path}: ${actual} is not bit-identical to ${expected}`,
    );
    return;
  }
  if (Array.isArray(expected)) {
    assert.ok(Array.isArray(actual), `${path}: expected array`);
    assert.equal(actual.length, expected.length, `${path}: length mismatch`);
    expected.forEach((item, i) => assertBitIdentical(actual[i], item, `${path}[${i}]`));
    return;
  }
  if (expected !== null && typeof expected === "object") {
    assert.ok(actual !== null && typeof actual === "object", `${path}: expected object`);
    const expectedKeys = Object.keys(expected as object).sort();
    const actualKeys = Object.keys(actual as object).sort();
    assert.deepEqual(actualKeys, expectedKeys, `${path}: key set mismatch`);
    for (const key of expectedKeys) {
      assertBitIdentical(
        (actual as Record<string, unknown>)[key],
        (expected as Record<string, unknown>)[key],
        `${path}.${key}`,
      );
    }
    return;
  }
  assert.deepEqual(actual, expected, `${path}: value mismatch`);
}

interface FixtureRollout {
  id: string;
  group_id: string;
  gt_id: string;
  text: string;
  image_width: number;
  image_height: number;
}

test("fixture suite is large enough for the conformance contract", () => {
  const rollouts = readJsonl<FixtureRollout>("reward_rollouts.jsonl");
  const groups = new Set(readJsonl<GrpoRolloutRecord>("grpo_groups.jsonl").map((r) => r.group_id));
  assert.ok(rollouts.length >= 1000, `${rollouts.length} reward records`);
  assert.ok(groups.size >= 100, `${groups.size} groups`);
});

test("scoreRollouts reproduces expected rewards bit-for-bit", () => {
  const rollouts = readJsonl<FixtureRollout>("reward_rollouts.jsonl");
  const groundTruths = readJsonl<GroundTruthRecord & { id: string }>(
    "reward_groundtruth.jsonl",
  );
  const byId = new Map(groundTruths.map((gt) => [gt.id, gt]));
  const requests: BoundRewardRequest[] = rollouts.map((r) => ({
    id: r.id,
    group_id: r.group_id,
    text: r.text,
    image_width: r.image_width,
    image_height: r.image_height,
    ground_truth: byId.get(r.gt_id)!,
  }));
  const actual = scoreRollouts(requests);
  const expected = readJsonl<RewardBreakdown>("expected_rewards.jsonl");
  assert.equal(actual.length, expected.length);
  assertBitIdentical(actual, expected);
});

test("grpoObjective reproduces expected group objectives bit-for-bit", () => {
  const records = readJsonl<GrpoRolloutRecord>("grpo_groups.jsonl");
  const actual = grpoObjective(records, { group_size: 8 });
  const expected = readJsonl("expected_grpo.jsonl");
  assertBitIdentical(actual, expected);
});

test("sftNll reproduces expected negative log-likelihoods bit-for-bit", () => {
  const records = readJsonl<SftRequest>("sft_records.jsonl");
  const actual = sftNll(records);
  const expected = readJsonl("expected_sft.jsonl");
  assertBitIdentical(actual, expected);
});

test("repeated runs are bit-identical", () => {
  const rollouts = readJsonl<FixtureRollout>("reward_rollouts.jsonl").slice(0, 64);
  const groundTruths = readJsonl<GroundTruthRecord & { id: string }>(
    "reward_groundtruth.jsonl",
  );
  const byId = new Map(groundTruths.map((gt) => [gt.id, gt]));
  const requests: BoundRewardRequest[] = rollouts.map((r) => ({
    id: r.id,
    text: r.text,
    image_width: r.image_width,
    image_height: r.image_height,
    ground_truth: byId.get(r.gt_id)!,
  }));
  const first = scoreRollouts(requests);
  const second = scoreRollouts(requests);
  assertBitIdentical(second, first);
});
