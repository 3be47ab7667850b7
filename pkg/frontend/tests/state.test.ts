import assert from "node:assert/strict";
import { test } from "node:test";

import type { NextQuery, SessionDoc } from "../src/api.js";
import {
  clamp01,
  descriptorPreview,
  filterClasses,
  phaseOf,
  prefillValues,
  progressFraction,
  sessionIdFromHash,
  validValues,
} from "../src/state.js";

function sessionDoc(overrides: Partial<SessionDoc> = {}): SessionDoc {
  return {
    session_id: "abc123",
    novel_id: "novel",
    similar_id: "base",
    strategy: "sibling_variance",
    budget: 3,
    rounds_answered: 0,
    answers: [],
    answered_groups: [],
    descriptor: [0.1, 0.2, 0.3, 0.4],
    group_names: ["color", "shape"],
    finalized: false,
    job_id: null,
    ...overrides,
  };
}

test("phase transitions follow the session document", () => {
  assert.equal(phaseOf(null), "start");
  assert.equal(phaseOf(sessionDoc()), "annotating");
  assert.equal(phaseOf(sessionDoc({ rounds_answered: 3 })), "exhausted");
  assert.equal(phaseOf(sessionDoc({ finalized: true })), "finalized");
});

test("progress fraction counts answered rounds against the budget", () => {
  assert.equal(progressFraction(sessionDoc({ rounds_answered: 1 })), 1 / 3);
  assert.equal(progressFraction(sessionDoc({ budget: 0 })), 1);
});

test("clamp01 pins sliders to the unit interval", () => {
  assert.equal(clamp01(-0.5), 0);
  assert.equal(clamp01(1.5), 1);
  assert.equal(clamp01(0.25), 0.25);
  assert.equal(clamp01(NaN), 0);
});

const query: NextQuery = {
  round: 0,
  group_id: 1,
  group_name: "color",
  attributes: [
    { index: 2, name: "a_2", current_value: 0.4 },
    { index: 3, name: "a_3", current_value: 1.2 },
  ],
};

test("prefill clamps imputed values into slider range", () => {
  assert.deepEqual(prefillValues(query), [0.4, 1]);
});

test("valid values must match arity and stay in range", () => {
  assert.ok(validValues(query, [0.5, 0.5]));
  assert.ok(!validValues(query, [0.5]));
  assert.ok(!validValues(query, [0.5, 1.5]));
  assert.ok(!validValues(query, [NaN, 0.5]));
});

test("class filter searches id, name, and supercategory", () => {
  const classes = [
    { id: "B00", name: "meadow pipit", supercategory: "pipits" },
    { id: "B01", name: "tree sparrow", supercategory: "sparrows" },
  ];
  assert.deepEqual(filterClasses(classes, ""), classes);
  assert.deepEqual(filterClasses(classes, "sparrow").map((c) => c.id), ["B01"]);
  assert.deepEqual(filterClasses(classes, "b00").map((c) => c.id), ["B00"]);
  assert.deepEqual(filterClasses(classes, "PIPIT").map((c) => c.id), ["B00"]);
});

test("descriptor preview marks answered groups as annotated", () => {
  const doc = sessionDoc({ answered_groups: [1] });
  const preview = descriptorPreview(doc, [
    [0, 1],
    [2, 3],
  ]);
  assert.equal(preview[0].status, "imputed");
  assert.equal(preview[1].status, "annotated");
  assert.deepEqual(preview[1].values, [0.3, 0.4]);
  assert.equal(preview[0].name, "color");
});

test("session id round-trips through the location hash", () => {
  assert.equal(sessionIdFromHash("#session=deadbeef01"), "deadbeef01");
  assert.equal(sessionIdFromHash(""), null);
  assert.equal(sessionIdFromHash("#other=1"), null);
});
