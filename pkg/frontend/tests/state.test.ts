import { describe, expect, it } from "vitest";

import {
  buildSessionView,
  draftToVerdict,
  emptyDraft,
  eventInvalidatesView,
  normalizeHex,
  validateDraft,
} from "../src/state.js";
import type { SessionIndex } from "../src/types.js";

const INDEX: SessionIndex = {
  run_id: "demo",
  terminated_by: null,
  error: null,
  iterations: [
    { index: 1, files: {}, similarity: 0.5, similarity_marginal: 0.6, decision: "Revise" },
    { index: 0, files: {}, similarity: 0.2, similarity_marginal: 0.3, decision: "Revise" },
  ],
  pending: { index: 2, files: {} },
  awaiting_verdict: true,
};

describe("buildSessionView", () => {
  it("orders the timeline by iteration index", () => {
    const view = buildSessionView(INDEX);
    expect(view.timeline.map((t) => t.index)).toEqual([0, 1, 2]);
    expect(view.timeline[2].pending).toBe(true);
  });

  it("reflects awaiting state only while a pending iteration exists", () => {
    const view = buildSessionView(INDEX);
    expect(view.awaitingIteration).toBe(2);
    const closed = buildSessionView({ ...INDEX, pending: null, awaiting_verdict: false });
    expect(closed.awaitingIteration).toBeNull();
  });

  it("is a pure function of the server document (reload-safe)", () => {
    expect(buildSessionView(INDEX)).toEqual(buildSessionView(JSON.parse(JSON.stringify(INDEX))));
  });
});

describe("eventInvalidatesView", () => {
  it("refetches on every run lifecycle event", () => {
    for (const kind of ["iteration-started", "iteration-completed", "awaiting-verdict", "run-terminated"] as const) {
      expect(eventInvalidatesView({ kind, run_id: "demo", iteration: 0, timestamp: 0 })).toBe(true);
    }
  });
});

describe("verdict draft validation", () => {
  it("revise requires at least one edit", () => {
    const draft = emptyDraft();
    expect(validateDraft(draft)).toContain("a Revise verdict needs at least one edit");
  });

  it("accept cannot carry edits", () => {
    const draft = emptyDraft();
    draft.decision = "Accept";
    draft.edits.push({
      element: "background",
      category: "background",
      changes: { "background-color": "#000000" },
      explanation: "",
    });
    expect(validateDraft(draft).length).toBeGreaterThan(0);
  });

  it("rejects variables illegal for the category", () => {
    const draft = emptyDraft();
    draft.edits.push({
      element: "Park",
      category: "fill",
      changes: { "line-color": "#123456" },
      explanation: "",
    });
    expect(validateDraft(draft).join(" ")).toMatch(/not adjustable/);
  });

  it("rejects malformed colors and out-of-range opacity", () => {
    const draft = emptyDraft();
    draft.edits.push({
      element: "Park",
      category: "fill",
      changes: { "fill-color": "greenish", "fill-opacity": 1.5 },
      explanation: "",
    });
    const problems = validateDraft(draft).join(" ");
    expect(problems).toMatch(/hex color/);
    expect(problems).toMatch(/between 0 and 1/);
  });

  it("accepts a well-formed revise draft", () => {
    const draft = emptyDraft();
    draft.edits.push({
      element: "Water",
      category: "fill",
      changes: { "fill-color": "#AFCDE7", "fill-opacity": 0.9 },
      explanation: "softer blue",
    });
    expect(validateDraft(draft)).toEqual([]);
  });
});

describe("draftToVerdict", () => {
  it("maps edits one-to-one onto suggestions and normalizes values", () => {
    const draft = emptyDraft();
    draft.commentary = "tone it down";
    draft.edits.push(
      {
        element: "Water",
        category: "fill",
        changes: { "fill-color": "#AFCDE7", "fill-opacity": "0.9" as unknown as number },
        explanation: "softer",
      },
      {
        element: "background",
        category: "background",
        changes: { "background-color": "#FAF3D3" },
        explanation: "warm",
      },
    );
    const verdict = draftToVerdict(draft);
    expect(verdict.decision).toBe("Revise");
    expect(verdict.suggestions).toHaveLength(2);
    expect(verdict.suggestions[0].changes).toEqual({ "fill-color": "#afcde7", "fill-opacity": 0.9 });
    expect(verdict.suggestions[1].changes).toEqual({ "background-color": "#faf3d3" });
  });
});

describe("normalizeHex", () => {
  it("lowercases and expands shorthand", () => {
    expect(normalizeHex("#FAF3D3")).toBe("#faf3d3");
    expect(normalizeHex("#AbC")).toBe("#aabbcc");
    expect(normalizeHex("nope")).toBeNull();
  });
});
