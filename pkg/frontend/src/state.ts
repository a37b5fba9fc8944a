/** Session view model and the verdict draft editor state.
 *
 * The view derives solely from server responses: rebuilding it after a page
 * reload yields the identical structure, and events only tell the page when
 * to refetch.
 */

import type { ApiEvent, Category, SessionIndex, SuggestionPayload, VerdictPayload } from "./types.js";
import { CATEGORY_VARIABLES } from "./types.js";

export interface TimelineEntry {
  index: number;
  similarity: number | null;
  similarityMarginal: number | null;
  decision: string | null;
  pending: boolean;
}

export interface SessionView {
  runId: string;
  terminatedBy: string | null;
  error: string | null;
  awaitingIteration: number | null;
  timeline: TimelineEntry[];
}

export function buildSessionView(index: SessionIndex): SessionView {
  const timeline: TimelineEntry[] = index.iterations
    .slice()
    .sort((a, b) => a.index - b.index)
    .map((entry) => ({
      index: entry.index,
      similarity: entry.similarity ?? null,
      similarityMarginal: entry.similarity_marginal ?? null,
      decision: entry.decision ?? null,
      pending: false,
    }));
  if (index.pending) {
    timeline.push({
      index: index.pending.index,
      similarity: null,
      similarityMarginal: null,
      decision: null,
      pending: true,
    });
  }
  return {
    runId: index.run_id,
    terminatedBy: index.terminated_by,
    error: index.error,
    awaitingIteration: index.awaiting_verdict && index.pending ? index.pending.index : null,
    timeline,
  };
}

/** Does this event change anything the view shows? (If so, refetch.) */
export function eventInvalidatesView(event: ApiEvent): boolean {
  return (
    event.kind === "iteration-started" ||
    event.kind === "iteration-completed" ||
    event.kind === "awaiting-verdict" ||
    event.kind === "run-terminated"
  );
}

// --- verdict drafting ---------------------------------------------------------

export interface DraftEdit {
  element: string;
  category: Category;
  changes: Record<string, string | number>;
  explanation: string;
}

export interface VerdictDraft {
  decision: "Accept" | "Revise";
  commentary: string;
  edits: DraftEdit[];
}

export function emptyDraft(): VerdictDraft {
  return { decision: "Revise", commentary: "", edits: [] };
}

const HEX_COLOR = /^#[0-9a-f]{6}$/;

export function normalizeHex(value: string): string | null {
  let v = value.trim().toLowerCase();
  if (/^#[0-9a-f]{3}$/.test(v)) {
    v = "#" + [...v.slice(1)].map((c) => c + c).join("");
  }
  return HEX_COLOR.test(v) ? v : null;
}

/** Client-side validation mirroring the server's verdict schema. */
export function validateDraft(draft: VerdictDraft): string[] {
  const problems: string[] = [];
  if (draft.decision === "Accept" && draft.edits.length > 0) {
    problems.push("an Accept verdict cannot carry edits");
  }
  if (draft.decision === "Revise" && draft.edits.length === 0) {
    problems.push("a Revise verdict needs at least one edit");
  }
  draft.edits.forEach((edit, i) => {
    const legal = CATEGORY_VARIABLES[edit.category];
    if (!legal) {
      problems.push(`edit ${i + 1}: unknown category ${edit.category}`);
      return;
    }
    if (!edit.element) {
      problems.push(`edit ${i + 1}: element name is empty`);
    }
    const names = Object.keys(edit.changes);
    if (names.length === 0) {
      problems.push(`edit ${i + 1}: no variables changed`);
    }
    for (const name of names) {
      const value = edit.changes[name];
      if (!legal.includes(name)) {
        problems.push(`edit ${i + 1}: ${name} is not adjustable for ${edit.category}`);
      } else if (name.endsWith("color")) {
        if (typeof value !== "string" || normalizeHex(value) === null) {
          problems.push(`edit ${i + 1}: ${name} must be a hex color`);
        }
      } else if (name.endsWith("opacity")) {
        const num = typeof value === "number" ? value : Number(value);
        if (!Number.isFinite(num) || num < 0 || num > 1) {
          problems.push(`edit ${i + 1}: ${name} must be between 0 and 1`);
        }
      } else if (typeof value !== "string" || value.length === 0) {
        problems.push(`edit ${i + 1}: ${name} must be non-empty text`);
      }
    }
  });
  return problems;
}

/** Edits map 1:1 onto the reviewer-schema suggestion list. */
export function draftToVerdict(draft: VerdictDraft): VerdictPayload {
  const suggestions: SuggestionPayload[] = draft.edits.map((edit) => {
    const changes: Record<string, string | number> = {};
    for (const [name, value] of Object.entries(edit.changes)) {
      if (name.endsWith("color") && typeof value === "string") {
        changes[name] = normalizeHex(value) ?? value;
      } else if (name.endsWith("opacity")) {
        changes[name] = typeof value === "number" ? value : Number(value);
      } else {
        changes[name] = value;
      }
    }
    return {
      element: edit.element,
      category: edit.category,
      changes,
      explanation: edit.explanation,
    };
  });
  return { decision: draft.decision, commentary: draft.commentary, suggestions };
}
