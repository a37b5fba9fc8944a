/** Payload shapes of the cartoforge HTTP API. */

export type Category = "icon" | "label" | "line" | "fill" | "background";

/** Variables a review verdict may change, per element category. */
export const CATEGORY_VARIABLES: Record<Category, string[]> = {
  icon: ["expectation"],
  label: ["text-color", "text-halo-color"],
  line: ["line-opacity", "line-color"],
  fill: ["fill-opacity", "fill-color", "fill-outline-color"],
  background: ["background-color"],
};

export interface SessionSummary {
  id: string;
  iterations: number;
  terminated_by: string | null;
  awaiting_verdict: boolean;
  last_similarity: number | null;
  last_decision: string | null;
}

export interface IterationEntry {
  index: number;
  files: Record<string, string>; // relative path -> sha256
  similarity?: number;
  similarity_marginal?: number;
  decision?: string;
  icons?: Record<string, string>;
  rendered?: string;
  pending?: boolean;
}

export interface SessionIndex {
  run_id: string;
  terminated_by: string | null;
  error: string | null;
  iterations: IterationEntry[];
  pending: { index: number; files: Record<string, string> } | null;
  awaiting_verdict?: boolean;
}

export interface ApiEvent {
  kind: "iteration-started" | "iteration-completed" | "awaiting-verdict" | "run-terminated";
  run_id: string;
  iteration: number | null;
  timestamp: number;
}

export interface SuggestionPayload {
  element: string;
  category: Category;
  changes: Record<string, string | number>;
  explanation: string;
}

export interface VerdictPayload {
  decision: "Accept" | "Revise";
  commentary: string;
  suggestions: SuggestionPayload[];
}

/** Subset of a Style Specification v8 document that the studio consumes. */
export interface StyleLayer {
  id: string;
  type: string;
  source?: string;
  layout?: Record<string, unknown>;
  paint?: Record<string, unknown>;
}

export interface StyleDocument {
  version: number;
  name?: string;
  sprite?: string;
  sources: Record<string, { type: string; data?: GeoJson; url?: string }>;
  layers: StyleLayer[];
}

export interface GeoJson {
  type: string;
  features?: GeoJsonFeature[];
  [key: string]: unknown;
}

export interface GeoJsonFeature {
  type: string;
  properties?: Record<string, unknown> | null;
  geometry: { type: string; coordinates: unknown } | null;
}

export interface SpriteIndexEntry {
  x: number;
  y: number;
  width: number;
  height: number;
  pixelRatio: number;
}
