/** Thin client over the cartoforge session API, shared by the page and tests. */

import type { ApiEvent, SessionIndex, SessionSummary, StyleDocument, VerdictPayload } from "./types.js";

export class ApiError extends Error {
  constructor(public status: number, message: string) {
    super(message);
  }
}

export class ApiClient {
  constructor(private baseUrl: string = "") {}

  private url(path: string): string {
    return `${this.baseUrl}${path}`;
  }

  private async getJson<T>(path: string): Promise<T> {
    const resp = await fetch(this.url(path));
    if (!resp.ok) {
      throw new ApiError(resp.status, `${path}: ${resp.status}`);
    }
    return (await resp.json()) as T;
  }

  listSessions(): Promise<SessionSummary[]> {
    return this.getJson("/api/sessions");
  }

  getSession(runId: string): Promise<SessionIndex> {
    return this.getJson(`/api/sessions/${encodeURIComponent(runId)}`);
  }

  getIteration(runId: string, k: number): Promise<Record<string, unknown>> {
    return this.getJson(`/api/sessions/${encodeURIComponent(runId)}/iterations/${k}`);
  }

  assetUrl(runId: string, relPath: string): string {
    return this.url(`/api/sessions/${encodeURIComponent(runId)}/assets/${relPath}`);
  }

  iterationAssetUrl(runId: string, k: number, name: string): string {
    return this.assetUrl(runId, `iterations/${k}/${name}`);
  }

  async getStyleDocument(runId: string, k: number): Promise<StyleDocument> {
    const resp = await fetch(this.iterationAssetUrl(runId, k, "style.json"));
    if (!resp.ok) {
      throw new ApiError(resp.status, `style.json for iteration ${k}: ${resp.status}`);
    }
    return (await resp.json()) as StyleDocument;
  }

  async postVerdict(runId: string, verdict: VerdictPayload): Promise<{ iteration: number }> {
    const resp = await fetch(this.url(`/api/sessions/${encodeURIComponent(runId)}/verdict`), {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(verdict),
    });
    if (!resp.ok) {
      throw new ApiError(resp.status, await resp.text());
    }
    return (await resp.json()) as { iteration: number };
  }

  async startRun(form: FormData): Promise<{ id: string }> {
    const resp = await fetch(this.url("/api/sessions"), { method: "POST", body: form });
    if (!resp.ok) {
      throw new ApiError(resp.status, await resp.text());
    }
    return (await resp.json()) as { id: string };
  }

  /**
   * Follow the newline-delimited event stream until run termination or abort.
   * Returns when the server closes the stream.
   */
  async streamEvents(
    runId: string,
    onEvent: (event: ApiEvent) => void,
    signal?: AbortSignal,
  ): Promise<void> {
    const resp = await fetch(this.url(`/api/sessions/${encodeURIComponent(runId)}/events`), { signal });
    if (!resp.ok || !resp.body) {
      throw new ApiError(resp.status, `event stream: ${resp.status}`);
    }
    for await (const event of parseNdjson(resp.body)) {
      onEvent(event as ApiEvent);
    }
  }
}

/** Split a byte stream into parsed JSON objects, one per line. */
export async function* parseNdjson(
  body: ReadableStream<Uint8Array>,
): AsyncGenerator<unknown, void, unknown> {
  const reader = body.getReader();
  const decoder = new TextDecoder();
  let carry = "";
  try {
    while (true) {
      const { value, done } = await reader.read();
      if (done) {
        break;
      }
      carry += decoder.decode(value, { stream: true });
      let newline = carry.indexOf("\n");
      while (newline >= 0) {
        const line = carry.slice(0, newline).trim();
        carry = carry.slice(newline + 1);
        if (line) {
          yield JSON.parse(line);
        }
        newline = carry.indexOf("\n");
      }
    }
    const rest = carry.trim();
    if (rest) {
      yield JSON.parse(rest);
    }
  } finally {
    reader.releaseLock();
  }
}
