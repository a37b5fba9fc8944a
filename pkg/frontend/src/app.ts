/** Studio page wiring: session list, iteration timeline, live map panel,
 * inspiration/map comparison with the similarity sparkline, and the review
 * panel during human-mode awaiting windows.
 */

import { ApiClient } from "./api.js";
import { createMapPanel, MapPanel } from "./mapPanel.js";
import { ReviewPanel, ManifestElements } from "./reviewPanel.js";
import { drawSparkline } from "./sparkline.js";
import { SessionView, buildSessionView, eventInvalidatesView } from "./state.js";
import type { ApiEvent } from "./types.js";

const client = new ApiClient("");

interface PageState {
  runId: string | null;
  view: SessionView | null;
  selectedIteration: number | null;
  mapPanel: MapPanel | null;
  reviewPanel: ReviewPanel | null;
  abort: AbortController | null;
}

const state: PageState = {
  runId: null,
  view: null,
  selectedIteration: null,
  mapPanel: null,
  reviewPanel: null,
  abort: null,
};

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing #${id}`);
  return node as T;
}

async function refreshSessionList(): Promise<void> {
  const list = el<HTMLElement>("session-list");
  const sessions = await client.listSessions();
  list.innerHTML = "";
  for (const session of sessions) {
    const item = document.createElement("a");
    item.className = "session-item" + (session.id === state.runId ? " active" : "");
    item.href = `#/session/${session.id}`;
    const badge = session.terminated_by ?? (session.awaiting_verdict ? "awaiting you" : "running");
    item.innerHTML = `<strong>${session.id}</strong><span class="badge ${badge.replace(/\s/g, "-")}">${badge}</span>
      <small>${session.iterations} iteration(s)${
        session.last_similarity !== null ? `, similarity ${session.last_similarity.toFixed(3)}` : ""
      }</small>`;
    list.appendChild(item);
  }
}

async function refreshView(): Promise<void> {
  if (!state.runId) return;
  const index = await client.getSession(state.runId);
  state.view = buildSessionView(index);
  renderTimeline();
  renderStatus();
  await renderReviewArea();
  const latest = state.view.timeline.length
    ? state.view.timeline[state.view.timeline.length - 1].index
    : null;
  if (state.selectedIteration === null && latest !== null) {
    await selectIteration(latest);
  } else if (state.selectedIteration !== null) {
    await selectIteration(state.selectedIteration, true);
  }
}

function renderStatus(): void {
  const view = state.view;
  const status = el<HTMLElement>("run-status");
  if (!view) {
    status.textContent = "";
    return;
  }
  if (view.terminatedBy) {
    status.textContent =
      view.terminatedBy === "accept"
        ? "Run finished: the map was accepted."
        : `Run finished (${view.terminatedBy})${view.error ? `: ${view.error}` : ""}.`;
  } else if (view.awaitingIteration !== null) {
    status.textContent = `Iteration ${view.awaitingIteration} awaits your verdict.`;
  } else {
    status.textContent = "Run in progress…";
  }
}

function renderTimeline(): void {
  const view = state.view;
  const timeline = el<HTMLElement>("timeline");
  timeline.innerHTML = "";
  if (!view) return;
  for (const entry of view.timeline) {
    const card = document.createElement("button");
    card.className =
      "timeline-entry" +
      (entry.index === state.selectedIteration ? " selected" : "") +
      (entry.pending ? " pending" : "");
    const img = document.createElement("img");
    img.src = client.iterationAssetUrl(view.runId, entry.index, "map.png");
    img.alt = `iteration ${entry.index}`;
    card.appendChild(img);
    const label = document.createElement("div");
    label.innerHTML = `#${entry.index} ${
      entry.pending
        ? "<em>awaiting</em>"
        : `${entry.decision ?? ""} ${entry.similarity !== null ? entry.similarity.toFixed(3) : ""}`
    }`;
    if (entry.decision === "Accept") {
      label.innerHTML += ' <span class="badge accept">final</span>';
    }
    card.appendChild(label);
    card.addEventListener("click", () => void selectIteration(entry.index));
    timeline.appendChild(card);
  }
  const spark = el<HTMLCanvasElement>("sparkline");
  drawSparkline(spark, view.timeline);
}

async function selectIteration(k: number, keepSelection = false): Promise<void> {
  if (!state.runId || !state.view) return;
  if (!keepSelection || state.selectedIteration === null) {
    state.selectedIteration = k;
  }
  renderTimeline();
  el<HTMLImageElement>("map-image").src = client.iterationAssetUrl(state.runId, k, "map.png");
  el<HTMLImageElement>("inspiration-image").src = client.assetUrl(state.runId, "inspiration.png");

  const warning = el<HTMLElement>("sprite-warning");
  try {
    const sprite = await fetch(client.iterationAssetUrl(state.runId, k, "sprite.json"));
    const index = sprite.ok ? await sprite.json() : {};
    warning.hidden = !(sprite.ok === false || Object.keys(index).length === 0);
  } catch {
    warning.hidden = false;
  }

  if (!state.mapPanel) {
    state.mapPanel = createMapPanel(el<HTMLElement>("map-panel"));
    el<HTMLElement>("engine-label").textContent = `engine: ${state.mapPanel.engine}`;
  }
  try {
    await state.mapPanel.setStyle(client.iterationAssetUrl(state.runId, k, "style.json"));
    el<HTMLElement>("map-error").hidden = true;
  } catch (err) {
    const box = el<HTMLElement>("map-error");
    box.hidden = false;
    box.textContent = `could not load the style document (${err}); retry by re-selecting the iteration`;
  }
}

async function renderReviewArea(): Promise<void> {
  const view = state.view;
  const container = el<HTMLElement>("review-panel");
  if (!view || view.awaitingIteration === null) {
    if (view?.terminatedBy) {
      container.innerHTML = "";
      state.reviewPanel = null;
    }
    if (state.reviewPanel && view && view.awaitingIteration === null) {
      state.reviewPanel.lock();
    }
    return;
  }
  if (!state.reviewPanel) {
    const manifestResp = await fetch(client.assetUrl(view.runId, "manifest.json"));
    const manifest = (await manifestResp.json()) as ManifestElements;
    state.reviewPanel = new ReviewPanel(container, client, view.runId, manifest, () => {
      /* locked until the next awaiting event */
    });
  } else {
    state.reviewPanel.reset();
  }
  await selectIteration(view.awaitingIteration);
}

function subscribeEvents(runId: string): void {
  state.abort?.abort();
  const abort = new AbortController();
  state.abort = abort;
  void client
    .streamEvents(
      runId,
      (event: ApiEvent) => {
        if (eventInvalidatesView(event)) {
          void refreshView();
          void refreshSessionList();
        }
      },
      abort.signal,
    )
    .catch(() => {
      /* stream closed; polling via refresh buttons still works */
    });
}

async function openSession(runId: string): Promise<void> {
  state.runId = runId;
  state.view = null;
  state.selectedIteration = null;
  state.reviewPanel = null;
  state.mapPanel?.destroy();
  state.mapPanel = null;
  el<HTMLElement>("session-title").textContent = runId;
  await refreshView();
  await refreshSessionList();
  subscribeEvents(runId);
}

function route(): void {
  const match = location.hash.match(/^#\/session\/(.+)$/);
  if (match) {
    void openSession(decodeURIComponent(match[1]));
  } else {
    void refreshSessionList();
  }
}

export function start(): void {
  window.addEventListener("hashchange", route);
  el<HTMLButtonElement>("refresh").addEventListener("click", () => {
    void refreshSessionList();
    void refreshView();
  });
  route();
}

if (typeof document !== "undefined" && document.getElementById("session-list")) {
  start();
}
