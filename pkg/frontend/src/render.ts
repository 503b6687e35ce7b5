/** HTML string renderers. Pure functions of state, so the same state
 * always yields byte-identical markup; the DOM layer just assigns
 * innerHTML. All interpolated text is escaped here. */

import { Source, TraceEvent } from "./api.js";
import { ChatState, TranscriptEntry } from "./state.js";

export function escapeHtml(text: string): string {
  return text
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}

function formatScore(score: number | null): string {
  return score === null ? "n/a" : score.toFixed(3);
}

export function renderSources(sources: Source[]): string {
  if (sources.length === 0) {
    return "";
  }
  const items = sources
    .map(
      (s) =>
        `<li><code>${escapeHtml(s.chunk_id)}</code>` +
        ` <span class="score">${formatScore(s.relevance_score)}</span>` +
        ` ${escapeHtml(s.snippet)}</li>`,
    )
    .join("");
  return `<ul class="sources">${items}</ul>`;
}

export function renderEntry(entry: TranscriptEntry): string {
  const badge = entry.degraded ? '<span class="badge degraded">degraded</span>' : "";
  const trace =
    entry.traceId === null
      ? ""
      : `<button class="trace-link" data-trace-id="${escapeHtml(entry.traceId)}">trace</button>`;
  return (
    `<article class="entry ${entry.role}">` +
    `<header>${entry.role}${badge}${trace}</header>` +
    `<p>${escapeHtml(entry.text)}</p>` +
    renderSources(entry.sources) +
    `</article>`
  );
}

export function renderTranscript(entries: TranscriptEntry[]): string {
  if (entries.length === 0) {
    return '<p class="empty">Ask a question to start the conversation.</p>';
  }
  return entries.map(renderEntry).join("");
}

export function renderTrace(events: TraceEvent[]): string {
  if (events.length === 0) {
    return '<p class="empty">No trace loaded.</p>';
  }
  const items = events
    .map(
      (e) =>
        `<li><span class="node">${escapeHtml(e.node)}</span>` +
        ` <span class="summary">${escapeHtml(e.summary)}</span>` +
        ` <span class="outcome">${escapeHtml(e.outcome)}</span></li>`,
    )
    .join("");
  return `<ol class="trace">${items}</ol>`;
}

export function renderStatus(state: ChatState): string {
  if (state.busy) {
    return '<span class="status busy">thinking...</span>';
  }
  if (state.error !== null) {
    return `<span class="status error">${escapeHtml(state.error)}</span>`;
  }
  return '<span class="status idle">ready</span>';
}
