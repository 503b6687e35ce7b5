import { describe, expect, it } from "vitest";

import { TraceEvent, TurnResult } from "../src/api.js";
import { escapeHtml, renderStatus, renderTrace, renderTranscript } from "../src/render.js";
import { initialState, reduce, runTurn } from "../src/state.js";

const HAPPY_TRACE: TraceEvent[] = [
  { node: "retrieve", summary: "what torque?", outcome: "1 documents", ts: 1 },
  { node: "grade_documents", summary: "judged 1", outcome: "kept 1/1", ts: 2 },
  { node: "route", summary: "1 relevant documents", outcome: "generate", ts: 3 },
  { node: "generate", summary: "answered", outcome: "ok degraded=false", ts: 4 },
  { node: "route", summary: "grounded=true addresses=true: answer accepted", outcome: "end", ts: 5 },
];

// Three rewrite rounds that never find a relevant document, then the
// degraded best-effort answer.
const DEGRADED_TRACE: TraceEvent[] = [
  { node: "retrieve", summary: "q", outcome: "1 documents", ts: 1 },
  { node: "grade_documents", summary: "judged 1", outcome: "kept 0/1", ts: 2 },
  { node: "route", summary: "no relevant documents", outcome: "transform_query", ts: 3 },
  { node: "transform_query", summary: "rewrite 1/3", outcome: "kept", ts: 4 },
  { node: "retrieve", summary: "rewritten", outcome: "1 documents", ts: 5 },
  { node: "grade_documents", summary: "judged 1", outcome: "kept 0/1", ts: 6 },
  { node: "route", summary: "no relevant documents", outcome: "transform_query", ts: 7 },
  { node: "transform_query", summary: "rewrite 2/3", outcome: "kept", ts: 8 },
  { node: "retrieve", summary: "rewritten", outcome: "1 documents", ts: 9 },
  { node: "grade_documents", summary: "judged 1", outcome: "kept 0/1", ts: 10 },
  { node: "route", summary: "no relevant documents", outcome: "transform_query", ts: 11 },
  { node: "transform_query", summary: "rewrite 3/3", outcome: "kept", ts: 12 },
  { node: "retrieve", summary: "rewritten", outcome: "1 documents", ts: 13 },
  { node: "grade_documents", summary: "judged 1", outcome: "kept 0/1", ts: 14 },
  { node: "route", summary: "rewrite budget exhausted", outcome: "generate", ts: 15 },
  { node: "generate", summary: "best effort", outcome: "ok degraded=true", ts: 16 },
  { node: "route", summary: "degraded short-circuit", outcome: "end", ts: 17 },
];

const RESULT: TurnResult = {
  answer: "Torque the caliper bracket bolts to 110 Nm.",
  sources: [
    { chunk_id: "brakes.json#0000", snippet: "Torque the caliper bracket bolts to 110 Nm.", relevance_score: 2.0 },
    { chunk_id: "brakes.json#0001", snippet: "Use DOT 4 fluid.", relevance_score: null },
  ],
  degraded: false,
  trace_id: "t-1",
};

function started() {
  return reduce(initialState, { kind: "session_started", sessionId: "s-1" });
}

describe("renderTranscript", () => {
  it("shows an empty-state prompt before any turns", () => {
    expect(renderTranscript([])).toContain("Ask a question");
  });

  it("renders user and assistant entries with sources after a turn", async () => {
    const state = await runTurn({ sendTurn: async () => RESULT }, started(), "what torque?");
    const html = renderTranscript(state.entries);
    expect(html).toContain('<article class="entry user">');
    expect(html).toContain("what torque?");
    expect(html).toContain('<article class="entry assistant">');
    expect(html).toContain("Torque the caliper bracket bolts to 110 Nm.");
    expect(html).toContain("brakes.json#0000");
    expect(html).toContain('<span class="score">2.000</span>');
    expect(html).toContain('<span class="score">n/a</span>');
    expect(html).toContain('data-trace-id="t-1"');
    expect(html).not.toContain("badge degraded");
  });

  it("shows the degraded badge exactly when the turn is degraded", async () => {
    const degraded = { ...RESULT, degraded: true };
    const state = await runTurn({ sendTurn: async () => degraded }, started(), "q");
    const html = renderTranscript(state.entries);
    expect(html).toContain('<span class="badge degraded">degraded</span>');
  });

  it("renders a failed turn as an error entry", async () => {
    const sender = {
      sendTurn: async () => {
        throw new Error("service unreachable");
      },
    };
    const state = await runTurn(sender, started(), "q");
    const html = renderTranscript(state.entries);
    expect(html).toContain('<article class="entry error">');
    expect(html).toContain("service unreachable");
  });

  it("escapes markup in questions, answers, and snippets", async () => {
    const hostile = {
      ...RESULT,
      answer: '<img src=x onerror="x()">',
      sources: [{ chunk_id: "a&b", snippet: "<b>bold</b>", relevance_score: 1 }],
    };
    const state = await runTurn({ sendTurn: async () => hostile }, started(), "<script>alert(1)</script>");
    const html = renderTranscript(state.entries);
    expect(html).not.toContain("<script>");
    expect(html).not.toContain("<img");
    expect(html).not.toContain("<b>bold</b>");
    expect(html).toContain("&lt;script&gt;");
    expect(html).toContain("a&amp;b");
  });

  it("is deterministic for the same entries", async () => {
    const state = await runTurn({ sendTurn: async () => RESULT }, started(), "q");
    expect(renderTranscript(state.entries)).toBe(renderTranscript(state.entries));
  });
});

describe("renderTrace", () => {
  it("shows an empty state when no trace is loaded", () => {
    expect(renderTrace([])).toContain("No trace loaded.");
  });

  it("displays the happy path as five nodes in order", () => {
    const html = renderTrace(HAPPY_TRACE);
    const nodes = [...html.matchAll(/<span class="node">([^<]+)<\/span>/g)].map((m) => m[1]);
    expect(nodes).toEqual(["retrieve", "grade_documents", "route", "generate", "route"]);
    expect(html).toContain("ok degraded=false");
    expect(html).toContain("grounded=true addresses=true");
  });

  it("displays all three rewrites and the degraded end of a failed search", () => {
    const html = renderTrace(DEGRADED_TRACE);
    const nodes = [...html.matchAll(/<span class="node">([^<]+)<\/span>/g)].map((m) => m[1]);
    expect(nodes.filter((n) => n === "transform_query")).toHaveLength(3);
    expect(nodes[nodes.length - 1]).toBe("route");
    expect(html).toContain("degraded short-circuit");
    expect(html).toContain("ok degraded=true");
    expect((html.match(/<li>/g) ?? []).length).toBe(DEGRADED_TRACE.length);
  });

  it("escapes event text", () => {
    const html = renderTrace([
      { node: "retrieve", summary: "<script>", outcome: "1 documents", ts: 1 },
    ]);
    expect(html).not.toContain("<script>");
    expect(html).toContain("&lt;script&gt;");
  });
});

describe("renderStatus", () => {
  it("reflects busy, error, and idle states", () => {
    expect(renderStatus({ ...initialState, busy: true })).toContain("thinking");
    expect(renderStatus({ ...initialState, error: "boom" })).toContain("boom");
    expect(renderStatus(initialState)).toContain("ready");
  });
});

describe("escapeHtml", () => {
  it("escapes the four html-significant characters", () => {
    expect(escapeHtml('<a href="x">&')).toBe("&lt;a href=&quot;x&quot;&gt;&amp;");
  });
});
