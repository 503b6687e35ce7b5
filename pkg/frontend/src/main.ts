/** Browser entry point: wires the form, transcript pane, and trace
 * inspector to the API client. Everything testable lives in api.ts,
 * state.ts, and render.ts; this file only moves strings into the DOM. */

import { ApiClient } from "./api.js";
import { ChatState, initialState, reduce, runTurn } from "./state.js";
import { renderStatus, renderTrace, renderTranscript } from "./render.js";

const client = new ApiClient();
let state: ChatState = initialState;

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (node === null) {
    throw new Error(`missing element #${id}`);
  }
  return node as T;
}

function paint(): void {
  el("transcript").innerHTML = renderTranscript(state.entries);
  el("status").innerHTML = renderStatus(state);
  const input = el<HTMLInputElement>("question");
  input.disabled = state.busy;
  for (const button of document.querySelectorAll<HTMLButtonElement>(".trace-link")) {
    button.addEventListener("click", () => {
      void showTrace(button.dataset.traceId ?? "");
    });
  }
}

async function showTrace(traceId: string): Promise<void> {
  try {
    const events = await client.fetchTrace(traceId);
    el("trace").innerHTML = renderTrace(events);
  } catch (err) {
    el("trace").innerHTML = renderTrace([]);
    console.error(err);
  }
}

async function ensureSession(): Promise<void> {
  if (state.sessionId === null) {
    const id = await client.createSession("agent");
    state = reduce(state, { kind: "session_started", sessionId: id });
  }
}

async function submitQuestion(event: Event): Promise<void> {
  event.preventDefault();
  const input = el<HTMLInputElement>("question");
  const question = input.value.trim();
  if (question === "" || state.busy) {
    return;
  }
  input.value = "";
  await ensureSession();
  // Paint the user entry before the network round trip completes;
  // runTurn re-derives the same pending state from `before` internally.
  const before = state;
  state = reduce(before, { kind: "question_sent", question });
  paint();
  state = await runTurn(client, before, question);
  paint();
}

document.addEventListener("DOMContentLoaded", () => {
  el<HTMLFormElement>("ask").addEventListener("submit", (event) => {
    void submitQuestion(event);
  });
  paint();
  client
    .health()
    .then((h) => {
      el("backend").textContent = `backend: ${h.backend_mode}, index ${
        h.index_loaded ? "loaded" : "not loaded"
      }`;
    })
    .catch(() => {
      el("backend").textContent = "service unreachable";
    });
});
