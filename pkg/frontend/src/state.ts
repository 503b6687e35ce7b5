/** Pure conversation state: a reducer over transcript actions, plus the
 * one async orchestration that runs a turn against the API. Rendering
 * reads this state; nothing here touches the DOM. */

import { ApiError, TurnResult } from "./api.js";

export interface TranscriptEntry {
  role: "user" | "assistant" | "error";
  text: string;
  sources: TurnResult["sources"];
  degraded: boolean;
  traceId: string | null;
}

export interface ChatState {
  sessionId: string | null;
  entries: TranscriptEntry[];
  busy: boolean;
  error: string | null;
}

export const initialState: ChatState = {
  sessionId: null,
  entries: [],
  busy: false,
  error: null,
};

export type ChatAction =
  | { kind: "session_started"; sessionId: string }
  | { kind: "question_sent"; question: string }
  | { kind: "turn_completed"; result: TurnResult }
  | { kind: "turn_failed"; message: string; traceId: string | null };

export function reduce(state: ChatState, action: ChatAction): ChatState {
  switch (action.kind) {
    case "session_started":
      return { ...state, sessionId: action.sessionId };
    case "question_sent":
      return {
        ...state,
        busy: true,
        error: null,
        entries: [
          ...state.entries,
          { role: "user", text: action.question, sources: [], degraded: false, traceId: null },
        ],
      };
    case "turn_completed":
      return {
        ...state,
        busy: false,
        entries: [
          ...state.entries,
          {
            role: "assistant",
            text: action.result.answer,
            sources: action.result.sources,
            degraded: action.result.degraded,
            traceId: action.result.trace_id,
          },
        ],
      };
    case "turn_failed":
      return {
        ...state,
        busy: false,
        error: action.message,
        entries: [
          ...state.entries,
          {
            role: "error",
            text: action.message,
            sources: [],
            degraded: false,
            traceId: action.traceId,
          },
        ],
      };
  }
}

/** The slice of the API client a turn needs; tests pass plain objects. */
export interface TurnSender {
  sendTurn(sessionId: string, question: string): Promise<TurnResult>;
}

export async function runTurn(
  client: TurnSender,
  state: ChatState,
  question: string,
): Promise<ChatState> {
  if (state.sessionId === null) {
    throw new Error("no session started");
  }
  let next = reduce(state, { kind: "question_sent", question });
  try {
    const result = await client.sendTurn(state.sessionId, question);
    next = reduce(next, { kind: "turn_completed", result });
  } catch (err) {
    const traceId = err instanceof ApiError ? err.traceId : null;
    const message = err instanceof Error ? err.message : String(err);
    next = reduce(next, { kind: "turn_failed", message, traceId });
  }
  return next;
}
