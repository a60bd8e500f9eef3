/**
 * Side-by-side chat view: up to ten panes, one shared composer. A send
 * appends the identical user turn to every pane; streamed fragments and
 * errors are applied per pane, so one failed endpoint never blocks the rest.
 */
import type { ChatEvent, ChatParticipant } from "./api.js";
import { escapeHtml } from "./html.js";

export const MAX_PANES = 10;

export interface ChatTurn {
  role: "user" | "assistant";
  content: string;
}

export interface Pane {
  participant: ChatParticipant;
  transcript: ChatTurn[];
  streaming: string | null; // in-flight assistant reply, null when idle
  error: string | null;
}

export interface ChatState {
  sessionId: string | null;
  panes: Pane[];
}

export function initialChatState(): ChatState {
  return { sessionId: null, panes: [] };
}

export function canAddParticipant(state: ChatState): boolean {
  return state.panes.length < MAX_PANES;
}

export function addParticipant(
  state: ChatState,
  participant: ChatParticipant,
): ChatState {
  if (!canAddParticipant(state)) {
    throw new Error(`at most ${MAX_PANES} participants per session`);
  }
  return {
    ...state,
    panes: [
      ...state.panes,
      { participant, transcript: [], streaming: null, error: null },
    ],
  };
}

/** One send: the same user turn lands in every pane, streams reset. */
export function beginUserTurn(state: ChatState, content: string): ChatState {
  return {
    ...state,
    panes: state.panes.map((pane) => ({
      ...pane,
      transcript: [...pane.transcript, { role: "user" as const, content }],
      streaming: "",
      error: null,
    })),
  };
}

/** Apply one gateway stream event to the owning pane only. */
export function applyEvent(state: ChatState, event: ChatEvent): ChatState {
  const panes = state.panes.map((pane, index) => {
    if (index !== event.participant) return pane;
    if (event.type === "fragment") {
      return { ...pane, streaming: (pane.streaming ?? "") + event.content };
    }
    if (event.type === "done") {
      return {
        ...pane,
        streaming: null,
        transcript: [
          ...pane.transcript,
          { role: "assistant" as const, content: event.content },
        ],
      };
    }
    return {
      ...pane,
      streaming: null,
      error: `${event.http_status} ${event.code}: ${event.message}`,
    };
  });
  return { ...state, panes };
}

export function renderPane(pane: Pane, index: number): string {
  const turns = pane.transcript
    .map(
      (turn) =>
        `<div class="turn turn-${turn.role}">${escapeHtml(turn.content)}</div>`,
    )
    .join("");
  const streaming =
    pane.streaming !== null
      ? `<div class="turn turn-assistant streaming">${escapeHtml(pane.streaming)}</div>`
      : "";
  const banner =
    pane.error !== null
      ? `<div class="error-banner">${escapeHtml(pane.error)}</div>`
      : "";
  return (
    `<section class="pane" data-pane="${index}">` +
    `<header>${escapeHtml(pane.participant.model_name)}</header>` +
    banner +
    `<div class="transcript">${turns}${streaming}</div>` +
    "</section>"
  );
}

export function renderChat(state: ChatState): string {
  const panes = state.panes.map(renderPane).join("");
  return `<div class="chat" data-session="${escapeHtml(state.sessionId ?? "")}">${panes}</div>`;
}
