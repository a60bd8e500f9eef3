import { describe, expect, it } from "vitest";

import {
  MAX_PANES,
  addParticipant,
  applyEvent,
  beginUserTurn,
  canAddParticipant,
  initialChatState,
  renderChat,
  renderPane,
} from "../src/chat.js";

function twoPaneState() {
  let state = initialChatState();
  state = addParticipant(state, { base_url: "http://a", model_name: "echo-a" });
  state = addParticipant(state, { base_url: "http://b", model_name: "echo-b" });
  return { ...state, sessionId: "s1" };
}

describe("participant cap", () => {
  it("allows exactly ten panes", () => {
    let state = initialChatState();
    for (let i = 0; i < MAX_PANES; i++) {
      state = addParticipant(state, {
        base_url: `http://m${i}`,
        model_name: `m${i}`,
      });
    }
    expect(state.panes).toHaveLength(10);
    expect(canAddParticipant(state)).toBe(false);
    expect(() =>
      addParticipant(state, { base_url: "http://x", model_name: "x" }),
    ).toThrow(/at most 10/);
  });
});

describe("shared composer", () => {
  it("one send appends the identical user turn to every pane", () => {
    const state = beginUserTurn(twoPaneState(), "ping");
    for (const pane of state.panes) {
      expect(pane.transcript).toEqual([{ role: "user", content: "ping" }]);
      expect(pane.streaming).toBe("");
      expect(pane.error).toBeNull();
    }
  });
});

describe("echo round trip", () => {
  it("renders both replies after done events from two echo mocks", () => {
    let state = beginUserTurn(twoPaneState(), "ping");
    state = applyEvent(state, { participant: 0, type: "fragment", content: "pi" });
    state = applyEvent(state, { participant: 0, type: "fragment", content: "ng" });
    state = applyEvent(state, { participant: 1, type: "fragment", content: "ping" });
    state = applyEvent(state, { participant: 0, type: "done", content: "ping" });
    state = applyEvent(state, { participant: 1, type: "done", content: "ping" });
    const html = renderChat(state);
    const panes = html.split('<section class="pane"').slice(1);
    expect(panes).toHaveLength(2);
    for (const pane of panes) {
      expect(pane).toContain('<div class="turn turn-user">ping</div>');
      expect(pane).toContain('<div class="turn turn-assistant">ping</div>');
      expect(pane).not.toContain("error-banner");
    }
  });

  it("streams fragments into the owning pane only", () => {
    let state = beginUserTurn(twoPaneState(), "hi");
    state = applyEvent(state, { participant: 0, type: "fragment", content: "hel" });
    expect(state.panes[0]!.streaming).toBe("hel");
    expect(state.panes[1]!.streaming).toBe("");
  });
});

describe("failure isolation", () => {
  it("a 502 shows an error banner in that pane only", () => {
    let state = beginUserTurn(twoPaneState(), "ping");
    state = applyEvent(state, { participant: 0, type: "done", content: "ping" });
    state = applyEvent(state, {
      participant: 1,
      type: "error",
      code: "endpoint_unreachable",
      message: "cannot reach http://b",
      http_status: 502,
    });
    const healthy = renderPane(state.panes[0]!, 0);
    const failed = renderPane(state.panes[1]!, 1);
    expect(healthy).not.toContain("error-banner");
    expect(healthy).toContain("ping");
    expect(failed).toContain("error-banner");
    expect(failed).toContain("502 endpoint_unreachable");
    // the failed pane keeps its user turn but gains no assistant turn
    expect(failed).toContain("turn-user");
    expect(failed).not.toContain("turn-assistant");
  });
});
