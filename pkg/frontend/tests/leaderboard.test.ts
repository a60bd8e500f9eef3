import { describe, expect, it } from "vitest";

import type { LeaderboardResponse } from "../src/api.js";
import {
  initialLeaderboardState,
  kindGlyphClass,
  renderLeaderboard,
  renderRadar,
  sortRows,
  toggleRadarLayer,
  toggleSort,
  visibleRadarSeries,
} from "../src/leaderboard.js";

const FIXTURE: LeaderboardResponse = {
  rows: [
    {
      model_name: "tuned-a",
      model_kind: "fine_tuned",
      average: 69.2,
      task_accuracies: { alpha: 69.93, beta: 78.21 },
      run_id: "r1",
    },
    {
      model_name: "stock-b",
      model_kind: "base",
      average: 62.69,
      task_accuracies: { alpha: 60.84, beta: 66.24 },
      run_id: "r2",
    },
    {
      model_name: "stock-c",
      model_kind: "base",
      average: 58.5,
      task_accuracies: { alpha: 55.0, beta: 62.0 },
      run_id: "r3",
    },
  ],
  radar: [
    { model_name: "tuned-a", series: { alpha: 69.93, beta: 78.21 } },
    { model_name: "stock-b", series: { alpha: 60.84, beta: 66.24 } },
    { model_name: "stock-c", series: { alpha: 55.0, beta: null } },
  ],
};

describe("leaderboard rendering", () => {
  it("renders rows sorted by average descending with display values", () => {
    const html = renderLeaderboard(FIXTURE, initialLeaderboardState());
    const order = [...html.matchAll(/data-run="(r\d)"/g)].map((m) => m[1]);
    expect(order).toEqual(["r1", "r2", "r3"]);
    const first = html.indexOf("69.20");
    const second = html.indexOf("62.69");
    const third = html.indexOf("58.50");
    expect(first).toBeGreaterThan(-1);
    expect(second).toBeGreaterThan(first);
    expect(third).toBeGreaterThan(second);
  });

  it("marks base and fine-tuned models with distinct glyph classes", () => {
    const html = renderLeaderboard(FIXTURE, initialLeaderboardState());
    expect(kindGlyphClass("base")).toBe("glyph-base-diamond");
    expect(kindGlyphClass("fine_tuned")).toBe("glyph-finetuned-circle");
    expect(html).toContain('<span class="glyph-finetuned-circle">');
    expect((html.match(/glyph-base-diamond/g) ?? []).length).toBe(2);
    expect((html.match(/glyph-finetuned-circle/g) ?? []).length).toBe(1);
  });

  it("renders an empty state without rows", () => {
    const html = renderLeaderboard({ rows: [], radar: [] }, initialLeaderboardState());
    expect(html).toContain("empty-state");
  });
});

describe("sorting", () => {
  it("reorders by a clicked task column", () => {
    const state = initialLeaderboardState();
    const sort = toggleSort(state.sort, "beta");
    const rows = sortRows(FIXTURE.rows, sort);
    expect(rows.map((r) => r.run_id)).toEqual(["r1", "r2", "r3"]);
    const flipped = sortRows(FIXTURE.rows, toggleSort(sort, "beta"));
    expect(flipped.map((r) => r.run_id)).toEqual(["r3", "r2", "r1"]);
  });

  it("clicking the active column flips direction only", () => {
    const descending = { column: "average" as const, descending: true };
    expect(toggleSort(descending, "average")).toEqual({
      column: "average",
      descending: false,
    });
  });
});

describe("radar", () => {
  it("toggling one layer hides it and leaves row data untouched", () => {
    const before = JSON.stringify(FIXTURE.rows);
    let state = initialLeaderboardState();
    state = toggleRadarLayer(state, "stock-b");
    const visible = visibleRadarSeries(FIXTURE.radar, state);
    expect(visible.map((s) => s.model_name)).toEqual(["tuned-a", "stock-c"]);
    expect(JSON.stringify(FIXTURE.rows)).toBe(before);
    state = toggleRadarLayer(state, "stock-b");
    expect(visibleRadarSeries(FIXTURE.radar, state)).toHaveLength(3);
  });

  it("missing task scores leave a gap instead of a zero point", () => {
    const html = renderRadar(FIXTURE.radar, initialLeaderboardState());
    const layer = html
      .split('data-model="stock-c"')[1]!
      .split("</g>")[0]!;
    // one axis missing out of two: not enough points for a polyline segment
    expect(layer).not.toContain("<polyline");
    const full = html.split('data-model="tuned-a"')[1]!.split("</g>")[0]!;
    expect(full).toContain("<polyline");
  });
});
