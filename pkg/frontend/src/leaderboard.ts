/**
 * Leaderboard view: sortable score table plus radar series with per-model
 * visibility toggles. The view performs no arithmetic on scores; every
 * number shown is exactly what the API returned, truncated only for display.
 */
import type { LeaderboardResponse, LeaderboardRow, RadarSeries } from "./api.js";
import { escapeHtml, formatScore } from "./html.js";

export type SortColumn = "model" | "average" | string; // task name columns

export interface SortState {
  column: SortColumn;
  descending: boolean;
}

export interface LeaderboardState {
  sort: SortState;
  hiddenRadarModels: Set<string>;
}

export function initialLeaderboardState(): LeaderboardState {
  return {
    sort: { column: "average", descending: true },
    hiddenRadarModels: new Set(),
  };
}

/** Column headers: model, average, then task names in first-row order. */
export function taskColumns(rows: LeaderboardRow[]): string[] {
  const first = rows[0];
  return first ? Object.keys(first.task_accuracies) : [];
}

function cellValue(row: LeaderboardRow, column: SortColumn): number | string {
  if (column === "model") return row.model_name;
  if (column === "average") return row.average;
  return row.task_accuracies[column] ?? -Infinity;
}

export function sortRows(
  rows: LeaderboardRow[],
  sort: SortState,
): LeaderboardRow[] {
  const sorted = [...rows].sort((a, b) => {
    const left = cellValue(a, sort.column);
    const right = cellValue(b, sort.column);
    if (typeof left === "string" && typeof right === "string") {
      return left.localeCompare(right);
    }
    return Number(left) - Number(right);
  });
  if (sort.descending) sorted.reverse();
  return sorted;
}

/** Clicking a header re-sorts by it; clicking it again flips direction. */
export function toggleSort(sort: SortState, column: SortColumn): SortState {
  if (sort.column === column) {
    return { column, descending: !sort.descending };
  }
  return { column, descending: column !== "model" };
}

/**
 * Toggle one model's radar layer. Row data is untouched: only the set of
 * hidden model names changes.
 */
export function toggleRadarLayer(
  state: LeaderboardState,
  modelName: string,
): LeaderboardState {
  const hidden = new Set(state.hiddenRadarModels);
  if (hidden.has(modelName)) hidden.delete(modelName);
  else hidden.add(modelName);
  return { ...state, hiddenRadarModels: hidden };
}

export function visibleRadarSeries(
  radar: RadarSeries[],
  state: LeaderboardState,
): RadarSeries[] {
  return radar.filter((s) => !state.hiddenRadarModels.has(s.model_name));
}

/** Glyph class for the model-kind marker next to each row. */
export function kindGlyphClass(kind: LeaderboardRow["model_kind"]): string {
  return kind === "base" ? "glyph-base-diamond" : "glyph-finetuned-circle";
}

export function renderLeaderboard(
  data: LeaderboardResponse,
  state: LeaderboardState,
): string {
  if (data.rows.length === 0) {
    return '<p class="empty-state">No completed runs yet.</p>';
  }
  const columns = taskColumns(data.rows);
  const rows = sortRows(data.rows, state.sort);
  const header = [
    '<th data-column="model">Model</th>',
    '<th data-column="average">Average</th>',
    ...columns.map(
      (name) =>
        `<th data-column="${escapeHtml(name)}" title="task accuracy, percent">` +
        `${escapeHtml(name)}</th>`,
    ),
  ].join("");
  const body = rows
    .map((row) => {
      const cells = columns
        .map(
          (name) =>
            `<td class="score">${formatScore(row.task_accuracies[name] ?? null)}</td>`,
        )
        .join("");
      return (
        `<tr data-run="${escapeHtml(row.run_id)}">` +
        `<td><span class="${kindGlyphClass(row.model_kind)}"></span>` +
        `${escapeHtml(row.model_name)}</td>` +
        `<td class="score average">${formatScore(row.average)}</td>` +
        cells +
        "</tr>"
      );
    })
    .join("");
  return (
    `<table class="leaderboard"><thead><tr>${header}</tr></thead>` +
    `<tbody>${body}</tbody></table>`
  );
}

/**
 * Radar chart as inline SVG. Axes are task names, radius maps 0-100
 * accuracy; a missing task score breaks the polygon (a gap, not a zero).
 */
export function renderRadar(
  radar: RadarSeries[],
  state: LeaderboardState,
  size = 240,
): string {
  const visible = visibleRadarSeries(radar, state);
  const first = visible[0];
  if (!first) return '<svg class="radar" viewBox="0 0 240 240"></svg>';
  const axes = Object.keys(first.series);
  const center = size / 2;
  const radius = center - 20;
  const angle = (i: number) => (Math.PI * 2 * i) / axes.length - Math.PI / 2;

  const axisLines = axes
    .map((name, i) => {
      const x = center + radius * Math.cos(angle(i));
      const y = center + radius * Math.sin(angle(i));
      return (
        `<line x1="${center}" y1="${center}" x2="${x.toFixed(1)}" ` +
        `y2="${y.toFixed(1)}" class="radar-axis" data-axis="${escapeHtml(name)}"/>`
      );
    })
    .join("");

  const layers = visible
    .map((series) => {
      const segments: string[] = [];
      let current: string[] = [];
      axes.forEach((name, i) => {
        const value = series.series[name];
        if (value === null || value === undefined) {
          if (current.length > 1) segments.push(current.join(" "));
          current = [];
          return;
        }
        const r = (radius * value) / 100;
        const x = center + r * Math.cos(angle(i));
        const y = center + r * Math.sin(angle(i));
        current.push(`${x.toFixed(1)},${y.toFixed(1)}`);
      });
      if (current.length > 1) segments.push(current.join(" "));
      const polylines = segments
        .map((points) => `<polyline points="${points}" fill="none"/>`)
        .join("");
      return (
        `<g class="radar-layer" data-model="${escapeHtml(series.model_name)}">` +
        polylines +
        "</g>"
      );
    })
    .join("");

  return (
    `<svg class="radar" viewBox="0 0 ${size} ${size}">` +
    axisLines +
    layers +
    "</svg>"
  );
}
