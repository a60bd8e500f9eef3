/**
 * Audit view: filterable, paginated verdict explorer. The rows shown are
 * exactly the page the API returned; token probabilities render as received.
 */
import type { AuditFilter, AuditPage, Verdict } from "./api.js";
import { escapeHtml } from "./html.js";

export const AUDIT_FILTERS: AuditFilter[] = [
  "all",
  "passed",
  "failed",
  "no_valid_response",
  "skipped",
];

export interface AuditState {
  runId: string;
  task: string | null;
  filter: AuditFilter;
  page: number;
  pageSize: number;
  expandedRecordId: string | null;
}

export function initialAuditState(runId: string, pageSize = 10): AuditState {
  return {
    runId,
    task: null,
    filter: "all",
    page: 0,
    pageSize,
    expandedRecordId: null,
  };
}

/** Changing the filter resets to the first page and collapses expansion. */
export function setFilter(state: AuditState, filter: AuditFilter): AuditState {
  return { ...state, filter, page: 0, expandedRecordId: null };
}

export function setPage(state: AuditState, page: number): AuditState {
  return { ...state, page: Math.max(0, page) };
}

export function toggleExpanded(state: AuditState, recordId: string): AuditState {
  return {
    ...state,
    expandedRecordId: state.expandedRecordId === recordId ? null : recordId,
  };
}

export function pageCount(total: number, pageSize: number): number {
  return Math.ceil(total / pageSize);
}

export function offsetFor(state: AuditState): number {
  return state.page * state.pageSize;
}

function verdictBadge(verdict: Verdict): string {
  if (verdict.skipped) return '<span class="badge badge-skipped">skipped</span>';
  if (verdict.no_valid_response) {
    return '<span class="badge badge-no-valid">no valid response</span>';
  }
  if (verdict.correct) return '<span class="badge badge-passed">passed</span>';
  return '<span class="badge badge-failed">failed</span>';
}

function renderCandidates(verdict: Verdict): string {
  const rows = verdict.candidates
    .map(
      (c) =>
        `<li><code>${escapeHtml(JSON.stringify(c.token))}</code>` +
        `<span class="prob">${c.prob}</span></li>`,
    )
    .join("");
  return `<ul class="candidates">${rows}</ul>`;
}

function renderExpansion(verdict: Verdict): string {
  return (
    '<tr class="verdict-detail"><td colspan="4">' +
    `<dl><dt>gold</dt><dd>${escapeHtml(verdict.gold_label)}</dd>` +
    `<dt>chosen</dt><dd>${escapeHtml(verdict.chosen_label ?? "none")}</dd></dl>` +
    renderCandidates(verdict) +
    "</td></tr>"
  );
}

export function renderAudit(page: AuditPage, state: AuditState): string {
  const filters = AUDIT_FILTERS.map(
    (name) =>
      `<button class="filter${name === state.filter ? " active" : ""}" ` +
      `data-filter="${name}">${name}</button>`,
  ).join("");

  const rows = page.verdicts
    .map((verdict) => {
      const main =
        `<tr class="verdict" data-record="${escapeHtml(verdict.record_id)}">` +
        `<td>${escapeHtml(verdict.record_id)}</td>` +
        `<td>${escapeHtml(verdict.gold_label)}</td>` +
        `<td>${escapeHtml(verdict.chosen_label ?? "")}</td>` +
        `<td>${verdictBadge(verdict)}</td></tr>`;
      return state.expandedRecordId === verdict.record_id
        ? main + renderExpansion(verdict)
        : main;
    })
    .join("");

  const pages = pageCount(page.total, state.pageSize);
  const pager =
    `<nav class="pager" data-pages="${pages}">` +
    `<button class="page-prev"${state.page === 0 ? " disabled" : ""}>prev</button>` +
    `page ${state.page + 1} of ${Math.max(pages, 1)} ` +
    `(${page.total} matching)` +
    `<button class="page-next"${state.page + 1 >= pages ? " disabled" : ""}>next</button>` +
    "</nav>";

  return (
    `<div class="audit" data-run="${escapeHtml(state.runId)}">` +
    `<div class="filters">${filters}</div>` +
    `<table class="verdicts"><thead><tr>` +
    "<th>record</th><th>gold</th><th>chosen</th><th>outcome</th>" +
    `</tr></thead><tbody>${rows}</tbody></table>` +
    pager +
    "</div>"
  );
}
