/**
 * Run dashboard: live run list with status, a start-evaluation form, and
 * cancel buttons. Validation mirrors the API's checks so obviously invalid
 * submissions never leave the browser.
 */
import type { RunRecord, RunSubmission } from "./api.js";
import { escapeHtml, formatScore } from "./html.js";

export const POLL_INTERVAL_MS = 2000;

export interface FormInput {
  model_name: string;
  endpoint: string;
  model_kind: string;
  tasks: string; // comma-separated in the form
  k: string;
  concurrency: string;
}

export interface FormResult {
  submission?: RunSubmission;
  errors: string[];
}

export function validateForm(input: FormInput): FormResult {
  const errors: string[] = [];
  if (!input.model_name.trim()) errors.push("model name is required");
  if (!input.endpoint.trim()) errors.push("endpoint URL is required");
  if (input.model_kind !== "base" && input.model_kind !== "fine_tuned") {
    errors.push("model kind must be base or fine_tuned");
  }
  const tasks = input.tasks
    .split(",")
    .map((t) => t.trim())
    .filter((t) => t.length > 0);
  if (tasks.length === 0) errors.push("at least one task is required");
  const k = Number(input.k || "5");
  if (!Number.isInteger(k) || k < 1) errors.push("k must be a positive integer");
  const concurrency = Number(input.concurrency || "8");
  if (!Number.isInteger(concurrency) || concurrency < 1) {
    errors.push("concurrency must be a positive integer");
  }
  if (errors.length > 0) return { errors };
  return {
    errors: [],
    submission: {
      model_name: input.model_name.trim(),
      endpoint: input.endpoint.trim(),
      model_kind: input.model_kind as "base" | "fine_tuned",
      tasks,
      k,
      concurrency,
    },
  };
}

export function renderBanner(message: string): string {
  return `<div class="banner banner-error">${escapeHtml(message)}</div>`;
}

function progressSummary(run: RunRecord): string {
  const parts = Object.entries(run.progress).map(
    ([task, p]) => `${escapeHtml(task)}: ${p.done}`,
  );
  return parts.join(", ");
}

export function renderRunList(runs: RunRecord[]): string {
  if (runs.length === 0) {
    return '<p class="empty-state">No runs yet. Start one above.</p>';
  }
  const rows = runs
    .map((run) => {
      const cancel =
        run.status === "pending" || run.status === "running"
          ? `<button class="cancel" data-run="${escapeHtml(run.run_id)}">cancel</button>`
          : "";
      return (
        `<tr data-run="${escapeHtml(run.run_id)}" class="status-${run.status}">` +
        `<td>${escapeHtml(run.run_id)}</td>` +
        `<td>${escapeHtml(run.model_name)}</td>` +
        `<td class="status">${run.status}</td>` +
        `<td>${formatScore(run.average)}</td>` +
        `<td>${progressSummary(run)}</td>` +
        `<td>${cancel}</td></tr>`
      );
    })
    .join("");
  return (
    '<table class="runs"><thead><tr>' +
    "<th>run</th><th>model</th><th>status</th><th>average</th>" +
    "<th>progress</th><th></th>" +
    `</tr></thead><tbody>${rows}</tbody></table>`
  );
}
