/** Minimal HTML escaping for string-rendered views. */
export function escapeHtml(text: string): string {
  return text
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}

/** Format an accuracy for display without doing any arithmetic on it. */
export function formatScore(value: number | null): string {
  return value === null ? "n/a" : value.toFixed(2);
}
