/**
 * Typed client for the gateway HTTP API.
 *
 * Every view talks to the backend exclusively through this module, so the
 * whole frontend works against any server that honors the same routes.
 */

export interface TaskScore {
  task: string;
  total: number;
  answered: number;
  correct_count: number;
  skipped: number;
  accuracy: number | null;
  incomplete: boolean;
}

export interface RunRecord {
  run_id: string;
  model_name: string;
  endpoint_url: string;
  model_kind: "base" | "fine_tuned";
  tasks: string[];
  k: number;
  concurrency: number;
  status: "pending" | "running" | "completed" | "failed" | "cancelled";
  task_scores: Record<string, TaskScore | null>;
  average: number | null;
  created_at: number;
  finished_at: number | null;
  error: string | null;
  progress: Record<string, { done: number }>;
}

export interface LeaderboardRow {
  model_name: string;
  model_kind: "base" | "fine_tuned";
  average: number;
  task_accuracies: Record<string, number | null>;
  run_id: string;
}

export interface RadarSeries {
  model_name: string;
  series: Record<string, number | null>;
}

export interface LeaderboardResponse {
  rows: LeaderboardRow[];
  radar: RadarSeries[];
}

export interface Candidate {
  token: string;
  prob: number;
}

export interface Verdict {
  record_id: string;
  gold_label: string;
  chosen_label: string | null;
  correct: boolean;
  candidates: Candidate[];
  no_valid_response: boolean;
  skipped: boolean;
  skip_reason: string | null;
}

export interface AuditPage {
  total: number;
  offset: number;
  limit: number;
  verdicts: Verdict[];
}

export type AuditFilter =
  | "all"
  | "passed"
  | "failed"
  | "no_valid_response"
  | "skipped";

export interface ChatParticipant {
  base_url: string;
  model_name: string;
}

export interface ChatSession {
  session_id: string;
  participants: ChatParticipant[];
}

export interface ChatReplyError {
  code: string;
  message: string;
  http_status: number;
}

export interface ChatReply {
  participant: number;
  content?: string;
  error?: ChatReplyError;
}

export type ChatEvent =
  | { participant: number; type: "fragment"; content: string }
  | { participant: number; type: "done"; content: string }
  | {
      participant: number;
      type: "error";
      code: string;
      message: string;
      http_status: number;
    };

export interface RunSubmission {
  model_name: string;
  endpoint: string;
  model_kind: "base" | "fine_tuned";
  tasks: string[];
  k?: number;
  concurrency?: number;
}

export class ApiError extends Error {
  constructor(
    public readonly code: string,
    message: string,
    public readonly status: number,
  ) {
    super(message);
    this.name = "ApiError";
  }
}

async function request<T>(
  base: string,
  path: string,
  init?: RequestInit,
): Promise<T> {
  const response = await fetch(base + path, {
    headers: { "Content-Type": "application/json" },
    ...init,
  });
  if (!response.ok) {
    let code = "http_error";
    let message = `${response.status} on ${path}`;
    try {
      const body = (await response.json()) as { code?: string; message?: string };
      if (body.code) code = body.code;
      if (body.message) message = body.message;
    } catch {
      // non-JSON error body; keep the generic message
    }
    throw new ApiError(code, message, response.status);
  }
  return (await response.json()) as T;
}

export class GatewayClient {
  constructor(private readonly base: string = "") {}

  getLeaderboard(): Promise<LeaderboardResponse> {
    return request(this.base, "/api/leaderboard");
  }

  listRuns(): Promise<RunRecord[]> {
    return request(this.base, "/api/runs");
  }

  getRun(runId: string): Promise<RunRecord> {
    return request(this.base, `/api/runs/${encodeURIComponent(runId)}`);
  }

  submitRun(body: RunSubmission): Promise<RunRecord> {
    return request(this.base, "/api/runs", {
      method: "POST",
      body: JSON.stringify(body),
    });
  }

  cancelRun(runId: string): Promise<RunRecord> {
    return request(this.base, `/api/runs/${encodeURIComponent(runId)}/cancel`, {
      method: "POST",
    });
  }

  getAudit(
    runId: string,
    options: {
      task?: string;
      filter?: AuditFilter;
      offset?: number;
      limit?: number;
    } = {},
  ): Promise<AuditPage> {
    const params = new URLSearchParams();
    if (options.task) params.set("task", options.task);
    params.set("filter", options.filter ?? "all");
    params.set("offset", String(options.offset ?? 0));
    params.set("limit", String(options.limit ?? 50));
    return request(
      this.base,
      `/api/runs/${encodeURIComponent(runId)}/audit?${params.toString()}`,
    );
  }

  createChatSession(participants: ChatParticipant[]): Promise<ChatSession> {
    return request(this.base, "/api/chat/sessions", {
      method: "POST",
      body: JSON.stringify({ participants }),
    });
  }

  sendChatMessage(
    sessionId: string,
    content: string,
  ): Promise<{ replies: ChatReply[] }> {
    return request(
      this.base,
      `/api/chat/sessions/${encodeURIComponent(sessionId)}/messages`,
      { method: "POST", body: JSON.stringify({ content }) },
    );
  }

  /** Send one user turn and surface per-participant stream events. */
  async streamChatMessage(
    sessionId: string,
    content: string,
    onEvent: (event: ChatEvent) => void,
  ): Promise<void> {
    const response = await fetch(
      this.base +
        `/api/chat/sessions/${encodeURIComponent(sessionId)}/messages?stream=true`,
      {
        method: "POST",
        headers: { "Content-Type": "application/json" },
        body: JSON.stringify({ content }),
      },
    );
    if (!response.ok || response.body === null) {
      throw new ApiError("stream_failed", `stream failed: ${response.status}`,
        response.status);
    }
    const reader = response.body.getReader();
    const decoder = new TextDecoder();
    let buffer = "";
    for (;;) {
      const { value, done } = await reader.read();
      if (done) break;
      buffer += decoder.decode(value, { stream: true });
      let index: number;
      while ((index = buffer.indexOf("\n\n")) >= 0) {
        const block = buffer.slice(0, index);
        buffer = buffer.slice(index + 2);
        const event = parseSseBlock(block);
        if (event !== null) onEvent(event);
      }
    }
  }
}

/** Parse one SSE block ("event: ...\ndata: ...") into a chat event. */
export function parseSseBlock(block: string): ChatEvent | null {
  let eventName = "";
  let data = "";
  for (const line of block.split("\n")) {
    if (line.startsWith("event: ")) eventName = line.slice(7).trim();
    else if (line.startsWith("data: ")) data = line.slice(6);
  }
  if (!eventName.startsWith("participant-") || data === "") return null;
  try {
    return JSON.parse(data) as ChatEvent;
  } catch {
    return null;
  }
}
