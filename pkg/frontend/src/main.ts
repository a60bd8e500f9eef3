/**
 * Bootstrap: hash routing between the dashboard, leaderboard, audit, and
 * chat views, polling run status every two seconds.
 */
import { ApiError, GatewayClient } from "./api.js";
import type { AuditFilter } from "./api.js";
import {
  initialAuditState,
  offsetFor,
  renderAudit,
  setFilter,
  setPage,
  toggleExpanded,
} from "./audit.js";
import {
  addParticipant,
  applyEvent,
  beginUserTurn,
  initialChatState,
  renderChat,
} from "./chat.js";
import {
  POLL_INTERVAL_MS,
  renderBanner,
  renderRunList,
  validateForm,
} from "./dashboard.js";
import {
  initialLeaderboardState,
  renderLeaderboard,
  renderRadar,
  toggleRadarLayer,
  toggleSort,
} from "./leaderboard.js";

const client = new GatewayClient("");
const root = document.getElementById("app");

function mount(html: string): void {
  if (root) root.innerHTML = html;
}

function banner(error: unknown): string {
  const message =
    error instanceof ApiError
      ? `${error.code}: ${error.message}`
      : String(error);
  return renderBanner(message);
}

const RUN_FORM_HTML =
  '<form id="run-form">' +
  '<input name="model_name" placeholder="model name">' +
  '<input name="endpoint" placeholder="endpoint URL">' +
  '<select name="model_kind"><option value="base">base</option>' +
  '<option value="fine_tuned">fine_tuned</option></select>' +
  '<input name="tasks" placeholder="tasks (comma-separated)">' +
  '<input name="k" value="5" size="3">' +
  '<input name="concurrency" value="8" size="3">' +
  "<button type=\"submit\">start evaluation</button>" +
  '<div class="form-errors"></div></form>';

async function showDashboard(): Promise<void> {
  try {
    const runs = await client.listRuns();
    mount("<h1>Runs</h1>" + RUN_FORM_HTML + renderRunList(runs));
    attachDashboardHandlers();
  } catch (error) {
    mount(banner(error));
  }
}

function attachDashboardHandlers(): void {
  document.querySelectorAll<HTMLButtonElement>("button.cancel").forEach((btn) =>
    btn.addEventListener("click", async () => {
      const runId = btn.dataset.run;
      if (!runId) return;
      try {
        await client.cancelRun(runId);
        void showDashboard();
      } catch (error) {
        mount(banner(error));
      }
    }),
  );
  const form = document.querySelector<HTMLFormElement>("#run-form");
  form?.addEventListener("submit", async (event) => {
    event.preventDefault();
    const data = new FormData(form);
    const result = validateForm({
      model_name: String(data.get("model_name") ?? ""),
      endpoint: String(data.get("endpoint") ?? ""),
      model_kind: String(data.get("model_kind") ?? ""),
      tasks: String(data.get("tasks") ?? ""),
      k: String(data.get("k") ?? ""),
      concurrency: String(data.get("concurrency") ?? ""),
    });
    const errorBox = form.querySelector(".form-errors");
    if (!result.submission) {
      if (errorBox) errorBox.innerHTML = result.errors.map(renderBanner).join("");
      return;
    }
    try {
      await client.submitRun(result.submission);
      void showDashboard();
    } catch (error) {
      if (errorBox) errorBox.innerHTML = banner(error);
    }
  });
}

let leaderboardState = initialLeaderboardState();

async function showLeaderboard(): Promise<void> {
  try {
    const data = await client.getLeaderboard();
    mount(
      "<h1>Leaderboard</h1>" +
        renderLeaderboard(data, leaderboardState) +
        renderRadar(data.radar, leaderboardState),
    );
    document
      .querySelectorAll<HTMLTableCellElement>(".leaderboard th")
      .forEach((th) =>
        th.addEventListener("click", () => {
          const column = th.dataset.column;
          if (!column) return;
          leaderboardState = {
            ...leaderboardState,
            sort: toggleSort(leaderboardState.sort, column),
          };
          void showLeaderboard();
        }),
      );
    document
      .querySelectorAll<SVGGElement>(".radar-layer")
      .forEach((layer) =>
        layer.addEventListener("click", () => {
          const model = layer.dataset.model;
          if (!model) return;
          leaderboardState = toggleRadarLayer(leaderboardState, model);
          void showLeaderboard();
        }),
      );
  } catch (error) {
    mount(banner(error));
  }
}

async function showAudit(runId: string): Promise<void> {
  let state = initialAuditState(runId);

  async function refresh(): Promise<void> {
    try {
      const page = await client.getAudit(runId, {
        filter: state.filter,
        offset: offsetFor(state),
        limit: state.pageSize,
      });
      mount(`<h1>Audit ${runId}</h1>` + renderAudit(page, state));
      document
        .querySelectorAll<HTMLButtonElement>(".filters button")
        .forEach((btn) =>
          btn.addEventListener("click", () => {
            state = setFilter(state, btn.dataset.filter as AuditFilter);
            void refresh();
          }),
        );
      document
        .querySelectorAll<HTMLTableRowElement>("tr.verdict")
        .forEach((row) =>
          row.addEventListener("click", () => {
            const record = row.dataset.record;
            if (!record) return;
            state = toggleExpanded(state, record);
            void refresh();
          }),
        );
      document.querySelector(".page-prev")?.addEventListener("click", () => {
        state = setPage(state, state.page - 1);
        void refresh();
      });
      document.querySelector(".page-next")?.addEventListener("click", () => {
        state = setPage(state, state.page + 1);
        void refresh();
      });
    } catch (error) {
      if (error instanceof ApiError && error.status === 404) {
        window.location.hash = "#/";
        mount(banner(error));
        return;
      }
      mount(banner(error));
    }
  }

  void refresh();
}

let chatState = initialChatState();

async function showChat(): Promise<void> {
  mount("<h1>Chat</h1>" + renderChat(chatState));
}

export async function sendSharedPrompt(content: string): Promise<void> {
  let sessionId = chatState.sessionId;
  if (sessionId === null) {
    const session = await client.createChatSession(
      chatState.panes.map((pane) => pane.participant),
    );
    sessionId = session.session_id;
    chatState = { ...chatState, sessionId };
  }
  chatState = beginUserTurn(chatState, content);
  await client.streamChatMessage(sessionId, content, (event) => {
    chatState = applyEvent(chatState, event);
    void showChat();
  });
}

export function addChatEndpoint(baseUrl: string, modelName: string): void {
  chatState = addParticipant(chatState, {
    base_url: baseUrl,
    model_name: modelName,
  });
}

function route(): void {
  const hash = window.location.hash;
  if (hash.startsWith("#/audit/")) {
    void showAudit(decodeURIComponent(hash.slice("#/audit/".length)));
  } else if (hash === "#/leaderboard") {
    void showLeaderboard();
  } else if (hash === "#/chat") {
    void showChat();
  } else {
    void showDashboard();
  }
}

window.addEventListener("hashchange", route);
window.setInterval(() => {
  if (!window.location.hash || window.location.hash === "#/") route();
}, POLL_INTERVAL_MS);
route();
