/** DOM bootstrap: wires the pure views to the API client.
 *
 * One console, role switching via tabs. Reporter sessions get the chat
 * intake; staff roles get their task queue; everyone with access can open
 * a case timeline. Decisions go through the double-submit gate and 409s
 * surface as a notice instead of a crash.
 */

import { ApiClient, ApiError } from "./api.js";
import { ConsoleState, type SessionInfo } from "./state.js";
import type { RoleName } from "./types.js";
import {
  renderChat,
  renderError,
  renderMetrics,
  renderQueue,
  renderTimeline,
} from "./views.js";

const ROLE_LABELS: Record<RoleName, string> = {
  end_user: "Reporter",
  customer_support: "Customer support",
  project_manager: "Project manager",
  team_lead: "Team lead",
  developer: "Developer",
  reviewer: "Reviewer",
  tester: "Tester",
  ops: "Ops",
};

export class ConsoleApp {
  private state: ConsoleState;

  constructor(
    private readonly root: HTMLElement,
    private readonly api: ApiClient,
    session: SessionInfo,
  ) {
    this.state = new ConsoleState(session);
  }

  async start(): Promise<void> {
    this.root.innerHTML = `
      <header class="console-header">
        <h1>buglife console</h1>
        <nav class="role-tabs">${this.roleTabs()}</nav>
      </header>
      <main id="panel"></main>
      <div id="notices"></div>`;
    this.root.addEventListener("click", (event) => this.onClick(event));
    this.root.addEventListener("submit", (event) => this.onSubmit(event));
    await this.refresh();
  }

  private roleTabs(): string {
    return this.state.session.roles
      .map(
        (role) =>
          `<button class="role-tab${role === this.state.activeRole ? " active" : ""}"
             data-role="${role}">${ROLE_LABELS[role]}</button>`,
      )
      .join("");
  }

  private panel(): HTMLElement {
    return this.root.querySelector("#panel") as HTMLElement;
  }

  private notify(error: unknown): void {
    const box = this.root.querySelector("#notices") as HTMLElement;
    if (error instanceof ApiError) {
      box.innerHTML = renderError(error.status, error.code, error.detail);
    } else {
      box.innerHTML = renderError(0, "NetworkError", String(error));
    }
  }

  private async refresh(): Promise<void> {
    const nav = this.root.querySelector(".role-tabs") as HTMLElement;
    nav.innerHTML = this.roleTabs();
    try {
      if (this.state.selectedCase) {
        const timeline = await this.api.getTimeline(this.state.selectedCase);
        this.panel().innerHTML =
          `<button id="back">← back</button>` + renderTimeline(timeline);
      } else if (this.state.activeRole === "end_user") {
        this.panel().innerHTML =
          renderChat(this.state.chat.lines, this.state.chat.prompt, this.state.chat.submitted) +
          `<form id="chat-form">
             <input id="chat-input" autocomplete="off"
                    placeholder="Describe the problem..." />
             <button type="submit">Send</button>
           </form>`;
      } else {
        const { tasks } = await this.api.listTasks(this.state.activeRole);
        this.panel().innerHTML = renderQueue(this.state.activeRole, tasks);
      }
    } catch (error) {
      this.notify(error);
    }
  }

  private async onClick(event: Event): Promise<void> {
    const target = event.target as HTMLElement;
    if (target.matches(".role-tab")) {
      this.state.switchRole(target.dataset.role as RoleName);
      this.state.selectedCase = null;
      await this.refresh();
      return;
    }
    if (target.matches("#back")) {
      this.state.selectedCase = null;
      await this.refresh();
      return;
    }
    if (target.matches(".case-link")) {
      event.preventDefault();
      this.state.selectedCase = target.dataset.case ?? null;
      await this.refresh();
      return;
    }
    if (target.matches("button.decision")) {
      await this.submitDecision(
        target.dataset.task as string,
        target.dataset.decision as string,
        target as HTMLButtonElement,
      );
    }
  }

  async submitDecision(
    taskId: string,
    decision: string,
    button?: HTMLButtonElement,
  ): Promise<void> {
    if (!this.state.gate.begin(taskId)) {
      return; // a submission for this task is already on the wire
    }
    if (button) {
      button.disabled = true;
    }
    try {
      await this.api.postDecision(taskId, decision);
    } catch (error) {
      this.notify(error);
    } finally {
      this.state.gate.settle(taskId);
      await this.refresh();
    }
  }

  private async onSubmit(event: Event): Promise<void> {
    const form = event.target as HTMLFormElement;
    if (!form.matches("#chat-form")) {
      return;
    }
    event.preventDefault();
    const input = form.querySelector("#chat-input") as HTMLInputElement;
    const text = input.value.trim();
    if (!text) {
      return;
    }
    input.value = "";
    await this.chatTurn(text);
    await this.refresh();
  }

  async chatTurn(text: string): Promise<void> {
    const chat = this.state.chat;
    const turnKey = `chat:${chat.caseId ?? "new"}`;
    if (!this.state.gate.begin(turnKey)) {
      return; // previous turn still on the wire; no duplicate sends
    }
    chat.userSays(text);
    try {
      const response = chat.caseId
        ? await this.api.dialogueTurn(chat.caseId, text)
        : await this.api.submitReport(text, {}, text.slice(0, 60));
      chat.caseId = response.case_id;
      if (response.status === "dialogue" && response.prompt) {
        chat.botAsks(response.prompt);
      } else if (response.case) {
        chat.finished(response.case);
      }
    } catch (error) {
      this.notify(error);
    } finally {
      this.state.gate.settle(turnKey);
    }
  }

  async showMetrics(config: Record<string, unknown>, replications: number): Promise<void> {
    try {
      const body = await this.api.simulate(config, replications);
      this.panel().innerHTML = renderMetrics(body as unknown as Record<string, unknown>);
    } catch (error) {
      this.notify(error);
    }
  }
}

export function boot(): void {
  const params = new URLSearchParams(window.location.search);
  const token = params.get("token") ?? "user-token";
  const actor = params.get("actor") ?? "user-1";
  const roles = (params.get("roles") ?? "end_user").split(",") as RoleName[];
  const api = new ApiClient(params.get("api") ?? "", token);
  const app = new ConsoleApp(
    document.getElementById("app") as HTMLElement,
    api,
    { token, actorId: actor, roles },
  );
  void app.start();
}

if (typeof document !== "undefined" && document.getElementById("app")) {
  boot();
}
