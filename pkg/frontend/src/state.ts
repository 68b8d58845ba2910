/** Client-side session state and the double-submit guard.
 *
 * The server is the source of truth; the console only tracks which role
 * tab is active, the local chat echo, and which decisions are in flight
 * so a double-click produces exactly one POST.
 */

import type { CaseSummary, ChatPrompt, RoleName } from "./types.js";
import type { ChatLine } from "./views.js";

export interface SessionInfo {
  token: string;
  actorId: string;
  roles: RoleName[];
}

export class DecisionGate {
  private inFlight = new Set<string>();

  /** True when the caller may proceed; false while a submission is live. */
  begin(taskId: string): boolean {
    if (this.inFlight.has(taskId)) {
      return false;
    }
    this.inFlight.add(taskId);
    return true;
  }

  settle(taskId: string): void {
    this.inFlight.delete(taskId);
  }

  pending(taskId: string): boolean {
    return this.inFlight.has(taskId);
  }
}

export class ChatState {
  lines: ChatLine[] = [];
  prompt: ChatPrompt | null = null;
  caseId: string | null = null;
  submitted: CaseSummary | null = null;

  userSays(text: string): void {
    this.lines.push({ speaker: "user", text });
  }

  botAsks(prompt: ChatPrompt): void {
    this.prompt = prompt;
    this.lines.push({ speaker: "bot", text: prompt.question });
  }

  finished(summary: CaseSummary): void {
    this.prompt = null;
    this.submitted = summary;
    this.lines.push({
      speaker: "bot",
      text: `Thanks — your report is filed as ${summary.case_id}.`,
    });
  }
}

export class ConsoleState {
  activeRole: RoleName;
  chat = new ChatState();
  gate = new DecisionGate();
  selectedCase: string | null = null;

  constructor(readonly session: SessionInfo) {
    this.activeRole = session.roles[0];
  }

  switchRole(role: RoleName): void {
    if (this.session.roles.includes(role)) {
      this.activeRole = role;
    }
  }
}
