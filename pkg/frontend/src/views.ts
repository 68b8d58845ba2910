/** Pure view projections: API payloads in, HTML strings out.
 *
 * No workflow logic lives here. A task renders exactly the decision
 * buttons its action set allows; a timeline renders exactly the events
 * the API returned, in sequence order, with denied provenance entries
 * visibly flagged.
 */

import type {
  ArtifactExport,
  BugReportFields,
  CaseSummary,
  ChatPrompt,
  ProvenanceEntry,
  TaskSummary,
  Timeline,
  TimelineEvent,
} from "./types.js";

export function escapeHtml(value: unknown): string {
  return String(value)
    .replaceAll("&", "&amp;")
    .replaceAll("<", "&lt;")
    .replaceAll(">", "&gt;")
    .replaceAll('"', "&quot;")
    .replaceAll("'", "&#39;");
}

export function decodeBase64(b64: string): string {
  const bufferCtor = (globalThis as Record<string, any>).Buffer;
  if (bufferCtor) {
    return bufferCtor.from(b64, "base64").toString("utf-8");
  }
  const binary = atob(b64);
  const bytes = Uint8Array.from(binary, (c) => c.charCodeAt(0));
  return new TextDecoder().decode(bytes);
}

function actorLabel(actor: Record<string, unknown>): string {
  if (actor.type === "agent") {
    return `agent:${actor.kind}`;
  }
  if (actor.type === "human") {
    return `${actor.role}:${actor.actor_id}`;
  }
  return String(actor.type ?? "system");
}

// ---------------------------------------------------------------------------
// Task queue

function taskMeta(task: TaskSummary): string {
  const parts: string[] = [];
  const ranking = task.payload.ranking;
  if (ranking && ranking.length) {
    const names = ranking.map((r) => `${escapeHtml(r.developer)} (${r.score.toFixed(2)})`);
    parts.push(`<div class="task-ranking">recommended: ${names.join(", ")}</div>`);
  }
  if (task.payload.fix_author) {
    parts.push(
      `<div class="task-author">fix author: ${escapeHtml(task.payload.fix_author)}</div>`,
    );
  }
  const artifacts = task.payload.artifacts;
  if (artifacts && artifacts.length) {
    const chips = artifacts.map(
      (a) => `<span class="artifact-chip">${escapeHtml(a.kind)} v${a.version}</span>`,
    );
    parts.push(`<div class="task-artifacts">${chips.join(" ")}</div>`);
  }
  return parts.join("");
}

export function renderTask(task: TaskSummary): string {
  const buttons = task.action_set
    .map(
      (decision) =>
        `<button class="decision" data-task="${escapeHtml(task.task_id)}" ` +
        `data-decision="${escapeHtml(decision)}">${escapeHtml(decision)}</button>`,
    )
    .join("");
  return `
  <article class="task-card" data-task-card="${escapeHtml(task.task_id)}">
    <header>
      <span class="task-stage">${escapeHtml(task.stage)}</span>
      <a href="#" class="case-link" data-case="${escapeHtml(task.case_id)}">${escapeHtml(task.case_id)}</a>
    </header>
    ${taskMeta(task)}
    <footer class="task-actions">${buttons}</footer>
  </article>`;
}

export function renderQueue(role: string, tasks: TaskSummary[]): string {
  const open = tasks.filter((t) => t.status === "Open");
  if (open.length === 0) {
    return `<section class="queue" data-role="${escapeHtml(role)}">
      <p class="empty-state">No open tasks for ${escapeHtml(role)}.</p>
    </section>`;
  }
  return `<section class="queue" data-role="${escapeHtml(role)}">
    ${open.map(renderTask).join("\n")}
  </section>`;
}

// ---------------------------------------------------------------------------
// Case timeline

function reportPanel(label: string, body: string): string {
  let fields: BugReportFields | null = null;
  try {
    fields = JSON.parse(body) as BugReportFields;
  } catch {
    fields = null;
  }
  if (!fields) {
    return `<div class="report-panel"><h4>${escapeHtml(label)}</h4>
      <pre>${escapeHtml(body)}</pre></div>`;
  }
  const steps = (fields.steps_to_reproduce ?? [])
    .map((s) => `<li>${escapeHtml(s)}</li>`)
    .join("");
  const environment = Object.entries(fields.environment ?? {})
    .map(([k, v]) => `<dt>${escapeHtml(k)}</dt><dd>${escapeHtml(v)}</dd>`)
    .join("");
  return `<div class="report-panel">
    <h4>${escapeHtml(label)}</h4>
    <p class="report-field"><strong>observed</strong> ${escapeHtml(fields.observed_behavior ?? "")}</p>
    <p class="report-field"><strong>expected</strong> ${escapeHtml(fields.expected_behavior ?? "")}</p>
    <ol class="report-steps">${steps}</ol>
    <dl class="report-environment">${environment}</dl>
  </div>`;
}

function latestOf(artifacts: ArtifactExport[], kind: string): ArtifactExport | undefined {
  return artifacts
    .filter((a) => a.kind === kind)
    .sort((a, b) => b.version - a.version)[0];
}

export function renderReportComparison(artifacts: ArtifactExport[]): string {
  const original = latestOf(artifacts, "OriginalReport");
  const enhanced = latestOf(artifacts, "EnhancedReport");
  if (!original && !enhanced) {
    return "";
  }
  const panels = [
    original ? reportPanel("Original report", decodeBase64(original.content_base64)) : "",
    enhanced ? reportPanel("Enhanced report", decodeBase64(enhanced.content_base64)) : "",
  ].join("");
  return `<section class="report-comparison">${panels}</section>`;
}

export function renderPatchPreview(artifacts: ArtifactExport[]): string {
  const patch = latestOf(artifacts, "PatchCandidate");
  if (!patch) {
    return "";
  }
  return `<section class="patch-preview">
    <h4>Patch candidate v${patch.version}</h4>
    <pre class="diff">${escapeHtml(decodeBase64(patch.content_base64))}</pre>
  </section>`;
}

/** The agent's validity explanation sits behind a disclosure control. */
export function renderValidityExplanation(artifacts: ArtifactExport[]): string {
  const verdict = latestOf(artifacts, "ValidityVerdict");
  if (!verdict) {
    return "";
  }
  let parsed: { valid?: boolean; category?: string | null; explanation?: string };
  try {
    parsed = JSON.parse(decodeBase64(verdict.content_base64));
  } catch {
    return "";
  }
  const label = parsed.valid ? "valid" : `invalid (${parsed.category ?? "?"})`;
  return `<details class="validity-explanation">
    <summary>Validity verdict: ${escapeHtml(label)}</summary>
    <p>${escapeHtml(parsed.explanation ?? "")}</p>
  </details>`;
}

export function renderEventRow(event: TimelineEvent): string {
  const from = event.stage_before === null ? "·" : event.stage_before;
  return `<tr class="timeline-row" data-seq="${event.seq}">
    <td class="seq">${event.seq}</td>
    <td class="stage">${escapeHtml(from)} → ${escapeHtml(event.stage_after)}</td>
    <td class="outcome">${escapeHtml(event.outcome.kind)}</td>
    <td class="actor">${escapeHtml(actorLabel(event.actor))}</td>
    <td class="time">${escapeHtml(event.timestamp)}</td>
  </tr>`;
}

export function renderProvenance(entries: ProvenanceEntry[]): string {
  const rows = entries
    .map((entry) => {
      const flagged = entry.access === "denied" ? " denied" : "";
      return `<tr class="provenance-row${flagged}" data-seq="${entry.seq}">
      <td>${entry.seq}</td>
      <td>${escapeHtml(entry.actor)}</td>
      <td class="access">${escapeHtml(entry.access)}${entry.access === "denied" ? " ⚠" : ""}</td>
      <td>${escapeHtml(entry.artifact_id)}</td>
    </tr>`;
    })
    .join("\n");
  return `<table class="provenance"><thead>
    <tr><th>#</th><th>actor</th><th>access</th><th>artifact</th></tr>
  </thead><tbody>${rows}</tbody></table>`;
}

export function renderTimeline(timeline: Timeline): string {
  const events = [...timeline.events].sort((a, b) => a.seq - b.seq);
  const rows = events.map(renderEventRow).join("\n");
  return `<section class="timeline" data-case="${escapeHtml(timeline.case_id)}">
    <h3>${escapeHtml(timeline.case_id)} — ${escapeHtml(timeline.stage_label)}</h3>
    <table class="events"><thead>
      <tr><th>#</th><th>transition</th><th>outcome</th><th>actor</th><th>at</th></tr>
    </thead><tbody>${rows}</tbody></table>
    ${renderReportComparison(timeline.artifacts)}
    ${renderValidityExplanation(timeline.artifacts)}
    ${renderPatchPreview(timeline.artifacts)}
    <h4>Provenance</h4>
    ${renderProvenance(timeline.provenance)}
  </section>`;
}

// ---------------------------------------------------------------------------
// Reporter chat

export interface ChatLine {
  speaker: "user" | "bot";
  text: string;
}

export function renderChat(
  lines: ChatLine[],
  prompt: ChatPrompt | null,
  submittedCase: CaseSummary | null,
): string {
  const bubbles = lines
    .map(
      (line) =>
        `<div class="bubble ${line.speaker}">${escapeHtml(line.text)}</div>`,
    )
    .join("\n");
  const banner = submittedCase
    ? `<div class="chat-done" data-case="${escapeHtml(submittedCase.case_id)}">
        Report created: ${escapeHtml(submittedCase.case_id)} — now at
        ${escapeHtml(submittedCase.stage_label)}
      </div>`
    : prompt
      ? `<div class="chat-pending" data-field="${escapeHtml(prompt.target_field)}"></div>`
      : "";
  return `<section class="chat">
    <div class="transcript">${bubbles}</div>
    ${banner}
  </section>`;
}

export function renderCaseSummary(summary: CaseSummary): string {
  const counters = Object.entries(summary.counters)
    .map(([name, value]) => `<span class="counter">${escapeHtml(name)}=${value}</span>`)
    .join(" ");
  return `<section class="case-summary" data-case="${escapeHtml(summary.case_id)}">
    <h3>${escapeHtml(summary.case_id)}</h3>
    <p class="stage-label">${escapeHtml(summary.stage_label)}</p>
    <p class="responsible">responsible: ${escapeHtml(summary.responsible_human ?? "—")}</p>
    <p class="counters">${counters} restarts=${summary.restart_count}</p>
  </section>`;
}

// ---------------------------------------------------------------------------
// Simulation metrics viewer

export function renderMetrics(body: Record<string, unknown>): string {
  return `<section class="metrics-viewer">
    <pre class="metrics-json">${escapeHtml(JSON.stringify(body, null, 2))}</pre>
  </section>`;
}

export function renderError(status: number, code: string, detail: string): string {
  const kind = status === 403 ? "access" : status === 409 ? "conflict" : "error";
  return `<div class="notice notice-${kind}" data-status="${status}">
    ${escapeHtml(code)}: ${escapeHtml(detail)}
  </div>`;
}
