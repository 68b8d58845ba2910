/** End-to-end console flows replayed over fixture responses from the real API. */

import { readFileSync } from "node:fs";
import { join } from "node:path";
import { describe, expect, it } from "vitest";

import { ApiClient, type FetchLike } from "../src/api.js";
import { ChatState } from "../src/state.js";
import type { IntakeResponse, TaskSummary, Timeline } from "../src/types.js";
import { decodeBase64, renderChat, renderTimeline } from "../src/views.js";

const FIXTURES = join(__dirname, "fixtures");

function fixture<T>(name: string): T {
  return JSON.parse(readFileSync(join(FIXTURES, name), "utf-8")) as T;
}

function replayFetch(script: { match: RegExp; status?: number; body: unknown }[]): FetchLike {
  const remaining = [...script];
  return async (url, init) => {
    const next = remaining.shift();
    if (!next) {
      throw new Error(`unexpected request ${init?.method ?? "GET"} ${url}`);
    }
    expect(url).toMatch(next.match);
    return { status: next.status ?? 200, json: async () => next.body };
  };
}

describe("reporter chat flow", () => {
  it("produces a case whose original report matches the entered fields", async () => {
    const flow = fixture<{
      entered: Record<string, string>;
      responses: IntakeResponse[];
    }>("chat_flow.json");
    const closed = fixture<Timeline>("timeline_closed_valid.json");

    const fetchImpl = replayFetch([
      { match: /\/bugs$/, status: 201, body: flow.responses[0] },
      { match: /\/bugs\/.+\/dialogue$/, body: flow.responses[1] },
      { match: /\/bugs\/.+\/dialogue$/, body: flow.responses[2] },
      { match: /\/bugs\/.+\/dialogue$/, body: flow.responses[3] },
    ]);
    const client = new ApiClient("", "user-token", fetchImpl);
    const chat = new ChatState();

    const turns = [
      flow.entered.observed_behavior,
      flow.entered.expected_behavior,
      flow.entered.steps,
      flow.entered.environment,
    ];
    for (const text of turns) {
      chat.userSays(text);
      const response = chat.caseId
        ? await client.dialogueTurn(chat.caseId, text)
        : await client.submitReport(text, {}, flow.entered.title);
      chat.caseId = response.case_id;
      if (response.status === "dialogue" && response.prompt) {
        chat.botAsks(response.prompt);
      } else if (response.case) {
        chat.finished(response.case);
      }
    }

    expect(chat.submitted).not.toBeNull();
    expect(chat.submitted!.case_id).toBe(flow.responses[0].case_id);
    const html = renderChat(chat.lines, chat.prompt, chat.submitted);
    expect(html).toContain("Report created");
    expect(html).toContain(chat.submitted!.case_id);

    // The stored original report carries exactly what the reporter typed.
    const original = closed.artifacts.find(
      (a) => a.kind === "OriginalReport" && a.version === 1,
    )!;
    const report = JSON.parse(decodeBase64(original.content_base64));
    expect(report.title).toBe(flow.entered.title);
    expect(report.observed_behavior).toBe(flow.entered.observed_behavior);
    expect(report.expected_behavior).toBe(flow.entered.expected_behavior);
    expect(report.steps_to_reproduce).toEqual(
      flow.entered.steps.split(";").map((s: string) => s.trim()),
    );
    expect(report.environment).toEqual({
      os: "linux",
      app_version: "2.4.1",
      browser: "firefox",
    });
  });

  it("asks one follow-up per missing field, in order", () => {
    const flow = fixture<{ responses: IntakeResponse[] }>("chat_flow.json");
    const prompts = flow.responses
      .filter((r) => r.status === "dialogue")
      .map((r) => r.prompt!.target_field);
    expect(prompts).toEqual([
      "expected_behavior",
      "steps_to_reproduce",
      "environment",
    ]);
  });
});

describe("decision flow", () => {
  it("transitions the case and grows the timeline by exactly one row", async () => {
    const flow = fixture<{
      queue: { tasks: TaskSummary[] };
      decision_response: { stage_label: string };
      timeline_before: Timeline;
      timeline_after: Timeline;
    }>("decision_flow.json");

    const task = flow.queue.tasks[0];
    expect(task.stage).toBe("UserVerification");
    expect(task.action_set).toEqual(["Accept", "Reject"]);

    const fetchImpl = replayFetch([
      { match: /\/tasks\/.+\/decision$/, body: flow.decision_response },
      { match: /\/timeline$/, body: flow.timeline_after },
    ]);
    const client = new ApiClient("", "user-token", fetchImpl);
    const response = await client.postDecision(task.task_id, "Accept");
    expect(response.stage_label).toBe("Closed(Resolved)");

    const after = await client.getTimeline(task.case_id);
    expect(after.events.length).toBe(flow.timeline_before.events.length + 1);
    const added = after.events[after.events.length - 1];
    expect(added.stage_before).toBe("UserVerification");
    expect(added.outcome.kind).toBe("Accept");
    expect(added.actor.actor_id).toBe("user-1");

    const htmlBefore = renderTimeline(flow.timeline_before);
    const htmlAfter = renderTimeline(after);
    const count = (html: string) => [...html.matchAll(/class="timeline-row"/g)].length;
    expect(count(htmlAfter)).toBe(count(htmlBefore) + 1);
  });
});
