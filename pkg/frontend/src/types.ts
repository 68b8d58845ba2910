/** Wire types mirroring the tracker API's JSON bodies. */

export type RoleName =
  | "end_user"
  | "customer_support"
  | "project_manager"
  | "team_lead"
  | "developer"
  | "reviewer"
  | "tester"
  | "ops";

export interface TaskSummary {
  task_id: string;
  case_id: string;
  role: RoleName;
  stage: string;
  action_set: string[];
  payload: Record<string, unknown> & {
    ranking?: { developer: string; score: number }[];
    artifacts?: { kind: string; version: number; artifact_id: string }[];
    fix_author?: string | null;
  };
  status: "Open" | "Decided" | "Superseded";
  decided_by: string | null;
  decision: string | null;
  source_seq: number | null;
}

export interface CaseSummary {
  case_id: string;
  stage: string;
  stage_label: string;
  resolution: string | null;
  counters: Record<string, number>;
  thresholds: Record<string, number>;
  fix_origin: string;
  responsible_human: string | null;
  restart_count: number;
  open_task: TaskSummary | null;
  parked?: boolean;
}

export interface OutcomeRecord {
  kind: string;
  payload: Record<string, unknown>;
}

export interface TimelineEvent {
  seq: number;
  stage_before: string | null;
  stage_after: string;
  outcome: OutcomeRecord;
  effects: Record<string, unknown>[];
  actor: Record<string, unknown>;
  counters_after: Record<string, number>;
  timestamp: string;
}

export interface ArtifactExport {
  artifact_id: string;
  case_id: string;
  kind: string;
  version: number;
  producer: Record<string, unknown>;
  content_base64: string;
  content_hash: string;
  created_at: string;
}

export interface ProvenanceEntry {
  seq: number;
  case_id: string;
  actor: string;
  artifact_id: string;
  access: "read" | "write" | "denied";
  timestamp: string;
}

export interface Timeline {
  case_id: string;
  stage_label: string;
  events: TimelineEvent[];
  artifacts: ArtifactExport[];
  provenance: ProvenanceEntry[];
  notifications: { seq: number; message_kind: string; timestamp: string }[];
}

export interface ChatPrompt {
  question: string;
  target_field: string;
}

export interface IntakeResponse {
  status: "dialogue" | "submitted";
  case_id: string;
  prompt?: ChatPrompt;
  case?: CaseSummary;
}

export interface SimMetricsBody {
  metrics: {
    ttr: { mean: number; median: number; p95: number };
    handoffs: number;
    hil_touches: number;
    escalation_rates: Record<string, number>;
    attempts: Record<string, number>;
    cases: number;
    replications: number;
  };
  exact?: SimMetricsBody["metrics"];
}

export interface BugReportFields {
  title: string;
  observed_behavior: string;
  expected_behavior: string;
  steps_to_reproduce: string[];
  environment: Record<string, string>;
}
