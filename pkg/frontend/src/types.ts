// Payload shapes of the HTTP API. The UI never derives semantics itself;
// everything displayed comes from these values.

export type StepName = "paths" | "concurrency" | "loops" | "resolve" | "abstraction";
export type SlotName =
  | "description"
  | "paths"
  | "org"
  | "concurrency"
  | "loops"
  | "mdt"
  | "alignment"
  | "abstraction"
  | "model";

export type StepStatusValue = "pending" | "stale" | "current" | "error";

export interface VersionInfo {
  version: number;
  provenance: "llm" | "human" | "derived";
  timestamp: string;
  parents: Record<string, number>;
}

export interface SlotView {
  name: SlotName;
  versions: number;
  stale: boolean;
  latest: VersionInfo | null;
}

export interface SessionView {
  id: string;
  status: Record<StepName, StepStatusValue>;
  slots: Partial<Record<SlotName, SlotView>>;
  activities: Record<string, { label: string; silent: boolean }>;
  warnings: string[];
  step_errors: Record<string, string>;
}

export interface ArtifactView {
  slot: SlotName;
  version: number;
  provenance: string;
  stale: boolean;
  value: Record<string, unknown>;
}

export interface AuditEntry {
  seq: number;
  step: string;
  prompt: string;
  response: string;
  parsed_ok: boolean;
  attempt: number;
  timestamp: string;
}

export interface ModelValue {
  nodes: { id: string; kind: string; activity?: string; gateway_role?: string }[];
  flows: [string, string][];
  entry: string;
  exit: string;
}

export interface ApiErrorBody {
  status: number;
  code: string;
  detail: string;
}

export interface ProviderSettings {
  provider_kind?: string;
  base_url?: string;
  model_name?: string;
  replay_dir?: string;
}
