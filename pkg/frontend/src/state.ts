import type { SessionView, SlotName, StepName } from "./types.js";

// One stepper pane per pipeline stage. Gray stages (abstraction, resolve)
// only appear when the session reports them applicable.

export interface Stage {
  slot: SlotName;
  title: string;
  /** the step whose re-run refreshes this stage, if any */
  step: StepName | null;
  editable: boolean;
  /** LLM-backed stages expose their audit excerpt */
  llmBacked: boolean;
}

const ALWAYS: Stage[] = [
  { slot: "description", title: "Description", step: null, editable: true, llmBacked: false },
  { slot: "paths", title: "Execution paths", step: "paths", editable: true, llmBacked: true },
  { slot: "org", title: "Ordering relations", step: "paths", editable: true, llmBacked: false },
  { slot: "concurrency", title: "Concurrency", step: "concurrency", editable: true, llmBacked: true },
  { slot: "loops", title: "Loops", step: "loops", editable: true, llmBacked: true },
  { slot: "mdt", title: "Decomposition", step: null, editable: false, llmBacked: false },
  { slot: "model", title: "Model", step: null, editable: false, llmBacked: false },
];

const ABSTRACTION: Stage = {
  slot: "abstraction",
  title: "Abstraction",
  step: "abstraction",
  editable: true,
  llmBacked: true,
};

const RESOLVE: Stage = {
  slot: "alignment",
  title: "Alignment",
  step: "resolve",
  editable: false,
  llmBacked: false,
};

export function abstractionApplicable(view: SessionView): boolean {
  if ((view.slots.abstraction?.versions ?? 0) > 0) {
    return true;
  }
  const pathsError = view.step_errors["paths"] ?? "";
  if (pathsError.includes("cyclic_causality")) {
    return true;
  }
  return view.warnings.some((w) => w.includes("block abstraction applies"));
}

export function resolveApplicable(view: SessionView): boolean {
  return (view.slots.mdt?.versions ?? 0) > 0 || (view.slots.alignment?.versions ?? 0) > 0;
}

export function stages(view: SessionView): Stage[] {
  const out: Stage[] = [];
  for (const stage of ALWAYS) {
    out.push(stage);
    if (stage.slot === "paths" && abstractionApplicable(view)) {
      out.push(ABSTRACTION);
    }
    if (stage.slot === "loops" && resolveApplicable(view)) {
      out.push(RESOLVE);
    }
  }
  return out;
}

export interface StageState {
  stage: Stage;
  version: number;
  stale: boolean;
  pending: boolean;
  error: string | null;
}

export function stageState(view: SessionView, stage: Stage): StageState {
  const slot = view.slots[stage.slot];
  const error =
    stage.step !== null && view.status[stage.step] === "error"
      ? (view.step_errors[stage.step] ?? "step failed")
      : null;
  return {
    stage,
    version: slot?.versions ?? 0,
    stale: slot?.stale ?? false,
    pending: (slot?.versions ?? 0) === 0,
    error,
  };
}

/** Steps whose output is currently stale, in pipeline order. */
export function staleSteps(view: SessionView): StepName[] {
  const order: StepName[] = ["paths", "abstraction", "concurrency", "loops", "resolve"];
  return order.filter((step) => view.status[step] === "stale");
}

// --- client-side payload checks (shape only, the API re-validates) -----------

export type CheckResult = { ok: true; value: unknown } | { ok: false; message: string };

function isLabel(x: unknown): x is string {
  return typeof x === "string" && x.trim().length > 0;
}

function labelMatrix(value: unknown, key: string, rowLen?: number): CheckResult {
  if (typeof value !== "object" || value === null || !(key in (value as object))) {
    return { ok: false, message: `expected an object with a "${key}" list` };
  }
  const rows = (value as Record<string, unknown>)[key];
  if (!Array.isArray(rows)) {
    return { ok: false, message: `"${key}" must be a list` };
  }
  for (const [i, row] of rows.entries()) {
    if (!Array.isArray(row) || row.length === 0) {
      return { ok: false, message: `${key}[${i}] must be a nonempty list` };
    }
    if (rowLen !== undefined && row.length !== rowLen) {
      return { ok: false, message: `${key}[${i}] must have ${rowLen} entries` };
    }
    if (!row.every(isLabel)) {
      return { ok: false, message: `${key}[${i}] must contain nonempty labels` };
    }
  }
  return { ok: true, value };
}

export function checkPayload(slot: SlotName, text: string): CheckResult {
  let value: unknown;
  try {
    value = JSON.parse(text);
  } catch (error) {
    return { ok: false, message: `not valid JSON: ${(error as Error).message}` };
  }
  switch (slot) {
    case "description":
      if (
        typeof value === "object" &&
        value !== null &&
        isLabel((value as Record<string, unknown>)["text"])
      ) {
        return { ok: true, value };
      }
      return { ok: false, message: 'expected {"text": "..."}' };
    case "paths":
      return labelMatrix(value, "paths");
    case "concurrency":
      return labelMatrix(value, "pairs", 2);
    case "loops":
      return labelMatrix(value, "blocks");
    case "abstraction": {
      const entries =
        typeof value === "object" && value !== null
          ? (value as Record<string, unknown>)["entries"]
          : undefined;
      if (!Array.isArray(entries)) {
        return { ok: false, message: 'expected {"entries": [...]}' };
      }
      return { ok: true, value };
    }
    default:
      // org / mdt / model / alignment edits are unusual; let the API decide
      return { ok: true, value };
  }
}
