import { describe, expect, it } from "vitest";

import {
  abstractionApplicable,
  checkPayload,
  resolveApplicable,
  stages,
  stageState,
  staleSteps,
} from "../src/state.js";
import type { SessionView } from "../src/types.js";

function view(overrides: Partial<SessionView> = {}): SessionView {
  return {
    id: "s1",
    status: {
      paths: "pending",
      concurrency: "pending",
      loops: "pending",
      resolve: "pending",
      abstraction: "pending",
    },
    slots: {},
    activities: {},
    warnings: [],
    step_errors: {},
    ...overrides,
  };
}

function slot(name: string, versions: number, stale = false) {
  return {
    name,
    versions,
    stale,
    latest: versions
      ? { version: versions, provenance: "derived" as const, timestamp: "t", parents: {} }
      : null,
  };
}

describe("stage list", () => {
  it("hides gray stages on a fresh session", () => {
    const titles = stages(view()).map((s) => s.slot);
    expect(titles).toEqual([
      "description",
      "paths",
      "org",
      "concurrency",
      "loops",
      "mdt",
      "model",
    ]);
  });

  it("shows abstraction after a cyclic-causality error", () => {
    const v = view({ step_errors: { paths: "cyclic_causality: loop detected" } });
    expect(abstractionApplicable(v)).toBe(true);
    expect(stages(v).map((s) => s.slot)).toContain("abstraction");
  });

  it("shows abstraction when a repetition warning is present", () => {
    const v = view({ warnings: ["path 1 repeats 'x' 2 times; block abstraction applies"] });
    expect(abstractionApplicable(v)).toBe(true);
  });

  it("shows the alignment stage once a decomposition exists", () => {
    const v = view({ slots: { mdt: slot("mdt", 1) } as SessionView["slots"] });
    expect(resolveApplicable(v)).toBe(true);
    expect(stages(v).map((s) => s.slot)).toContain("alignment");
  });
});

describe("stage state", () => {
  it("reports staleness from the slot view", () => {
    const v = view({
      slots: {
        model: slot("model", 2, true),
      } as SessionView["slots"],
    });
    const stage = stages(v).find((s) => s.slot === "model")!;
    const info = stageState(v, stage);
    expect(info.stale).toBe(true);
    expect(info.version).toBe(2);
    expect(info.pending).toBe(false);
  });

  it("reports step errors", () => {
    const v = view({
      status: { ...view().status, paths: "error" },
      step_errors: { paths: "replay_miss: no recording" },
    });
    const stage = stages(v).find((s) => s.slot === "paths")!;
    expect(stageState(v, stage).error).toContain("replay_miss");
  });

  it("lists stale steps in pipeline order", () => {
    const v = view({
      status: { ...view().status, loops: "stale", concurrency: "stale" },
    });
    expect(staleSteps(v)).toEqual(["concurrency", "loops"]);
  });
});

describe("payload checks", () => {
  it("accepts well-formed concurrency pairs", () => {
    const result = checkPayload("concurrency", '{"pairs": [["A", "B"]]}');
    expect(result.ok).toBe(true);
  });

  it("rejects a malformed pair without sending it", () => {
    const result = checkPayload("concurrency", '{"pairs": [["A", "B", "C"]]}');
    expect(result.ok).toBe(false);
    if (!result.ok) {
      expect(result.message).toContain("2 entries");
    }
  });

  it("rejects invalid JSON with a message", () => {
    const result = checkPayload("paths", "{nope");
    expect(result.ok).toBe(false);
  });

  it("accepts empty loop blocks", () => {
    expect(checkPayload("loops", '{"blocks": []}').ok).toBe(true);
  });

  it("rejects empty path lists", () => {
    expect(checkPayload("paths", '{"paths": [[]]}').ok).toBe(false);
  });
});
