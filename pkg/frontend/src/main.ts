import { ApiError, Client, modelDigest } from "./api.js";
import { renderDiagram } from "./diagram.js";
import { checkPayload, stages, stageState, staleSteps, type Stage } from "./state.js";
import type { ArtifactView, SessionView, StepName } from "./types.js";
import {
  activityLabels,
  renderAlignment,
  renderAuditExcerpt,
  renderGenericJson,
  renderLoopChips,
  renderPairMatrix,
  renderPaths,
  renderWarnings,
} from "./views.js";

const baseUrl =
  new URLSearchParams(location.search).get("api") ?? "http://127.0.0.1:8000";
const client = new Client(baseUrl);

const app = document.getElementById("app")!;

interface UiState {
  sessionId: string | null;
  view: SessionView | null;
  selected: Stage | null;
  provider: { provider_kind: string; replay_dir?: string };
}

const state: UiState = {
  sessionId: null,
  view: null,
  selected: null,
  provider: { provider_kind: "replay" },
};

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  className?: string,
  text?: string,
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  if (className) {
    node.className = className;
  }
  if (text !== undefined) {
    node.textContent = text;
  }
  return node;
}

async function refresh(): Promise<void> {
  if (!state.sessionId) {
    renderStart();
    return;
  }
  state.view = await client.getSession(state.sessionId);
  renderWorkbench();
}

function renderStart(): void {
  app.replaceChildren();
  const form = el("div", "start-form");
  form.appendChild(el("h1", undefined, "Process modeling workbench"));
  const description = el("textarea");
  description.placeholder = "Paste a process description…";
  description.rows = 8;
  const replayDir = el("input");
  replayDir.placeholder = "Replay directory on the server (optional)";
  const button = el("button", undefined, "Create session");
  const message = el("p", "error-text");
  button.onclick = async () => {
    try {
      const { id } = await client.createSession(description.value);
      state.sessionId = id;
      if (replayDir.value.trim()) {
        state.provider = { provider_kind: "replay", replay_dir: replayDir.value.trim() };
      }
      await refresh();
    } catch (error) {
      message.textContent = String(error);
    }
  };
  const existing = el("input");
  existing.placeholder = "…or open an existing session id";
  const openButton = el("button", undefined, "Open");
  openButton.onclick = async () => {
    try {
      state.sessionId = existing.value.trim();
      await refresh();
    } catch (error) {
      state.sessionId = null;
      message.textContent = String(error);
    }
  };
  form.append(description, replayDir, button, existing, openButton, message);
  app.appendChild(form);
}

function renderWorkbench(): void {
  const view = state.view!;
  app.replaceChildren();

  const header = el("header");
  header.appendChild(el("h1", undefined, `Session ${view.id}`));
  const stale = staleSteps(view);
  if (stale.length) {
    header.appendChild(
      el("p", "banner", `Stale stages need a re-run: ${stale.join(", ")}`),
    );
  }
  header.appendChild(renderWarnings(view));
  app.appendChild(header);

  const layout = el("div", "columns");
  const nav = el("nav", "stepper");
  const pane = el("section", "stage-pane");
  layout.append(nav, pane);
  app.appendChild(layout);

  const allStages = stages(view);
  if (!state.selected || !allStages.some((s) => s.slot === state.selected!.slot)) {
    state.selected = allStages[0] ?? null;
  }
  for (const stage of allStages) {
    const info = stageState(view, stage);
    const item = el("button", "step-item");
    if (state.selected && stage.slot === state.selected.slot) {
      item.classList.add("active");
    }
    const badge = info.error
      ? "error"
      : info.pending
        ? "pending"
        : info.stale
          ? "stale"
          : "current";
    item.classList.add(badge);
    item.textContent = `${stage.title} · ${badge}${info.version ? ` v${info.version}` : ""}`;
    item.onclick = () => {
      state.selected = stage;
      renderWorkbench();
    };
    nav.appendChild(item);
  }

  if (state.selected) {
    void renderStagePane(pane, state.selected);
  }
}

async function renderStagePane(pane: HTMLElement, stage: Stage): Promise<void> {
  const view = state.view!;
  pane.replaceChildren(el("h2", undefined, stage.title));
  const info = stageState(view, stage);

  if (info.error) {
    pane.appendChild(el("p", "error-text", info.error));
  }
  if (info.stale) {
    const banner = el("p", "banner", "This artifact is stale. ");
    if (stage.step) {
      const rerun = el("button", undefined, `Re-run ${stage.step}`);
      rerun.onclick = () => void runStep(stage.step!);
      banner.appendChild(rerun);
    }
    pane.appendChild(banner);
  }
  if (stage.step && !info.pending) {
    const rerun = el("button", "run-button", `Re-run ${stage.step}`);
    rerun.onclick = () => void runStep(stage.step!);
    pane.appendChild(rerun);
  }
  if (stage.step && info.pending) {
    const run = el("button", "run-button", `Run ${stage.step}`);
    run.onclick = () => void runStep(stage.step!);
    pane.appendChild(run);
    if (stage.slot !== "description") {
      pane.appendChild(el("p", "muted", "Not computed yet."));
      return;
    }
  }
  if (info.pending && !stage.step) {
    pane.appendChild(el("p", "muted", "Not computed yet."));
    return;
  }

  let artifact: ArtifactView;
  try {
    artifact = await client.getArtifact(view.id, stage.slot);
  } catch (error) {
    if (error instanceof ApiError && error.status === 404) {
      pane.appendChild(el("p", "muted", "Not computed yet."));
      return;
    }
    throw error;
  }

  pane.appendChild(
    el(
      "p",
      "muted",
      `version ${artifact.version} · provenance ${artifact.provenance}`,
    ),
  );

  const labels = activityLabels(view);
  if (stage.slot === "paths") {
    pane.appendChild(renderPaths(artifact.value as { paths?: unknown }));
  } else if (stage.slot === "concurrency") {
    pane.appendChild(renderPairMatrix(artifact.value as { pairs?: unknown }, labels));
  } else if (stage.slot === "loops") {
    pane.appendChild(renderLoopChips(artifact.value as { blocks?: unknown }, labels));
  } else if (stage.slot === "alignment") {
    pane.appendChild(renderAlignment(artifact.value as { reports?: unknown }));
  } else if (stage.slot === "model") {
    await renderModelStage(pane, artifact);
  } else {
    pane.appendChild(renderGenericJson(artifact));
  }

  if (stage.llmBacked) {
    pane.appendChild(el("h3", undefined, "LLM exchange"));
    const audit = await client.getAudit(view.id);
    const step = stage.step ?? "paths";
    pane.appendChild(renderAuditExcerpt(audit, step));
  }

  if (stage.editable) {
    pane.appendChild(el("h3", undefined, "Override"));
    const editor = el("textarea", "editor");
    editor.rows = 10;
    editor.value = JSON.stringify(artifact.value, null, 2);
    const submit = el("button", undefined, "Submit override");
    const message = el("p", "error-text");
    submit.onclick = async () => {
      const checked = checkPayload(stage.slot, editor.value);
      if (!checked.ok) {
        message.textContent = checked.message;
        return;
      }
      try {
        await client.putArtifact(view.id, stage.slot, checked.value);
        await refresh();
      } catch (error) {
        message.textContent =
          error instanceof ApiError ? `${error.code}: ${error.detail}` : String(error);
      }
    };
    pane.append(editor, submit, message);
  }
}

async function renderModelStage(pane: HTMLElement, artifact: ArtifactView): Promise<void> {
  const view = state.view!;
  pane.appendChild(
    el("p", "muted", `model digest ${modelDigest(artifact.value)}`),
  );
  const container = el("div", "diagram");
  pane.appendChild(container);
  try {
    const xml = await client.getModelBpmn(view.id);
    await renderDiagram(container, xml);
  } catch (error) {
    container.appendChild(el("p", "error-text", `diagram failed: ${String(error)}`));
  }
}

async function runStep(step: StepName): Promise<void> {
  const view = state.view!;
  try {
    const result = await client.runStep(view.id, step, state.provider);
    if (result.status_url) {
      // live provider: poll until the step settles
      for (;;) {
        await new Promise((resolve) => setTimeout(resolve, 500));
        const status = await client.stepStatus(view.id, step);
        if (status.status !== "running") {
          break;
        }
      }
    }
  } catch (error) {
    alert(error instanceof ApiError ? `${error.code}: ${error.detail}` : String(error));
  }
  await refresh();
}

void refresh();
