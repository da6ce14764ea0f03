import type {
  ApiErrorBody,
  ArtifactView,
  AuditEntry,
  ProviderSettings,
  SessionView,
  SlotName,
  StepName,
} from "./types.js";

export class ApiError extends Error {
  constructor(
    readonly status: number,
    readonly code: string,
    readonly detail: string,
  ) {
    super(`${code}: ${detail}`);
  }
}

async function throwFrom(response: Response): Promise<never> {
  let body: ApiErrorBody | null = null;
  try {
    body = (await response.json()) as ApiErrorBody;
  } catch {
    // non-JSON error body
  }
  throw new ApiError(
    response.status,
    body?.code ?? `http_${response.status}`,
    body?.detail ?? response.statusText,
  );
}

export class Client {
  constructor(
    readonly baseUrl: string,
    private readonly doFetch: typeof fetch = fetch,
  ) {}

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    const response = await this.doFetch(`${this.baseUrl}${path}`, {
      headers: { "Content-Type": "application/json" },
      ...init,
    });
    if (!response.ok) {
      await throwFrom(response);
    }
    return (await response.json()) as T;
  }

  createSession(description: string): Promise<{ id: string }> {
    return this.request("/api/sessions", {
      method: "POST",
      body: JSON.stringify({ description }),
    });
  }

  getSession(id: string): Promise<SessionView> {
    return this.request(`/api/sessions/${id}`);
  }

  runStep(
    id: string,
    step: StepName,
    provider?: ProviderSettings,
  ): Promise<{ status?: string; status_url?: string }> {
    return this.request(`/api/sessions/${id}/steps/${step}/run`, {
      method: "POST",
      body: JSON.stringify(provider ? { provider } : {}),
    });
  }

  stepStatus(id: string, step: StepName): Promise<{ status: string; error?: string }> {
    return this.request(`/api/sessions/${id}/steps/${step}/status`);
  }

  getArtifact(id: string, slot: SlotName, version?: number): Promise<ArtifactView> {
    const suffix = version ? `?version=${version}` : "";
    return this.request(`/api/sessions/${id}/artifacts/${slot}${suffix}`);
  }

  putArtifact(id: string, slot: SlotName, value: unknown): Promise<ArtifactView> {
    return this.request(`/api/sessions/${id}/artifacts/${slot}`, {
      method: "PUT",
      body: JSON.stringify({ value }),
    });
  }

  getModelJson(id: string, version?: number): Promise<{ version: number; value: unknown }> {
    const suffix = version ? `&version=${version}` : "";
    return this.request(`/api/sessions/${id}/model?format=json${suffix}`);
  }

  async getModelBpmn(id: string, version?: number): Promise<string> {
    const suffix = version ? `&version=${version}` : "";
    const response = await this.doFetch(
      `${this.baseUrl}/api/sessions/${id}/model?format=bpmn${suffix}`,
    );
    if (!response.ok) {
      await throwFrom(response);
    }
    return response.text();
  }

  getAudit(id: string): Promise<AuditEntry[]> {
    return this.request(`/api/sessions/${id}/audit`);
  }
}

/** Stable content digest of a model value, for display and change detection. */
export function modelDigest(value: unknown): string {
  const text = canonicalJson(value);
  let hash = 0x811c9dc5;
  for (let i = 0; i < text.length; i += 1) {
    hash ^= text.charCodeAt(i);
    hash = Math.imul(hash, 0x01000193) >>> 0;
  }
  return hash.toString(16).padStart(8, "0");
}

export function canonicalJson(value: unknown): string {
  if (Array.isArray(value)) {
    return `[${value.map(canonicalJson).join(",")}]`;
  }
  if (value !== null && typeof value === "object") {
    const entries = Object.entries(value as Record<string, unknown>)
      .sort(([a], [b]) => (a < b ? -1 : a > b ? 1 : 0))
      .map(([k, v]) => `${JSON.stringify(k)}:${canonicalJson(v)}`);
    return `{${entries.join(",")}}`;
  }
  return JSON.stringify(value);
}
