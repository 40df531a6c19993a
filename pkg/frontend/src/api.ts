/**
 * Typed client for the study service JSON API.
 *
 * Every payload parsed here is schema-checked against a key whitelist:
 * a descriptor carrying unexpected fields (e.g. anything correctness-
 * related) is rejected before the UI ever sees it.
 */

export interface ParticipantClaims {
  participant_id: string;
  first_language: string;
  residency: string;
  dyslexia: boolean;
  hearing_problems: boolean;
  headphone_use: boolean;
  quiet_environment: boolean;
  approval_rate: number;
  age_group: string | null;
  gender: string | null;
}

export interface SessionConfig {
  single_playback: boolean;
  practice_items: number;
  language: string;
}

export interface SessionBootstrap {
  session_id: string;
  state: string;
  block_id: string;
  opened_at: string;
  config: SessionConfig;
}

export interface PhaseDescriptor {
  kind: "phase";
  phase: "Consent" | "Questionnaire";
}

export interface DigitsDescriptor {
  kind: "digits_item";
  phase: "digits";
  index: number;
  total: number;
  audio_url: string | null;
}

export interface TrialDescriptor {
  kind: "trial";
  phase: "practice" | "main";
  index: number;
  total: number;
  audio_url: string | null;
  choices: [string, string];
  volume_check?: boolean;
}

export interface CompletedDescriptor {
  kind: "completed";
  completion_token: string;
}

export interface RejectedDescriptor {
  kind: "rejected";
  reason: string;
}

export type Descriptor =
  | PhaseDescriptor
  | DigitsDescriptor
  | TrialDescriptor
  | CompletedDescriptor
  | RejectedDescriptor;

export interface ResponseAck {
  accepted: boolean;
  state: string;
  completion_token?: string;
  reason?: string;
}

const DESCRIPTOR_KEYS: Record<string, Set<string>> = {
  phase: new Set(["kind", "phase"]),
  digits_item: new Set(["kind", "phase", "index", "total", "audio_url"]),
  trial: new Set([
    "kind", "phase", "index", "total", "audio_url", "choices", "volume_check",
  ]),
  completed: new Set(["kind", "completion_token"]),
  rejected: new Set(["kind", "reason"]),
};

const ACK_KEYS = new Set(["accepted", "state", "completion_token", "reason"]);
const BOOTSTRAP_KEYS = new Set([
  "session_id", "state", "block_id", "opened_at", "config",
]);

export class SchemaViolation extends Error {}

function checkKeys(obj: Record<string, unknown>, allowed: Set<string>,
                   what: string): void {
  for (const key of Object.keys(obj)) {
    if (!allowed.has(key)) {
      throw new SchemaViolation(`unexpected field '${key}' in ${what}`);
    }
  }
}

export function parseDescriptor(raw: unknown): Descriptor {
  const obj = raw as Record<string, unknown>;
  const kind = obj["kind"] as string;
  const allowed = DESCRIPTOR_KEYS[kind];
  if (!allowed) {
    throw new SchemaViolation(`unknown descriptor kind '${kind}'`);
  }
  checkKeys(obj, allowed, `descriptor '${kind}'`);
  if (kind === "trial") {
    const choices = obj["choices"];
    if (!Array.isArray(choices) || choices.length !== 2) {
      throw new SchemaViolation("trial descriptor needs exactly two choices");
    }
  }
  return obj as unknown as Descriptor;
}

export class ApiError extends Error {
  constructor(public code: string, message: string, public status: number) {
    super(message);
  }
}

export type FetchLike = typeof fetch;

export class ApiClient {
  constructor(
    private baseUrl: string,
    private fetchImpl: FetchLike = fetch,
    private retries = 3,
    private retryDelayMs = 200,
  ) {}

  private async request(method: string, path: string,
                        body?: unknown): Promise<unknown> {
    const init: RequestInit = { method };
    if (body !== undefined) {
      init.headers = { "content-type": "application/json" };
      init.body = JSON.stringify(body);
    }
    const resp = await this.fetchImpl(`${this.baseUrl}${path}`, init);
    const data = (await resp.json()) as Record<string, unknown>;
    if (!resp.ok) {
      throw new ApiError(String(data["code"] ?? "error"),
                         String(data["message"] ?? resp.statusText),
                         resp.status);
    }
    return data;
  }

  async openSession(studyId: string,
                    claims: ParticipantClaims): Promise<SessionBootstrap> {
    const data = await this.request(
      "POST", `/studies/${studyId}/sessions`, claims);
    checkKeys(data as Record<string, unknown>, BOOTSTRAP_KEYS,
              "session bootstrap");
    return data as unknown as SessionBootstrap;
  }

  /** Idempotent: safe to retry after network failures or a reload. */
  async nextItem(sessionId: string): Promise<Descriptor> {
    let lastError: unknown;
    for (let attempt = 0; attempt <= this.retries; attempt++) {
      try {
        const data = await this.request(
          "GET", `/sessions/${sessionId}/next`);
        return parseDescriptor(data);
      } catch (err) {
        if (err instanceof ApiError || err instanceof SchemaViolation) {
          throw err; // not transient; retrying cannot help
        }
        lastError = err;
        await sleep(this.retryDelayMs * (attempt + 1));
      }
    }
    throw lastError;
  }

  async submitResponse(sessionId: string, payload: {
    phase: string;
    index: number;
    choice_word?: string;
    triplet?: string;
    presented_at?: number;
    responded_at?: number;
  }): Promise<ResponseAck> {
    const data = await this.request(
      "POST", `/sessions/${sessionId}/responses`, payload);
    checkKeys(data as Record<string, unknown>, ACK_KEYS, "response ack");
    return data as unknown as ResponseAck;
  }

  async submitEvent(sessionId: string,
                    payload: Record<string, unknown>): Promise<ResponseAck> {
    const data = await this.request(
      "POST", `/sessions/${sessionId}/events`, payload);
    checkKeys(data as Record<string, unknown>, ACK_KEYS, "event ack");
    return data as unknown as ResponseAck;
  }
}

function sleep(ms: number): Promise<void> {
  return new Promise((resolve) => setTimeout(resolve, ms));
}
