/**
 * Scripted browser run against the live service: the full protocol in a
 * DOM, with export-level uniqueness checks and a schema scan proving no
 * payload to the client carries correctness fields.
 */

import { describe, expect, inject, it } from "vitest";
import { ApiClient, FetchLike, ParticipantClaims } from "../src/api.js";
import type { PlaybackHandle } from "../src/audio.js";
import { ProtocolRunner } from "../src/protocol.js";
import { zipText } from "./zip.js";

const base = inject("serviceBase");
const fixture = inject("fixture");

const boundFetch: FetchLike = (...args) => fetch(...args);

function claims(id: string): ParticipantClaims {
  return {
    participant_id: id,
    first_language: fixture.language,
    residency: "US",
    dyslexia: false,
    hearing_problems: false,
    headphone_use: true,
    quiet_environment: true,
    approval_rate: 1.0,
    age_group: null,
    gender: null,
  };
}

function recordingFetch(payloads: unknown[]): FetchLike {
  return async (input, init) => {
    const resp = await fetch(input, init);
    const clone = resp.clone();
    try {
      payloads.push(await clone.json());
    } catch {
      // non-JSON payloads (audio bytes) are not client-parsed JSON
    }
    return resp;
  };
}

const FORBIDDEN_KEY = /correct|catch|answer|(^|_)side/i;

function scanKeys(value: unknown, path: string, violations: string[]): void {
  if (Array.isArray(value)) {
    value.forEach((v, i) => scanKeys(v, `${path}[${i}]`, violations));
  } else if (value && typeof value === "object") {
    for (const [key, child] of Object.entries(value)) {
      if (FORBIDDEN_KEY.test(key)) {
        violations.push(`${path}.${key}`);
      }
      scanKeys(child, `${path}.${key}`, violations);
    }
  }
}

function instantAudio(): PlaybackHandle {
  return { ended: new Promise((resolve) => setTimeout(resolve, 2)) };
}

async function until(cond: () => boolean, what: string,
                     timeoutMs = 10_000): Promise<void> {
  const start = Date.now();
  while (!cond()) {
    if (Date.now() - start > timeoutMs) {
      throw new Error(`timeout waiting for ${what}`);
    }
    await new Promise((resolve) => setTimeout(resolve, 4));
  }
}

interface PilotStats {
  digits: number;
  practice: number;
  main: number;
  gatingViolations: string[];
  stopAfterMain?: number;
  stopped?: () => void;
}

function autopilot(stats: PilotStats) {
  return (kind: string, root: Element): void => {
    void (async () => {
      const doc = root.ownerDocument;
      if (kind === "consent") {
        (doc.getElementById("consent-accept") as HTMLButtonElement).click();
      } else if (kind === "questionnaire") {
        (doc.getElementById("questionnaire-submit") as
          HTMLButtonElement).click();
      } else if (kind === "digits") {
        const input = doc.getElementById("digits-input") as HTMLInputElement;
        const submit = doc.getElementById("digits-submit") as
          HTMLButtonElement;
        if (!input.disabled || !submit.disabled) {
          stats.gatingViolations.push(
            `digits ${stats.digits}: enabled at render`);
        }
        const index = parseProgress(root);
        await until(() => !input.disabled, "digits input enabled");
        input.value = fixture.digits_answers[index];
        stats.digits += 1;
        submit.click();
      } else if (kind === "practice" || kind === "main") {
        const left = doc.getElementById("choice-left") as HTMLButtonElement;
        const right = doc.getElementById("choice-right") as HTMLButtonElement;
        if (!left.disabled || !right.disabled) {
          stats.gatingViolations.push(`${kind}: enabled at render`);
        }
        left.click(); // must be ignored while playback is running
        const volume = doc.getElementById("volume-prompt");
        if (kind === "practice" && !volume) {
          stats.gatingViolations.push("practice: volume prompt missing");
        }
        if (kind === "main" && volume) {
          stats.gatingViolations.push("main: volume prompt shown");
        }
        await until(() => !left.disabled, "choices enabled");
        const count = kind === "practice" ? (stats.practice += 1)
                                          : (stats.main += 1);
        if (kind === "main" && stats.stopAfterMain !== undefined &&
            count > stats.stopAfterMain) {
          stats.stopped?.();
          return; // leave the trial unanswered; a new runner resumes here
        }
        if (kind === "main" && count % 2 === 0) {
          // keyboard path: F selects the left word
          doc.dispatchEvent(new KeyboardEvent("keydown", { key: "f" }));
        } else {
          left.click();
        }
      }
    })();
  };
}

function parseProgress(root: Element): number {
  const progress = root.querySelector(".progress");
  const match = /(\d+)\s+\S+\s+(\d+)/.exec(progress?.textContent ?? "");
  if (!match) {
    throw new Error(`no progress marker in ${root.innerHTML}`);
  }
  return parseInt(match[1], 10) - 1;
}

describe("protocol conformance against the live service", () => {
  it("completes the full run and leaks no correctness fields", async () => {
    const payloads: unknown[] = [];
    const api = new ApiClient(base, recordingFetch(payloads));
    const boot = await api.openSession(fixture.study_id, claims("ui-p1"));
    expect(boot.state).toBe("Consent");

    const root = document.createElement("main");
    document.body.append(root);
    const stats: PilotStats = { digits: 0, practice: 0, main: 0,
                                gatingViolations: [] };
    const runner = new ProtocolRunner(api, boot.session_id, claims("ui-p1"),
                                      root,
                                      { player: instantAudio,
                                        onScreen: autopilot(stats) },
                                      fixture.language);
    const outcome = await runner.run();

    expect(outcome.kind).toBe("completed");
    expect(stats.digits).toBe(6);
    expect(stats.practice).toBe(fixture.practice_items);
    expect(stats.main).toBe(fixture.main_items);
    expect(stats.gatingViolations).toEqual([]);

    const token = document.getElementById("completion-token");
    expect(token?.textContent).toBeTruthy();
    if (outcome.kind === "completed") {
      expect(token?.textContent).toBe(outcome.token);
    }

    const violations: string[] = [];
    payloads.forEach((p, i) => scanKeys(p, `payload${i}`, violations));
    expect(violations).toEqual([]);
    root.remove();
  });

  it("resumes after an interrupted run; export holds each response once",
     async () => {
    const api = new ApiClient(base, boundFetch);
    const boot = await api.openSession(fixture.study_id, claims("ui-p2"));
    const root = document.createElement("main");
    document.body.append(root);

    const stats: PilotStats = { digits: 0, practice: 0, main: 0,
                                gatingViolations: [], stopAfterMain: 5 };
    const first = new ProtocolRunner(api, boot.session_id, claims("ui-p2"),
                                     root,
                                     { player: instantAudio,
                                       onScreen: autopilot(stats) },
                                     fixture.language);
    stats.stopped = () => first.stop();
    await expect(first.run()).rejects.toThrow("runner stopped");
    const answeredBeforeResume = stats.main - 1; // last trial left pending

    const stats2: PilotStats = { digits: 0, practice: 0, main: 0,
                                 gatingViolations: [] };
    const second = new ProtocolRunner(api, boot.session_id, claims("ui-p2"),
                                      root,
                                      { player: instantAudio,
                                        onScreen: autopilot(stats2) },
                                      fixture.language);
    const outcome = await second.run();
    expect(outcome.kind).toBe("completed");
    // the second runner resumes mid-main: no digits or practice again
    expect(stats2.digits).toBe(0);
    expect(stats2.practice).toBe(0);
    expect(stats2.main).toBe(fixture.main_items - answeredBeforeResume);
    expect(stats2.gatingViolations).toEqual([]);

    const resp = await fetch(
      `${base}/studies/${fixture.study_id}/export`);
    const archive = new Uint8Array(await resp.arrayBuffer());
    const events = zipText(archive, "events.jsonl")
      .trim().split("\n").map((line) => JSON.parse(line));
    const responses = events
      .map((r) => r.event)
      .filter((e) => e.type === "response");
    const keys = responses.map(
      (e) => `${e.session_id}:${e.phase}:${e.index}`);
    expect(new Set(keys).size).toBe(keys.length);

    const mine = responses.filter(
      (e) => e.session_id === boot.session_id && e.phase === "main");
    expect(mine.length).toBe(fixture.main_items);

    // client-side timing present on every response this session produced
    for (const event of responses.filter(
        (e) => e.session_id === boot.session_id)) {
      expect(event.responded_at).toBeGreaterThanOrEqual(event.presented_at);
    }
    root.remove();
  });

  it("serves study audio under immutable content-hash URLs", async () => {
    const resp = await fetch(`${base}/audio/${fixture.audio_hash}`);
    expect(resp.status).toBe(200);
    expect(resp.headers.get("content-type")).toBe("audio/wav");
    const bytes = await resp.arrayBuffer();
    expect(bytes.byteLength).toBeGreaterThan(1000);
  });

  it("refuses ineligible participants with reasons, creating no session",
     async () => {
    const api = new ApiClient(base, boundFetch);
    const bad = { ...claims("ui-p3"), hearing_problems: true };
    await expect(api.openSession(fixture.study_id, bad))
      .rejects.toMatchObject({ code: "ineligible" });
  });
});
