/**
 * DOM-state gating: response controls stay disabled until playback ends,
 * early clicks are ignored, keyboard shortcuts mirror the buttons, and
 * descriptors carrying correctness fields are rejected at the parser.
 */

import { describe, expect, it } from "vitest";
import {
  ApiClient,
  Descriptor,
  parseDescriptor,
  ResponseAck,
  SchemaViolation,
} from "../src/api.js";
import type { PlaybackHandle } from "../src/audio.js";
import { ProtocolRunner } from "../src/protocol.js";

function manualAudio() {
  const pending: Array<{ end: () => void; fail: (e: Error) => void }> = [];
  const factory = (): PlaybackHandle => {
    let end!: () => void;
    let fail!: (e: Error) => void;
    const ended = new Promise<void>((resolve, reject) => {
      end = resolve;
      fail = reject;
    });
    pending.push({ end, fail });
    return { ended };
  };
  return { factory, pending };
}

interface Recorded {
  responses: Array<Record<string, unknown>>;
  events: Array<Record<string, unknown>>;
}

function scriptedApi(script: Descriptor[]): { api: ApiClient; log: Recorded } {
  const log: Recorded = { responses: [], events: [] };
  let cursor = 0;
  const api = {
    nextItem: async () => script[Math.min(cursor, script.length - 1)],
    submitResponse: async (_sid: string, payload: Record<string, unknown>) => {
      log.responses.push(payload);
      cursor += 1;
      return { accepted: true, state: "Main" } as ResponseAck;
    },
    submitEvent: async (_sid: string, payload: Record<string, unknown>) => {
      log.events.push(payload);
      cursor += 1;
      return { accepted: true, state: "Main" } as ResponseAck;
    },
  } as unknown as ApiClient;
  return { api, log };
}

const CLAIMS = {
  participant_id: "unit-1",
  first_language: "en",
  residency: "US",
  dyslexia: false,
  hearing_problems: false,
  headphone_use: true,
  quiet_environment: true,
  approval_rate: 1.0,
  age_group: null,
  gender: null,
};

const TRIAL: Descriptor = {
  kind: "trial",
  phase: "main",
  index: 0,
  total: 2,
  audio_url: "/audio/x",
  choices: ["veal", "feel"],
};

const DONE: Descriptor = { kind: "completed", completion_token: "tok-1" };

function tick(ms = 2): Promise<void> {
  return new Promise((resolve) => setTimeout(resolve, ms));
}

describe("trial gating", () => {
  it("keeps choices disabled until playback ends and ignores early clicks",
     async () => {
    const { api, log } = scriptedApi([TRIAL, DONE]);
    const { factory, pending } = manualAudio();
    const root = document.createElement("main");
    document.body.append(root);
    const clock = { t: 100.0 };

    const runner = new ProtocolRunner(api, "s-1", CLAIMS, root,
                                      { player: factory,
                                        now: () => (clock.t += 1.0) });
    const run = runner.run();
    await tick();

    const left = document.getElementById("choice-left") as HTMLButtonElement;
    const right = document.getElementById("choice-right") as
      HTMLButtonElement;
    expect(left.disabled).toBe(true);
    expect(right.disabled).toBe(true);
    expect(left.textContent).toBe("veal");
    expect(right.textContent).toBe("feel");

    left.click();
    right.click();
    await tick();
    expect(log.responses).toEqual([]); // early clicks ignored

    pending[0].end();
    await tick();
    expect(left.disabled).toBe(false);
    expect(right.disabled).toBe(false);

    const before = clock.t;
    left.click();
    await tick();
    expect(log.responses).toHaveLength(1);
    const response = log.responses[0];
    expect(response.choice_word).toBe("veal");
    expect(response.phase).toBe("main");
    expect(response.presented_at as number).toBeLessThanOrEqual(
      response.responded_at as number);
    expect(response.presented_at as number).toBeGreaterThan(100.0);
    expect(response.presented_at as number).toBeLessThanOrEqual(before);

    // once answered, the controls lock again: no double submission
    left.click();
    right.click();
    await tick();
    expect(log.responses).toHaveLength(1);

    const outcome = await run;
    expect(outcome.kind).toBe("completed");
    root.remove();
  });

  it("maps F and J keys to the left and right words", async () => {
    const { api, log } = scriptedApi([TRIAL, DONE]);
    const { factory, pending } = manualAudio();
    const root = document.createElement("main");
    document.body.append(root);
    const runner = new ProtocolRunner(api, "s-2", CLAIMS, root,
                                      { player: factory });
    const run = runner.run();
    await tick();

    document.dispatchEvent(new KeyboardEvent("keydown", { key: "j" }));
    await tick();
    expect(log.responses).toEqual([]); // still gated

    pending[0].end();
    await tick();
    document.dispatchEvent(new KeyboardEvent("keydown", { key: "j" }));
    await tick();
    expect(log.responses).toHaveLength(1);
    expect(log.responses[0].choice_word).toBe("feel");
    await run;
    root.remove();
  });

  it("abandons the session after repeated audio failures", async () => {
    const { api, log } = scriptedApi([TRIAL, DONE]);
    const { factory, pending } = manualAudio();
    const root = document.createElement("main");
    document.body.append(root);
    const runner = new ProtocolRunner(api, "s-3", CLAIMS, root,
                                      { player: factory, audioRetries: 1 });
    const run = runner.run();
    await tick();
    pending[0].fail(new Error("404 audio"));
    await tick();
    pending[1].fail(new Error("404 audio"));
    await expect(run).rejects.toThrow("404 audio");
    expect(log.events).toContainEqual(
      { type: "abandoned", reason: "audio_error" });
    root.remove();
  });

  it("shows the volume prompt during practice only", async () => {
    const practice: Descriptor = { ...TRIAL, phase: "practice",
                                   volume_check: true } as Descriptor;
    const { api } = scriptedApi([practice, DONE]);
    const { factory, pending } = manualAudio();
    const root = document.createElement("main");
    document.body.append(root);
    const runner = new ProtocolRunner(api, "s-4", CLAIMS, root,
                                      { player: factory });
    const run = runner.run();
    await tick();
    expect(document.getElementById("volume-prompt")).toBeTruthy();
    pending[0].end();
    await tick();
    (document.getElementById("choice-left") as HTMLButtonElement).click();
    await run;
    root.remove();
  });
});

describe("descriptor schema validation", () => {
  it("accepts the documented shapes", () => {
    expect(parseDescriptor(TRIAL)).toEqual(TRIAL);
    expect(parseDescriptor(DONE)).toEqual(DONE);
  });

  it("rejects correctness fields smuggled into a trial", () => {
    expect(() => parseDescriptor({ ...TRIAL, correct_side: "present" }))
      .toThrow(SchemaViolation);
    expect(() => parseDescriptor({ ...TRIAL, is_catch: false }))
      .toThrow(SchemaViolation);
    expect(() => parseDescriptor({ kind: "mystery" }))
      .toThrow(SchemaViolation);
  });
});
