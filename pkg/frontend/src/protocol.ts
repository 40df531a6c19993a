/**
 * Protocol runner: drives one session through consent, questionnaire,
 * digits-in-noise, practice and the main block by looping on the
 * server's idempotent next-item endpoint.
 *
 * Audio plays exactly once per trial; response controls are enabled only
 * after playback has ended, and the response carries the measured
 * presentation-end to click timing. Reloading or reconnecting resumes at
 * the current item because the loop is stateless on the client side.
 */

import {
  ApiClient,
  Descriptor,
  DigitsDescriptor,
  ParticipantClaims,
  TrialDescriptor,
} from "./api.js";
import type { PlayerFactory } from "./audio.js";
import { stringsFor, Strings } from "./strings.js";
import {
  renderCompleted,
  renderConsent,
  renderDigits,
  renderQuestionnaire,
  renderRejected,
  renderTrial,
} from "./ui.js";

export interface RunnerOptions {
  player: PlayerFactory;
  /** Called after each screen render; tests hook DOM interactions here. */
  onScreen?: (kind: string, root: Element) => void;
  /** Clock in seconds (defaults to Date.now()/1000). */
  now?: () => number;
  /** Retries for a failing audio load before the session is abandoned. */
  audioRetries?: number;
}

export type RunOutcome =
  | { kind: "completed"; token: string }
  | { kind: "rejected"; reason: string };

export class ProtocolRunner {
  private strings: Strings;
  private now: () => number;
  private stopped = false;

  constructor(
    private api: ApiClient,
    private sessionId: string,
    private claims: ParticipantClaims,
    private root: Element,
    private options: RunnerOptions,
    language = "en",
  ) {
    this.strings = stringsFor(language);
    this.now = options.now ?? (() => Date.now() / 1000);
  }

  /** Stop after the current screen; used for teardown and tab loss. */
  stop(): void {
    this.stopped = true;
  }

  async run(): Promise<RunOutcome> {
    for (;;) {
      if (this.stopped) {
        throw new Error("runner stopped");
      }
      const item = await this.api.nextItem(this.sessionId);
      switch (item.kind) {
        case "completed":
          renderCompleted(this.root, this.strings, item.completion_token);
          this.options.onScreen?.("completed", this.root);
          return { kind: "completed", token: item.completion_token };
        case "rejected":
          renderRejected(this.root, this.strings, item.reason);
          this.options.onScreen?.("rejected", this.root);
          return { kind: "rejected", reason: item.reason };
        case "phase":
          if (item.phase === "Consent") {
            await this.consentScreen();
          } else {
            await this.questionnaireScreen();
          }
          break;
        case "digits_item":
          await this.digitsScreen(item);
          break;
        case "trial":
          await this.trialScreen(item);
          break;
      }
    }
  }

  private consentScreen(): Promise<void> {
    return new Promise((resolve, reject) => {
      renderConsent(this.root, this.strings, (accepted) => {
        this.api
          .submitEvent(this.sessionId, { type: "consent", accepted })
          .then(() => resolve(), reject);
      });
      this.options.onScreen?.("consent", this.root);
    });
  }

  private questionnaireScreen(): Promise<void> {
    return new Promise((resolve, reject) => {
      renderQuestionnaire(this.root, this.strings, {
        first_language: this.claims.first_language,
        residency: this.claims.residency,
        dyslexia: this.claims.dyslexia,
        hearing_problems: this.claims.hearing_problems,
        headphone_use: this.claims.headphone_use,
        quiet_environment: this.claims.quiet_environment,
      }, (answers) => {
        this.api
          .submitEvent(this.sessionId, { type: "questionnaire", answers })
          .then(() => resolve(), reject);
      });
      this.options.onScreen?.("questionnaire", this.root);
    });
  }

  private async playOnce(url: string | null): Promise<void> {
    const retries = this.options.audioRetries ?? 2;
    for (let attempt = 0; ; attempt++) {
      try {
        await this.options.player(url).ended;
        return;
      } catch (err) {
        if (attempt >= retries) {
          // Unplayable stimulus: report and end the session; raw data
          // stays on the server for the researcher to inspect.
          await this.api.submitEvent(this.sessionId, {
            type: "abandoned",
            reason: "audio_error",
          });
          throw err;
        }
      }
    }
  }

  private digitsScreen(item: DigitsDescriptor): Promise<void> {
    return new Promise((resolve, reject) => {
      const controls = renderDigits(this.root, this.strings, item,
                                    (triplet) => {
        controls.setEnabled(false);
        this.api.submitResponse(this.sessionId, {
          phase: "digits",
          index: item.index,
          triplet,
          presented_at: presentedAt,
          responded_at: this.now(),
        }).then(() => resolve(), reject);
      });
      let presentedAt = this.now();
      this.options.onScreen?.("digits", this.root);
      this.playOnce(item.audio_url).then(() => {
        presentedAt = this.now();
        controls.setEnabled(true);
      }, reject);
    });
  }

  private trialScreen(item: TrialDescriptor): Promise<void> {
    return new Promise((resolve, reject) => {
      const controls = renderTrial(this.root, this.strings, item, (word) => {
        controls.setEnabled(false);
        keyTarget.removeEventListener("keydown", onKey);
        this.api.submitResponse(this.sessionId, {
          phase: item.phase,
          index: item.index,
          choice_word: word,
          presented_at: presentedAt,
          responded_at: this.now(),
        }).then(() => resolve(), reject);
      });
      const keyTarget = this.root.ownerDocument;
      const onKey = (event: Event) => {
        const key = (event as KeyboardEvent).key?.toLowerCase();
        if (key === "f") {
          controls.buttons[0].click();
        } else if (key === "j") {
          controls.buttons[1].click();
        }
      };
      keyTarget.addEventListener("keydown", onKey);
      let presentedAt = this.now();
      this.options.onScreen?.(item.phase, this.root);
      this.playOnce(item.audio_url).then(() => {
        presentedAt = this.now(); // timing runs from presentation end
        controls.setEnabled(true);
      }, reject);
    });
  }
}
