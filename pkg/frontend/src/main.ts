/**
 * Browser bootstrap: landing form for participant claims, session open,
 * protocol run. The study id comes from the `study` query parameter; the
 * API base defaults to the serving origin.
 */

import { ApiClient, ParticipantClaims } from "./api.js";
import { htmlAudioPlayer } from "./audio.js";
import { ProtocolRunner } from "./protocol.js";
import { stringsFor } from "./strings.js";

const HEARTBEAT_KEY = "drt-session-tab";
const HEARTBEAT_MS = 2000;

function claimsFromForm(form: HTMLFormElement): ParticipantClaims {
  const data = new FormData(form);
  const text = (name: string) => String(data.get(name) ?? "").trim();
  const flag = (name: string) => data.get(name) === "on";
  return {
    participant_id: text("participant_id"),
    first_language: text("first_language"),
    residency: text("residency"),
    dyslexia: flag("dyslexia"),
    hearing_problems: flag("hearing_problems"),
    headphone_use: flag("headphone_use"),
    quiet_environment: flag("quiet_environment"),
    approval_rate: 1.0,
    age_group: text("age_group") || null,
    gender: text("gender") || null,
  };
}

/** Refuses to run the test in two tabs at once (heartbeat in storage). */
function acquireTabLock(sessionId: string): boolean {
  try {
    const now = Date.now();
    const raw = window.localStorage.getItem(HEARTBEAT_KEY);
    if (raw) {
      const held = JSON.parse(raw) as { session: string; ts: number };
      if (held.session === sessionId && now - held.ts < 3 * HEARTBEAT_MS) {
        return false;
      }
    }
    const beat = () => window.localStorage.setItem(
      HEARTBEAT_KEY, JSON.stringify({ session: sessionId, ts: Date.now() }));
    beat();
    window.setInterval(beat, HEARTBEAT_MS);
    return true;
  } catch {
    return true; // storage unavailable: lock is best-effort only
  }
}

async function start(): Promise<void> {
  const params = new URLSearchParams(window.location.search);
  const studyId = params.get("study");
  const root = document.getElementById("app");
  if (!root) {
    return;
  }
  if (!studyId) {
    root.textContent = "Missing ?study=<id> in the URL.";
    return;
  }
  const api = new ApiClient(params.get("api") ?? "");
  const form = document.getElementById("landing-form") as HTMLFormElement;
  const landing = document.getElementById("landing") as HTMLElement;
  form.addEventListener("submit", async (event) => {
    event.preventDefault();
    const claims = claimsFromForm(form);
    try {
      const bootstrap = await api.openSession(studyId, claims);
      if (!acquireTabLock(bootstrap.session_id)) {
        root.textContent = "This session is already running in another tab.";
        return;
      }
      landing.hidden = true;
      const runner = new ProtocolRunner(
        api, bootstrap.session_id, claims, root,
        { player: htmlAudioPlayer },
        bootstrap.config.language,
      );
      await runner.run();
    } catch (err) {
      const strings = stringsFor("en");
      root.textContent = `${strings.rejectedTitle}: ${String(err)}`;
    }
  });
}

window.addEventListener("DOMContentLoaded", () => {
  void start();
});
