/**
 * Single-shot audio playback. The trial flow awaits `ended` before
 * enabling any response control; there is no replay.
 */

export interface PlaybackHandle {
  /** Resolves when playback ends; rejects on a load/decode failure. */
  ended: Promise<void>;
}

export type PlayerFactory = (url: string | null) => PlaybackHandle;

/** Browser implementation over HTMLAudioElement. */
export function htmlAudioPlayer(url: string | null): PlaybackHandle {
  if (url === null) {
    // Studies without registered audio (dry runs): brief silent gap.
    return { ended: new Promise((resolve) => setTimeout(resolve, 300)) };
  }
  const element = new Audio(url);
  element.preload = "auto";
  const ended = new Promise<void>((resolve, reject) => {
    element.addEventListener("ended", () => resolve(), { once: true });
    element.addEventListener(
      "error",
      () => reject(new Error(`audio failed to load: ${url}`)),
      { once: true },
    );
    element.play().catch(reject);
  });
  return { ended };
}
