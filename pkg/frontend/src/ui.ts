/**
 * Screen rendering. Every screen replaces the root's content; controls
 * that depend on audio start out disabled and are enabled only by the
 * protocol runner once playback has ended.
 */

import type { DigitsDescriptor, TrialDescriptor } from "./api.js";
import type { Strings } from "./strings.js";

function clear(root: Element): void {
  root.innerHTML = "";
}

function el<K extends keyof HTMLElementTagNameMap>(
  doc: Document, tag: K, attrs: Record<string, string> = {},
  text?: string,
): HTMLElementTagNameMap[K] {
  const node = doc.createElement(tag);
  for (const [key, value] of Object.entries(attrs)) {
    node.setAttribute(key, value);
  }
  if (text !== undefined) {
    node.textContent = text;
  }
  return node;
}

export function renderConsent(root: Element, strings: Strings,
                              onChoice: (accepted: boolean) => void): void {
  const doc = root.ownerDocument;
  clear(root);
  const box = el(doc, "section", { class: "screen", id: "consent-screen" });
  box.append(
    el(doc, "h1", {}, strings.consentTitle),
    el(doc, "p", {}, strings.consentBody),
  );
  const accept = el(doc, "button", { id: "consent-accept" },
                    strings.consentAccept);
  const decline = el(doc, "button", { id: "consent-decline" },
                     strings.consentDecline);
  accept.addEventListener("click", () => onChoice(true));
  decline.addEventListener("click", () => onChoice(false));
  box.append(accept, decline);
  root.append(box);
}

export interface QuestionnaireDefaults {
  first_language: string;
  residency: string;
  dyslexia: boolean;
  hearing_problems: boolean;
  headphone_use: boolean;
  quiet_environment: boolean;
}

export function renderQuestionnaire(
  root: Element, strings: Strings, defaults: QuestionnaireDefaults,
  onSubmit: (answers: QuestionnaireDefaults) => void,
): void {
  const doc = root.ownerDocument;
  clear(root);
  const box = el(doc, "section", { class: "screen",
                                   id: "questionnaire-screen" });
  box.append(el(doc, "h1", {}, strings.questionnaireTitle));

  const textField = (id: string, label: string, value: string) => {
    const wrap = el(doc, "label", { class: "field" }, label);
    const input = el(doc, "input", { id, type: "text" });
    input.value = value;
    wrap.append(input);
    box.append(wrap);
    return input;
  };
  const boolField = (id: string, label: string, value: boolean) => {
    const wrap = el(doc, "label", { class: "field" }, label);
    const input = el(doc, "input", { id, type: "checkbox" });
    input.checked = value;
    wrap.append(input);
    box.append(wrap);
    return input;
  };

  const language = textField("q-language", strings.qFirstLanguage,
                             defaults.first_language);
  const residency = textField("q-residency", strings.qResidency,
                              defaults.residency);
  const dyslexia = boolField("q-dyslexia", strings.qDyslexia,
                             defaults.dyslexia);
  const hearing = boolField("q-hearing", strings.qHearing,
                            defaults.hearing_problems);
  const headphones = boolField("q-headphones", strings.qHeadphones,
                               defaults.headphone_use);
  const quiet = boolField("q-quiet", strings.qQuiet,
                          defaults.quiet_environment);

  const submit = el(doc, "button", { id: "questionnaire-submit" },
                    strings.questionnaireSubmit);
  submit.addEventListener("click", () => onSubmit({
    first_language: language.value,
    residency: residency.value,
    dyslexia: dyslexia.checked,
    hearing_problems: hearing.checked,
    headphone_use: headphones.checked,
    quiet_environment: quiet.checked,
  }));
  box.append(submit);
  root.append(box);
}

export interface DigitsControls {
  input: HTMLInputElement;
  submit: HTMLButtonElement;
  setEnabled(enabled: boolean): void;
}

export function renderDigits(root: Element, strings: Strings,
                             item: DigitsDescriptor,
                             onSubmit: (triplet: string) => void): DigitsControls {
  const doc = root.ownerDocument;
  clear(root);
  const box = el(doc, "section", { class: "screen", id: "digits-screen" });
  box.append(
    el(doc, "h1", {}, strings.digitsTitle),
    el(doc, "p", { class: "progress" },
       `${item.index + 1} ${strings.progressOf} ${item.total}`),
    el(doc, "p", {}, strings.digitsPrompt),
  );
  const input = el(doc, "input", {
    id: "digits-input", type: "text", inputmode: "numeric",
    maxlength: "3", autocomplete: "off",
  });
  const submit = el(doc, "button", { id: "digits-submit" },
                    strings.digitsSubmit);
  input.disabled = true;
  submit.disabled = true;
  submit.addEventListener("click", () => {
    if (!submit.disabled) {
      onSubmit(input.value);
    }
  });
  box.append(input, submit);
  root.append(box);
  return {
    input,
    submit,
    setEnabled(enabled: boolean) {
      input.disabled = !enabled;
      submit.disabled = !enabled;
    },
  };
}

export interface TrialControls {
  buttons: [HTMLButtonElement, HTMLButtonElement];
  setEnabled(enabled: boolean): void;
}

export function renderTrial(root: Element, strings: Strings,
                            item: TrialDescriptor,
                            onChoice: (word: string) => void): TrialControls {
  const doc = root.ownerDocument;
  clear(root);
  const box = el(doc, "section", { class: "screen", id: "trial-screen" });
  const label = item.phase === "practice" ? strings.practiceLabel
                                          : strings.mainLabel;
  box.append(
    el(doc, "p", { class: "progress" },
       `${label} ${item.index + 1} ${strings.progressOf} ${item.total}`),
    el(doc, "h1", {}, strings.trialPrompt),
  );
  if (item.volume_check) {
    box.append(el(doc, "p", { id: "volume-prompt", class: "volume" },
                  strings.volumePrompt));
  }
  const [leftWord, rightWord] = item.choices;
  const left = el(doc, "button",
                  { id: "choice-left", class: "choice", "data-key": "f" },
                  leftWord);
  const right = el(doc, "button",
                   { id: "choice-right", class: "choice", "data-key": "j" },
                   rightWord);
  const pick = (word: string) => () => {
    if (!left.disabled) {
      onChoice(word);
    }
  };
  left.addEventListener("click", pick(leftWord));
  right.addEventListener("click", pick(rightWord));
  left.disabled = true;
  right.disabled = true;
  box.append(left, right,
             el(doc, "p", { class: "hint" }, "keys: F = left, J = right"));
  root.append(box);
  return {
    buttons: [left, right],
    setEnabled(enabled: boolean) {
      left.disabled = !enabled;
      right.disabled = !enabled;
    },
  };
}

export function renderCompleted(root: Element, strings: Strings,
                                token: string): void {
  const doc = root.ownerDocument;
  clear(root);
  const box = el(doc, "section", { class: "screen", id: "completed-screen" });
  box.append(
    el(doc, "h1", {}, strings.completedTitle),
    el(doc, "p", {}, strings.completedBody),
    el(doc, "code", { id: "completion-token" }, token),
  );
  root.append(box);
}

export function renderRejected(root: Element, strings: Strings,
                               reason: string): void {
  const doc = root.ownerDocument;
  clear(root);
  const box = el(doc, "section", { class: "screen", id: "rejected-screen" });
  box.append(
    el(doc, "h1", {}, strings.rejectedTitle),
    el(doc, "p", { id: "rejected-reason" }, reason),
  );
  root.append(box);
}
