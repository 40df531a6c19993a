/**
 * Editable participant-facing text, per language with English fallback.
 * The exact questionnaire wording is a study-owned resource; edit here
 * or extend the table for new languages.
 */

export interface Strings {
  consentTitle: string;
  consentBody: string;
  consentAccept: string;
  consentDecline: string;
  questionnaireTitle: string;
  questionnaireSubmit: string;
  qFirstLanguage: string;
  qResidency: string;
  qDyslexia: string;
  qHearing: string;
  qHeadphones: string;
  qQuiet: string;
  digitsTitle: string;
  digitsPrompt: string;
  digitsSubmit: string;
  trialPrompt: string;
  volumePrompt: string;
  practiceLabel: string;
  mainLabel: string;
  completedTitle: string;
  completedBody: string;
  rejectedTitle: string;
  progressOf: string;
}

const EN: Strings = {
  consentTitle: "Informed consent",
  consentBody:
    "You will listen to short recordings over headphones in a quiet " +
    "environment and pick which word you heard. Participation is " +
    "voluntary; your responses are stored for research analysis.",
  consentAccept: "I consent",
  consentDecline: "I do not consent",
  questionnaireTitle: "A few questions before we start",
  questionnaireSubmit: "Continue",
  qFirstLanguage: "What is your first language?",
  qResidency: "In which country do you live?",
  qDyslexia: "Do you have diagnosed or suspected dyslexia?",
  qHearing: "Do you have diagnosed or suspected hearing problems?",
  qHeadphones: "Are you wearing headphones?",
  qQuiet: "Are you in a quiet environment?",
  digitsTitle: "Hearing check",
  digitsPrompt: "Type the three digits you heard",
  digitsSubmit: "Submit",
  trialPrompt: "Which word did you hear?",
  volumePrompt:
    "Practice round: adjust your playback volume now so speech is " +
    "comfortable. The level stays fixed during the test.",
  practiceLabel: "Practice",
  mainLabel: "Test",
  completedTitle: "All done - thank you!",
  completedBody: "Your completion code:",
  rejectedTitle: "The session has ended",
  progressOf: "of",
};

const TABLES: Record<string, Partial<Strings>> = {
  en: {},
  de: {
    consentAccept: "Ich stimme zu",
    consentDecline: "Ich stimme nicht zu",
    trialPrompt: "Welches Wort haben Sie gehört?",
    digitsPrompt: "Geben Sie die drei gehörten Ziffern ein",
  },
  es: {
    consentAccept: "Doy mi consentimiento",
    consentDecline: "No doy mi consentimiento",
    trialPrompt: "¿Qué palabra escuchó?",
    digitsPrompt: "Escriba los tres dígitos que escuchó",
  },
};

export function stringsFor(language: string): Strings {
  const key = language.split("-")[0].toLowerCase();
  return { ...EN, ...(TABLES[key] ?? {}) };
}
