import type { ComprehensionQuestion } from "./types.js";

// Comprehension questions are a study-design knob: the shell tries to fetch
// ./questions.json next to the page and falls back to these defaults.
export const DEFAULT_QUESTIONS: ComprehensionQuestion[] = [
  {
    id: "meaning",
    prompt: "If the tool says '29 in 100 people like you', what does that describe?",
    options: [
      "People with records similar to mine in the study data",
      "A guarantee about my own outcome",
      "All patients in the country",
    ],
  },
  {
    id: "certainty",
    prompt: "What does the certainty phrase (for example 'very likely') refer to?",
    options: [
      "How strongly the data backs this particular result",
      "How severe my condition is",
      "How soon the outcome will happen",
    ],
  },
];

export async function loadQuestions(
  fetchImpl: (url: string) => Promise<Response> = (url) => fetch(url),
): Promise<ComprehensionQuestion[]> {
  try {
    const response = await fetchImpl("./questions.json");
    if (!response.ok) return DEFAULT_QUESTIONS;
    const data = (await response.json()) as { questions?: ComprehensionQuestion[] };
    if (Array.isArray(data.questions) && data.questions.length > 0) {
      return data.questions;
    }
  } catch {
    // fall through to defaults
  }
  return DEFAULT_QUESTIONS;
}
