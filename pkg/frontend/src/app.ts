// Browser shell: binds the controller to the page with event delegation.
// All state transitions and service calls live in controller.ts.

import { ApiClient } from "./api.js";
import { Controller } from "./controller.js";
import { DEFAULT_QUESTIONS, loadQuestions } from "./questions.js";
import type { SessionState } from "./state.js";
import type { ComprehensionQuestion } from "./types.js";
import {
  renderCoveragePanel,
  renderDeltaBadge,
  renderFeedbackForm,
  renderInputForm,
  renderModelPicker,
  renderResults,
  renderWhatIfSuggestion,
} from "./views.js";

declare global {
  interface Window {
    RISKWEAVE_SERVICE_URL?: string;
  }
}

function region(id: string): HTMLElement {
  const el = document.getElementById(id);
  if (!el) throw new Error(`missing page region #${id}`);
  return el;
}

function serviceBaseUrl(): string {
  if (window.RISKWEAVE_SERVICE_URL) return window.RISKWEAVE_SERVICE_URL;
  // served from the riskweave service at /ui by default
  return window.location.origin;
}

let questions: ComprehensionQuestion[] = DEFAULT_QUESTIONS;

function renderAll(state: SessionState): void {
  region("model-area").innerHTML = renderModelPicker(state);
  region("form-area").innerHTML = renderInputForm(state);
  region("result-area").innerHTML = renderResults(state.current, state.showConditional);
  region("delta-area").innerHTML = renderDeltaBadge(state.baseline, state.current);
  region("whatif-area").innerHTML = state.whatIf
    ? renderWhatIfSuggestion(state.whatIf.changes, state.whatIf.possible)
    : "";
  region("coverage-area").innerHTML = renderCoveragePanel(state);
  region("feedback-area").innerHTML = renderFeedbackForm(state, questions);
  region("error-area").textContent = state.error ?? "";
  region("busy-area").textContent = state.busy ? "working..." : "";
}

async function main(): Promise<void> {
  const api = new ApiClient(serviceBaseUrl());
  const controller = new Controller({ api, onRender: renderAll });
  questions = await loadQuestions();

  document.addEventListener("change", (event) => {
    const target = event.target as HTMLElement;
    if (target.id === "model-picker") {
      void controller.selectModel((target as HTMLSelectElement).value);
      return;
    }
    const feature = target.getAttribute("data-feature");
    if (feature !== null) {
      const value = (target as HTMLInputElement | HTMLSelectElement).value;
      // edits after a committed result behave as live what-if exploration
      if (controller.state.baseline) {
        controller.editWhatIf(feature, value);
      } else {
        controller.setInput(feature, value);
      }
      return;
    }
    if (target.id === "toggle-conditional") {
      controller.toggleConditional((target as HTMLInputElement).checked);
      return;
    }
    const question = target.getAttribute("data-question");
    if (question !== null) {
      controller.setComprehensionAnswer(question, (target as HTMLSelectElement).value);
      return;
    }
    if ((target as HTMLInputElement).name === "understandability") {
      controller.setFeedbackRating(Number((target as HTMLInputElement).value));
    }
  });

  document.addEventListener("input", (event) => {
    const target = event.target as HTMLElement;
    if (target.id === "feedback-comment") {
      controller.setFeedbackComment((target as HTMLTextAreaElement).value);
    }
  });

  document.addEventListener("submit", (event) => {
    const target = event.target as HTMLElement;
    event.preventDefault();
    if (target.id === "patient-form") void controller.submit();
    if (target.id === "feedback-form") void controller.submitFeedback();
  });

  document.addEventListener("click", (event) => {
    const target = event.target as HTMLElement;
    if (target.id === "suggest-changes") {
      void controller.suggestChanges();
      return;
    }
    if (target.id === "add-attribute") {
      const entry = document.getElementById("attribute-entry") as HTMLInputElement | null;
      if (entry) {
        void controller.addAttribute(entry.value);
        entry.value = "";
      }
      return;
    }
    const chip = target.getAttribute("data-attribute");
    if (chip !== null) void controller.removeAttribute(chip);
  });

  await controller.start();
}

void main();
