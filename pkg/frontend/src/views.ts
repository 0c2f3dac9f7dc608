// HTML string renderers. Pure functions of state, no DOM access, so the test
// suite can assert on exact rendered output in plain node.

import { renderCurveChart } from "./chart.js";
import type { Result, SessionState } from "./state.js";
import type { ComprehensionQuestion, FeatureSpecJson, WhatIfChange } from "./types.js";

export function escapeHtml(text: string): string {
  return text
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;")
    .replace(/'/g, "&#39;");
}

function control(spec: FeatureSpecJson, value: string, error: string | undefined): string {
  const name = escapeHtml(spec.name);
  let field: string;
  if (spec.kind === "categorical") {
    const options = (spec.levels ?? [])
      .map((level) => {
        const selected = level === value ? " selected" : "";
        return `<option value="${escapeHtml(level)}"${selected}>${escapeHtml(level)}</option>`;
      })
      .join("");
    field = `<select data-feature="${name}">${options}</select>`;
  } else {
    const unit = spec.unit ? `<span class="unit">${escapeHtml(spec.unit)}</span>` : "";
    field = `<input type="text" inputmode="decimal" data-feature="${name}" ` +
      `value="${escapeHtml(value)}">${unit}`;
  }
  const errorHtml = error
    ? `<span class="field-error" data-error-for="${name}">${escapeHtml(error)}</span>`
    : "";
  return `<label class="field"><span class="field-name">${name}</span>${field}${errorHtml}</label>`;
}

/** One control per schema feature: dropdowns for categoricals, numeric fields with units. */
export function renderInputForm(state: SessionState): string {
  if (!state.modelInfo) return `<p class="hint">Pick a model to begin.</p>`;
  const fields = state.modelInfo.schema.features
    .map((spec) => control(spec, state.inputs[spec.name] ?? "", state.inputErrors[spec.name]))
    .join("");
  return `<form id="patient-form">${fields}` +
    `<button type="submit" id="submit-inputs">See my result</button></form>`;
}

function supportLine(samples: number): string {
  return `<p class="support-line">Based on ${samples} people in the study similar to you.</p>`;
}

function framings(percent: string, frequency: string, phrase: string): string {
  return `<div class="framings">` +
    `<span class="certainty-phrase">${escapeHtml(phrase)}</span>` +
    `<span class="percent">${escapeHtml(percent)}</span>` +
    `<span class="frequency">${escapeHtml(frequency)}</span>` +
    `</div>`;
}

/** Certainty phrase, both numeric framings, narrative, chart, and support count. */
export function renderResults(result: Result | null, showConditional: boolean): string {
  if (result === null) return `<p class="hint">No result yet.</p>`;
  if (result.kind === "tree") {
    const { predict, explain } = result;
    const conditions = explain.conditions.length
      ? `<ul class="because">` +
        explain.conditions.map((c) => `<li>${escapeHtml(c)}</li>`).join("") +
        `</ul>`
      : "";
    return `<div class="result result-tree">` +
      `<h3 class="outcome-label">${escapeHtml(predict.label)}</h3>` +
      framings(predict.percent, predict.frequency, predict.certainty_phrase) +
      `<p class="narrative">${escapeHtml(explain.text)}</p>` +
      conditions +
      supportLine(predict.samples) +
      `</div>`;
  }
  const curve = result.curve;
  const points = curve.cycles.map((cycle, i) => ({
    cycle,
    cumulative: curve.cumulative[i] ?? 0,
    conditional: curve.conditional[i] ?? 0,
  }));
  return `<div class="result result-curve">` +
    framings(curve.percent, curve.frequency, curve.certainty_phrase) +
    `<p class="narrative">${escapeHtml(curve.text)}</p>` +
    renderCurveChart(points, showConditional) +
    `<label class="toggle"><input type="checkbox" id="toggle-conditional"` +
    `${showConditional ? " checked" : ""}> show per-cycle values</label>` +
    supportLine(curve.samples) +
    `</div>`;
}

/** Badge shown when live what-if edits flip the displayed outcome. */
export function renderDeltaBadge(baseline: Result | null, current: Result | null): string {
  if (!baseline || !current || baseline.kind !== "tree" || current.kind !== "tree") {
    return "";
  }
  const was = baseline.predict.label;
  const now = current.predict.label;
  if (was === now) return "";
  return `<span class="delta-badge">was ${escapeHtml(was)} &rarr; now ${escapeHtml(now)}</span>`;
}

export function renderWhatIfSuggestion(changes: WhatIfChange[] | null,
                                       possible: boolean): string {
  if (!possible) {
    return `<p class="whatif-none">No combination of changeable attributes reaches ` +
      `that outcome for you.</p>`;
  }
  if (!changes || changes.length === 0) {
    return `<p class="whatif-none">No change needed. You are already at that outcome.</p>`;
  }
  const items = changes
    .map((c) => `<li class="suggested-change" data-feature="${escapeHtml(c.feature)}">` +
      `${escapeHtml(c.feature)}: ${escapeHtml(String(c.from))} &rarr; ` +
      `${escapeHtml(String(c.to))}</li>`)
    .join("");
  return `<ul class="whatif-changes">${items}</ul>`;
}

/** Chips for declared attributes plus the caveat panel from /coverage. */
export function renderCoveragePanel(state: SessionState): string {
  const chips = state.extraAttributes
    .map((a) => `<span class="chip">${escapeHtml(a)}` +
      `<button class="chip-remove" data-attribute="${escapeHtml(a)}">&times;</button></span>`)
    .join("");
  const entry = `<div class="chips">${chips}</div>` +
    `<input type="text" id="attribute-entry" placeholder="e.g. smoking status">` +
    `<button id="add-attribute">Add</button>`;
  if (!state.coverage) return entry;
  const unmodeled = state.coverage.unmodeled.length
    ? `<ul class="caveat-list">` +
      state.coverage.unmodeled
        .map((a) => `<li class="caveat-item">${escapeHtml(a)}</li>`)
        .join("") +
      `</ul>`
    : "";
  return entry +
    `<div class="caveat-panel">` +
    `<p class="caveat-text">${escapeHtml(state.coverage.caveat_text)}</p>` +
    unmodeled +
    `</div>`;
}

export function renderFeedbackForm(state: SessionState,
                                   questions: ComprehensionQuestion[]): string {
  const draft = state.feedbackDraft;
  const ratings = [1, 2, 3, 4, 5]
    .map((r) => `<label><input type="radio" name="understandability" value="${r}"` +
      `${draft.understandability === r ? " checked" : ""}> ${r}</label>`)
    .join("");
  const questionHtml = questions
    .map((q) => {
      const options = q.options
        .map((o) => {
          const chosen = draft.comprehension[q.id] === o ? " selected" : "";
          return `<option value="${escapeHtml(o)}"${chosen}>${escapeHtml(o)}</option>`;
        })
        .join("");
      return `<label class="question"><span>${escapeHtml(q.prompt)}</span>` +
        `<select data-question="${escapeHtml(q.id)}">` +
        `<option value=""></option>${options}</select></label>`;
    })
    .join("");
  const status =
    state.feedbackStatus === "invalid"
      ? `<p class="feedback-status invalid">Please add a rating, an answer, or a comment first.</p>`
      : state.feedbackStatus === "sent"
        ? `<p class="feedback-status sent">Thank you, your feedback was recorded.</p>`
        : state.feedbackStatus === "failed"
          ? `<p class="feedback-status failed">Sending failed, please retry.</p>`
          : "";
  return `<form id="feedback-form">` +
    `<fieldset><legend>How understandable was this result? (1 low, 5 high)</legend>${ratings}</fieldset>` +
    questionHtml +
    `<textarea id="feedback-comment" placeholder="Anything unclear or missing?">` +
    `${escapeHtml(draft.comment)}</textarea>` +
    `<button type="submit" id="submit-feedback">Send feedback</button>${status}</form>`;
}

export function renderModelPicker(state: SessionState): string {
  if (state.models.length === 0) return `<p class="hint">No models on the service yet.</p>`;
  const options = state.models
    .map((m) => {
      const selected = m.model_id === state.modelId ? " selected" : "";
      const label = `${m.model_id} (${m.kind})`;
      return `<option value="${escapeHtml(m.model_id)}"${selected}>${escapeHtml(label)}</option>`;
    })
    .join("");
  return `<select id="model-picker">${options}</select>`;
}
