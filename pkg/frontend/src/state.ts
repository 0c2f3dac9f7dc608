import type {
  CoverageResponse,
  CurveResponse,
  ExplainResponse,
  FeatureSpecJson,
  Instance,
  ModelInfo,
  ModelSummary,
  PredictResponse,
  WhatIfResponse,
} from "./types.js";

// A tree result couples the prediction with its narrative; curve results are
// self-contained. Both always carry a certainty phrase and a support count.
export interface TreeResult {
  kind: "tree";
  predict: PredictResponse;
  explain: ExplainResponse;
}

export interface CurveResult {
  kind: "curve";
  curve: CurveResponse;
}

export type Result = TreeResult | CurveResult;

export interface FeedbackDraft {
  comment: string;
  understandability: number | null;
  comprehension: Record<string, string>;
}

export interface SessionState {
  models: ModelSummary[];
  modelId: string | null;
  modelInfo: ModelInfo | null;
  inputs: Record<string, string>;
  inputErrors: Record<string, string>;
  /** result for the submitted form values */
  baseline: Result | null;
  /** result tracking live what-if edits (same as baseline right after submit) */
  current: Result | null;
  whatIf: WhatIfResponse | null;
  extraAttributes: string[];
  coverage: CoverageResponse | null;
  feedbackDraft: FeedbackDraft;
  feedbackStatus: "idle" | "invalid" | "sent" | "failed";
  showConditional: boolean;
  busy: boolean;
  error: string | null;
}

export function initialState(): SessionState {
  return {
    models: [],
    modelId: null,
    modelInfo: null,
    inputs: {},
    inputErrors: {},
    baseline: null,
    current: null,
    whatIf: null,
    extraAttributes: [],
    coverage: null,
    feedbackDraft: { comment: "", understandability: null, comprehension: {} },
    feedbackStatus: "idle",
    showConditional: false,
    busy: false,
    error: null,
  };
}

/** Monotonic sequence numbers per panel; stale responses are dropped. */
export class SequenceGate {
  private next = 1;
  private applied: Record<string, number> = {};

  issue(): number {
    return this.next++;
  }

  /** True (and records it) when seq is newer than the last applied for panel. */
  tryApply(panel: string, seq: number): boolean {
    const last = this.applied[panel] ?? 0;
    if (seq <= last) return false;
    this.applied[panel] = seq;
    return true;
  }
}

/** Mirror of the server-side domain checks, so bad input never leaves the form. */
export function validateValue(spec: FeatureSpecJson, raw: string): string | null {
  const text = raw.trim();
  if (text === "") return "required";
  if (spec.kind === "numeric") {
    if (!/^[+-]?(\d+\.?\d*|\.\d+)([eE][+-]?\d+)?$/.test(text)) {
      return "must be a number";
    }
    const value = Number(text);
    if (!Number.isFinite(value)) return "must be a finite number";
    return null;
  }
  if (!spec.levels || !spec.levels.includes(text)) {
    return "pick one of the listed options";
  }
  return null;
}

export function validateInputs(
  features: FeatureSpecJson[], inputs: Record<string, string>,
): Record<string, string> {
  const errors: Record<string, string> = {};
  for (const spec of features) {
    const error = validateValue(spec, inputs[spec.name] ?? "");
    if (error) errors[spec.name] = error;
  }
  return errors;
}

/** Typed instance for the service, from validated raw inputs. */
export function toInstance(
  features: FeatureSpecJson[], inputs: Record<string, string>,
): Instance {
  const instance: Instance = {};
  for (const spec of features) {
    const raw = (inputs[spec.name] ?? "").trim();
    instance[spec.name] = spec.kind === "numeric" ? Number(raw) : raw;
  }
  return instance;
}

export function defaultInputs(features: FeatureSpecJson[]): Record<string, string> {
  const inputs: Record<string, string> = {};
  for (const spec of features) {
    inputs[spec.name] = spec.kind === "categorical" ? (spec.levels?.[0] ?? "") : "";
  }
  return inputs;
}

export function feedbackIsEmpty(draft: FeedbackDraft): boolean {
  return (
    draft.comment.trim() === "" &&
    draft.understandability === null &&
    Object.values(draft.comprehension).every((v) => v.trim() === "")
  );
}

export function resultLabel(result: Result): string {
  return result.kind === "tree" ? result.predict.label : result.curve.certainty_phrase;
}
