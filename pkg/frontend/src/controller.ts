// Session controller: owns the state, talks to the service, and tells the
// shell when to re-render. No DOM access here, which keeps the whole flow
// testable; app.ts binds it to the page.

import type { ApiClient } from "./api.js";
import {
  SequenceGate,
  SessionState,
  defaultInputs,
  feedbackIsEmpty,
  initialState,
  toInstance,
  validateInputs,
  validateValue,
} from "./state.js";
import type { Result } from "./state.js";
import type { Instance } from "./types.js";

export type Scheduler = (fn: () => void, delayMs: number) => () => void;

const defaultScheduler: Scheduler = (fn, delayMs) => {
  const handle = setTimeout(fn, delayMs);
  return () => clearTimeout(handle);
};

export interface ControllerOptions {
  api: ApiClient;
  onRender: (state: SessionState) => void;
  schedule?: Scheduler;
  whatIfDebounceMs?: number;
}

export class Controller {
  readonly state: SessionState = initialState();
  private readonly api: ApiClient;
  private readonly onRender: (state: SessionState) => void;
  private readonly schedule: Scheduler;
  private readonly debounceMs: number;
  private readonly gate = new SequenceGate();
  private cancelPending: (() => void) | null = null;

  constructor(options: ControllerOptions) {
    this.api = options.api;
    this.onRender = options.onRender;
    this.schedule = options.schedule ?? defaultScheduler;
    this.debounceMs = options.whatIfDebounceMs ?? 300;
  }

  private render(): void {
    this.onRender(this.state);
  }

  private fail(error: unknown): void {
    this.state.error = error instanceof Error ? error.message : String(error);
    this.state.busy = false;
    this.render();
  }

  async start(): Promise<void> {
    try {
      const { models } = await this.api.listModels();
      this.state.models = models;
      if (models.length > 0) {
        await this.selectModel(models[0]!.model_id);
        return;
      }
    } catch (error) {
      this.fail(error);
      return;
    }
    this.render();
  }

  async selectModel(modelId: string): Promise<void> {
    try {
      const info = await this.api.modelInfo(modelId);
      this.state.modelId = modelId;
      this.state.modelInfo = info;
      this.state.inputs = defaultInputs(info.schema.features);
      this.state.inputErrors = {};
      this.state.baseline = null;
      this.state.current = null;
      this.state.whatIf = null;
      this.state.coverage = null;
      this.state.error = null;
      this.render();
    } catch (error) {
      this.fail(error);
    }
  }

  setInput(feature: string, raw: string): void {
    this.state.inputs[feature] = raw;
    const spec = this.state.modelInfo?.schema.features.find((f) => f.name === feature);
    if (spec) {
      const error = validateValue(spec, raw);
      if (error) {
        this.state.inputErrors[feature] = error;
      } else {
        delete this.state.inputErrors[feature];
      }
    }
    this.render();
  }

  /** Validates locally; invalid input never produces a request. */
  private validatedInstance(): Instance | null {
    const info = this.state.modelInfo;
    if (!info) return null;
    const errors = validateInputs(info.schema.features, this.state.inputs);
    this.state.inputErrors = errors;
    if (Object.keys(errors).length > 0) {
      this.render();
      return null;
    }
    return toInstance(info.schema.features, this.state.inputs);
  }

  private async queryResult(instance: Instance): Promise<Result> {
    const info = this.state.modelInfo!;
    if (info.kind === "cycles") {
      const curve = await this.api.cyclesPredict(info.model_id, instance, info.max_cycles);
      return { kind: "curve", curve };
    }
    const [predict, explain] = await Promise.all([
      this.api.predict(info.model_id, instance),
      this.api.explain(info.model_id, instance),
    ]);
    return { kind: "tree", predict, explain };
  }

  /** Form submit: the committed result both panels start from. */
  async submit(): Promise<void> {
    const instance = this.validatedInstance();
    if (instance === null) return;
    const seq = this.gate.issue();
    this.state.busy = true;
    this.render();
    try {
      const result = await this.queryResult(instance);
      if (!this.gate.tryApply("result", seq)) return;
      this.state.baseline = result;
      this.state.current = result;
      this.state.whatIf = null;
      this.state.error = null;
      this.state.busy = false;
      this.render();
    } catch (error) {
      if (this.gate.tryApply("result", seq)) this.fail(error);
    }
  }

  /** Live what-if edit: debounced re-query; only the newest response lands. */
  editWhatIf(feature: string, raw: string): void {
    this.setInput(feature, raw);
    if (this.cancelPending) this.cancelPending();
    this.cancelPending = this.schedule(() => {
      void this.refreshCurrent();
    }, this.debounceMs);
  }

  async refreshCurrent(): Promise<void> {
    const instance = this.validatedInstance();
    if (instance === null) return;
    const seq = this.gate.issue();
    try {
      const result = await this.queryResult(instance);
      if (!this.gate.tryApply("current", seq)) return;
      this.state.current = result;
      this.state.error = null;
      this.render();
    } catch (error) {
      if (this.gate.tryApply("current", seq)) this.fail(error);
    }
  }

  /** "Show me what to change": ask the service for the smallest label-flipping edit. */
  async suggestChanges(): Promise<void> {
    const info = this.state.modelInfo;
    if (!info || info.kind !== "tree" || !this.state.current) return;
    const instance = this.validatedInstance();
    if (instance === null) return;
    const current = this.state.current;
    if (current.kind !== "tree") return;
    const labels = info.schema.target.labels;
    const target = labels.find((l) => l !== current.predict.label) ?? labels[0];
    const seq = this.gate.issue();
    try {
      const suggestion = await this.api.whatIf(info.model_id, instance, target);
      if (!this.gate.tryApply("whatif", seq)) return;
      this.state.whatIf = suggestion;
      this.render();
    } catch (error) {
      if (this.gate.tryApply("whatif", seq)) this.fail(error);
    }
  }

  async addAttribute(raw: string): Promise<void> {
    const attribute = raw.trim();
    if (!attribute) return;
    const lowered = attribute.toLowerCase();
    if (!this.state.extraAttributes.some((a) => a.toLowerCase() === lowered)) {
      this.state.extraAttributes.push(attribute);
    }
    await this.refreshCoverage();
  }

  async removeAttribute(attribute: string): Promise<void> {
    this.state.extraAttributes = this.state.extraAttributes.filter((a) => a !== attribute);
    await this.refreshCoverage();
  }

  private async refreshCoverage(): Promise<void> {
    const modelId = this.state.modelId;
    if (!modelId) return;
    if (this.state.extraAttributes.length === 0) {
      this.state.coverage = null;
      this.render();
      return;
    }
    const seq = this.gate.issue();
    try {
      const coverage = await this.api.coverage(modelId, this.state.extraAttributes);
      if (!this.gate.tryApply("coverage", seq)) return;
      this.state.coverage = coverage;
      this.render();
    } catch (error) {
      if (this.gate.tryApply("coverage", seq)) this.fail(error);
    }
  }

  setFeedbackComment(comment: string): void {
    this.state.feedbackDraft.comment = comment;
  }

  setFeedbackRating(rating: number | null): void {
    this.state.feedbackDraft.understandability = rating;
  }

  setComprehensionAnswer(questionId: string, answer: string): void {
    this.state.feedbackDraft.comprehension[questionId] = answer;
  }

  /** Empty drafts are rejected locally; success clears the draft. */
  async submitFeedback(): Promise<void> {
    const modelId = this.state.modelId;
    if (!modelId) return;
    const draft = this.state.feedbackDraft;
    if (feedbackIsEmpty(draft)) {
      this.state.feedbackStatus = "invalid";
      this.render();
      return;
    }
    try {
      await this.api.submitFeedback({
        model_id: modelId,
        comment: draft.comment,
        understandability: draft.understandability,
        comprehension: Object.fromEntries(
          Object.entries(draft.comprehension).filter(([, v]) => v.trim() !== ""),
        ),
      });
      this.state.feedbackDraft = { comment: "", understandability: null, comprehension: {} };
      this.state.feedbackStatus = "sent";
    } catch {
      this.state.feedbackStatus = "failed";
    }
    this.render();
  }

  toggleConditional(show: boolean): void {
    this.state.showConditional = show;
    this.render();
  }
}
