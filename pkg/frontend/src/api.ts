import type {
  CoverageResponse,
  CurveResponse,
  ExplainResponse,
  FeedbackEntry,
  Instance,
  ModelInfo,
  ModelSummary,
  PredictResponse,
  WhatIfResponse,
} from "./types.js";

export class ServiceError extends Error {
  readonly code: string;
  readonly status: number;

  constructor(status: number, code: string, detail: string) {
    super(detail || code);
    this.code = code;
    this.status = status;
  }
}

type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

/** Thin JSON client over the service endpoints; fetch is injectable for tests. */
export class ApiClient {
  constructor(
    private readonly baseUrl: string,
    private readonly fetchImpl: FetchLike = (url, init) => fetch(url, init),
  ) {}

  private async request<T>(method: string, path: string, body?: unknown): Promise<T> {
    const response = await this.fetchImpl(`${this.baseUrl}${path}`, {
      method,
      headers: body === undefined ? {} : { "Content-Type": "application/json" },
      body: body === undefined ? undefined : JSON.stringify(body),
    });
    const payload = await response.json().catch(() => ({}));
    if (!response.ok) {
      const code = typeof payload.error === "string" ? payload.error : "HttpError";
      const detail = typeof payload.detail === "string" ? payload.detail : response.statusText;
      throw new ServiceError(response.status, code, detail);
    }
    return payload as T;
  }

  listModels(): Promise<{ models: ModelSummary[] }> {
    return this.request("GET", "/models");
  }

  modelInfo(modelId: string): Promise<ModelInfo> {
    return this.request("GET", `/models/${encodeURIComponent(modelId)}`);
  }

  predict(modelId: string, instance: Instance): Promise<PredictResponse> {
    return this.request("POST", `/models/${encodeURIComponent(modelId)}/predict`, { instance });
  }

  explain(modelId: string, instance: Instance): Promise<ExplainResponse> {
    return this.request("POST", `/models/${encodeURIComponent(modelId)}/explain`, { instance });
  }

  whatIf(modelId: string, instance: Instance, targetLabel: string): Promise<WhatIfResponse> {
    return this.request("POST", `/models/${encodeURIComponent(modelId)}/whatif`, {
      instance,
      target_label: targetLabel,
    });
  }

  coverage(modelId: string, asserted: string[]): Promise<CoverageResponse> {
    return this.request("POST", `/models/${encodeURIComponent(modelId)}/coverage`, { asserted });
  }

  cyclesPredict(modelId: string, instance: Instance, nCycles?: number): Promise<CurveResponse> {
    return this.request("POST", `/cycles/${encodeURIComponent(modelId)}/predict`, {
      instance,
      n_cycles: nCycles ?? null,
    });
  }

  submitFeedback(entry: FeedbackEntry): Promise<{ status: string }> {
    return this.request("POST", "/feedback", entry);
  }
}
