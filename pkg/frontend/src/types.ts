// JSON shapes of the riskweave service. The UI never derives probabilities on
// its own; everything rendered below comes from these responses.

export type Instance = Record<string, string | number>;

export interface FeatureSpecJson {
  name: string;
  kind: "categorical" | "numeric";
  levels?: string[];
  unit?: string;
}

export interface SchemaJson {
  features: FeatureSpecJson[];
  target: { name: string; labels: [string, string]; positive: string };
}

export interface ModelSummary {
  model_id: string;
  kind: "tree" | "cycles";
  created_at: string;
  accuracy: number | null;
  train_size: number;
}

export interface ModelInfo extends ModelSummary {
  schema: SchemaJson;
  max_cycles?: number;
}

export interface PredictResponse {
  model_id: string;
  label: string;
  counts: Record<string, number>;
  samples: number;
  confidence_p: number;
  certainty_phrase: string;
  percent: string;
  frequency: string;
  path: { feature: string; op: string; value: string | number; branch: boolean }[];
}

export interface ExplainResponse {
  model_id: string;
  label: string;
  text: string;
  conditions: string[];
  certainty_phrase: string;
  samples: number;
  confidence_p: number;
  percent: string;
  frequency: string;
}

export interface WhatIfChange {
  feature: string;
  from: string | number;
  to: string | number;
}

export interface WhatIfResponse {
  model_id: string;
  possible: boolean;
  changes: WhatIfChange[] | null;
  new_label: string | null;
  new_confidence_p: number | null;
}

export interface CoverageResponse {
  model_id: string;
  modeled: string[];
  unmodeled: string[];
  caveat_text: string;
}

export interface CurveResponse {
  model_id: string;
  cycles: number[];
  conditional: number[];
  cumulative: number[];
  text: string;
  certainty_phrase: string;
  percent: string;
  frequency: string;
  samples: number;
}

export interface FeedbackEntry {
  model_id: string;
  comment: string;
  understandability: number | null;
  comprehension: Record<string, string>;
  demographics?: Record<string, string>;
}

export interface ComprehensionQuestion {
  id: string;
  prompt: string;
  options: string[];
}
