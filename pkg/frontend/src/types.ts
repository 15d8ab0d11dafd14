/** Wire shapes served by the inspection service (see docs/openapi.json). */

export interface TemplateView {
  version: number;
  provenance: string;
  sections: Record<string, string>;
}

export interface HistoryEntry {
  version: number;
  provenance: string;
}

export interface ProposalView {
  id: string;
  status: "pending" | "approved" | "rejected";
  rationale: string;
  base_version: number;
  /** proposed new body per section */
  proposed: Record<string, string>;
  /** current body of the same sections, for diffing */
  current: Record<string, string>;
}

export interface MetricsView {
  precision: number;
  recall: number;
  f1: number;
  degenerate: boolean;
}

export interface ConfusionView {
  tp: number;
  fp: number;
  fn: number;
  tn: number;
  unparseable: number;
}

export interface AblationRowView {
  config: string;
  cm: ConfusionView;
  metrics: MetricsView;
  input_tokens_total: number;
  output_tokens_mean: number;
  unparseable: number;
}

export interface RunProgress {
  evaluated: number;
  total: number;
}

export interface RunHandleView {
  run_id: string;
  status: "queued" | "running" | "done" | "failed";
  progress: RunProgress;
  configs: string[];
  mode: string;
  error: string | null;
  rows?: AblationRowView[];
}

export interface VerdictView {
  classification?: number;
  reasoning?: string;
  parse_failure?: string;
}

export interface RecordView {
  sample_id: string;
  config: string;
  truth: number;
  verdict: VerdictView;
  usage: { input_tokens: number; output_tokens: number };
  latency_ms: number;
  cache_hit: boolean;
  retried: boolean;
}

export type RecordFilter = "all" | "misclassified" | "unparseable";
