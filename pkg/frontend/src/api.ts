/**
 * Typed client for the annotation service HTTP API.
 *
 * Every interface here mirrors a server payload one to one. The client
 * is deliberately thin: it never derives model quantities, it only
 * moves the server's numbers to the views that format them. All
 * endpoints except /api/health require the per-annotator token in the
 * X-Annotator-Token header; we send it everywhere, the server ignores
 * it where it is not needed.
 */

export interface InstancePayload {
  id: string;
  subtokens: string[];
  word_index: number[];
  is_word_initial: boolean[];
  words: string[];
}

export interface QueryScorePayload {
  strategy: string;
  score: number;
  evidence: Record<string, unknown>;
}

export interface SamplePayload {
  status: 'ok';
  round_index: number;
  theta_version: number;
  lease_expires_at: number;
  instance: InstancePayload;
  /** One tag per word; what the drop-downs start from. */
  suggested_word_tags: string[];
  /** One tag per subtoken; continuations carry the excluded sentinel. */
  suggested_tags: string[];
  /** Full tag set, excluded sentinel last; columns of token_marginals. */
  tag_set: string[];
  /** Tags a word may legally take; the correction drop-down lists exactly these. */
  decode_tags: string[];
  /** Row per subtoken over tag_set; rows sum to one. */
  token_marginals: number[][];
  /** One score per subtoken; a word's score repeats across its pieces. */
  saliency: number[];
  /** Subtoken position the explanation targets (always word-initial). */
  saliency_target: number;
  query_score: QueryScorePayload;
}

export type NextSampleResponse =
  | SamplePayload
  | { status: 'retraining' }
  | { status: 'round_drained' }
  | { status: 'stopped'; reason: string };

export interface FeedbackRequest {
  instance_id: string;
  final_tags: string[];
  rationale_spans: [number, number][];
  suggestion_theta_version: number;
  started_at?: number;
  comment?: string;
}

export interface FeedbackAck {
  status: 'accepted';
  instance_id: string;
  /** Word tags the annotator changed, counted by the server. */
  workload: number;
  stale: boolean;
  secondary: boolean;
  retraining_started: boolean;
}

export interface MetricsPayload {
  precision: number;
  recall: number;
  f1: number;
  true_positives: number;
  false_positives: number;
  false_negatives: number;
}

/** Joint human+model accuracy over the whole target corpus. */
export interface InclusivePayload {
  accuracy: number;
  human_tokens: number;
  model_tokens: number;
  model_correct: number;
  /** True when the model share comes from validation accuracy, not gold. */
  estimated: boolean;
}

export interface WorkloadPayload {
  per_instance: Record<string, number>;
  round_corrections: number;
  cumulative_corrections: number;
  per_instance_seconds?: Record<string, number>;
}

export interface RoundPayload {
  round_index: number;
  labeled_count: number;
  theta_version: number;
  queried_ids: string[];
  exclusive: MetricsPayload;
  inclusive: InclusivePayload;
  workload: WorkloadPayload;
  stop_reason: string | null;
}

export interface InspectionPayload {
  metric_mode: string;
  rounds: RoundPayload[];
}

export interface StoppingPayload {
  rule: string;
  status: string;
  reason: string | null;
}

export interface CurrentRoundPayload {
  open: boolean;
  round_index: number;
  submitted: number;
  batch: number;
  retraining: boolean;
}

export interface AnnotatorWorkload {
  instances: number;
  corrections: number;
  seconds: number;
}

export interface ConsistencyPayload {
  annotator_a: string;
  annotator_b: string;
  overlap_instances: number;
  raw_agreement: number;
  kappa: number;
}

export interface OverviewPayload {
  project_id: string;
  rounds_completed: number;
  rounds_budget: number;
  batch_size: number;
  instances_annotated: number;
  pool_remaining: number;
  estimated_remaining_instances: number;
  stopping: StoppingPayload;
  current_round: CurrentRoundPayload;
  per_annotator_workload: Record<string, AnnotatorWorkload>;
  /** Present only when at least two annotators have submitted. */
  consistency?: ConsistencyPayload[];
}

export interface HealthPayload {
  status: string;
  project_id: string;
}

export class ApiError extends Error {
  status: number;
  code: string;

  constructor(status: number, code: string, message: string) {
    super(message);
    this.name = 'ApiError';
    this.status = status;
    this.code = code;
  }
}

export type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

export class WorkbenchClient {
  baseUrl: string;
  token: string;
  private fetchFn: FetchLike;

  constructor(baseUrl: string, token: string, fetchFn?: FetchLike) {
    this.baseUrl = baseUrl.replace(/\/+$/, '');
    this.token = token;
    this.fetchFn = fetchFn ?? ((input, init) => fetch(input, init));
  }

  private async request<T>(method: string, path: string, body?: unknown): Promise<T> {
    const headers: Record<string, string> = { 'X-Annotator-Token': this.token };
    const init: RequestInit = { method, headers };
    if (body !== undefined) {
      headers['Content-Type'] = 'application/json';
      init.body = JSON.stringify(body);
    }
    let res: Response;
    try {
      res = await this.fetchFn(this.baseUrl + path, init);
    } catch (err) {
      throw new ApiError(0, 'unreachable', `cannot reach ${this.baseUrl || 'server'}: ${String(err)}`);
    }
    const data = await res.json().catch(() => null);
    if (!res.ok) {
      // service errors carry {error, message}; anything else gets a generic code
      const code = data && typeof data.error === 'string' ? data.error : `http_${res.status}`;
      const message = data && typeof data.message === 'string' ? data.message : res.statusText || 'request failed';
      throw new ApiError(res.status, code, message);
    }
    return data as T;
  }

  health(): Promise<HealthPayload> {
    return this.request('GET', '/api/health');
  }

  nextSample(): Promise<NextSampleResponse> {
    return this.request('GET', '/api/next-sample');
  }

  submitFeedback(feedback: FeedbackRequest): Promise<FeedbackAck> {
    return this.request('POST', '/api/submit-feedback', feedback);
  }

  modelInspection(): Promise<InspectionPayload> {
    return this.request('GET', '/api/model-inspection');
  }

  setMetricMode(mode: string): Promise<{ metric_mode: string }> {
    return this.request('POST', '/api/metric-mode', { metric_mode: mode });
  }

  taskOverview(): Promise<OverviewPayload> {
    return this.request('GET', '/api/task-overview');
  }

  save(): Promise<{ status: string }> {
    return this.request('POST', '/api/save');
  }

  exportAnnotations(): Promise<{ annotations: unknown[] }> {
    return this.request('GET', '/api/export-annotations');
  }
}
